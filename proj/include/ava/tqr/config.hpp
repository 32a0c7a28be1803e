#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

namespace ava::tqr {

// Where Q-values come from: a dedicated projection of the last hidden state,
// or the log-softmax of alpha-scaled policy probabilities.
enum class QMode { head, policy_logits };

std::string to_string(QMode mode);
QMode parse_q_mode(const std::string& name);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t max_seq_len = 32;
  QMode q_mode = QMode::policy_logits;
  // Scale per-position head outputs by attention-derived weights.
  bool reward_weighting = true;
  // Restrict the weighting to the reward mean (sigma and Q stay unweighted).
  bool weight_mu_only = false;
  // Temperature of the policy-to-Q mapping.
  double alpha = 1.0;
  // Boltzmann inverse temperature.
  double beta = 1.0;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t d_ff() const { return 4 * d_model; }

  // Throws ConfigError.
  void validate() const;

  // Fields that fix parameter shapes.
  bool same_architecture(const ModelConfig& other) const;
};

nlohmann::json to_json(const ModelConfig& config);
// Missing fields keep their defaults; unknown fields raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

}  // namespace ava::tqr
