#include "ava/tqr/config.hpp"

#include "ava/errors.hpp"

namespace ava::tqr {

std::string to_string(QMode mode) { return mode == QMode::head ? "head" : "policy_logits"; }

QMode parse_q_mode(const std::string& name) {
  if (name == "head") return QMode::head;
  if (name == "policy_logits") return QMode::policy_logits;
  throw ConfigError("unknown q_mode '" + name + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < 4) throw ConfigError("vocab_size must be at least 4 (PAD, BOS, EOS + 1 token)");
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || max_seq_len == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const {
  return vocab_size == o.vocab_size && d_model == o.d_model && n_layers == o.n_layers &&
         n_heads == o.n_heads && max_seq_len == o.max_seq_len;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"max_seq_len", c.max_seq_len},
          {"q_mode", to_string(c.q_mode)},
          {"reward_weighting", c.reward_weighting},
          {"weight_mu_only", c.weight_mu_only},
          {"alpha", c.alpha},
          {"beta", c.beta}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "vocab_size") c.vocab_size = value.get<std::size_t>();
      else if (key == "d_model") c.d_model = value.get<std::size_t>();
      else if (key == "n_layers") c.n_layers = value.get<std::size_t>();
      else if (key == "n_heads") c.n_heads = value.get<std::size_t>();
      else if (key == "max_seq_len") c.max_seq_len = value.get<std::size_t>();
      else if (key == "q_mode") c.q_mode = parse_q_mode(value.get<std::string>());
      else if (key == "reward_weighting") c.reward_weighting = value.get<bool>();
      else if (key == "weight_mu_only") c.weight_mu_only = value.get<bool>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else throw ConfigError("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace ava::tqr
