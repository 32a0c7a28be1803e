#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ava/grad/ops.hpp"
#include "ava/tqr/config.hpp"

namespace ava::tqr {

using grad::Array;
using grad::Tape;
using grad::Var;
using TokenId = std::int32_t;

template <typename T>
struct Parameters {
  std::vector<std::string> names;
  std::vector<Array<T>> arrays;

  std::size_t add(std::string name, Array<T> value);
  std::size_t index(std::string_view name) const;
  std::size_t count() const noexcept { return arrays.size(); }
  std::size_t total_size() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

// Everything one forward pass produces for a single sequence of length L.
// q_values, reward_mean and reward_std are post-weighting; the *_raw fields
// hold the unweighted head outputs.
template <typename T>
struct TQROutput {
  std::size_t length = 0;
  Var<T> q_values;        // [L, V]
  Var<T> reward_mean;     // [L]
  Var<T> reward_std;      // [L]
  Var<T> reward_weights;  // [L]
  Var<T> q_values_raw;
  Var<T> reward_mean_raw;
  Var<T> reward_std_raw;
  Var<T> policy_logits;   // [L, V], tied to the token embedding
  std::vector<std::vector<Var<T>>> attention;  // [layer][head] -> [L, L]
};

// Detached copy of a TQROutput.
template <typename T>
struct TQRValues {
  Array<T> q_values, reward_mean, reward_std, reward_weights;
  Array<T> q_values_raw, reward_mean_raw, reward_std_raw, policy_logits;
  std::vector<std::vector<Array<T>>> attention;

  friend bool operator==(const TQRValues&, const TQRValues&) = default;
};

template <typename T>
TQRValues<T> values_of(const TQROutput<T>& out);

// Pre-norm decoder-only transformer with learned absolute positions, plus a
// Q-value head (theta), a Gaussian reward head (phi) and tied policy logits
// (w).
template <typename T>
class TQRModel {
 public:
  static constexpr T kSigmaFloor = T(1e-4);

  TQRModel(ModelConfig config, Parameters<T> params);

  // normal(0, 0.02) projections and embeddings, zero biases, unit LN gains.
  static TQRModel init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const Parameters<T>& parameters() const noexcept { return params_; }
  Parameters<T>& parameters() noexcept { return params_; }

  // Registers every parameter as a leaf on the tape, in parameter order.
  std::vector<Var<T>> bind(Tape<T>& tape, bool requires_grad = true) const;

  TQROutput<T> forward(Tape<T>& tape, std::span<const Var<T>> params,
                       std::span<const TokenId> ids) const;

  // Gradient-free forward for evaluation.
  TQRValues<T> evaluate(std::span<const TokenId> ids) const;

  // Replaces the Q head with a fresh normal(0, 0.02) projection.
  void reinit_q_head(std::uint64_t seed);

 private:
  struct LayerSlots {
    std::size_t ln1_g, ln1_b, w_qkv, b_qv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  void resolve_slots();

  ModelConfig config_;
  Parameters<T> params_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0;
  std::size_t q_w_ = 0, q_b_ = 0, r_w_ = 0, r_b_ = 0;
  std::vector<LayerSlots> layers_;
};

// Parameter names and shapes for a configuration, in canonical order.
std::vector<std::pair<std::string, grad::Shape>> parameter_layout(const ModelConfig& config);

}  // namespace ava::tqr
