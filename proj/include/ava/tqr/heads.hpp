#pragma once

// Plain-value versions of the TQR head mappings. The model's forward pass
// builds the same quantities from differentiable ops.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ava/errors.hpp"
#include "ava/grad/array.hpp"
#include "ava/grad/numeric.hpp"

namespace ava::tqr {

// w_t = (1/|y|) * sum_i A[i, t] for a causal attention matrix A (already
// averaged over heads). Rows must be distributions over positions <= i.
template <typename T>
std::vector<T> reward_weights(const grad::Array<T>& attention, std::size_t length) {
  if (attention.rank() != 2 || attention.rows() < length || attention.cols() < length || length == 0) {
    throw ShapeError("reward_weights: attention must be at least [length, length]");
  }
  const std::size_t c = attention.cols();
  std::vector<T> w(length, T{0});
  for (std::size_t i = 0; i < length; ++i) {
    T row_sum{0};
    for (std::size_t j = 0; j < length; ++j) {
      const T a = attention[i * c + j];
      if (a < T{0} || (j > i && a != T{0})) {
        throw DomainError("reward_weights: row " + std::to_string(i) + " is not a causal distribution");
      }
      row_sum += a;
      w[j] += a;
    }
    if (std::abs(static_cast<double>(row_sum) - 1.0) > 1e-5) {
      throw DomainError("reward_weights: row " + std::to_string(i) + " sums to " +
                        std::to_string(static_cast<double>(row_sum)));
    }
  }
  for (auto& v : w) v /= static_cast<T>(length);
  return w;
}

// Averages per-head attention maps and applies reward_weights.
template <typename T>
std::vector<T> reward_weights(const std::vector<grad::Array<T>>& heads, std::size_t length) {
  if (heads.empty()) throw ShapeError("reward_weights: no attention heads");
  grad::Array<T> avg(heads.front().shape);
  for (const auto& h : heads) {
    if (h.shape != avg.shape) throw ShapeError("reward_weights: head shapes differ");
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += h[i];
  }
  for (auto& v : avg.data) v /= static_cast<T>(heads.size());
  return reward_weights(avg, length);
}

// Q(s, v) = log_softmax(alpha * pi(.|s))[v], applied to probabilities (not
// logits) exactly as the mapping is defined.
template <typename T>
std::vector<T> q_from_policy(std::span<const T> policy_probs, T alpha) {
  if (policy_probs.empty()) throw ShapeError("q_from_policy: empty row");
  T total{0};
  for (T p : policy_probs) {
    if (p < T{0}) throw DomainError("q_from_policy: negative probability");
    total += p;
  }
  if (std::abs(static_cast<double>(total) - 1.0) > 1e-4) {
    throw DomainError("q_from_policy: row sums to " + std::to_string(static_cast<double>(total)));
  }
  std::vector<T> scaled(policy_probs.begin(), policy_probs.end());
  for (auto& v : scaled) v *= alpha;
  return grad::log_softmax(scaled);
}

template <typename T>
grad::Array<T> q_from_policy(const grad::Array<T>& probs, T alpha) {
  if (probs.rank() != 2) throw ShapeError("q_from_policy: expected [positions, vocab]");
  grad::Array<T> out(probs.shape);
  const std::size_t c = probs.cols();
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = q_from_policy<T>(std::span<const T>(probs.data.data() + r * c, c), alpha);
    std::copy(row.begin(), row.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return out;
}

// B(a|s) = softmax(beta * Q(s, .)).
template <typename T>
std::vector<T> boltzmann_policy(std::span<const T> q_row, T beta) {
  if (!(beta > T{0})) throw DomainError("boltzmann_policy: beta must be positive");
  std::vector<T> scaled(q_row.begin(), q_row.end());
  for (auto& v : scaled) v *= beta;
  return grad::softmax(scaled);
}

template <typename T>
std::vector<T> boltzmann_policy(const std::vector<T>& q_row, T beta) {
  return boltzmann_policy(std::span<const T>(q_row), beta);
}

}  // namespace ava::tqr
