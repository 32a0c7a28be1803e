#pragma once

// Training objectives, all returned as losses (negated objectives) normalized
// by the number of counted response steps.
//
// Step convention for a sequence ids[0..L-1] (ids[0] = BOS): step k takes
// action ids[k] from the state ids[0..k-1], for k = response_start .. L-2.
//   Q(s, a)    = q_values[k-1][ids[k]]
//   Q(s', a')  = q_values[k][ids[k+1]]
//   delta_k    = Q(s, a) - gamma * Q(s', a')
//   (mu, sigma) of the reached state are taken at position k.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ava/data/vocab.hpp"
#include "ava/tqr/model.hpp"

namespace ava::objectives {

using data::SequencePair;
using data::TokenSequence;
using grad::Tape;
using grad::Var;
using tqr::TQRModel;
using tqr::TQROutput;
using tqr::TQRValues;

enum class PairTermScope { both, chosen_only };

std::string to_string(PairTermScope scope);
PairTermScope parse_pair_term_scope(const std::string& name);

struct Ablations {
  bool no_rwt = false;  // disable reward weighting
  bool no_neg = false;  // drop the rejected-sequence likelihood term
  bool no_irl = false;  // keep only likelihood terms
  bool no_cer = false;  // skip the contrastive expected-return term
  bool no_ptq = false;  // fresh Q head instead of the policy-derived Q

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct ObjectiveConfig {
  double gamma = 0.99;
  double lambda_pen = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  Ablations ablations;
  PairTermScope pair_term_scope = PairTermScope::both;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ObjectiveConfig& config);
ObjectiveConfig objective_config_from_json(const nlohmann::json& j, ObjectiveConfig base = {});

struct SequenceDiagnostics {
  double likelihood = 0.0;  // sum of beta * log B over counted steps
  double kl = 0.0;
  double td = 0.0;          // sum of Gaussian log-densities of delta
  std::size_t steps = 0;
};

// Components are step-normalized. For the AVA losses
//   total = -(likelihood_term - kl_term + lambda * td_term);
// for CER, Bradley-Terry and SFT, total = cer_term or the single loss value.
struct ObjectiveBreakdown {
  double total = 0.0;
  double likelihood_term = 0.0;
  double kl_term = 0.0;
  double td_term = 0.0;
  double cer_term = 0.0;
  std::size_t steps = 0;
  std::vector<SequenceDiagnostics> per_sequence;
  // Per-pair logistic values for CER and Bradley-Terry.
  std::vector<double> per_pair;
};

nlohmann::json to_json(const ObjectiveBreakdown& b);

template <typename T>
struct Loss {
  Var<T> value;
  ObjectiveBreakdown breakdown;
};

// One forward pass per sequence, on the given bound parameters.
template <typename T>
std::vector<TQROutput<T>> forward_all(const TQRModel<T>& model, Tape<T>& tape, std::span<const Var<T>> params,
                                      std::span<const TokenSequence> seqs);

// delta_k for every counted step, from post-weighting Q values.
template <typename T>
Var<T> td_error(const TQROutput<T>& out, const TokenSequence& seq, T gamma);
template <typename T>
std::vector<T> td_error(const TQRValues<T>& values, const TokenSequence& seq, T gamma);

// The same quantity rebuilt from the policy logits and reward weights:
//   w_{k-1} log softmax(alpha pi_{k-1})[ids[k]] - gamma w_k log softmax(alpha pi_k)[ids[k+1]],
// i.e. the log of a ratio of mapped probabilities. Only meaningful when Q
// comes from the policy; alpha and the weighting flags come from `model`.
template <typename T>
std::vector<T> td_error_log_ratio(const TQRValues<T>& values, const TokenSequence& seq,
                                  const tqr::ModelConfig& model, T gamma);

template <typename T>
Loss<T> ava_d_loss(std::span<const TQROutput<T>> outs, std::span<const TokenSequence> seqs,
                   const ObjectiveConfig& config);

template <typename T>
Loss<T> ava_p_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected,
                   std::span<const SequencePair> pairs, const ObjectiveConfig& config);

// -(1/N) sum sigmoid(mu_last(y+) - mu_last(y-)) on weighted means.
template <typename T>
Loss<T> cer_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected);

// -(1/N) sum log sigmoid(r(y+) - r(y-)) with r the unweighted final mean.
template <typename T>
Loss<T> bradley_terry_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected);

// Next-token cross-entropy of the tied policy over response tokens
// (including EOS), averaged per token.
template <typename T>
Loss<T> sft_loss(std::span<const TQROutput<T>> outs, std::span<const TokenSequence> seqs);

// Sum of reward means over response positions response_start .. L-1.
template <typename T>
T expected_return(const TQRValues<T>& values, const TokenSequence& seq);
template <typename T>
T expected_return(const TQRModel<T>& model, const TokenSequence& seq);

// Convenience wrappers that run the forward passes on a fresh tape.
template <typename T>
ObjectiveBreakdown evaluate_ava_d(const TQRModel<T>& model, std::span<const TokenSequence> seqs,
                                  const ObjectiveConfig& config);
template <typename T>
ObjectiveBreakdown evaluate_ava_p(const TQRModel<T>& model, std::span<const SequencePair> pairs,
                                  const ObjectiveConfig& config);

}  // namespace ava::objectives
