#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ava/data/synthetic.hpp"
#include "ava/data/vocab.hpp"
#include "ava/rng.hpp"
#include "ava/tqr/model.hpp"

namespace ava::eval {

using data::SequencePair;
using data::TokenId;
using data::TokenSequence;
using tqr::TQRModel;

// How a reward model scores a whole sequence: the final-position reward mean,
// or the expected return summed over response positions.
enum class Scoring { last_step, return_sum };

std::string to_string(Scoring s);
Scoring parse_scoring(const std::string& name);

using Scorer = std::function<double(const TokenSequence&)>;

template <typename T>
Scorer model_scorer(const TQRModel<T>& model, Scoring scoring);

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  std::size_t total = 0;
};

nlohmann::json to_json(const AccuracyResult& r);

// Fraction of pairs with score(chosen) > score(rejected). Ties are failures
// and are counted separately. Throws DomainError on an empty dataset.
AccuracyResult reward_accuracy(const Scorer& scorer, std::span<const SequencePair> pairs);

template <typename T>
AccuracyResult reward_accuracy(const TQRModel<T>& model, std::span<const SequencePair> pairs,
                               Scoring scoring = Scoring::last_step);

// Which distribution generates tokens: the Boltzmann policy over the
// unweighted Q row, or the tied policy logits directly.
enum class PolicySource { boltzmann, policy };

std::string to_string(PolicySource s);
PolicySource parse_policy_source(const std::string& name);

struct SampleOptions {
  std::size_t max_len = 16;  // response tokens, EOS included
  double temperature = 1.0;
  bool greedy = false;
  PolicySource source = PolicySource::boltzmann;
};

// Next-token distribution after `prefix`. PAD and BOS get probability zero.
// Boltzmann rows use beta / temperature; policy rows use logits / temperature.
template <typename T>
std::vector<double> next_token_distribution(const TQRModel<T>& model, std::span<const TokenId> prefix,
                                            const SampleOptions& options);

// Draws a categorical index from probabilities using one uniform variate.
std::size_t draw_index(std::span<const double> probs, Rng& rng);

// Response ids after the prompt; ends with EOS unless max_len or the model's
// context was reached first.
template <typename T>
std::vector<TokenId> sample_ids(const TQRModel<T>& model, std::span<const TokenId> prompt_ids,
                                const SampleOptions& options, Rng& rng);

template <typename T>
std::string sample(const TQRModel<T>& model, const data::Vocabulary& vocab, std::string_view prompt,
                   const SampleOptions& options, std::uint64_t seed);

struct BestOfN {
  std::string text;
  std::size_t index = 0;
  std::vector<std::string> candidates;
  std::vector<double> scores;
};

// n draws from a single RNG stream seeded by `seed`; the highest-scoring
// candidate wins, earliest index on ties. The scorer sees tokenize(prompt,
// candidate).
template <typename T>
BestOfN best_of_n(const TQRModel<T>& policy, const Scorer& reward, const data::Vocabulary& vocab,
                  std::string_view prompt, std::size_t n, const SampleOptions& options, std::uint64_t seed);

// Index of the best score, earliest on ties.
std::size_t argmax_first(std::span<const double> scores);

struct WinRates {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::size_t total = 0;
  double win_rate = 0.0;  // percentages
  double tie_rate = 0.0;
  double lose_rate = 0.0;
  double margin() const { return win_rate - lose_rate; }
};

nlohmann::json to_json(const WinRates& r);

// Candidate a against candidate b per prompt under the rule's judge.
WinRates judge_win_rates(std::span<const std::string> prompts, std::span<const std::string> a,
                         std::span<const std::string> b, data::Rule rule);

// Mean per-token negative log-likelihood of response tokens (EOS included).
template <typename T>
double mean_nll(const TQRModel<T>& model, std::span<const TokenSequence> seqs, PolicySource source);

template <typename T>
double perplexity(const TQRModel<T>& model, std::span<const TokenSequence> seqs, PolicySource source) {
  return std::exp(mean_nll(model, seqs, source));
}

}  // namespace ava::eval
