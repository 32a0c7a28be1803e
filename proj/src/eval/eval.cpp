#include "ava/eval/eval.hpp"

#include <cmath>
#include <limits>

#include "ava/errors.hpp"
#include "ava/objectives/objectives.hpp"

namespace ava::eval {

std::string to_string(Scoring s) { return s == Scoring::last_step ? "last_step" : "return_sum"; }

Scoring parse_scoring(const std::string& name) {
  if (name == "last_step") return Scoring::last_step;
  if (name == "return_sum") return Scoring::return_sum;
  throw ConfigError("unknown scoring '" + name + "'");
}

std::string to_string(PolicySource s) { return s == PolicySource::boltzmann ? "boltzmann" : "policy"; }

PolicySource parse_policy_source(const std::string& name) {
  if (name == "boltzmann") return PolicySource::boltzmann;
  if (name == "policy") return PolicySource::policy;
  throw ConfigError("unknown policy source '" + name + "'");
}

template <typename T>
Scorer model_scorer(const TQRModel<T>& model, Scoring scoring) {
  return [&model, scoring](const TokenSequence& seq) {
    const auto v = model.evaluate(seq.ids);
    if (scoring == Scoring::last_step) return static_cast<double>(v.reward_mean[seq.length() - 1]);
    return static_cast<double>(objectives::expected_return(v, seq));
  };
}

nlohmann::json to_json(const AccuracyResult& r) {
  return {{"accuracy", r.accuracy}, {"correct", r.correct}, {"ties", r.ties}, {"total", r.total}};
}

AccuracyResult reward_accuracy(const Scorer& scorer, std::span<const SequencePair> pairs) {
  if (pairs.empty()) throw DomainError("reward_accuracy: empty dataset");
  AccuracyResult r;
  r.total = pairs.size();
  for (const auto& p : pairs) {
    const double a = scorer(p.chosen), b = scorer(p.rejected);
    if (a > b) ++r.correct;
    else if (a == b) ++r.ties;
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

template <typename T>
AccuracyResult reward_accuracy(const TQRModel<T>& model, std::span<const SequencePair> pairs, Scoring scoring) {
  return reward_accuracy(model_scorer(model, scoring), pairs);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-probabilities of the next token from one output row; PAD and BOS are
// excluded.
template <typename T>
std::vector<double> row_log_probs(const tqr::TQRValues<T>& v, std::size_t row, const tqr::ModelConfig& cfg,
                                  PolicySource source, double temperature) {
  const auto& m = source == PolicySource::boltzmann ? v.q_values_raw : v.policy_logits;
  const double factor = (source == PolicySource::boltzmann ? cfg.beta : 1.0) / temperature;
  const std::size_t V = m.cols();
  std::vector<double> logits(V, kNegInf);
  double top = kNegInf;
  for (std::size_t j = data::kEos; j < V; ++j) {
    logits[j] = factor * static_cast<double>(m.at(row, j));
    top = std::max(top, logits[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < V; ++j) {
    if (logits[j] != kNegInf) z += std::exp(logits[j] - top);
  }
  const double log_z = top + std::log(z);
  for (auto& l : logits) {
    if (l != kNegInf) l -= log_z;
  }
  return logits;
}

}  // namespace

template <typename T>
std::vector<double> next_token_distribution(const TQRModel<T>& model, std::span<const TokenId> prefix,
                                            const SampleOptions& options) {
  if (!(options.temperature > 0.0)) throw DomainError("temperature must be positive");
  const auto v = model.evaluate(prefix);
  auto lp = row_log_probs(v, prefix.size() - 1, model.config(), options.source, options.temperature);
  for (auto& x : lp) x = x == kNegInf ? 0.0 : std::exp(x);
  return lp;
}

std::size_t draw_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last = i;
    if (u < cum) return i;
  }
  return last;
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

template <typename T>
std::vector<TokenId> sample_ids(const TQRModel<T>& model, std::span<const TokenId> prompt_ids,
                                const SampleOptions& options, Rng& rng) {
  if (prompt_ids.empty() || prompt_ids.front() != data::kBos) throw DomainError("prompt must start with BOS");
  std::vector<TokenId> ctx(prompt_ids.begin(), prompt_ids.end());
  std::vector<TokenId> out;
  // One slot stays free so the scored sequence can always end with EOS.
  while (out.size() < options.max_len && ctx.size() + 1 < model.config().max_seq_len) {
    TokenId next;
    if (options.greedy) {
      const auto v = model.evaluate(ctx);
      const auto lp = row_log_probs(v, ctx.size() - 1, model.config(), options.source, 1.0);
      next = static_cast<TokenId>(argmax_first(lp));
    } else {
      const auto probs = next_token_distribution(model, std::span<const TokenId>(ctx), options);
      next = static_cast<TokenId>(draw_index(probs, rng));
    }
    out.push_back(next);
    ctx.push_back(next);
    if (next == data::kEos) break;
  }
  return out;
}

template <typename T>
std::string sample(const TQRModel<T>& model, const data::Vocabulary& vocab, std::string_view prompt,
                   const SampleOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  const auto prompt_ids = data::tokenize_prompt(prompt, vocab);
  const auto ids = sample_ids(model, std::span<const TokenId>(prompt_ids), options, rng);
  return data::decode_ids(ids, vocab);
}

template <typename T>
BestOfN best_of_n(const TQRModel<T>& policy, const Scorer& reward, const data::Vocabulary& vocab,
                  std::string_view prompt, std::size_t n, const SampleOptions& options, std::uint64_t seed) {
  if (n == 0) throw DomainError("best_of_n requires n >= 1");
  Rng rng(seed);
  const auto prompt_ids = data::tokenize_prompt(prompt, vocab);
  BestOfN r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ids = sample_ids(policy, std::span<const TokenId>(prompt_ids), options, rng);
    r.candidates.push_back(data::decode_ids(ids, vocab));
    r.scores.push_back(reward(data::tokenize(prompt, r.candidates.back(), vocab)));
  }
  r.index = argmax_first(r.scores);
  r.text = r.candidates[r.index];
  return r;
}

nlohmann::json to_json(const WinRates& r) {
  return {{"wins", r.wins},         {"ties", r.ties},         {"losses", r.losses},
          {"total", r.total},       {"win_rate", r.win_rate}, {"tie_rate", r.tie_rate},
          {"lose_rate", r.lose_rate}, {"margin", r.margin()}};
}

WinRates judge_win_rates(std::span<const std::string> prompts, std::span<const std::string> a,
                         std::span<const std::string> b, data::Rule rule) {
  if (a.size() != b.size() || prompts.size() != a.size()) {
    throw DomainError("judge_win_rates: candidate lists differ in length");
  }
  WinRates r;
  r.total = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    switch (data::judge(rule, prompts[i], a[i], b[i])) {
      case data::Verdict::win: ++r.wins; break;
      case data::Verdict::tie: ++r.ties; break;
      case data::Verdict::lose: ++r.losses; break;
    }
  }
  if (r.total > 0) {
    const double n = static_cast<double>(r.total);
    r.win_rate = 100.0 * static_cast<double>(r.wins) / n;
    r.tie_rate = 100.0 * static_cast<double>(r.ties) / n;
    r.lose_rate = 100.0 * static_cast<double>(r.losses) / n;
  }
  return r;
}

template <typename T>
double mean_nll(const TQRModel<T>& model, std::span<const TokenSequence> seqs, PolicySource source) {
  if (seqs.empty()) throw DomainError("mean_nll: empty dataset");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : seqs) {
    const auto v = model.evaluate(seq.ids);
    for (std::size_t k = seq.response_start; k < seq.length(); ++k) {
      const auto lp = row_log_probs(v, k - 1, model.config(), source, 1.0);
      total -= lp[static_cast<std::size_t>(seq.ids[k])];
      ++tokens;
    }
  }
  return total / static_cast<double>(tokens);
}

#define AVA_INSTANTIATE_EVAL(T)                                                                             \
  template Scorer model_scorer(const TQRModel<T>&, Scoring);                                                \
  template AccuracyResult reward_accuracy(const TQRModel<T>&, std::span<const SequencePair>, Scoring);      \
  template std::vector<double> next_token_distribution(const TQRModel<T>&, std::span<const TokenId>,        \
                                                       const SampleOptions&);                               \
  template std::vector<TokenId> sample_ids(const TQRModel<T>&, std::span<const TokenId>, const SampleOptions&, \
                                           Rng&);                                                           \
  template std::string sample(const TQRModel<T>&, const data::Vocabulary&, std::string_view,                \
                              const SampleOptions&, std::uint64_t);                                         \
  template BestOfN best_of_n(const TQRModel<T>&, const Scorer&, const data::Vocabulary&, std::string_view,  \
                             std::size_t, const SampleOptions&, std::uint64_t);                             \
  template double mean_nll(const TQRModel<T>&, std::span<const TokenSequence>, PolicySource);

AVA_INSTANTIATE_EVAL(float)
AVA_INSTANTIATE_EVAL(double)

}  // namespace ava::eval
