#include "ava/objectives/objectives.hpp"

#include <cmath>

#include "ava/errors.hpp"
#include "ava/grad/numeric.hpp"

namespace ava::objectives {

using grad::Array;
using grad::Shape;
using Index = std::pair<std::size_t, std::size_t>;

std::string to_string(PairTermScope scope) { return scope == PairTermScope::both ? "both" : "chosen_only"; }

PairTermScope parse_pair_term_scope(const std::string& name) {
  if (name == "both") return PairTermScope::both;
  if (name == "chosen_only") return PairTermScope::chosen_only;
  throw ConfigError("unknown pair_term_scope '" + name + "'");
}

void ObjectiveConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(lambda_pen >= 0.0)) throw ConfigError("lambda_pen must be non-negative");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
}

nlohmann::json to_json(const ObjectiveConfig& c) {
  return {{"gamma", c.gamma},
          {"lambda_pen", c.lambda_pen},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"no_rwt", c.ablations.no_rwt},
          {"no_neg", c.ablations.no_neg},
          {"no_irl", c.ablations.no_irl},
          {"no_cer", c.ablations.no_cer},
          {"no_ptq", c.ablations.no_ptq},
          {"pair_term_scope", to_string(c.pair_term_scope)}};
}

ObjectiveConfig objective_config_from_json(const nlohmann::json& j, ObjectiveConfig c) {
  if (!j.is_object()) throw ConfigError("objective config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "lambda_pen") c.lambda_pen = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "no_rwt") c.ablations.no_rwt = value.get<bool>();
      else if (key == "no_neg") c.ablations.no_neg = value.get<bool>();
      else if (key == "no_irl") c.ablations.no_irl = value.get<bool>();
      else if (key == "no_cer") c.ablations.no_cer = value.get<bool>();
      else if (key == "no_ptq") c.ablations.no_ptq = value.get<bool>();
      else if (key == "pair_term_scope") c.pair_term_scope = parse_pair_term_scope(value.get<std::string>());
      else throw ConfigError("unknown objective config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("objective config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const ObjectiveBreakdown& b) {
  return {{"total", b.total},           {"likelihood_term", b.likelihood_term},
          {"kl_term", b.kl_term},       {"td_term", b.td_term},
          {"cer_term", b.cer_term},     {"steps", b.steps}};
}

template <typename T>
std::vector<TQROutput<T>> forward_all(const TQRModel<T>& model, Tape<T>& tape, std::span<const Var<T>> params,
                                      std::span<const TokenSequence> seqs) {
  std::vector<TQROutput<T>> outs;
  outs.reserve(seqs.size());
  for (const auto& s : seqs) outs.push_back(model.forward(tape, params, s.ids));
  return outs;
}

namespace {

struct Steps {
  std::vector<Index> taken;  // (k-1, ids[k])
  std::vector<Index> next;   // (k, ids[k+1])
  std::size_t first = 0;     // k of the first step
  std::size_t count() const { return taken.size(); }
};

Steps counted_steps(const TokenSequence& seq) {
  const std::size_t L = seq.length();
  if (L < 3 || seq.response_start == 0 || seq.response_start + 1 >= L) {
    throw SequenceTooShortError("sequence of length " + std::to_string(L) + " with response_start " +
                                std::to_string(seq.response_start) + " has no TD step");
  }
  Steps s;
  s.first = seq.response_start;
  for (std::size_t k = seq.response_start; k + 1 < L; ++k) {
    s.taken.emplace_back(k - 1, static_cast<std::size_t>(seq.ids[k]));
    s.next.emplace_back(k, static_cast<std::size_t>(seq.ids[k + 1]));
  }
  return s;
}

template <typename T>
void check_output(const TQROutput<T>& out, const TokenSequence& seq) {
  if (out.length != seq.length()) throw ShapeError("model output length does not match its sequence");
}

template <typename T>
Var<T> accumulate(const Var<T>& acc, const Var<T>& v) {
  return acc.valid() ? grad::add(acc, v) : v;
}

// Summed terms over a group of sequences. kl and td stay invalid when the
// IRL terms are not requested.
template <typename T>
struct GroupSums {
  Var<T> lik, kl, td;
  std::size_t steps = 0;
  std::vector<SequenceDiagnostics> diagnostics;
};

template <typename T>
GroupSums<T> group_sums(std::span<const TQROutput<T>> outs, std::span<const TokenSequence> seqs,
                        const ObjectiveConfig& cfg, bool with_lik, bool with_irl) {
  using namespace grad;
  if (outs.size() != seqs.size()) throw ShapeError("outputs and sequences differ in count");
  const T beta = static_cast<T>(cfg.beta), gamma = static_cast<T>(cfg.gamma);
  GroupSums<T> g;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const TokenSequence& seq = seqs[i];
    data::validate_training_sequence(seq, i);
    check_output(outs[i], seq);
    const Steps st = counted_steps(seq);
    const TQROutput<T>& o = outs[i];
    SequenceDiagnostics diag;
    diag.steps = st.count();
    if (with_lik) {
      Var<T> log_b = log_softmax_rows(scale(o.q_values, beta));
      Var<T> lik = scale(sum(gather_elements(log_b, std::span<const Index>(st.taken))), beta);
      diag.likelihood = static_cast<double>(lik.item());
      g.lik = accumulate(g.lik, lik);
    }
    if (with_irl) {
      Var<T> delta = sub(gather_elements(o.q_values, std::span<const Index>(st.taken)),
                         scale(gather_elements(o.q_values, std::span<const Index>(st.next)), gamma));
      Var<T> mu = slice(o.reward_mean, st.first, st.count());
      Var<T> sigma = slice(o.reward_std, st.first, st.count());
      Var<T> kl = sum(gaussian_kl_to_std_normal(mu, sigma));
      Var<T> td = sum(gaussian_log_pdf(delta, mu, sigma));
      diag.kl = static_cast<double>(kl.item());
      diag.td = static_cast<double>(td.item());
      g.kl = accumulate(g.kl, kl);
      g.td = accumulate(g.td, td);
    }
    g.steps += st.count();
    g.diagnostics.push_back(diag);
  }
  return g;
}

// lik - kl + lambda * td, or lik alone without IRL terms.
template <typename T>
Var<T> combine(const GroupSums<T>& g, T lambda) {
  if (!g.kl.valid()) return g.lik;
  return grad::add(grad::sub(g.lik, g.kl), grad::scale(g.td, lambda));
}

template <typename T>
Var<T> irl_only(const GroupSums<T>& g, T lambda) {
  return grad::sub(grad::scale(g.td, lambda), g.kl);
}

template <typename T>
double value(const Var<T>& v) {
  return v.valid() ? static_cast<double>(v.item()) : 0.0;
}

void require_pairs(std::size_t a, std::size_t b) {
  if (a == 0) throw DomainError("empty batch");
  if (a != b) throw ShapeError("chosen and rejected batches differ in size");
}

template <typename T>
Var<T> last_mean(const Var<T>& means) {
  return grad::slice(means, means.value().size() - 1, 1);
}

}  // namespace

template <typename T>
Var<T> td_error(const TQROutput<T>& out, const TokenSequence& seq, T gamma) {
  check_output(out, seq);
  const Steps st = counted_steps(seq);
  return grad::sub(grad::gather_elements(out.q_values, std::span<const Index>(st.taken)),
                   grad::scale(grad::gather_elements(out.q_values, std::span<const Index>(st.next)), gamma));
}

template <typename T>
std::vector<T> td_error(const TQRValues<T>& v, const TokenSequence& seq, T gamma) {
  const Steps st = counted_steps(seq);
  if (v.q_values.rows() != seq.length()) throw ShapeError("model output length does not match its sequence");
  std::vector<T> delta(st.count());
  for (std::size_t j = 0; j < st.count(); ++j) {
    delta[j] = v.q_values.at(st.taken[j].first, st.taken[j].second) -
               gamma * v.q_values.at(st.next[j].first, st.next[j].second);
  }
  return delta;
}

template <typename T>
std::vector<T> td_error_log_ratio(const TQRValues<T>& v, const TokenSequence& seq, const tqr::ModelConfig& model,
                                  T gamma) {
  const Steps st = counted_steps(seq);
  const std::size_t V = v.policy_logits.cols();
  if (v.policy_logits.rows() != seq.length()) throw ShapeError("model output length does not match its sequence");
  const bool weighted = model.reward_weighting && !model.weight_mu_only;
  const T alpha = static_cast<T>(model.alpha);
  auto mapped = [&](std::size_t row, std::size_t token) {
    std::vector<T> logits(v.policy_logits.data.begin() + static_cast<std::ptrdiff_t>(row * V),
                          v.policy_logits.data.begin() + static_cast<std::ptrdiff_t>((row + 1) * V));
    std::vector<T> scaled = grad::softmax(logits);
    for (auto& p : scaled) p *= alpha;
    const T q = grad::log_softmax(scaled)[token];
    return weighted ? v.reward_weights[row] * q : q;
  };
  std::vector<T> delta(st.count());
  for (std::size_t j = 0; j < st.count(); ++j) {
    delta[j] = mapped(st.taken[j].first, st.taken[j].second) - gamma * mapped(st.next[j].first, st.next[j].second);
  }
  return delta;
}

template <typename T>
Loss<T> ava_d_loss(std::span<const TQROutput<T>> outs, std::span<const TokenSequence> seqs,
                   const ObjectiveConfig& cfg) {
  if (seqs.empty()) throw DomainError("empty batch");
  const bool irl = !cfg.ablations.no_irl;
  const T lambda = static_cast<T>(cfg.lambda_pen);
  GroupSums<T> g = group_sums(outs, seqs, cfg, true, irl);
  const T inv_n = T{1} / static_cast<T>(g.steps);
  Loss<T> loss;
  loss.value = grad::scale(grad::scale(combine(g, lambda), inv_n), T{-1});
  auto& b = loss.breakdown;
  b.total = value(loss.value);
  b.likelihood_term = value(g.lik) / static_cast<double>(g.steps);
  b.kl_term = value(g.kl) / static_cast<double>(g.steps);
  b.td_term = value(g.td) / static_cast<double>(g.steps);
  b.steps = g.steps;
  b.per_sequence = std::move(g.diagnostics);
  return loss;
}

template <typename T>
Loss<T> ava_p_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected,
                   std::span<const SequencePair> pairs, const ObjectiveConfig& cfg) {
  require_pairs(pairs.size(), chosen.size());
  require_pairs(pairs.size(), rejected.size());
  const bool irl = !cfg.ablations.no_irl;
  const bool both = cfg.pair_term_scope == PairTermScope::both;
  const bool neg = !cfg.ablations.no_neg;
  const T lambda = static_cast<T>(cfg.lambda_pen);

  std::vector<TokenSequence> pos_seqs, neg_seqs;
  for (const auto& p : pairs) {
    pos_seqs.push_back(p.chosen);
    neg_seqs.push_back(p.rejected);
  }
  GroupSums<T> pos = group_sums(chosen, std::span<const TokenSequence>(pos_seqs), cfg, true, irl);
  GroupSums<T> negs = group_sums(rejected, std::span<const TokenSequence>(neg_seqs), cfg, neg, irl && both);
  const T inv_pos = T{1} / static_cast<T>(pos.steps);
  const T inv_neg = T{1} / static_cast<T>(negs.steps);

  Var<T> pos_part;
  if (!irl) {
    pos_part = pos.lik;
  } else if (both) {
    pos_part = grad::add(pos.lik, grad::scale(irl_only(pos, lambda), T{0.5}));
  } else {
    pos_part = combine(pos, lambda);
  }
  Var<T> f = grad::scale(pos_part, inv_pos);
  if (neg) f = grad::sub(f, grad::scale(negs.lik, inv_neg));
  if (irl && both) f = grad::add(f, grad::scale(irl_only(negs, lambda), T{0.5} * inv_neg));

  Loss<T> loss;
  loss.value = grad::scale(f, T{-1});
  auto& b = loss.breakdown;
  const double np = static_cast<double>(pos.steps), nn = static_cast<double>(negs.steps);
  b.total = value(loss.value);
  b.likelihood_term = value(pos.lik) / np - (neg ? value(negs.lik) / nn : 0.0);
  if (both) {
    b.kl_term = 0.5 * (value(pos.kl) / np + value(negs.kl) / nn);
    b.td_term = 0.5 * (value(pos.td) / np + value(negs.td) / nn);
  } else {
    b.kl_term = value(pos.kl) / np;
    b.td_term = value(pos.td) / np;
  }
  b.steps = pos.steps + negs.steps;
  b.per_sequence = std::move(pos.diagnostics);
  b.per_sequence.insert(b.per_sequence.end(), negs.diagnostics.begin(), negs.diagnostics.end());
  return loss;
}

template <typename T>
Loss<T> cer_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected) {
  require_pairs(chosen.size(), rejected.size());
  Loss<T> loss;
  Var<T> acc;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    Var<T> s = grad::sigmoid(grad::sub(last_mean(chosen[i].reward_mean), last_mean(rejected[i].reward_mean)));
    loss.breakdown.per_pair.push_back(static_cast<double>(s.item()));
    acc = accumulate(acc, s);
  }
  loss.value = grad::scale(acc, T{-1} / static_cast<T>(chosen.size()));
  loss.breakdown.total = loss.breakdown.cer_term = value(loss.value);
  return loss;
}

template <typename T>
Loss<T> bradley_terry_loss(std::span<const TQROutput<T>> chosen, std::span<const TQROutput<T>> rejected) {
  require_pairs(chosen.size(), rejected.size());
  Loss<T> loss;
  Var<T> acc;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    Var<T> s = grad::log_sigmoid(
        grad::sub(last_mean(chosen[i].reward_mean_raw), last_mean(rejected[i].reward_mean_raw)));
    loss.breakdown.per_pair.push_back(std::exp(static_cast<double>(s.item())));
    acc = accumulate(acc, s);
  }
  loss.value = grad::scale(acc, T{-1} / static_cast<T>(chosen.size()));
  loss.breakdown.total = value(loss.value);
  return loss;
}

template <typename T>
Loss<T> sft_loss(std::span<const TQROutput<T>> outs, std::span<const TokenSequence> seqs) {
  if (seqs.empty()) throw DomainError("empty batch");
  if (outs.size() != seqs.size()) throw ShapeError("outputs and sequences differ in count");
  Loss<T> loss;
  Var<T> acc;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const TokenSequence& seq = seqs[i];
    check_output(outs[i], seq);
    if (seq.response_start == 0 || seq.response_start >= seq.length()) {
      throw DomainError("sequence " + std::to_string(i) + " has an empty response region");
    }
    std::vector<Index> idx;
    for (std::size_t k = seq.response_start; k < seq.length(); ++k) {
      idx.emplace_back(k - 1, static_cast<std::size_t>(seq.ids[k]));
    }
    Var<T> lp = grad::sum(grad::gather_elements(grad::log_softmax_rows(outs[i].policy_logits),
                                                std::span<const Index>(idx)));
    SequenceDiagnostics d;
    d.likelihood = static_cast<double>(lp.item());
    d.steps = idx.size();
    loss.breakdown.per_sequence.push_back(d);
    tokens += idx.size();
    acc = accumulate(acc, lp);
  }
  loss.value = grad::scale(acc, T{-1} / static_cast<T>(tokens));
  loss.breakdown.total = value(loss.value);
  loss.breakdown.likelihood_term = value(acc) / static_cast<double>(tokens);
  loss.breakdown.steps = tokens;
  return loss;
}

template <typename T>
T expected_return(const TQRValues<T>& v, const TokenSequence& seq) {
  if (v.reward_mean.size() != seq.length()) throw ShapeError("model output length does not match its sequence");
  if (seq.response_start == 0 || seq.response_start >= seq.length()) {
    throw ShapeError("expected_return: empty response region");
  }
  T total{0};
  for (std::size_t k = seq.response_start; k < seq.length(); ++k) total += v.reward_mean[k];
  return total;
}

template <typename T>
T expected_return(const TQRModel<T>& model, const TokenSequence& seq) {
  return expected_return(model.evaluate(seq.ids), seq);
}

template <typename T>
ObjectiveBreakdown evaluate_ava_d(const TQRModel<T>& model, std::span<const TokenSequence> seqs,
                                  const ObjectiveConfig& cfg) {
  Tape<T> tape;
  const auto p = model.bind(tape, false);
  const auto outs = forward_all(model, tape, std::span<const Var<T>>(p), seqs);
  return ava_d_loss(std::span<const TQROutput<T>>(outs), seqs, cfg).breakdown;
}

template <typename T>
ObjectiveBreakdown evaluate_ava_p(const TQRModel<T>& model, std::span<const SequencePair> pairs,
                                  const ObjectiveConfig& cfg) {
  Tape<T> tape;
  const auto p = model.bind(tape, false);
  std::vector<TQROutput<T>> pos, neg;
  for (const auto& pair : pairs) {
    pos.push_back(model.forward(tape, p, pair.chosen.ids));
    neg.push_back(model.forward(tape, p, pair.rejected.ids));
  }
  return ava_p_loss(std::span<const TQROutput<T>>(pos), std::span<const TQROutput<T>>(neg), pairs, cfg).breakdown;
}

#define AVA_INSTANTIATE_OBJECTIVES(T)                                                                          \
  template std::vector<TQROutput<T>> forward_all(const TQRModel<T>&, Tape<T>&, std::span<const Var<T>>,          \
                                                 std::span<const TokenSequence>);                               \
  template Var<T> td_error(const TQROutput<T>&, const TokenSequence&, T);                                      \
  template std::vector<T> td_error(const TQRValues<T>&, const TokenSequence&, T);                              \
  template std::vector<T> td_error_log_ratio(const TQRValues<T>&, const TokenSequence&, const tqr::ModelConfig&, \
                                             T);                                                               \
  template Loss<T> ava_d_loss(std::span<const TQROutput<T>>, std::span<const TokenSequence>,                   \
                              const ObjectiveConfig&);                                                         \
  template Loss<T> ava_p_loss(std::span<const TQROutput<T>>, std::span<const TQROutput<T>>,                    \
                              std::span<const SequencePair>, const ObjectiveConfig&);                          \
  template Loss<T> cer_loss(std::span<const TQROutput<T>>, std::span<const TQROutput<T>>);                     \
  template Loss<T> bradley_terry_loss(std::span<const TQROutput<T>>, std::span<const TQROutput<T>>);           \
  template Loss<T> sft_loss(std::span<const TQROutput<T>>, std::span<const TokenSequence>);                    \
  template T expected_return(const TQRValues<T>&, const TokenSequence&);                                      \
  template T expected_return(const TQRModel<T>&, const TokenSequence&);                                        \
  template ObjectiveBreakdown evaluate_ava_d(const TQRModel<T>&, std::span<const TokenSequence>,                \
                                             const ObjectiveConfig&);                                          \
  template ObjectiveBreakdown evaluate_ava_p(const TQRModel<T>&, std::span<const SequencePair>,                 \
                                             const ObjectiveConfig&);

AVA_INSTANTIATE_OBJECTIVES(float)
AVA_INSTANTIATE_OBJECTIVES(double)

}  // namespace ava::objectives
