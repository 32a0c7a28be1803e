#include <doctest.h>

#include <cmath>

#include "ava/data/batching.hpp"
#include "ava/errors.hpp"
#include "ava/grad/numeric.hpp"
#include "ava/objectives/objectives.hpp"
#include "ava/pipelines/fixtures.hpp"
#include "support.hpp"

using namespace ava;
using namespace ava::objectives;
using grad::Array;
using grad::Shape;
using data::TokenSequence;

namespace {

using Outs = std::span<const TQROutput<double>>;

// Output with chosen head values; the weighted and raw fields coincide.
TQROutput<double> make_output(Tape<double>& tape, Array<double> q, std::vector<double> mu,
                              std::vector<double> sigma) {
  TQROutput<double> o;
  o.length = q.rows();
  const std::size_t L = o.length;
  o.q_values = o.q_values_raw = tape.constant(std::move(q));
  o.reward_mean = o.reward_mean_raw = tape.constant(Array<double>(Shape{L}, std::move(mu)));
  o.reward_std = o.reward_std_raw = tape.constant(Array<double>(Shape{L}, std::move(sigma)));
  o.reward_weights = tape.constant(Array<double>(Shape{L}, 1.0));
  return o;
}

TokenSequence seq_of(std::vector<data::TokenId> ids, std::size_t response_start) {
  return TokenSequence{std::move(ids), response_start};
}

std::vector<TokenSequence> random_batch(Rng& rng, const data::Vocabulary& v, std::size_t n) {
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_sequence(rng, v));
  return out;
}

std::vector<data::SequencePair> random_pairs(Rng& rng, const data::Vocabulary& v, std::size_t n) {
  std::vector<data::SequencePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto prompt = testing::random_text(rng, 0, 3, "xyz");
    out.push_back({data::tokenize(prompt, testing::random_text(rng, 2, 8, "abcd"), v),
                   data::tokenize(prompt, testing::random_text(rng, 2, 8, "abcd"), v)});
  }
  return out;
}

// Mean negative Boltzmann log-likelihood over counted steps, computed
// directly from the Q rows.
double boltzmann_nll(const TQRModel<double>& model, std::span<const TokenSequence> seqs, double beta) {
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& s : seqs) {
    const auto v = model.evaluate(s.ids);
    const std::size_t V = v.q_values.cols();
    for (std::size_t k = s.response_start; k + 1 < s.length(); ++k) {
      std::vector<double> row(V);
      for (std::size_t j = 0; j < V; ++j) row[j] = beta * v.q_values.at(k - 1, j);
      total -= beta * grad::log_softmax(row)[static_cast<std::size_t>(s.ids[k])];
      ++steps;
    }
  }
  return total / static_cast<double>(steps);
}

}  // namespace

TEST_CASE("td_error examples") {
  Tape<double> tape;
  Array<double> q(Shape{4, 5}, 0.0);
  q.at(0, 3) = -1.0;
  q.at(1, 4) = -2.0;
  const auto seq = seq_of({data::kBos, 3, 4, data::kEos}, 1);
  const auto out = make_output(tape, q, std::vector<double>(4, 0.0), std::vector<double>(4, 1.0));
  const auto d = td_error(out, seq, 0.99);
  CHECK(d.value().data[0] == doctest::Approx(0.98).epsilon(1e-12));
  const auto d0 = td_error(out, seq, 0.0);
  CHECK(d0.value().data[0] == -1.0);
  CHECK(d0.value().data.size() == 2);
  CHECK_THROWS_AS(td_error(make_output(tape, Array<double>(Shape{2, 5}, 0.0), {0, 0}, {1, 1}),
                           seq_of({data::kBos, data::kEos}, 1), 0.99),
                  SequenceTooShortError);
}

TEST_CASE("ava_d per-step loss on uniform Q with matched reward") {
  Tape<double> tape;
  const std::size_t L = 5;
  // Four-token vocabulary, uniform Q, gamma 1 so every delta is 0.
  const auto seq = seq_of({data::kBos, 3, 3, 3, data::kEos}, 1);
  const auto out = make_output(tape, Array<double>(Shape{L, 4}, 0.3), std::vector<double>(L, 0.0),
                               std::vector<double>(L, 1.0));
  ObjectiveConfig cfg;
  cfg.gamma = 1.0;
  const std::vector<TQROutput<double>> outs = {out};
  const std::vector<TokenSequence> seqs = {seq};
  const auto loss = ava_d_loss(Outs(outs), std::span<const TokenSequence>(seqs), cfg);
  CHECK(loss.value.item() == doctest::Approx(2.305234).epsilon(1e-6));
  CHECK(loss.breakdown.steps == 3);
  CHECK(loss.breakdown.kl_term == doctest::Approx(0.0));
  const auto& b = loss.breakdown;
  CHECK(std::abs(b.total - -(b.likelihood_term - b.kl_term + cfg.lambda_pen * b.td_term)) <= 1e-9);
}

TEST_CASE("ava_d with no_irl is the Boltzmann negative log-likelihood") {
  Rng rng(31);
  const auto v = testing::abcd_vocab();
  const auto model = TQRModel<double>::init(testing::toy_config(v.size()), 2);
  const auto seqs = random_batch(rng, v, 6);
  ObjectiveConfig cfg;
  cfg.ablations.no_irl = true;
  cfg.beta = 1.7;
  const auto b = evaluate_ava_d(model, std::span<const TokenSequence>(seqs), cfg);
  CHECK(b.total == -b.likelihood_term);
  CHECK(std::abs(b.total - boltzmann_nll(model, std::span<const TokenSequence>(seqs), cfg.beta)) <= 1e-12);
}

TEST_CASE("ava_p with identical halves reduces to the KL and TD terms") {
  Rng rng(32);
  const auto v = testing::abcd_vocab();
  const auto model = TQRModel<double>::init(testing::toy_config(v.size()), 3);
  const auto seqs = random_batch(rng, v, 5);
  std::vector<data::SequencePair> pairs;
  for (const auto& s : seqs) pairs.push_back({s, s});
  const ObjectiveConfig cfg;
  const auto p = evaluate_ava_p(model, std::span<const data::SequencePair>(pairs), cfg);
  const auto d = evaluate_ava_d(model, std::span<const TokenSequence>(seqs), cfg);
  CHECK(std::abs(p.total - (d.total + d.likelihood_term)) <= 1e-12);
  CHECK(std::abs(p.total - (d.kl_term - cfg.lambda_pen * d.td_term)) <= 1e-12);
}

TEST_CASE("ava_p with no_neg and chosen_only equals ava_d on the chosen halves bit for bit") {
  Rng rng(33);
  const auto v = testing::abcd_vocab();
  for (bool weighting : {true, false}) {
    auto mc = testing::toy_config(v.size());
    mc.reward_weighting = weighting;
    const auto model = TQRModel<double>::init(mc, 4);
    const auto pairs = random_pairs(rng, v, 6);
    std::vector<TokenSequence> chosen;
    for (const auto& p : pairs) chosen.push_back(p.chosen);
    ObjectiveConfig cfg;
    cfg.ablations.no_neg = true;
    cfg.pair_term_scope = PairTermScope::chosen_only;
    const auto p = evaluate_ava_p(model, std::span<const data::SequencePair>(pairs), cfg);
    const auto d = evaluate_ava_d(model, std::span<const TokenSequence>(chosen), cfg);
    CHECK(p.total == d.total);
  }
}

TEST_CASE("CER examples and swap antisymmetry") {
  Tape<double> tape;
  Array<double> q(Shape{4, 5}, 0.0);
  auto at = [&](double last) { return make_output(tape, q, {0, 0, 0, last}, {1, 1, 1, 1}); };
  std::vector<TQROutput<double>> c = {at(0.7)}, r = {at(0.7)};
  CHECK(cer_loss(Outs(c), Outs(r)).value.item() == doctest::Approx(-0.5));
  c = {at(2.5)};
  r = {at(0.5)};
  const auto l = cer_loss(Outs(c), Outs(r));
  CHECK(l.breakdown.per_pair[0] == doctest::Approx(0.880797).epsilon(1e-6));
  c = {at(800.0)};
  r = {at(-800.0)};
  CHECK(cer_loss(Outs(c), Outs(r)).value.item() == doctest::Approx(-1.0));

  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double a = -5 + 10 * rng.uniform(), b = -5 + 10 * rng.uniform();
    c = {at(a)};
    r = {at(b)};
    const double s = cer_loss(Outs(c), Outs(r)).breakdown.per_pair[0];
    const double swapped = cer_loss(Outs(r), Outs(c)).breakdown.per_pair[0];
    CHECK(std::abs(swapped - (1.0 - s)) <= 1e-15);
  }
  const std::vector<TQROutput<double>> none;
  CHECK_THROWS_AS(cer_loss(Outs(none), Outs(none)), DomainError);
}

TEST_CASE("Bradley-Terry examples and shift invariance") {
  Tape<double> tape;
  Array<double> q(Shape{4, 5}, 0.0);
  auto at = [&](double last) { return make_output(tape, q, {0, 0, 0, last}, {1, 1, 1, 1}); };
  std::vector<TQROutput<double>> c = {at(0.3)}, r = {at(0.3)};
  CHECK(bradley_terry_loss(Outs(c), Outs(r)).value.item() == doctest::Approx(0.693147).epsilon(1e-6));
  c = {at(1.0)};
  r = {at(-1.0)};
  CHECK(bradley_terry_loss(Outs(c), Outs(r)).value.item() == doctest::Approx(0.126928).epsilon(1e-6));
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const double a = -3 + 6 * rng.uniform(), b = -3 + 6 * rng.uniform(), k = -20 + 40 * rng.uniform();
    c = {at(a)};
    r = {at(b)};
    const double base = bradley_terry_loss(Outs(c), Outs(r)).value.item();
    c = {at(a + k)};
    r = {at(b + k)};
    CHECK(std::abs(bradley_terry_loss(Outs(c), Outs(r)).value.item() - base) <= 1e-12);
  }
  const std::vector<TQROutput<double>> none;
  CHECK_THROWS_AS(bradley_terry_loss(Outs(none), Outs(none)), DomainError);
}

TEST_CASE("expected_return examples") {
  TQRValues<double> v;
  const auto seq = seq_of({data::kBos, 3, 4, data::kEos}, 1);
  v.reward_mean = Array<double>(Shape{4}, 0.0);
  CHECK(expected_return(v, seq) == 0.0);
  v.reward_mean = Array<double>(Shape{4}, std::vector<double>{9.0, 0.5, -0.25, 1.0});
  CHECK(expected_return(v, seq) == doctest::Approx(1.25));
}

TEST_CASE("shifting Q leaves the likelihood unchanged and, at gamma 1, the whole objective") {
  Tape<double> tape;
  Rng rng(40);
  const std::size_t L = 7, V = 6;
  const auto q = testing::random_array(rng, {L, V}, -2, 2);
  const auto mu = testing::random_vector(rng, L, -1, 1);
  const auto sigma = testing::random_vector(rng, L, 0.5, 2);
  auto shifted = q;
  for (auto& x : shifted.data) x += 3.7;
  const std::vector<TokenSequence> seqs = {seq_of({data::kBos, 4, 3, 5, 3, 4, data::kEos}, 2)};
  ObjectiveConfig cfg;
  cfg.gamma = 1.0;
  const std::vector<TQROutput<double>> a = {make_output(tape, q, mu, sigma)};
  const std::vector<TQROutput<double>> b = {make_output(tape, shifted, mu, sigma)};
  const auto la = ava_d_loss(Outs(a), std::span<const TokenSequence>(seqs), cfg).breakdown;
  const auto lb = ava_d_loss(Outs(b), std::span<const TokenSequence>(seqs), cfg).breakdown;
  CHECK(std::abs(la.likelihood_term - lb.likelihood_term) <= 1e-9);
  CHECK(std::abs(la.total - lb.total) <= 1e-9);
  cfg.gamma = 0.9;
  const auto ga = ava_d_loss(Outs(a), std::span<const TokenSequence>(seqs), cfg).breakdown;
  const auto gb = ava_d_loss(Outs(b), std::span<const TokenSequence>(seqs), cfg).breakdown;
  CHECK(std::abs(ga.likelihood_term - gb.likelihood_term) <= 1e-9);
  CHECK(std::abs(ga.td_term - gb.td_term) > 1e-6);
}

TEST_CASE("losses reject empty batches and short sequences") {
  Tape<double> tape;
  const std::vector<TQROutput<double>> none;
  const std::vector<TokenSequence> no_seqs;
  CHECK_THROWS_AS(ava_d_loss(Outs(none), std::span<const TokenSequence>(no_seqs), ObjectiveConfig{}), DomainError);
  const std::vector<data::SequencePair> no_pairs;
  CHECK_THROWS_AS(ava_p_loss(Outs(none), Outs(none), std::span<const data::SequencePair>(no_pairs), ObjectiveConfig{}),
                  DomainError);
  const auto v = testing::abcd_vocab();
  const auto model = TQRModel<double>::init(testing::toy_config(v.size()), 1);
  const std::vector<TokenSequence> short_seq = {data::tokenize("x", "a", v)};
  CHECK_THROWS_AS(evaluate_ava_d(model, std::span<const TokenSequence>(short_seq), ObjectiveConfig{}),
                  SequenceTooShortError);
}

TEST_CASE("objective config validation and JSON") {
  ObjectiveConfig c;
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ObjectiveConfig{};
  c.lambda_pen = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ObjectiveConfig{};
  c.ablations.no_neg = true;
  c.pair_term_scope = PairTermScope::chosen_only;
  const auto back = objective_config_from_json(to_json(c));
  CHECK(back.ablations == c.ablations);
  CHECK(back.pair_term_scope == PairTermScope::chosen_only);
  CHECK_THROWS_AS(objective_config_from_json({{"gama", 0.5}}), ConfigError);
}

TEST_CASE("TD error from Q values matches the log-ratio form") {
  Rng rng(50);
  const auto v = testing::abcd_vocab();
  for (bool weighting : {true, false}) {
    auto mc = testing::toy_config(v.size());
    mc.reward_weighting = weighting;
    mc.alpha = 2.5;
    const auto model = TQRModel<double>::init(mc, 8);
    for (int i = 0; i < 20; ++i) {
      const auto seq = testing::random_sequence(rng, v);
      const auto vals = model.evaluate(seq.ids);
      const auto a = td_error(vals, seq, 0.97);
      const auto b = td_error_log_ratio(vals, seq, mc, 0.97);
      REQUIRE(a.size() == b.size());
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
    }
  }
}

TEST_CASE("padding never changes an objective value") {
  Rng rng(51);
  const auto v = testing::abcd_vocab();
  const auto model = TQRModel<double>::init(testing::toy_config(v.size()), 9);
  const auto seqs = random_batch(rng, v, 7);
  for (const auto& batch : data::make_batches(std::span<const TokenSequence>(seqs), 3, 24, 5)) {
    std::vector<TokenSequence> rows, direct;
    for (std::size_t r = 0; r < batch.rows; ++r) {
      rows.push_back(batch.row(r));
      direct.push_back(seqs[batch.record_indices[r]]);
    }
    const auto a = evaluate_ava_d(model, std::span<const TokenSequence>(rows), ObjectiveConfig{});
    const auto b = evaluate_ava_d(model, std::span<const TokenSequence>(direct), ObjectiveConfig{});
    CHECK(std::abs(a.total - b.total) <= 1e-9);
  }
}

TEST_CASE("breakdown totals follow the documented combination and stay finite") {
  Rng rng(52);
  const auto v = testing::abcd_vocab();
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = TQRModel<double>::init(testing::toy_config(v.size()), 100 + trial);
    ObjectiveConfig cfg;
    cfg.lambda_pen = 0.5 + rng.uniform();
    const auto pairs = random_pairs(rng, v, 4);
    const auto b = evaluate_ava_p(model, std::span<const data::SequencePair>(pairs), cfg);
    CHECK(std::isfinite(b.total));
    CHECK(std::abs(b.total - -(b.likelihood_term - b.kl_term + cfg.lambda_pen * b.td_term)) <= 1e-9);
  }
}

TEST_CASE("ava_d gradient matches finite differences on the toy fixture") {
  const auto r = pipelines::check_objective_gradients("ava_d");
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(r.checked > 5000);
}
