#include <doctest.h>

#include <cmath>

#include "ava/errors.hpp"
#include "ava/grad/numeric.hpp"
#include "ava/tqr/checkpoint.hpp"
#include "ava/tqr/heads.hpp"
#include "ava/tqr/model.hpp"
#include "support.hpp"

using namespace ava;
using namespace ava::tqr;
using grad::Array;
using grad::Shape;

namespace {

Array<double> uniform_causal(std::size_t n) {
  Array<double> a(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) a.at(i, j) = 1.0 / static_cast<double>(i + 1);
  }
  return a;
}

Array<double> random_causal(Rng& rng, std::size_t n) {
  Array<double> a(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = grad::softmax(testing::random_vector(rng, i + 1, -4.0, 4.0));
    for (std::size_t j = 0; j <= i; ++j) a.at(i, j) = p[j];
  }
  return a;
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> ids{data::kBos};
  while (ids.size() < n) ids.push_back(static_cast<TokenId>(data::kEos + rng.below(vocab - data::kEos)));
  return ids;
}

bool rows_equal(const Array<double>& a, const Array<double>& b, std::size_t rows) {
  const std::size_t cols = a.shape.size() == 2 ? a.cols() : 1;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    if (a.data[i] != b.data[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("reward weights examples") {
  auto w = reward_weights(uniform_causal(3), 3);
  CHECK(w[0] == doctest::Approx(0.611111).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(0.277778).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(0.111111).epsilon(1e-6));
  CHECK(reward_weights(uniform_causal(1), 1) == std::vector<double>{1.0});
  Array<double> id(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
  w = reward_weights(id, 2);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("reward weights reject non-normalized or non-causal rows") {
  Array<double> bad(Shape{2, 2}, std::vector<double>{1, 0, 0.3, 0.3});
  CHECK_THROWS_AS(reward_weights(bad, 2), DomainError);
  Array<double> acausal(Shape{2, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(reward_weights(acausal, 2), DomainError);
}

TEST_CASE("reward weights from random causal attention sum to one") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t heads = 1 + rng.below(4);
    std::vector<Array<double>> maps;
    for (std::size_t h = 0; h < heads; ++h) maps.push_back(random_causal(rng, n));
    const auto w = reward_weights(maps, n);
    double total = 0.0;
    for (double x : w) {
      CHECK(x >= 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) <= 1e-5);
  }
}

TEST_CASE("q_from_policy examples") {
  const std::vector<double> uniform(4, 0.25);
  for (double alpha : {0.1, 1.0, 7.0}) {
    for (double q : q_from_policy(std::span<const double>(uniform), alpha)) {
      CHECK(q == doctest::Approx(-1.386294).epsilon(1e-6));
    }
  }
  const std::vector<double> onehot = {1, 0, 0, 0};
  const auto q = q_from_policy(std::span<const double>(onehot), 1.0);
  CHECK(q[0] == doctest::Approx(-0.743668).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(-1.743668).epsilon(1e-6));
  const auto q0 = q_from_policy(std::span<const double>(onehot), 1e-9);
  for (double x : q0) CHECK(x == doctest::Approx(-std::log(4.0)).epsilon(1e-8));
  const std::vector<double> bad = {0.5, 0.2, 0.2, 0.0};
  CHECK_THROWS_AS(q_from_policy(std::span<const double>(bad), 1.0), DomainError);
}

TEST_CASE("boltzmann policy examples and shift invariance") {
  for (double p : boltzmann_policy(std::vector<double>{1, 1, 1, 1}, 2.0)) CHECK(p == doctest::Approx(0.25));
  const auto b = boltzmann_policy(std::vector<double>{1, 0}, 1.0);
  CHECK(b[0] == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK_THROWS_AS(boltzmann_policy(std::vector<double>{1, 0}, 0.0), DomainError);
  CHECK_THROWS_AS(boltzmann_policy(std::vector<double>{1, 0}, -1.0), DomainError);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = testing::random_vector(rng, 1 + rng.below(10), -5, 5);
    const double beta = 0.1 + 3.0 * rng.uniform();
    const double c = -50.0 + 100.0 * rng.uniform();
    auto shifted = q;
    for (auto& x : shifted) x += c;
    const auto p1 = boltzmann_policy(q, beta), p2 = boltzmann_policy(shifted, beta);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(p1[i] - p2[i]) <= 1e-9);
  }
}

TEST_CASE("model config validation") {
  auto c = testing::toy_config(8);
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.d_model = 15;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.vocab_size = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.beta = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(model_config_from_json(to_json(c)).same_architecture(c));
  CHECK_THROWS_AS(model_config_from_json({{"d_modle", 16}}), ConfigError);
}

TEST_CASE("forward on a single BOS gives full weight") {
  const auto model = TQRModel<double>::init(testing::toy_config(8), 1);
  const std::vector<TokenId> ids = {data::kBos};
  const auto v = model.evaluate(ids);
  CHECK(v.reward_weights.data == std::vector<double>{1.0});
  CHECK(v.q_values.cols() == 8);
}

TEST_CASE("forward is deterministic and init is seeded") {
  const auto a = TQRModel<double>::init(testing::toy_config(9), 5);
  const auto b = TQRModel<double>::init(testing::toy_config(9), 5);
  CHECK(a.parameters() == b.parameters());
  CHECK(!(a.parameters() == TQRModel<double>::init(testing::toy_config(9), 6).parameters()));
  Rng rng(2);
  const auto ids = random_ids(rng, 10, 9);
  CHECK(a.evaluate(ids) == b.evaluate(ids));
}

TEST_CASE("initial sigma is softplus(0) plus the floor") {
  const auto model = TQRModel<double>::init(testing::toy_config(8), 3);
  Rng rng(8);
  const auto v = model.evaluate(random_ids(rng, 12, 8));
  // Only the head's small random projection moves sigma away from softplus(0).
  double mean = 0.0;
  for (double s : v.reward_std_raw.data) {
    CHECK(std::abs(s - (std::log(2.0) + 1e-4)) < 0.15);
    mean += s / 12.0;
  }
  CHECK(std::abs(mean - (std::log(2.0) + 1e-4)) < 0.05);
}

TEST_CASE("disabling reward weighting yields unit weights and raw outputs") {
  auto cfg = testing::toy_config(9);
  cfg.reward_weighting = false;
  Rng rng(6);
  for (QMode mode : {QMode::head, QMode::policy_logits}) {
    cfg.q_mode = mode;
    const auto model = TQRModel<double>::init(cfg, 4);
    const auto v = model.evaluate(random_ids(rng, 11, 9));
    for (double w : v.reward_weights.data) CHECK(w == 1.0);
    CHECK(v.q_values == v.q_values_raw);
    CHECK(v.reward_mean == v.reward_mean_raw);
    CHECK(v.reward_std == v.reward_std_raw);
  }
}

TEST_CASE("weighted outputs scale the raw heads and weights sum to one") {
  auto cfg = testing::toy_config(9);
  const auto model = TQRModel<double>::init(cfg, 12);
  Rng rng(7);
  const auto v = model.evaluate(random_ids(rng, 13, 9));
  double total = 0.0;
  for (std::size_t t = 0; t < 13; ++t) {
    const double w = v.reward_weights.data[t];
    total += w;
    CHECK(v.reward_mean.data[t] == doctest::Approx(w * v.reward_mean_raw.data[t]).epsilon(1e-12));
    CHECK(v.q_values.at(t, 4) == doctest::Approx(w * v.q_values_raw.at(t, 4)).epsilon(1e-12));
  }
  CHECK(std::abs(total - 1.0) <= 1e-5);
}

TEST_CASE("causality under perturbation") {
  Rng rng(21);
  for (bool weighting : {true, false}) {
    auto cfg = testing::toy_config(9);
    cfg.reward_weighting = weighting;
    const auto model = TQRModel<double>::init(cfg, 9);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 4 + rng.below(12);
      auto ids = random_ids(rng, n, 9);
      const std::size_t t0 = rng.below(n - 1);
      auto changed = ids;
      const std::size_t t = t0 + 1 + rng.below(n - t0 - 1);
      changed[t] = static_cast<TokenId>(ids[t] == 3 ? 4 : 3);
      const auto a = model.evaluate(ids), b = model.evaluate(changed);
      const std::size_t rows = t0 + 1;
      CHECK(rows_equal(a.q_values_raw, b.q_values_raw, rows));
      CHECK(rows_equal(a.reward_mean_raw, b.reward_mean_raw, rows));
      CHECK(rows_equal(a.reward_std_raw, b.reward_std_raw, rows));
      CHECK(rows_equal(a.policy_logits, b.policy_logits, rows));
      for (std::size_t l = 0; l < a.attention.size(); ++l) {
        for (std::size_t h = 0; h < a.attention[l].size(); ++h) {
          CHECK(rows_equal(a.attention[l][h], b.attention[l][h], rows));
        }
      }
      if (!weighting) {
        CHECK(rows_equal(a.q_values, b.q_values, rows));
        CHECK(rows_equal(a.reward_mean, b.reward_mean, rows));
      }
    }
  }
}

TEST_CASE("sigma stays above the floor for extreme reward-head parameters") {
  auto model = TQRModel<double>::init(testing::toy_config(8), 2);
  auto& p = model.parameters();
  const std::size_t rb = p.index("reward_head.bias");
  p.arrays[rb].data[1] = -200.0;
  Rng rng(3);
  const auto v = model.evaluate(random_ids(rng, 10, 8));
  for (double s : v.reward_std.data) CHECK(s >= 1e-4);
  for (double s : v.reward_std_raw.data) CHECK(s >= 1e-4);
}

TEST_CASE("forward input errors") {
  const auto model = TQRModel<double>::init(testing::toy_config(8), 1);
  std::vector<TokenId> too_long(25, 3);
  too_long[0] = data::kBos;
  CHECK_THROWS_AS(model.evaluate(too_long), ShapeError);
  const std::vector<TokenId> oov = {data::kBos, 3, 8};
  CHECK_THROWS_AS(model.evaluate(oov), DomainError);
}

TEST_CASE("parameter names are unique and shapes match the layout") {
  const auto cfg = testing::toy_config(8);
  const auto model = TQRModel<double>::init(cfg, 1);
  const auto layout = parameter_layout(cfg);
  REQUIRE(layout.size() == model.parameters().count());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    CHECK(model.parameters().names[i] == layout[i].first);
    CHECK(model.parameters().arrays[i].shape == layout[i].second);
  }
  Parameters<double> p;
  p.add("w", Array<double>(Shape{2}, 0.0));
  CHECK_THROWS_AS(p.add("w", Array<double>(Shape{2}, 0.0)), FormatError);
}

TEST_CASE("checkpoint round trips byte-exactly") {
  for (bool f64 : {true, false}) {
    std::string bytes;
    if (f64) {
      const auto model = TQRModel<double>::init(testing::toy_config(8), 3);
      bytes = serialize_checkpoint(make_checkpoint(model, {{"kind", "test"}}));
      const auto back = model_from_checkpoint<double>(deserialize_checkpoint(bytes));
      CHECK(back.parameters() == model.parameters());
    } else {
      const auto model = TQRModel<float>::init(testing::toy_config(8), 3);
      bytes = serialize_checkpoint(make_checkpoint(model));
      const auto back = model_from_checkpoint<float>(deserialize_checkpoint(bytes));
      CHECK(back.parameters() == model.parameters());
    }
    CHECK(bytes.substr(0, 4) == "TQR1");
    CHECK(serialize_checkpoint(deserialize_checkpoint(bytes)) == bytes);
  }
}

TEST_CASE("checkpoint format errors") {
  const auto model = TQRModel<double>::init(testing::toy_config(8), 3);
  const std::string bytes = serialize_checkpoint(make_checkpoint(model));
  std::string wrong = bytes;
  wrong[3] = '2';
  CHECK_THROWS_AS(deserialize_checkpoint(wrong), FormatError);
  try {
    deserialize_checkpoint(bytes.substr(0, bytes.size() - 5));
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("reward_head.bias") != std::string::npos);
  }
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint("TQ"), FormatError);
}

TEST_CASE("load_pretrained checks architecture and reproduces policy logits") {
  auto cfg = testing::toy_config(8);
  auto sft = TQRModel<double>::init(cfg, 3);
  // Perturb the parameters so the check is not on an init-only model.
  Rng rng(10);
  for (auto& a : sft.parameters().arrays) {
    for (auto& x : a.data) x += 0.05 * rng.normal();
  }
  const auto ckpt = make_checkpoint(sft);
  auto requested = cfg;
  requested.alpha = 3.0;
  const auto loaded = load_pretrained<double>(ckpt, requested);
  CHECK(loaded.config().alpha == 3.0);
  const auto ids = random_ids(rng, 12, 8);
  CHECK(loaded.evaluate(ids).policy_logits == sft.evaluate(ids).policy_logits);
  auto other = cfg;
  other.d_model = 32;
  CHECK_THROWS_AS(load_pretrained<double>(ckpt, other), FormatError);
}
