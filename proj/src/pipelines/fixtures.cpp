#include "ava/pipelines/fixtures.hpp"

#include "ava/errors.hpp"
#include "ava/rng.hpp"

namespace ava::pipelines {

using grad::Tape;
using grad::Var;

GradFixture grad_fixture() {
  GradFixture f;
  f.vocab = data::Vocabulary(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'x'});
  f.model.vocab_size = f.vocab.size();
  f.model.d_model = 16;
  f.model.n_layers = 2;
  f.model.n_heads = 2;
  f.model.max_seq_len = 16;
  f.sequences = {data::tokenize("x", "abca", f.vocab), data::tokenize("xx", "dab", f.vocab)};
  f.pairs = {{data::tokenize("x", "aabd", f.vocab), data::tokenize("x", "cbdd", f.vocab)},
             {data::tokenize("xx", "bad", f.vocab), data::tokenize("xx", "dcb", f.vocab)}};
  return f;
}

tqr::TQRModel<double> fixture_model(const tqr::ModelConfig& config, std::uint64_t seed, double scale) {
  auto model = tqr::TQRModel<double>::init(config, seed);
  Rng rng(seed ^ 0x5bd1e995ULL);
  auto& p = model.parameters();
  for (std::size_t i = 0; i < p.count(); ++i) {
    const bool gain = p.names[i].ends_with(".gain");
    for (auto& v : p.arrays[i].data) v = (gain ? 1.0 : 0.0) + scale * rng.normal();
  }
  return model;
}

grad::GradCheckResult check_objective_gradients(const std::string& objective, std::uint64_t seed, double epsilon) {
  const GradFixture fx = grad_fixture();
  const auto model = fixture_model(fx.model, seed);
  const auto& cfg = fx.objective;
  const auto& seqs = fx.sequences;
  const auto& pairs = fx.pairs;

  grad::ScalarFunction f;
  auto pair_outputs = [&model, &pairs](Tape<double>& tape, std::span<const Var<double>> p) {
    std::pair<std::vector<tqr::TQROutput<double>>, std::vector<tqr::TQROutput<double>>> out;
    for (const auto& pr : pairs) {
      out.first.push_back(model.forward(tape, p, pr.chosen.ids));
      out.second.push_back(model.forward(tape, p, pr.rejected.ids));
    }
    return out;
  };
  using Outs = std::span<const tqr::TQROutput<double>>;
  if (objective == "ava_d" || objective == "sft") {
    const bool sft = objective == "sft";
    f = [&, sft](Tape<double>& tape, std::span<const Var<double>> p) {
      const auto outs = objectives::forward_all(model, tape, p, std::span<const data::TokenSequence>(seqs));
      const std::span<const data::TokenSequence> s(seqs);
      return sft ? objectives::sft_loss(Outs(outs), s).value : objectives::ava_d_loss(Outs(outs), s, cfg).value;
    };
  } else if (objective == "ava_p") {
    f = [&](Tape<double>& tape, std::span<const Var<double>> p) {
      const auto [pos, neg] = pair_outputs(tape, p);
      return objectives::ava_p_loss(Outs(pos), Outs(neg), std::span<const data::SequencePair>(pairs), cfg).value;
    };
  } else if (objective == "cer") {
    f = [&](Tape<double>& tape, std::span<const Var<double>> p) {
      const auto [pos, neg] = pair_outputs(tape, p);
      return objectives::cer_loss(Outs(pos), Outs(neg)).value;
    };
  } else if (objective == "bradley_terry") {
    f = [&](Tape<double>& tape, std::span<const Var<double>> p) {
      const auto [pos, neg] = pair_outputs(tape, p);
      return objectives::bradley_terry_loss(Outs(pos), Outs(neg)).value;
    };
  } else {
    throw ConfigError("unknown grad-check objective '" + objective + "'");
  }
  return grad::grad_check(f, model.parameters().arrays, epsilon);
}

}  // namespace ava::pipelines
