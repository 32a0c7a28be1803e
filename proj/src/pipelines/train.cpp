#include "ava/pipelines/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ava/data/batching.hpp"
#include "ava/errors.hpp"
#include "ava/eval/report.hpp"

namespace ava::pipelines {

using grad::Array;
using grad::Tape;
using grad::Var;
using tqr::TQROutput;

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::ava_d: return "ava_d";
    case ObjectiveKind::ava_p: return "ava_p";
    case ObjectiveKind::bradley_terry: return "bradley_terry";
    case ObjectiveKind::sft: return "sft";
  }
  return "unknown";
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "ava_d") return ObjectiveKind::ava_d;
  if (name == "ava_p") return ObjectiveKind::ava_p;
  if (name == "bradley_terry") return ObjectiveKind::bradley_terry;
  if (name == "sft") return ObjectiveKind::sft;
  throw ConfigError("unknown objective '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cer_weight >= 0.0)) throw ConfigError("cer_weight must be non-negative");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed},
          {"objective", to_string(c.objective)},
          {"cer_weight", c.cer_weight},
          {"eval_every", c.eval_every},
          {"checkpoint_dir", c.checkpoint_dir},
          {"clip_norm", c.clip_norm},
          {"precision", to_string(c.precision)},
          {"shuffle", c.shuffle}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "sgd") c.optimizer = OptimizerKind::sgd;
        else if (name == "adam") c.optimizer = OptimizerKind::adam;
        else throw ConfigError("unknown optimizer '" + name + "'");
      } else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "objective") c.objective = parse_objective_kind(value.get<std::string>());
      else if (key == "cer_weight") c.cer_weight = value.get<double>();
      else if (key == "eval_every") c.eval_every = value.get<std::size_t>();
      else if (key == "checkpoint_dir") c.checkpoint_dir = value.get<std::string>();
      else if (key == "clip_norm") c.clip_norm = value.get<double>();
      else if (key == "precision") {
        const auto name = value.get<std::string>();
        if (name == "f32") c.precision = Precision::f32;
        else if (name == "f64") c.precision = Precision::f64;
        else throw ConfigError("unknown precision '" + name + "'");
      } else if (key == "shuffle") c.shuffle = value.get<bool>();
      else throw ConfigError("unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
Optimizer<T>::Optimizer(const TrainConfig& config, const tqr::Parameters<T>& params) : config_(config) {
  for (const auto& a : params.arrays) {
    m_.emplace_back(a.size(), 0.0);
    v_.emplace_back(a.size(), 0.0);
  }
}

template <typename T>
void Optimizer<T>::step(tqr::Parameters<T>& params, const std::vector<Array<T>>& grads) {
  if (grads.size() != params.count()) throw ShapeError("optimizer: gradient count mismatch");
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto& p = params.arrays[i].data;
      for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * static_cast<double>(grads[i][j]));
      }
    }
    return;
  }
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2, eps = config_.adam_eps;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = params.arrays[i].data;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = static_cast<double>(grads[i][j]);
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / c1, v_hat = v[j] / c2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * m_hat / (std::sqrt(v_hat) + eps));
    }
  }
}

template <typename T>
double clip_gradients(std::vector<Array<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (T x : g.data) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (auto& g : grads) {
      for (auto& x : g.data) x *= factor;
    }
  }
  return norm;
}

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"loss", r.loss},
          {"likelihood_term", r.components.likelihood_term},
          {"kl_term", r.components.kl_term},
          {"td_term", r.components.td_term},
          {"cer_term", r.cer},
          {"grad_norm", r.grad_norm}};
}

std::vector<double> TrainReport::loss_history() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.loss);
  return out;
}

nlohmann::json TrainReport::to_json() const {
  return {{"seed", seed},
          {"config", config},
          {"steps_executed", steps.size()},
          {"loss_history", loss_history()},
          {"evals", evals},
          {"final_metrics", final_metrics}};
}

namespace {

template <typename T>
void forward_rows(const TQRModel<T>& model, Tape<T>& tape, std::span<const Var<T>> params,
                                 const std::vector<TokenSequence>& seqs, std::span<const std::size_t> rows,
                                 std::vector<TQROutput<T>>& outs, std::vector<TokenSequence>& picked) {
  for (std::size_t r : rows) {
    picked.push_back(seqs[r]);
    outs.push_back(model.forward(tape, params, seqs[r].ids));
  }
}

bool needs_pairs(ObjectiveKind k) { return k == ObjectiveKind::ava_p || k == ObjectiveKind::bradley_terry; }

void check_dataset(const Dataset& data, ObjectiveKind kind) {
  if (needs_pairs(kind)) {
    if (data.pairs.empty()) throw ConfigError("objective " + to_string(kind) + " needs a preference dataset");
  } else if (data.sequences.empty()) {
    throw ConfigError("objective " + to_string(kind) + " needs a demonstration dataset");
  }
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (epoch + 1);
}

std::size_t max_length(const Dataset& data) {
  std::size_t m = 0;
  for (const auto& s : data.sequences) m = std::max(m, s.length());
  for (const auto& p : data.pairs) m = std::max({m, p.chosen.length(), p.rejected.length()});
  return m;
}

nlohmann::json checkpoint_extras(const std::string& kind, const data::Vocabulary& vocab,
                                 const ObjectiveConfig* objective, const TrainConfig& train) {
  nlohmann::json j = {{"kind", kind}, {"vocab", vocab.to_strings()}, {"train", to_json(train)}};
  if (objective) j["objective"] = objectives::to_json(*objective);
  return j;
}

template <typename T>
void finish(TrainResult<T>& result, const TrainConfig& train, const data::Vocabulary& vocab) {
  if (!train.checkpoint_dir.empty()) write_run_dir(train.checkpoint_dir, result.report, result.checkpoint, vocab);
}

}  // namespace

template <typename T>
BatchLoss<T> batch_loss(const TQRModel<T>& model, Tape<T>& tape, std::span<const Var<T>> params,
                        const Dataset& data, std::span<const std::size_t> rows, const ObjectiveConfig& objective,
                        const TrainConfig& train) {
  BatchLoss<T> out;
  const ObjectiveKind kind = train.objective;
  if (!needs_pairs(kind)) {
    std::vector<TQROutput<T>> outs;
    std::vector<TokenSequence> seqs;
    forward_rows(model, tape, params, data.sequences, rows, outs, seqs);
    auto loss = kind == ObjectiveKind::sft
                    ? objectives::sft_loss(std::span<const TQROutput<T>>(outs), std::span<const TokenSequence>(seqs))
                    : objectives::ava_d_loss(std::span<const TQROutput<T>>(outs),
                                             std::span<const TokenSequence>(seqs), objective);
    out.total = loss.value;
    out.breakdown = std::move(loss.breakdown);
    return out;
  }

  std::vector<TQROutput<T>> pos, neg;
  std::vector<SequencePair> pairs;
  for (std::size_t r : rows) {
    pairs.push_back(data.pairs[r]);
    pos.push_back(model.forward(tape, params, data.pairs[r].chosen.ids));
    neg.push_back(model.forward(tape, params, data.pairs[r].rejected.ids));
  }
  const std::span<const TQROutput<T>> ps(pos), ns(neg);
  if (kind == ObjectiveKind::bradley_terry) {
    auto loss = objectives::bradley_terry_loss(ps, ns);
    out.total = loss.value;
    out.breakdown = std::move(loss.breakdown);
    return out;
  }
  auto loss = objectives::ava_p_loss(ps, ns, std::span<const SequencePair>(pairs), objective);
  out.total = loss.value;
  out.breakdown = std::move(loss.breakdown);
  if (train.cer_weight > 0.0 && !objective.ablations.no_cer) {
    auto cer = objectives::cer_loss(ps, ns);
    out.cer = cer.breakdown.cer_term;
    out.breakdown.cer_term = out.cer;
    out.total = grad::add(out.total, grad::scale(cer.value, static_cast<T>(train.cer_weight)));
  }
  return out;
}

template <typename T>
TrainReport train_loop(TQRModel<T>& model, const Dataset& data, const ObjectiveConfig& objective,
                       const TrainConfig& train, const Evaluator<T>& evaluator) {
  train.validate();
  objective.validate();
  check_dataset(data, train.objective);
  const std::size_t n = needs_pairs(train.objective) ? data.pairs.size() : data.sequences.size();
  if (max_length(data) > model.config().max_seq_len) {
    throw LengthError("a training record is longer than max_seq_len " + std::to_string(model.config().max_seq_len));
  }

  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = train.seed;
  Optimizer<T> opt(train, model.parameters());
  std::size_t step = 0;
  auto run_eval = [&](std::size_t at) {
    if (!evaluator) return;
    nlohmann::json metrics = evaluator(model);
    report.final_metrics = metrics;
    metrics["step"] = at;
    report.evals.push_back(std::move(metrics));
  };

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (const auto& rows : data::index_batches(n, train.batch_size, epoch_seed(train.seed, epoch), train.shuffle)) {
      Tape<T> tape;
      const auto params = model.bind(tape);
      const auto diverged = [&](const std::string& why) {
        return DivergenceError(why + " at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ")");
      };
      std::optional<BatchLoss<T>> computed;
      try {
        computed.emplace(batch_loss(model, tape, std::span<const Var<T>>(params), data,
                                    std::span<const std::size_t>(rows), objective, train));
      } catch (const NumericError& e) {
        // NaN parameters surface inside the forward pass before any loss exists.
        throw diverged(e.what());
      }
      BatchLoss<T>& loss = *computed;
      const double value = static_cast<double>(loss.total.item());
      if (!std::isfinite(value)) throw diverged("non-finite loss");
      tape.backward(loss.total);
      std::vector<Array<T>> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.push_back(tape.gradient(p));
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.loss = value;
      rec.cer = loss.cer;
      rec.grad_norm = clip_gradients(grads, train.clip_norm);
      rec.components = std::move(loss.breakdown);
      rec.components.per_sequence.clear();
      rec.components.per_pair.clear();
      opt.step(model.parameters(), grads);
      report.steps.push_back(std::move(rec));
      ++step;
      if (train.eval_every > 0 && step % train.eval_every == 0) run_eval(step);
    }
  }
  if (train.eval_every == 0 || step % train.eval_every != 0) run_eval(step);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ModelConfig effective_model_config(ModelConfig model, const ObjectiveConfig& objective, ObjectiveKind kind,
                                   std::size_t vocab_size) {
  model.vocab_size = vocab_size;
  model.alpha = objective.alpha;
  model.beta = objective.beta;
  if (objective.ablations.no_rwt || kind == ObjectiveKind::bradley_terry) model.reward_weighting = false;
  model.validate();
  return model;
}

template <typename T>
TrainResult<T> sft_pretrain(const std::vector<TokenSequence>& demos, const std::vector<TokenSequence>& heldout,
                            const data::Vocabulary& vocab, const ModelConfig& model_cfg, const TrainConfig& train_in) {
  TrainConfig train = train_in;
  train.objective = ObjectiveKind::sft;
  const ObjectiveConfig objective;
  ModelConfig cfg = model_cfg;
  cfg.vocab_size = vocab.size();
  cfg.validate();
  TQRModel<T> model = TQRModel<T>::init(cfg, train.seed);
  Dataset data{demos, {}};
  Evaluator<T> evaluator;
  if (!heldout.empty()) {
    evaluator = [&heldout](const TQRModel<T>& m) {
      const double nll = eval::mean_nll(m, std::span<const TokenSequence>(heldout), eval::PolicySource::policy);
      return nlohmann::json{{"heldout_nll", nll}, {"heldout_perplexity", std::exp(nll)}};
    };
  }
  TrainReport report = train_loop(model, data, objective, train, evaluator);
  report.config = {{"model", tqr::to_json(cfg)}, {"train", to_json(train)}};
  auto ckpt = tqr::make_checkpoint(model, checkpoint_extras("sft", vocab, nullptr, train));
  TrainResult<T> result{std::move(model), std::move(report), std::move(ckpt)};
  finish(result, train, vocab);
  return result;
}

template <typename T>
TrainResult<T> train_reward_model(const Dataset& data, const std::vector<SequencePair>& heldout,
                                  const data::Vocabulary& vocab, const ModelConfig& model_cfg,
                                  const ObjectiveConfig& objective, const TrainConfig& train,
                                  const tqr::Checkpoint* init, eval::Scoring scoring) {
  if (train.objective == ObjectiveKind::sft) throw ConfigError("train-reward does not accept objective sft");
  const ModelConfig cfg = effective_model_config(model_cfg, objective, train.objective, vocab.size());
  TQRModel<T> model = init ? tqr::load_pretrained<T>(*init, cfg) : TQRModel<T>::init(cfg, train.seed);
  Evaluator<T> evaluator;
  if (!heldout.empty()) {
    evaluator = [&heldout, scoring](const TQRModel<T>& m) {
      const auto acc = eval::reward_accuracy(m, std::span<const SequencePair>(heldout), scoring);
      return nlohmann::json{{"heldout_accuracy", acc.accuracy}, {"heldout_ties", acc.ties}};
    };
  }
  TrainReport report = train_loop(model, data, objective, train, evaluator);
  report.config = {{"model", tqr::to_json(cfg)}, {"objective", objectives::to_json(objective)},
                   {"train", to_json(train)}, {"scoring", eval::to_string(scoring)}};
  auto ckpt = tqr::make_checkpoint(model, checkpoint_extras("reward", vocab, &objective, train));
  TrainResult<T> result{std::move(model), std::move(report), std::move(ckpt)};
  finish(result, train, vocab);
  return result;
}

template <typename T>
eval::WinRates compare_policies(const TQRModel<T>& a, const TQRModel<T>& b, const data::Vocabulary& vocab,
                                const std::vector<std::string>& prompts, data::Rule rule,
                                const eval::SampleOptions& sampling, std::uint64_t seed) {
  std::vector<std::string> ra, rb;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    ra.push_back(eval::sample(a, vocab, prompts[i], sampling, seed + i));
    rb.push_back(eval::sample(b, vocab, prompts[i], sampling, seed + i));
  }
  return eval::judge_win_rates(std::span<const std::string>(prompts), std::span<const std::string>(ra),
                               std::span<const std::string>(rb), rule);
}

template <typename T>
TrainResult<T> train_direct(const Dataset& data, const DirectEvalSpec& spec, const data::Vocabulary& vocab,
                            const ModelConfig& model_cfg, const ObjectiveConfig& objective, const TrainConfig& train,
                            const tqr::Checkpoint* init) {
  if (train.objective != ObjectiveKind::ava_d && train.objective != ObjectiveKind::ava_p) {
    throw ConfigError("train-direct accepts objectives ava_d and ava_p");
  }
  ModelConfig cfg = effective_model_config(model_cfg, objective, train.objective, vocab.size());
  std::optional<TQRModel<T>> start;
  if (objective.ablations.no_ptq) {
    cfg.q_mode = tqr::QMode::head;
    if (init) {
      start.emplace(tqr::load_pretrained<T>(*init, cfg));
      start->reinit_q_head(train.seed + 1);
    } else {
      start.emplace(TQRModel<T>::init(cfg, train.seed));
    }
  } else {
    if (!init) throw ConfigError("train-direct needs an SFT checkpoint (init_checkpoint) unless no_ptq is set");
    if (cfg.q_mode != tqr::QMode::policy_logits) {
      throw ConfigError("train-direct from a pretrained policy uses q_mode policy_logits");
    }
    start.emplace(tqr::load_pretrained<T>(*init, cfg));
  }
  TQRModel<T> model = std::move(*start);

  std::optional<TQRModel<T>> reference;
  // The reference is read through the same Q mapping so both policies are
  // sampled the same way.
  if (spec.reference) reference.emplace(tqr::load_pretrained<T>(*spec.reference, cfg));
  const eval::PolicySource source = eval::PolicySource::boltzmann;
  Evaluator<T> evaluator = [&](const TQRModel<T>& m) {
    nlohmann::json j = nlohmann::json::object();
    if (!spec.heldout.empty()) {
      const double nll = eval::mean_nll(m, std::span<const TokenSequence>(spec.heldout), source);
      j["heldout_nll"] = nll;
      j["heldout_perplexity"] = std::exp(nll);
    }
    if (reference && spec.rule && !spec.prompts.empty()) {
      j["vs_reference"] = eval::to_json(
          compare_policies(m, *reference, vocab, spec.prompts, *spec.rule, spec.sampling, spec.seed));
    }
    return j;
  };
  TrainReport report = train_loop(model, data, objective, train, evaluator);
  report.config = {{"model", tqr::to_json(cfg)}, {"objective", objectives::to_json(objective)},
                   {"train", to_json(train)}};
  auto ckpt = tqr::make_checkpoint(model, checkpoint_extras("policy", vocab, &objective, train));
  TrainResult<T> result{std::move(model), std::move(report), std::move(ckpt)};
  finish(result, train, vocab);
  return result;
}

void write_run_dir(const std::filesystem::path& dir, const TrainReport& report, const tqr::Checkpoint& ckpt,
                   const data::Vocabulary& vocab) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << text;
  };
  write("config.json", eval::dump_report(report.config));
  std::string lines;
  for (const auto& s : report.steps) lines += eval::round_reals(to_json(s)).dump() + "\n";
  for (const auto& e : report.evals) lines += eval::round_reals(nlohmann::json{{"eval", e}}).dump() + "\n";
  write("metrics.jsonl", lines);
  write("report.json", eval::dump_report(report.to_json()));
  write("timing.json", eval::dump_report({{"wall_clock_seconds", report.wall_clock_seconds}}));
  vocab.save((dir / "vocab.txt").string());
  tqr::save_checkpoint(ckpt, dir / "checkpoint.tqr");
}

data::Vocabulary checkpoint_vocabulary(const tqr::Checkpoint& ckpt) {
  if (!ckpt.config.contains("vocab")) throw FormatError("checkpoint has no vocabulary");
  return data::Vocabulary::from_strings(ckpt.config.at("vocab").get<std::vector<std::string>>());
}

#define AVA_INSTANTIATE_PIPELINES(T)                                                                          \
  template class Optimizer<T>;                                                                                \
  template double clip_gradients(std::vector<Array<T>>&, double);                                             \
  template BatchLoss<T> batch_loss(const TQRModel<T>&, Tape<T>&, std::span<const Var<T>>, const Dataset&,      \
                                   std::span<const std::size_t>, const ObjectiveConfig&, const TrainConfig&); \
  template TrainReport train_loop(TQRModel<T>&, const Dataset&, const ObjectiveConfig&, const TrainConfig&,   \
                                  const Evaluator<T>&);                                                       \
  template TrainResult<T> sft_pretrain(const std::vector<TokenSequence>&, const std::vector<TokenSequence>&,  \
                                       const data::Vocabulary&, const ModelConfig&, const TrainConfig&);      \
  template TrainResult<T> train_reward_model(const Dataset&, const std::vector<SequencePair>&,                \
                                             const data::Vocabulary&, const ModelConfig&,                     \
                                             const ObjectiveConfig&, const TrainConfig&,                      \
                                             const tqr::Checkpoint*, eval::Scoring);                          \
  template TrainResult<T> train_direct(const Dataset&, const DirectEvalSpec&, const data::Vocabulary&,        \
                                       const ModelConfig&, const ObjectiveConfig&, const TrainConfig&,        \
                                       const tqr::Checkpoint*);                                               \
  template eval::WinRates compare_policies(const TQRModel<T>&, const TQRModel<T>&, const data::Vocabulary&,   \
                                           const std::vector<std::string>&, data::Rule,                       \
                                           const eval::SampleOptions&, std::uint64_t);

AVA_INSTANTIATE_PIPELINES(float)
AVA_INSTANTIATE_PIPELINES(double)

}  // namespace ava::pipelines
