// Command-line front end: data generation, training, evaluation, sampling
// and gradient checks. Results go to stdout as JSON; errors become a JSON
// object {"error": {"kind", "message"}} with exit code 1 (2 for usage).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <algorithm>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ava/data/records.hpp"
#include "ava/data/synthetic.hpp"
#include "ava/errors.hpp"
#include "ava/eval/report.hpp"
#include "ava/pipelines/bon.hpp"
#include "ava/pipelines/fixtures.hpp"
#include "ava/pipelines/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ava;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  // gen-data
  std::optional<std::string> rule;
  std::optional<std::size_t> n;
  std::optional<std::size_t> n_heldout;
  // grad-check
  std::string objective = "all";
  double epsilon = 1e-4;
  // sample
  std::vector<std::string> prompts;
};

const std::vector<std::string> kSections = {"model", "objective", "train", "data", "checkpoints", "sampling", "eval"};

// Parsed config file. Relative paths resolve against the file's directory.
class RunConfig {
 public:
  RunConfig(const Options& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config " + opt.config_path);
    try {
      root_ = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(opt.config_path + ": " + e.what());
    }
    if (!root_.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : root_.items()) {
      if (std::find(kSections.begin(), kSections.end(), key) == kSections.end()) {
        throw ConfigError("unknown config section '" + key + "'");
      }
      if (!value.is_object()) throw ConfigError("config section '" + key + "' must be an object");
    }
    base_ = fs::path(opt.config_path).parent_path();
  }

  json section(const std::string& name) const { return root_.contains(name) ? root_.at(name) : json::object(); }

  template <typename V>
  V get(const std::string& sec, const std::string& key, V fallback) const {
    const json s = section(sec);
    if (!s.contains(key)) return fallback;
    try {
      return s.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(sec + "." + key + ": " + e.what());
    }
  }

  bool has(const std::string& sec, const std::string& key) const { return section(sec).contains(key); }

  std::string path(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) throw ConfigError("config needs " + sec + "." + key);
    const fs::path p = get<std::string>(sec, key, "");
    return (p.is_absolute() || base_.empty() ? p : base_ / p).string();
  }

  std::optional<std::string> optional_path(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) return std::nullopt;
    return path(sec, key);
  }

  // Rejects keys of a section outside `allowed`.
  void check_keys(const std::string& sec, const std::vector<std::string>& allowed) const {
    const json s = section(sec);
    for (const auto& [key, value] : s.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError("unknown key '" + key + "' in config section '" + sec + "'");
      }
    }
  }

 private:
  json root_ = json::object();
  fs::path base_;
};

const std::vector<std::string> kDataKeys = {"train", "heldout", "demos", "rule", "n", "n_heldout",
                                            "min_response", "max_response", "min_prompt", "max_prompt", "max_prompts"};
const std::vector<std::string> kCheckpointKeys = {"init", "reference", "reward", "policy", "a", "b"};
const std::vector<std::string> kEvalKeys = {"scoring", "scorer", "n", "prompts", "seed"};

void emit(const json& result, const Options& opt, const std::string& file = "result.json") {
  const std::string text = eval::dump_report(result);
  std::cout << text;
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    std::ofstream out(fs::path(opt.out) / file, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (fs::path(opt.out) / file).string());
    out << text;
  }
}

void require_out(const Options& opt) {
  if (opt.out.empty()) throw ConfigError("--out is required for this command");
}

tqr::ModelConfig model_config(const RunConfig& rc) { return tqr::model_config_from_json(rc.section("model")); }

objectives::ObjectiveConfig objective_config(const RunConfig& rc) {
  return objectives::objective_config_from_json(rc.section("objective"));
}

pipelines::TrainConfig train_config(const RunConfig& rc, const Options& opt) {
  auto t = pipelines::train_config_from_json(rc.section("train"));
  if (opt.seed) t.seed = *opt.seed;
  t.checkpoint_dir = opt.out;
  return t;
}

std::uint64_t eval_seed(const RunConfig& rc, const Options& opt) {
  if (opt.seed) return *opt.seed;
  return rc.get<std::uint64_t>("eval", "seed", rc.get<std::uint64_t>("train", "seed", 0));
}

pipelines::Precision precision(const RunConfig& rc) {
  return pipelines::train_config_from_json(rc.section("train")).precision;
}

eval::SampleOptions sample_options(const RunConfig& rc) {
  rc.check_keys("sampling", {"max_len", "temperature", "greedy", "source"});
  eval::SampleOptions s;
  s.max_len = rc.get<std::size_t>("sampling", "max_len", s.max_len);
  s.temperature = rc.get<double>("sampling", "temperature", s.temperature);
  s.greedy = rc.get<bool>("sampling", "greedy", s.greedy);
  s.source = eval::parse_policy_source(rc.get<std::string>("sampling", "source", eval::to_string(s.source)));
  if (!(s.temperature > 0.0)) throw ConfigError("sampling.temperature must be positive");
  if (s.max_len == 0) throw ConfigError("sampling.max_len must be positive");
  return s;
}

data::Rule rule(const RunConfig& rc) {
  if (!rc.has("data", "rule")) throw ConfigError("config needs data.rule");
  return data::parse_rule(rc.get<std::string>("data", "rule", ""));
}

std::vector<data::PreferencePair> pairs(const RunConfig& rc, const std::string& key) {
  return data::load_preferences(rc.path("data", key));
}

// Held-out prompts, optionally capped by data.max_prompts.
std::vector<std::string> heldout_prompts(const RunConfig& rc) {
  std::vector<std::string> out;
  for (const auto& p : pairs(rc, "heldout")) out.push_back(p.prompt);
  const auto cap = rc.get<std::size_t>("data", "max_prompts", out.size());
  if (cap < out.size()) out.resize(cap);
  return out;
}

std::vector<data::Demonstration> demonstrations(const RunConfig& rc) {
  if (rc.has("data", "demos")) return data::load_demonstrations(rc.path("data", "demos"));
  return data::chosen_halves(pairs(rc, "train"));
}

data::Vocabulary corpus_vocabulary(const std::vector<std::string>& texts) {
  return data::Vocabulary::from_corpus(std::span<const std::string>(texts));
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

json run_summary(const pipelines::TrainReport& report, const std::string& command) {
  json j = {{"command", command}, {"steps", report.steps.size()}, {"final_metrics", report.final_metrics}};
  if (!report.steps.empty()) j["final_loss"] = report.steps.back().loss;
  return j;
}

// ---- commands ----

int gen_data(const RunConfig& rc, const Options& opt) {
  require_out(opt);
  rc.check_keys("data", kDataKeys);
  const data::Rule r = data::parse_rule(opt.rule ? *opt.rule : rc.get<std::string>("data", "rule", "token_count"));
  const std::size_t n = opt.n ? *opt.n : rc.get<std::size_t>("data", "n", 2000);
  const std::size_t n_held = opt.n_heldout ? *opt.n_heldout : rc.get<std::size_t>("data", "n_heldout", n / 4);
  const std::uint64_t seed = opt.seed ? *opt.seed : rc.get<std::uint64_t>("train", "seed", 0);
  data::SyntheticOptions so;
  so.min_response = rc.get<std::size_t>("data", "min_response", so.min_response);
  so.max_response = rc.get<std::size_t>("data", "max_response", so.max_response);
  so.min_prompt = rc.get<std::size_t>("data", "min_prompt", so.min_prompt);
  so.max_prompt = rc.get<std::size_t>("data", "max_prompt", so.max_prompt);

  auto all = data::gen_synthetic_preferences(seed, n + n_held, r, so);
  std::vector<data::PreferencePair> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<data::PreferencePair> held(all.begin() + static_cast<std::ptrdiff_t>(n), all.end());
  const fs::path dir = opt.out;
  fs::create_directories(dir);
  data::save_preferences((dir / "train.jsonl").string(), train);
  data::save_preferences((dir / "heldout.jsonl").string(), held);
  data::save_demonstrations((dir / "demos.jsonl").string(), data::chosen_halves(train));
  emit({{"command", "gen-data"},
        {"rule", data::to_string(r)},
        {"seed", seed},
        {"train", train.size()},
        {"heldout", held.size()},
        {"files", {"train.jsonl", "heldout.jsonl", "demos.jsonl"}}},
       opt, "gen_data.json");
  return 0;
}

template <typename T>
int sft(const RunConfig& rc, const Options& opt) {
  require_out(opt);
  rc.check_keys("data", kDataKeys);
  const auto demos = demonstrations(rc);
  std::vector<data::Demonstration> held;
  if (rc.has("data", "heldout")) held = data::chosen_halves(pairs(rc, "heldout"));
  auto texts = data::corpus_texts(demos);
  append(texts, data::corpus_texts(held));
  const auto vocab = corpus_vocabulary(texts);
  const auto result = pipelines::sft_pretrain<T>(data::tokenize_all(demos, vocab), data::tokenize_all(held, vocab),
                                                 vocab, model_config(rc), train_config(rc, opt));
  emit(run_summary(result.report, "sft"), opt, "summary.json");
  return 0;
}

template <typename T>
int train_reward(const RunConfig& rc, const Options& opt) {
  require_out(opt);
  rc.check_keys("data", kDataKeys);
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto train = train_config(rc, opt);
  const auto objective = objective_config(rc);
  const auto train_pairs = pairs(rc, "train");
  std::vector<data::PreferencePair> held;
  if (rc.has("data", "heldout")) held = pairs(rc, "heldout");

  std::optional<tqr::Checkpoint> init;
  if (auto p = rc.optional_path("checkpoints", "init")) init = tqr::load_checkpoint(*p);
  data::Vocabulary vocab;
  if (init) {
    vocab = pipelines::checkpoint_vocabulary(*init);
  } else {
    auto texts = data::corpus_texts(train_pairs);
    append(texts, data::corpus_texts(held));
    vocab = corpus_vocabulary(texts);
  }
  pipelines::Dataset ds;
  if (train.objective == pipelines::ObjectiveKind::ava_d) {
    ds.sequences = data::tokenize_all(rc.has("data", "demos") ? demonstrations(rc) : data::chosen_halves(train_pairs),
                                      vocab);
  } else {
    ds.pairs = data::tokenize_all(train_pairs, vocab);
  }
  const auto scoring = eval::parse_scoring(rc.get<std::string>("eval", "scoring", "last_step"));
  const auto result = pipelines::train_reward_model<T>(ds, data::tokenize_all(held, vocab), vocab, model_config(rc),
                                                       objective, train, init ? &*init : nullptr, scoring);
  emit(run_summary(result.report, "train-reward"), opt, "summary.json");
  return 0;
}

template <typename T>
int train_direct(const RunConfig& rc, const Options& opt) {
  require_out(opt);
  rc.check_keys("data", kDataKeys);
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto train = train_config(rc, opt);
  const auto objective = objective_config(rc);

  std::optional<tqr::Checkpoint> init, reference;
  if (auto p = rc.optional_path("checkpoints", "init")) init = tqr::load_checkpoint(*p);
  if (auto p = rc.optional_path("checkpoints", "reference")) reference = tqr::load_checkpoint(*p);
  else if (init) reference = init;

  data::Vocabulary vocab;
  if (init) {
    vocab = pipelines::checkpoint_vocabulary(*init);
  } else {
    auto texts = data::corpus_texts(pairs(rc, "train"));
    if (rc.has("data", "heldout")) append(texts, data::corpus_texts(pairs(rc, "heldout")));
    vocab = corpus_vocabulary(texts);
  }
  pipelines::Dataset ds;
  if (train.objective == pipelines::ObjectiveKind::ava_d) ds.sequences = data::tokenize_all(demonstrations(rc), vocab);
  else ds.pairs = data::tokenize_all(pairs(rc, "train"), vocab);

  pipelines::DirectEvalSpec spec;
  if (rc.has("data", "heldout")) {
    spec.heldout = data::tokenize_all(data::chosen_halves(pairs(rc, "heldout")), vocab);
    spec.prompts = heldout_prompts(rc);
  }
  if (rc.has("data", "rule")) spec.rule = rule(rc);
  spec.reference = reference ? &*reference : nullptr;
  spec.sampling = sample_options(rc);
  spec.seed = eval_seed(rc, opt);
  const auto result =
      pipelines::train_direct<T>(ds, spec, vocab, model_config(rc), objective, train, init ? &*init : nullptr);
  emit(run_summary(result.report, "train-direct"), opt, "summary.json");
  return 0;
}

template <typename T>
int eval_accuracy(const RunConfig& rc, const Options& opt) {
  rc.check_keys("data", kDataKeys);
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto held = pairs(rc, "heldout");
  const auto scorer_kind = rc.get<std::string>("eval", "scorer", "model");
  json result = {{"command", "eval-accuracy"}, {"scorer", scorer_kind}};
  eval::AccuracyResult acc;
  if (scorer_kind == "oracle") {
    // The synthetic rule itself as the reward.
    const data::Rule r = rule(rc);
    const auto vocab = corpus_vocabulary(data::corpus_texts(held));
    const auto seqs = data::tokenize_all(held, vocab);
    eval::Scorer scorer = [&](const data::TokenSequence& seq) {
      const auto [prompt, response] = data::detokenize(seq, vocab);
      return data::rule_score(r, prompt, response);
    };
    acc = eval::reward_accuracy(scorer, std::span<const data::SequencePair>(seqs));
    result["rule"] = data::to_string(r);
  } else if (scorer_kind == "model") {
    const auto ckpt = tqr::load_checkpoint(rc.path("checkpoints", "reward"));
    const auto vocab = pipelines::checkpoint_vocabulary(ckpt);
    const auto model = tqr::model_from_checkpoint<T>(ckpt);
    const auto scoring = eval::parse_scoring(rc.get<std::string>("eval", "scoring", "last_step"));
    const auto seqs = data::tokenize_all(held, vocab);
    acc = eval::reward_accuracy(model, std::span<const data::SequencePair>(seqs), scoring);
    result["scoring"] = eval::to_string(scoring);
  } else {
    throw ConfigError("eval.scorer must be 'model' or 'oracle'");
  }
  result.update(eval::to_json(acc));
  emit(result, opt);
  return 0;
}

template <typename T>
int eval_bon(const RunConfig& rc, const Options& opt) {
  rc.check_keys("data", kDataKeys);
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto policy_ckpt = tqr::load_checkpoint(rc.path("checkpoints", "policy"));
  const auto reward_ckpt = tqr::load_checkpoint(rc.path("checkpoints", "reward"));
  const auto vocab = pipelines::checkpoint_vocabulary(policy_ckpt);
  if (!(pipelines::checkpoint_vocabulary(reward_ckpt) == vocab)) {
    throw VocabularyError("policy and reward checkpoints use different vocabularies");
  }
  const auto policy = tqr::model_from_checkpoint<T>(policy_ckpt);
  const auto reward = tqr::model_from_checkpoint<T>(reward_ckpt);
  const auto scoring = eval::parse_scoring(rc.get<std::string>("eval", "scoring", "return_sum"));
  const auto n = rc.get<std::size_t>("eval", "n", 8);
  const auto cmp = pipelines::bon_vs_single(policy, eval::model_scorer(reward, scoring), vocab, heldout_prompts(rc),
                                            rule(rc), n, sample_options(rc), eval_seed(rc, opt));
  json result = {{"command", "eval-bon"}, {"scoring", eval::to_string(scoring)}};
  result.update(pipelines::to_json(cmp));
  emit(result, opt);
  return 0;
}

template <typename T>
int eval_winrate(const RunConfig& rc, const Options& opt) {
  rc.check_keys("data", kDataKeys);
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto a_ckpt = tqr::load_checkpoint(rc.path("checkpoints", "a"));
  const auto b_ckpt = tqr::load_checkpoint(rc.path("checkpoints", "b"));
  const auto vocab = pipelines::checkpoint_vocabulary(a_ckpt);
  if (!(pipelines::checkpoint_vocabulary(b_ckpt) == vocab)) {
    throw VocabularyError("compared checkpoints use different vocabularies");
  }
  const auto a = tqr::model_from_checkpoint<T>(a_ckpt);
  // b is read through a's Q mapping so both are sampled alike.
  const auto b = tqr::load_pretrained<T>(b_ckpt, a.config());
  const auto rates = pipelines::compare_policies(a, b, vocab, heldout_prompts(rc), rule(rc), sample_options(rc),
                                                 eval_seed(rc, opt));
  json result = {{"command", "eval-winrate"}};
  result.update(eval::to_json(rates));
  emit(result, opt);
  return 0;
}

template <typename T>
int sample_cmd(const RunConfig& rc, const Options& opt) {
  rc.check_keys("checkpoints", kCheckpointKeys);
  rc.check_keys("eval", kEvalKeys);
  const auto ckpt = tqr::load_checkpoint(rc.path("checkpoints", "policy"));
  const auto vocab = pipelines::checkpoint_vocabulary(ckpt);
  const auto model = tqr::model_from_checkpoint<T>(ckpt);
  std::vector<std::string> prompts = opt.prompts;
  if (prompts.empty()) prompts = rc.get<std::vector<std::string>>("eval", "prompts", {});
  if (prompts.empty()) throw ConfigError("sample needs --prompt or eval.prompts");
  const auto n = rc.get<std::size_t>("eval", "n", 1);
  const auto options = sample_options(rc);
  const auto seed = eval_seed(rc, opt);
  json samples = json::array();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    json responses = json::array();
    for (std::size_t k = 0; k < n; ++k) {
      responses.push_back(eval::sample(model, vocab, prompts[i], options, derive_seed(seed, i * n + k)));
    }
    samples.push_back({{"prompt", prompts[i]}, {"responses", responses}});
  }
  emit({{"command", "sample"}, {"seed", seed}, {"samples", samples}}, opt);
  return 0;
}

int grad_check(const Options& opt) {
  constexpr double kTolerance = 1e-4;
  std::vector<std::string> names = {"ava_d", "ava_p", "cer", "bradley_terry", "sft"};
  if (opt.objective != "all") names = {opt.objective};
  json results = json::array();
  bool pass = true;
  const auto fx = pipelines::grad_fixture();
  const auto layout = tqr::parameter_layout(fx.model);
  for (const auto& name : names) {
    const auto r = pipelines::check_objective_gradients(name, opt.seed.value_or(0), opt.epsilon);
    pass = pass && r.max_rel_error <= kTolerance;
    results.push_back({{"objective", name},
                       {"max_rel_err", r.max_rel_error},
                       {"checked", r.checked},
                       {"worst_parameter", layout.at(r.worst_param).first},
                       {"worst_index", r.worst_index},
                       {"worst_analytic", r.worst_analytic},
                       {"worst_numeric", r.worst_numeric}});
  }
  emit({{"command", "grad-check"},
        {"epsilon", opt.epsilon},
        {"tolerance", kTolerance},
        {"pass", pass},
        {"results", results}},
       opt);
  return 0;
}

template <template <typename> class Cmd>
int dispatch(const RunConfig& rc, const Options& opt) {
  return precision(rc) == pipelines::Precision::f64 ? Cmd<double>{}(rc, opt) : Cmd<float>{}(rc, opt);
}

#define AVA_COMMAND(Name, fn)                                                              \
  template <typename T>                                                                    \
  struct Name {                                                                            \
    int operator()(const RunConfig& rc, const Options& opt) const { return fn<T>(rc, opt); } \
  };

AVA_COMMAND(SftCmd, sft)
AVA_COMMAND(TrainRewardCmd, train_reward)
AVA_COMMAND(TrainDirectCmd, train_direct)
AVA_COMMAND(EvalAccuracyCmd, eval_accuracy)
AVA_COMMAND(EvalBonCmd, eval_bon)
AVA_COMMAND(EvalWinrateCmd, eval_winrate)
AVA_COMMAND(SampleCmd, sample_cmd)

json error_object(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward modeling and alignment with variational inverse RL on a small transformer"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "seed (overrides the config)");
    sub->add_option("--out", opt.out, "output directory");
    return sub;
  };
  auto* gen = common(app.add_subcommand("gen-data", "generate a synthetic preference task"));
  gen->add_option("--rule", opt.rule, "token_count, prefix_match or length_pref");
  gen->add_option("--n", opt.n, "training pairs");
  gen->add_option("--n-heldout", opt.n_heldout, "held-out pairs (default n/4)");
  auto* sft = common(app.add_subcommand("sft", "supervised fine-tuning on demonstrations"));
  auto* reward = common(app.add_subcommand("train-reward", "train a reward model (ava_p, ava_d, bradley_terry)"));
  auto* direct = common(app.add_subcommand("train-direct", "optimize a policy directly from an SFT checkpoint"));
  auto* acc = common(app.add_subcommand("eval-accuracy", "held-out reward accuracy"));
  auto* bon = common(app.add_subcommand("eval-bon", "best-of-n reranking against single samples"));
  auto* win = common(app.add_subcommand("eval-winrate", "judge win rates of policy a against policy b"));
  auto* smp = common(app.add_subcommand("sample", "sample responses from a policy"));
  smp->add_option("--prompt", opt.prompts, "prompt (repeatable)");
  auto* gc = common(app.add_subcommand("grad-check", "check objective gradients on the toy fixture"));
  gc->add_option("--objective", opt.objective, "ava_d, ava_p, cer, bradley_terry, sft or all")
      ->check(CLI::IsMember({"ava_d", "ava_p", "cer", "bradley_terry", "sft", "all"}));
  gc->add_option("--epsilon", opt.epsilon, "finite-difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << error_object("usage", e.what()).dump(2) << "\n";
    std::cerr << app.help();
    return 2;
  }

  try {
    const RunConfig rc(opt);
    if (gen->parsed()) return gen_data(rc, opt);
    if (sft->parsed()) return dispatch<SftCmd>(rc, opt);
    if (reward->parsed()) return dispatch<TrainRewardCmd>(rc, opt);
    if (direct->parsed()) return dispatch<TrainDirectCmd>(rc, opt);
    if (acc->parsed()) return dispatch<EvalAccuracyCmd>(rc, opt);
    if (bon->parsed()) return dispatch<EvalBonCmd>(rc, opt);
    if (win->parsed()) return dispatch<EvalWinrateCmd>(rc, opt);
    if (smp->parsed()) return dispatch<SampleCmd>(rc, opt);
    if (gc->parsed()) return grad_check(opt);
  } catch (const Error& e) {
    std::cout << error_object(e.kind(), e.what()).dump(2) << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cout << error_object("parse", e.what()).dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cout << error_object("internal", e.what()).dump(2) << "\n";
    return 1;
  }
  return 2;
}
