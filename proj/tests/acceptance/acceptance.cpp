// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Usage: acceptance [criterion ...]   (default: all)

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ava/data/synthetic.hpp"
#include "ava/grad/numeric.hpp"
#include "ava/objectives/objectives.hpp"
#include "ava/pipelines/bon.hpp"
#include "ava/pipelines/fixtures.hpp"
#include "ava/pipelines/train.hpp"
#include "ava/tqr/heads.hpp"

using namespace ava;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

// token_count task: 2000 training pairs, 500 held-out pairs from an
// independent generator seed, vocabulary from the training corpus.
struct Task {
  data::Vocabulary vocab;
  std::vector<data::PreferencePair> train_raw, heldout_raw;
  std::vector<data::SequencePair> train, heldout;
  std::vector<data::TokenSequence> chosen, heldout_chosen;
  std::vector<std::string> heldout_prompts;
};

Task make_task(std::uint64_t seed) {
  Task t;
  t.train_raw = data::gen_synthetic_preferences(seed, 2000, data::Rule::token_count);
  t.heldout_raw = data::gen_synthetic_preferences(seed + 1000, 500, data::Rule::token_count);
  t.vocab = data::Vocabulary::from_corpus(data::corpus_texts(t.train_raw));
  t.train = data::tokenize_all(t.train_raw, t.vocab);
  t.heldout = data::tokenize_all(t.heldout_raw, t.vocab);
  t.chosen = data::tokenize_all(data::chosen_halves(t.train_raw), t.vocab);
  t.heldout_chosen = data::tokenize_all(data::chosen_halves(t.heldout_raw), t.vocab);
  for (const auto& p : t.heldout_raw) t.heldout_prompts.push_back(p.prompt);
  return t;
}

pipelines::TrainConfig reward_train(pipelines::ObjectiveKind kind, std::uint64_t seed) {
  pipelines::TrainConfig t;
  t.objective = kind;
  t.epochs = 10;
  t.seed = seed;
  return t;
}

// Trained artifacts shared between criteria, built on first use.
struct Cache {
  std::map<std::uint64_t, Task> tasks;
  std::map<std::uint64_t, pipelines::TrainResult<float>> ava_p, sft;

  const Task& task(std::uint64_t seed) {
    if (!tasks.count(seed)) tasks.emplace(seed, make_task(seed));
    return tasks.at(seed);
  }
  const pipelines::TrainResult<float>& reward_ava_p(std::uint64_t seed) {
    if (!ava_p.count(seed)) {
      const auto& t = task(seed);
      ava_p.emplace(seed, pipelines::train_reward_model<float>(
                              {{}, t.train}, t.heldout, t.vocab, tqr::ModelConfig{}, objectives::ObjectiveConfig{},
                              reward_train(pipelines::ObjectiveKind::ava_p, seed)));
    }
    return ava_p.at(seed);
  }
  const pipelines::TrainResult<float>& sft_policy(std::uint64_t seed) {
    if (!sft.count(seed)) {
      const auto& t = task(seed);
      pipelines::TrainConfig st;
      st.epochs = 3;
      st.seed = seed;
      sft.emplace(seed, pipelines::sft_pretrain<float>(t.chosen, t.heldout_chosen, t.vocab, tqr::ModelConfig{}, st));
    }
    return sft.at(seed);
  }
};

double heldout_accuracy(const pipelines::TrainResult<float>& r) {
  return r.report.final_metrics.at("heldout_accuracy").get<double>();
}

// 1. Gradients of each objective against central differences.
Outcome gradient_oracle(Cache&) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o{true, ""};
  for (const char* name : {"ava_d", "ava_p", "cer", "bradley_terry"}) {
    const auto r = pipelines::check_objective_gradients(name);
    o.pass = o.pass && r.max_rel_error <= 1e-4;
    o.detail += std::string(name) + " " + fmt(r.max_rel_error, 3) + ", ";
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs <= 60.0;
  o.detail += "tolerance 1e-4, " + fmt(secs, 3) + " s (limit 60)";
  return o;
}

// 2. Closed forms.
Outcome closed_forms(Cache&) {
  double worst_kl = std::max({std::abs(grad::gaussian_kl_to_std_normal(0.0, 1.0) - 0.0),
                              std::abs(grad::gaussian_kl_to_std_normal(1.0, 1.0) - 0.5),
                              std::abs(grad::gaussian_kl_to_std_normal(0.0, 2.0) - 0.806853)});
  Rng rng(2024);
  double worst_ls = 0.0, worst_shift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> row(2 + rng.below(30));
    for (auto& x : row) x = 20.0 * (rng.uniform() - 0.5);
    const auto ls = grad::log_softmax(row);
    const auto sm = grad::softmax(row);
    for (std::size_t j = 0; j < row.size(); ++j) worst_ls = std::max(worst_ls, std::abs(ls[j] - std::log(sm[j])));
    const double beta = 0.1 + 3.0 * rng.uniform(), c = 50.0 * (rng.uniform() - 0.5);
    auto shifted = row;
    for (auto& x : shifted) x += c;
    const auto a = tqr::boltzmann_policy(row, beta), b = tqr::boltzmann_policy(shifted, beta);
    for (std::size_t j = 0; j < row.size(); ++j) worst_shift = std::max(worst_shift, std::abs(a[j] - b[j]));
  }

  grad::Array<double> uniform(grad::Shape{3, 3}, std::vector<double>{1, 0, 0, 0.5, 0.5, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto w = tqr::reward_weights(uniform, 3);
  const double expected[3] = {0.611111, 0.277778, 0.111111};
  double worst_example = 0.0;
  for (int j = 0; j < 3; ++j) worst_example = std::max(worst_example, std::abs(w[j] - expected[j]));

  const data::Vocabulary vocab(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'x'});
  double worst_sum = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    tqr::ModelConfig cfg;
    cfg.vocab_size = vocab.size();
    const auto model = tqr::TQRModel<double>::init(cfg, s);
    const auto seq = data::tokenize(std::string(rng.below(4), 'x'), std::string(1 + rng.below(20), 'a' + rng.below(4)), vocab);
    const auto v = model.evaluate(seq.ids);
    double sum = 0.0;
    for (double x : v.reward_weights.data) sum += x;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  const bool pass = worst_kl <= 1e-6 && worst_ls <= 1e-9 && worst_shift <= 1e-9 && worst_example <= 1e-6 &&
                    worst_sum <= 1e-5;
  return {pass, "kl " + fmt(worst_kl, 2) + " (1e-6), log_softmax " + fmt(worst_ls, 2) + " (1e-9), shift " +
                    fmt(worst_shift, 2) + " (1e-9), weights example " + fmt(worst_example, 2) +
                    " (1e-6), weight sums " + fmt(worst_sum, 2) + " (1e-5)"};
}

// Boltzmann negative log-likelihood over counted steps, straight from Q.
double boltzmann_nll(const tqr::TQRModel<double>& model, std::span<const data::TokenSequence> seqs, double beta) {
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

// 3. Ablation identities.
Outcome degeneration(Cache&) {
  const auto all = data::gen_synthetic_preferences(11, 64, data::Rule::token_count);
  const auto vocab = data::Vocabulary::from_corpus(data::corpus_texts(all));
  const auto pairs = data::tokenize_all(all, vocab);
  const auto chosen = data::tokenize_all(data::chosen_halves(all), vocab);
  tqr::ModelConfig mc;
  mc.vocab_size = vocab.size();
  const auto model = tqr::TQRModel<double>::init(mc, 5);

  objectives::ObjectiveConfig no_irl;
  no_irl.ablations.no_irl = true;
  const double irl_loss =
      objectives::evaluate_ava_d(model, std::span<const data::TokenSequence>(chosen), no_irl).total;
  const double nll = boltzmann_nll(model, std::span<const data::TokenSequence>(chosen), no_irl.beta);
  const double irl_gap = std::abs(irl_loss - nll);

  objectives::ObjectiveConfig chosen_only;
  chosen_only.ablations.no_neg = true;
  chosen_only.pair_term_scope = objectives::PairTermScope::chosen_only;
  const double p = objectives::evaluate_ava_p(model, std::span<const data::SequencePair>(pairs), chosen_only).total;
  const double d = objectives::evaluate_ava_d(model, std::span<const data::TokenSequence>(chosen), chosen_only).total;

  pipelines::TrainConfig t;
  t.objective = pipelines::ObjectiveKind::ava_p;
  t.epochs = 2;
  t.precision = pipelines::Precision::f64;
  t.cer_weight = 0.0;
  const std::vector<data::SequencePair> few(pairs.begin(), pairs.begin() + 48);
  const auto a = pipelines::train_reward_model<double>({{}, few}, {}, vocab, mc, objectives::ObjectiveConfig{}, t);
  objectives::ObjectiveConfig no_cer;
  no_cer.ablations.no_cer = true;
  t.cer_weight = 1.0;
  const auto b = pipelines::train_reward_model<double>({{}, few}, {}, vocab, mc, no_cer, t);
  const bool same_history = a.report.loss_history() == b.report.loss_history();

  // Boltzmann NLL is recomputed independently, so agreement is to round-off.
  const bool pass = irl_gap <= 1e-12 && p == d && same_history;
  return {pass, "no_irl vs Boltzmann NLL " + fmt(irl_gap, 2) + " (1e-12), no_neg+chosen_only vs ava_d " +
                    (p == d ? "bit-identical" : "differs by " + fmt(std::abs(p - d), 3)) + ", cer_weight 0 history " +
                    (same_history ? "bit-identical" : "differs")};
}

// 4. TD error from Q values against the log-softmax-ratio form.
Outcome td_dual_path(Cache&) {
  const data::Vocabulary vocab(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'x', U'y', U'z'});
  Rng rng(404);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    tqr::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.q_mode = tqr::QMode::policy_logits;
    mc.alpha = 0.5 + 2.0 * rng.uniform();
    mc.reward_weighting = i % 2 == 0;
    const auto model = tqr::TQRModel<double>::init(mc, 1000 + i);
    std::string prompt, response;
    for (std::size_t k = rng.below(4); k > 0; --k) prompt += "xyz"[rng.below(3)];
    for (std::size_t k = 2 + rng.below(20); k > 0; --k) response += "abcd"[rng.below(4)];
    const auto seq = data::tokenize(prompt, response, vocab);
    const auto v = model.evaluate(seq.ids);
    const double gamma = 0.9 + 0.1 * rng.uniform();
    const auto a = objectives::td_error(v, seq, gamma);
    const auto b = objectives::td_error_log_ratio(v, seq, mc, gamma);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  return {worst <= 1e-9, "max |delta_Q - delta_ratio| " + fmt(worst, 3) + " over 100 sequences (1e-9)"};
}

// 5. AVA-p against Bradley-Terry reward modeling.
Outcome reward_modeling(Cache& cache) {
  const auto t0 = std::chrono::steady_clock::now();
  double ava = 0.0, bt = 0.0;
  std::string per_seed, return_sum;
  for (auto seed : kSeeds) {
    const double a = heldout_accuracy(cache.reward_ava_p(seed));
    const auto& t = cache.task(seed);
    // Informational only: the pass rule uses the default last-step score.
    return_sum += fmt(eval::reward_accuracy(cache.reward_ava_p(seed).model,
                                            std::span<const data::SequencePair>(t.heldout), eval::Scoring::return_sum)
                          .accuracy,
                      3) +
                  " ";
    const auto b = pipelines::train_reward_model<float>({{}, t.train}, t.heldout, t.vocab, tqr::ModelConfig{},
                                                        objectives::ObjectiveConfig{},
                                                        reward_train(pipelines::ObjectiveKind::bradley_terry, seed));
    ava += a;
    bt += heldout_accuracy(b);
    per_seed += fmt(a, 3) + "/" + fmt(heldout_accuracy(b), 3) + " ";
  }
  ava /= kSeeds.size();
  bt /= kSeeds.size();
  const double secs = seconds_since(t0);
  const bool pass = ava >= 0.90 && ava >= bt - 0.02 && secs <= 600.0;
  return {pass, "AVA-p " + fmt(ava) + " (>= 0.90), Bradley-Terry " + fmt(bt) + " (AVA-p >= BT - 0.02), per seed " +
                    per_seed + "(AVA-p/BT), AVA-p return_sum " + return_sum + "| " + fmt(secs, 3) + " s (limit 600)"};
}

// 6. AVA-d trained on chosen halves only.
Outcome ava_d_on_chosen(Cache& cache) {
  double sum = 0.0;
  std::string per_seed;
  for (auto seed : kSeeds) {
    const auto& t = cache.task(seed);
    const auto r = pipelines::train_reward_model<float>({t.chosen, {}}, t.heldout, t.vocab, tqr::ModelConfig{},
                                                        objectives::ObjectiveConfig{},
                                                        reward_train(pipelines::ObjectiveKind::ava_d, seed));
    sum += heldout_accuracy(r);
    per_seed += fmt(heldout_accuracy(r), 3) + " ";
  }
  const double mean = sum / kSeeds.size();
  return {mean >= 0.75, "mean held-out accuracy " + fmt(mean) + " (>= 0.75), per seed " + per_seed};
}

// 7. Best-of-8 reranked by the AVA-p reward against single samples.
Outcome best_of_n(Cache& cache) {
  const std::uint64_t seed = kSeeds.front();
  const auto& t = cache.task(seed);
  const auto& rm = cache.reward_ava_p(seed);
  const auto& policy = cache.sft_policy(seed);
  eval::SampleOptions so;
  so.source = eval::PolicySource::policy;
  const auto c = pipelines::bon_vs_single(policy.model, eval::model_scorer(rm.model, eval::Scoring::return_sum),
                                          t.vocab, t.heldout_prompts, data::Rule::token_count, 8, so, seed + 7);
  const double margin = c.vs_single.margin();
  return {margin >= 10.0, "win " + fmt(c.vs_single.win_rate) + " tie " + fmt(c.vs_single.tie_rate) + " lose " +
                              fmt(c.vs_single.lose_rate) + ", margin " + fmt(margin) + " (>= +10) over " +
                              std::to_string(c.vs_single.total) + " prompts; mean 'a' count " +
                              fmt(c.mean_rule_score_bon) + " vs " + fmt(c.mean_rule_score_single)};
}

// 8. Direct AVA-p optimization against the SFT checkpoint it started from.
Outcome direct_optimization(Cache& cache) {
  bool pass = true;
  std::string per_seed;
  for (auto seed : kSeeds) {
    const auto& t = cache.task(seed);
    const auto& sft = cache.sft_policy(seed);
    pipelines::DirectEvalSpec spec;
    spec.heldout = t.heldout_chosen;
    spec.prompts = t.heldout_prompts;
    spec.rule = data::Rule::token_count;
    spec.reference = &sft.checkpoint;
    spec.sampling.source = eval::PolicySource::policy;
    spec.seed = 99;
    pipelines::TrainConfig tc;
    tc.objective = pipelines::ObjectiveKind::ava_p;
    tc.epochs = 4;
    tc.seed = seed;
    const auto r = pipelines::train_direct<float>({{}, t.train}, spec, t.vocab, tqr::ModelConfig{},
                                                  objectives::ObjectiveConfig{}, tc, &sft.checkpoint);
    const auto& w = r.report.final_metrics.at("vs_reference");
    const double margin = w.at("win_rate").get<double>() - w.at("lose_rate").get<double>();
    pass = pass && margin >= 10.0;
    per_seed += "seed " + std::to_string(seed) + " win " + fmt(w.at("win_rate").get<double>()) + " lose " +
                fmt(w.at("lose_rate").get<double>()) + "; ";
  }
  return {pass, per_seed + "each win - lose >= +10"};
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && " + AVA_CLI_PATH + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Every subcommand twice in 64-bit mode; all outputs compared byte for byte.
Outcome determinism(Cache&) {
  const fs::path root = fs::temp_directory_path() / "ava_acceptance_determinism";
  fs::remove_all(root);
  const json config = {
      {"model", {{"d_model", 16}, {"n_layers", 1}, {"n_heads", 2}, {"max_seq_len", 32}}},
      {"train", {{"epochs", 1}, {"precision", "f64"}, {"seed", 5}, {"eval_every", 2}}},
      {"data", {{"train", "data/train.jsonl"}, {"heldout", "data/heldout.jsonl"}, {"rule", "token_count"},
                {"max_prompts", 20}}},
      {"checkpoints", {{"init", "sft/checkpoint.tqr"}, {"reward", "rm/checkpoint.tqr"},
                       {"policy", "sft/checkpoint.tqr"}, {"a", "direct/checkpoint.tqr"}, {"b", "sft/checkpoint.tqr"}}},
      {"sampling", {{"source", "policy"}}},
      {"eval", {{"n", 4}, {"prompts", {"x", "yz", "zzx"}}}}};
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "--n 60 --out data"},   {"sft", "--out sft"},
      {"train-reward", "--out rm"},        {"train-direct", "--out direct"},
      {"eval-accuracy", "--out acc"},      {"eval-bon", "--out bon"},
      {"eval-winrate", "--out win"},       {"sample", "--out sample"},
      {"grad-check", "--objective ava_d --out gc"}};

  std::map<std::string, std::string> stdout_of[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / (run == 0 ? "a" : "b");
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << config.dump(2);
    for (const auto& [cmd, args] : commands) {
      const auto r = run_cli(dir, cmd + " --config config.json " + args);
      if (r.code != 0) return {false, cmd + " exited with " + std::to_string(r.code) + ": " + r.out};
      stdout_of[run][cmd] = r.out;
    }
  }
  std::size_t compared = 0, timing = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    // Wall-clock time is the one intentionally nondeterministic output.
    if (rel.filename() == "timing.json") {
      ++timing;
      continue;
    }
    ++compared;
    if (!fs::exists(root / "b" / rel) || slurp(entry.path()) != slurp(root / "b" / rel)) differing.push_back(rel.string());
  }
  for (const auto& [cmd, args] : commands) {
    ++compared;
    if (stdout_of[0][cmd] != stdout_of[1][cmd]) differing.push_back(cmd + " stdout");
  }
  std::string detail = std::to_string(commands.size()) + " subcommands, " + std::to_string(compared) +
                       " outputs compared (timing.json excluded x" + std::to_string(timing) + ")";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& d : differing) detail += " " + d;
  }
  return {differing.empty() && compared > commands.size(), detail};
}

// 10. expected_return against the average of sampled Gaussian rewards.
Outcome monte_carlo(Cache&) {
  const data::Vocabulary vocab(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'x', U'y', U'z'});
  Rng pick(77);
  const std::size_t M = 100000;
  std::size_t ok = 0;
  double worst = 0.0;
  for (int f = 0; f < 20; ++f) {
    tqr::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.reward_weighting = f % 2 == 0;
    // Perturbed parameters so means and spreads differ across positions.
    const auto model = pipelines::fixture_model(mc, 500 + f, 0.5);
    std::string prompt, response;
    for (std::size_t k = pick.below(4); k > 0; --k) prompt += "xyz"[pick.below(3)];
    for (std::size_t k = 2 + pick.below(15); k > 0; --k) response += "abcd"[pick.below(4)];
    const auto seq = data::tokenize(prompt, response, vocab);
    const auto v = model.evaluate(seq.ids);
    const double expected = objectives::expected_return(v, seq);
    double var = 0.0;
    for (std::size_t k = seq.response_start; k < seq.length(); ++k) var += v.reward_std[k] * v.reward_std[k];
    Rng rng(derive_seed(10, f));
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      double ret = 0.0;
      for (std::size_t k = seq.response_start; k < seq.length(); ++k) ret += v.reward_mean[k] + v.reward_std[k] * rng.normal();
      sum += ret;
    }
    const double se = std::sqrt(var / static_cast<double>(M));
    const double z = std::abs(sum / static_cast<double>(M) - expected) / se;
    worst = std::max(worst, z);
    if (z <= 3.0) ++ok;
  }
  return {ok == 20, std::to_string(ok) + "/20 fixtures within 3 standard errors (M = 1e5), worst " + fmt(worst, 3) +
                        " SE"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome(Cache&)>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"closed-form identities", closed_forms},
      {"degeneration identities", degeneration},
      {"TD dual path", td_dual_path},
      {"reward modeling AVA-p vs Bradley-Terry", reward_modeling},
      {"AVA-d on chosen halves", ava_d_on_chosen},
      {"best-of-n vs single sample", best_of_n},
      {"direct optimization vs SFT", direct_optimization},
      {"determinism", determinism},
      {"Monte-Carlo expected return", monte_carlo}};

  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [criterion 1-10 ...]\n";
      return 2;
    }
    selected.insert(static_cast<std::size_t>(k));
  }

  Cache cache;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(cache);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << " ["
              << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
