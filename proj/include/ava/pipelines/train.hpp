#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ava/data/synthetic.hpp"
#include "ava/data/vocab.hpp"
#include "ava/eval/eval.hpp"
#include "ava/objectives/objectives.hpp"
#include "ava/tqr/checkpoint.hpp"

namespace ava::pipelines {

using data::SequencePair;
using data::TokenSequence;
using objectives::ObjectiveBreakdown;
using objectives::ObjectiveConfig;
using tqr::ModelConfig;
using tqr::TQRModel;

enum class OptimizerKind { sgd, adam };
enum class ObjectiveKind { ava_d, ava_p, bradley_terry, sft };
enum class Precision { f32, f64 };

std::string to_string(OptimizerKind k);
std::string to_string(ObjectiveKind k);
std::string to_string(Precision p);
ObjectiveKind parse_objective_kind(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  ObjectiveKind objective = ObjectiveKind::ava_p;
  double cer_weight = 1.0;
  // Held-out evaluation every this many steps; 0 evaluates only at the end.
  std::size_t eval_every = 0;
  std::string checkpoint_dir;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  Precision precision = Precision::f32;
  bool shuffle = true;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Plain SGD or bias-corrected Adam over a parameter set. Moments are kept
// in double precision.
template <typename T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const tqr::Parameters<T>& params);
  void step(tqr::Parameters<T>& params, const std::vector<grad::Array<T>>& grads);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Rescales gradients in place when their global norm exceeds max_norm (no-op
// for max_norm <= 0). Returns the norm before clipping.
template <typename T>
double clip_gradients(std::vector<grad::Array<T>>& grads, double max_norm);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  ObjectiveBreakdown components;
  double cer = 0.0;
  double grad_norm = 0.0;
};

nlohmann::json to_json(const StepRecord& r);

struct TrainReport {
  std::vector<StepRecord> steps;
  std::vector<nlohmann::json> evals;  // {"step": s, ...metrics}
  nlohmann::json final_metrics = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  double wall_clock_seconds = 0.0;

  std::vector<double> loss_history() const;
  // Deterministic content only; wall-clock time is reported separately.
  nlohmann::json to_json() const;
};

// Training data for one run: sequences (demonstrations, SFT) or pairs.
struct Dataset {
  std::vector<TokenSequence> sequences;
  std::vector<SequencePair> pairs;
};

template <typename T>
using Evaluator = std::function<nlohmann::json(const TQRModel<T>&)>;

template <typename T>
struct TrainResult {
  TQRModel<T> model;
  TrainReport report;
  tqr::Checkpoint checkpoint;
};

// Loss the trainer minimizes on one batch. For ava_p this is the AVA-p loss
// plus cer_weight times CER (the CER term is skipped entirely when the weight
// is zero or no_cer is set).
template <typename T>
struct BatchLoss {
  grad::Var<T> total;
  ObjectiveBreakdown breakdown;
  double cer = 0.0;
};

template <typename T>
BatchLoss<T> batch_loss(const TQRModel<T>& model, grad::Tape<T>& tape, std::span<const grad::Var<T>> params,
                        const Dataset& data, std::span<const std::size_t> rows, const ObjectiveConfig& objective,
                        const TrainConfig& train);

// Runs the shared update loop: fixed epochs, seeded shuffling, one optimizer
// step per batch. Throws DivergenceError on a non-finite loss.
template <typename T>
TrainReport train_loop(TQRModel<T>& model, const Dataset& data, const ObjectiveConfig& objective,
                       const TrainConfig& train, const Evaluator<T>& evaluator = {});

// Model config actually trained: vocabulary size from the vocabulary, alpha
// and beta from the objective, weighting off for no_rwt and Bradley-Terry.
ModelConfig effective_model_config(ModelConfig model, const ObjectiveConfig& objective, ObjectiveKind kind,
                                   std::size_t vocab_size);

template <typename T>
TrainResult<T> sft_pretrain(const std::vector<TokenSequence>& demos, const std::vector<TokenSequence>& heldout,
                            const data::Vocabulary& vocab, const ModelConfig& model, const TrainConfig& train);

// Reward modeling. ava_d trains on data.sequences, ava_p and Bradley-Terry
// on data.pairs. Starts from `init` when given, otherwise from a fresh
// initialization. Held-out reward accuracy is reported.
template <typename T>
TrainResult<T> train_reward_model(const Dataset& data, const std::vector<SequencePair>& heldout,
                                  const data::Vocabulary& vocab, const ModelConfig& model,
                                  const ObjectiveConfig& objective, const TrainConfig& train,
                                  const tqr::Checkpoint* init = nullptr, eval::Scoring scoring = eval::Scoring::last_step);

struct DirectEvalSpec {
  std::vector<TokenSequence> heldout;  // demonstrations for held-out NLL
  std::vector<std::string> prompts;    // prompts for the judge comparison
  std::optional<data::Rule> rule;
  const tqr::Checkpoint* reference = nullptr;  // compared policy (the SFT checkpoint)
  eval::SampleOptions sampling;
  std::uint64_t seed = 0;
};

// Direct optimization of the policy. Requires `init` (an SFT checkpoint)
// unless no_ptq is set, in which case the Q head is freshly initialized.
template <typename T>
TrainResult<T> train_direct(const Dataset& data, const DirectEvalSpec& eval_spec, const data::Vocabulary& vocab,
                            const ModelConfig& model, const ObjectiveConfig& objective, const TrainConfig& train,
                            const tqr::Checkpoint* init);

// Samples one response per prompt from each policy with shared seeds and
// judges a against b.
template <typename T>
eval::WinRates compare_policies(const TQRModel<T>& a, const TQRModel<T>& b, const data::Vocabulary& vocab,
                                const std::vector<std::string>& prompts, data::Rule rule,
                                const eval::SampleOptions& sampling, std::uint64_t seed);

// Writes config.json, metrics.jsonl, report.json, timing.json, vocab.txt and
// checkpoint.tqr into `dir`.
void write_run_dir(const std::filesystem::path& dir, const TrainReport& report, const tqr::Checkpoint& ckpt,
                   const data::Vocabulary& vocab);

// Vocabulary stored in a checkpoint's config.
data::Vocabulary checkpoint_vocabulary(const tqr::Checkpoint& ckpt);

}  // namespace ava::pipelines
