#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ava/data/synthetic.hpp"
#include "ava/eval/eval.hpp"

namespace ava::pipelines {

struct BonComparison {
  std::size_t n = 0;
  eval::WinRates vs_single;  // BoN output judged against a single sample
  double mean_rule_score_bon = 0.0;
  double mean_rule_score_single = 0.0;
  double mean_reward_bon = 0.0;
  double mean_reward_single = 0.0;
  std::vector<std::string> bon;
  std::vector<std::string> single;
};

nlohmann::json to_json(const BonComparison& c, bool with_texts = false);

// Per prompt, draws one single sample and one best-of-n set from independent
// seeds and judges the reranked output against the single sample.
template <typename T>
BonComparison bon_vs_single(const tqr::TQRModel<T>& policy, const eval::Scorer& reward, const data::Vocabulary& vocab,
                            const std::vector<std::string>& prompts, data::Rule rule, std::size_t n,
                            const eval::SampleOptions& sampling, std::uint64_t seed);

}  // namespace ava::pipelines
