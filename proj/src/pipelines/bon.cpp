#include "ava/pipelines/bon.hpp"

#include "ava/errors.hpp"
#include "ava/rng.hpp"

namespace ava::pipelines {

nlohmann::json to_json(const BonComparison& c, bool with_texts) {
  nlohmann::json j = {{"n", c.n},
                      {"vs_single", eval::to_json(c.vs_single)},
                      {"mean_rule_score_bon", c.mean_rule_score_bon},
                      {"mean_rule_score_single", c.mean_rule_score_single},
                      {"mean_reward_bon", c.mean_reward_bon},
                      {"mean_reward_single", c.mean_reward_single}};
  if (with_texts) {
    j["bon"] = c.bon;
    j["single"] = c.single;
  }
  return j;
}

template <typename T>
BonComparison bon_vs_single(const tqr::TQRModel<T>& policy, const eval::Scorer& reward, const data::Vocabulary& vocab,
                            const std::vector<std::string>& prompts, data::Rule rule, std::size_t n,
                            const eval::SampleOptions& sampling, std::uint64_t seed) {
  if (prompts.empty()) throw DomainError("bon_vs_single: no prompts");
  BonComparison c;
  c.n = n;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::string& p = prompts[i];
    const auto best = eval::best_of_n(policy, reward, vocab, p, n, sampling, derive_seed(seed, 2 * i));
    const std::string one = eval::sample(policy, vocab, p, sampling, derive_seed(seed, 2 * i + 1));
    c.mean_reward_bon += best.scores[best.index];
    c.mean_reward_single += reward(data::tokenize(p, one, vocab));
    c.mean_rule_score_bon += data::rule_score(rule, p, best.text);
    c.mean_rule_score_single += data::rule_score(rule, p, one);
    c.bon.push_back(best.text);
    c.single.push_back(one);
  }
  const double m = static_cast<double>(prompts.size());
  c.mean_reward_bon /= m;
  c.mean_reward_single /= m;
  c.mean_rule_score_bon /= m;
  c.mean_rule_score_single /= m;
  c.vs_single = eval::judge_win_rates(std::span<const std::string>(prompts), std::span<const std::string>(c.bon),
                                      std::span<const std::string>(c.single), rule);
  return c;
}

template BonComparison bon_vs_single(const tqr::TQRModel<float>&, const eval::Scorer&, const data::Vocabulary&,
                                    const std::vector<std::string>&, data::Rule, std::size_t,
                                    const eval::SampleOptions&, std::uint64_t);
template BonComparison bon_vs_single(const tqr::TQRModel<double>&, const eval::Scorer&, const data::Vocabulary&,
                                    const std::vector<std::string>&, data::Rule, std::size_t,
                                    const eval::SampleOptions&, std::uint64_t);

}  // namespace ava::pipelines
