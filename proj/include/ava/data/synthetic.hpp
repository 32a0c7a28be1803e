#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ava/data/records.hpp"

namespace ava::data {

// Desk-scale preference tasks. Each rule has a scalar score; the chosen
// response of every generated pair scores strictly higher.
//   token_count   number of 'a' characters in the response
//   prefix_match  length of the common prefix of response and prompt
//   length_pref   response length in characters
enum class Rule { token_count, prefix_match, length_pref };

Rule parse_rule(std::string_view name);
std::string to_string(Rule rule);

double rule_score(Rule rule, std::string_view prompt, std::string_view response);

enum class Verdict { win, tie, lose };

// Outcome for candidate a against candidate b under the rule.
Verdict judge(Rule rule, std::string_view prompt, std::string_view a, std::string_view b);

struct SyntheticOptions {
  std::size_t min_response = 6;
  std::size_t max_response = 10;
  std::size_t min_prompt = 1;
  std::size_t max_prompt = 3;
};

// Responses use the alphabet {a,b,c,d}. token_count and length_pref prompts
// use {x,y,z}; prefix_match prompts use {a,b,c,d}. Ties are resampled.
std::vector<PreferencePair> gen_synthetic_preferences(std::uint64_t seed, std::size_t n, Rule rule,
                                                      const SyntheticOptions& options = {});

// Throws DomainError naming the first pair the rule does not separate.
void check_separable(const std::vector<PreferencePair>& pairs, Rule rule);

}  // namespace ava::data
