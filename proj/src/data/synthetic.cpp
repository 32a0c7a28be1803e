#include "ava/data/synthetic.hpp"

#include <algorithm>

#include "ava/errors.hpp"
#include "ava/rng.hpp"

namespace ava::data {

namespace {

constexpr std::string_view kResponseAlphabet = "abcd";
constexpr std::string_view kPromptAlphabet = "xyz";

std::string random_string(Rng& rng, std::string_view alphabet, std::size_t length) {
  std::string s(length, ' ');
  for (auto& c : s) c = alphabet[rng.below(alphabet.size())];
  return s;
}

std::size_t random_length(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Copies a random-length prefix of the prompt, then fills at random.
std::string prefixed_string(Rng& rng, std::string_view prompt, std::size_t length) {
  const std::size_t keep = std::min<std::size_t>(rng.below(prompt.size() + 1), length);
  std::string s(prompt.substr(0, keep));
  s += random_string(rng, kResponseAlphabet, length - keep);
  return s;
}

}  // namespace

Rule parse_rule(std::string_view name) {
  if (name == "token_count") return Rule::token_count;
  if (name == "prefix_match") return Rule::prefix_match;
  if (name == "length_pref") return Rule::length_pref;
  throw ConfigError("unknown rule '" + std::string(name) + "'");
}

std::string to_string(Rule rule) {
  switch (rule) {
    case Rule::token_count: return "token_count";
    case Rule::prefix_match: return "prefix_match";
    case Rule::length_pref: return "length_pref";
  }
  return "unknown";
}

double rule_score(Rule rule, std::string_view prompt, std::string_view response) {
  switch (rule) {
    case Rule::token_count:
      return static_cast<double>(std::count(response.begin(), response.end(), 'a'));
    case Rule::prefix_match: {
      std::size_t n = 0;
      while (n < prompt.size() && n < response.size() && prompt[n] == response[n]) ++n;
      return static_cast<double>(n);
    }
    case Rule::length_pref:
      return static_cast<double>(decode_utf8(response).size());
  }
  return 0.0;
}

Verdict judge(Rule rule, std::string_view prompt, std::string_view a, std::string_view b) {
  const double sa = rule_score(rule, prompt, a);
  const double sb = rule_score(rule, prompt, b);
  if (sa > sb) return Verdict::win;
  if (sa < sb) return Verdict::lose;
  return Verdict::tie;
}

std::vector<PreferencePair> gen_synthetic_preferences(std::uint64_t seed, std::size_t n, Rule rule,
                                                      const SyntheticOptions& options) {
  if (options.min_response < 2 || options.min_response > options.max_response ||
      options.min_prompt < 1 || options.min_prompt > options.max_prompt) {
    throw ConfigError("invalid synthetic length bounds");
  }
  Rng rng(seed);
  std::vector<PreferencePair> pairs;
  pairs.reserve(n);
  while (pairs.size() < n) {
    const std::size_t plen = random_length(rng, options.min_prompt, options.max_prompt);
    std::string prompt, a, b;
    switch (rule) {
      case Rule::token_count: {
        prompt = random_string(rng, kPromptAlphabet, plen);
        const std::size_t len = random_length(rng, options.min_response, options.max_response);
        a = random_string(rng, kResponseAlphabet, len);
        b = random_string(rng, kResponseAlphabet, len);
        break;
      }
      case Rule::prefix_match: {
        prompt = random_string(rng, kResponseAlphabet, plen);
        const std::size_t len = random_length(rng, options.min_response, options.max_response);
        a = prefixed_string(rng, prompt, len);
        b = prefixed_string(rng, prompt, len);
        break;
      }
      case Rule::length_pref: {
        prompt = random_string(rng, kPromptAlphabet, plen);
        a = random_string(rng, kResponseAlphabet,
                          random_length(rng, options.min_response, options.max_response));
        b = random_string(rng, kResponseAlphabet,
                          random_length(rng, options.min_response, options.max_response));
        break;
      }
    }
    const Verdict v = judge(rule, prompt, a, b);
    if (v == Verdict::tie) continue;
    if (v == Verdict::win) {
      pairs.push_back({std::move(prompt), std::move(a), std::move(b)});
    } else {
      pairs.push_back({std::move(prompt), std::move(b), std::move(a)});
    }
  }
  check_separable(pairs, rule);
  return pairs;
}

void check_separable(const std::vector<PreferencePair>& pairs, Rule rule) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (judge(rule, p.prompt, p.chosen, p.rejected) != Verdict::win) {
      throw DomainError("pair " + std::to_string(i) + " is not separated by rule " + to_string(rule));
    }
  }
}

}  // namespace ava::data
