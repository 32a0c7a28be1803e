#pragma once

#include <string>
#include <vector>

#include "ava/data/vocab.hpp"

namespace ava::data {

struct Demonstration {
  std::string prompt;
  std::string response;

  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

// JSONL, one object per line. Preference lines carry exactly prompt, chosen,
// rejected; demonstration lines exactly prompt, response. Errors name the
// 1-based line number. Blank lines are skipped.
std::vector<PreferencePair> load_preferences(const std::string& path);
std::vector<Demonstration> load_demonstrations(const std::string& path);

void save_preferences(const std::string& path, const std::vector<PreferencePair>& pairs);
void save_demonstrations(const std::string& path, const std::vector<Demonstration>& demos);

std::vector<Demonstration> chosen_halves(const std::vector<PreferencePair>& pairs);
std::vector<std::string> corpus_texts(const std::vector<PreferencePair>& pairs);
std::vector<std::string> corpus_texts(const std::vector<Demonstration>& demos);

std::vector<TokenSequence> tokenize_all(const std::vector<Demonstration>& demos, const Vocabulary& vocab);
std::vector<SequencePair> tokenize_all(const std::vector<PreferencePair>& pairs, const Vocabulary& vocab);

}  // namespace ava::data
