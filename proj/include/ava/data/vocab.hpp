#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ava::data {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kFirstCharId = 3;

// UTF-8 <-> code points. Malformed input raises VocabularyError.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
std::string encode_utf8(char32_t c);

// Character vocabulary. Ids 0..2 are PAD, BOS, EOS; characters follow in
// the stored order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<char32_t> chars);

  // Distinct characters of the corpus in code-point order.
  static Vocabulary from_corpus(std::span<const std::string> texts);
  // One character per line; ids are implicit, starting at 3.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const noexcept { return chars_.size() + kFirstCharId; }
  const std::vector<char32_t>& chars() const noexcept { return chars_; }
  bool contains(char32_t c) const { return index_.count(c) != 0; }
  TokenId id(char32_t c) const;
  char32_t character(TokenId id) const;

  std::vector<std::string> to_strings() const;
  static Vocabulary from_strings(const std::vector<std::string>& items);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.chars_ == b.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, TokenId> index_;
};

// One MDP trajectory: [BOS] prompt response [EOS]. response_start is the
// index of the first response token.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::size_t response_start = 1;

  std::size_t length() const noexcept { return ids.size(); }
  std::size_t response_length() const noexcept { return ids.size() - response_start; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct SequencePair {
  TokenSequence chosen;
  TokenSequence rejected;
};

TokenSequence tokenize(std::string_view prompt, std::string_view response, const Vocabulary& vocab);
// Prompt ids only, BOS-prefixed: the starting state for generation.
std::vector<TokenId> tokenize_prompt(std::string_view prompt, const Vocabulary& vocab);
// Inverse of tokenize; the trailing EOS is dropped.
std::pair<std::string, std::string> detokenize(const TokenSequence& seq, const Vocabulary& vocab);
std::string decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab);

// Training records need at least three response-region tokens (response plus
// EOS) so every step has a defined TD error.
void validate_training_sequence(const TokenSequence& seq, std::size_t index);

}  // namespace ava::data
