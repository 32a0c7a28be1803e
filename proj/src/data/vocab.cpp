#include "ava/data/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "ava/errors.hpp"

namespace ava::data {

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      throw VocabularyError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) throw VocabularyError("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) throw VocabularyError("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  for (char32_t c : text) out += encode_utf8(c);
  return out;
}

Vocabulary::Vocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (chars_[i] == U'\n') throw VocabularyError("newline cannot be a vocabulary character");
    const auto [it, inserted] = index_.emplace(chars_[i], static_cast<TokenId>(i) + kFirstCharId);
    if (!inserted) {
      throw VocabularyError("duplicate vocabulary character '" + encode_utf8(chars_[i]) + "'");
    }
  }
}

Vocabulary Vocabulary::from_corpus(std::span<const std::string> texts) {
  std::set<char32_t> seen;
  for (const auto& t : texts) {
    for (char32_t c : decode_utf8(t)) seen.insert(c);
  }
  return Vocabulary(std::vector<char32_t>(seen.begin(), seen.end()));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabularyError("cannot open vocabulary file " + path);
  std::vector<std::string> items;
  std::string line;
  while (std::getline(in, line)) items.push_back(line);
  return from_strings(items);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabularyError("cannot write vocabulary file " + path);
  for (char32_t c : chars_) out << encode_utf8(c) << '\n';
}

TokenId Vocabulary::id(char32_t c) const {
  const auto it = index_.find(c);
  if (it == index_.end()) {
    throw VocabularyError("character '" + encode_utf8(c) + "' is not in the vocabulary");
  }
  return it->second;
}

char32_t Vocabulary::character(TokenId id) const {
  if (id < kFirstCharId || static_cast<std::size_t>(id) >= size()) {
    throw VocabularyError("token id " + std::to_string(id) + " is not a character id");
  }
  return chars_[static_cast<std::size_t>(id - kFirstCharId)];
}

std::vector<std::string> Vocabulary::to_strings() const {
  std::vector<std::string> out;
  out.reserve(chars_.size());
  for (char32_t c : chars_) out.push_back(encode_utf8(c));
  return out;
}

Vocabulary Vocabulary::from_strings(const std::vector<std::string>& items) {
  std::vector<char32_t> chars;
  chars.reserve(items.size());
  for (const auto& item : items) {
    const std::u32string cps = decode_utf8(item);
    if (cps.size() != 1) {
      throw VocabularyError("vocabulary entry must be exactly one character, got '" + item + "'");
    }
    chars.push_back(cps[0]);
  }
  return Vocabulary(std::move(chars));
}

TokenSequence tokenize(std::string_view prompt, std::string_view response, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids = tokenize_prompt(prompt, vocab);
  seq.response_start = seq.ids.size();
  for (char32_t c : decode_utf8(response)) seq.ids.push_back(vocab.id(c));
  seq.ids.push_back(kEos);
  return seq;
}

std::vector<TokenId> tokenize_prompt(std::string_view prompt, const Vocabulary& vocab) {
  std::vector<TokenId> ids{kBos};
  for (char32_t c : decode_utf8(prompt)) ids.push_back(vocab.id(c));
  return ids;
}

std::string decode_ids(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::u32string out;
  for (TokenId id : ids) {
    if (id == kEos || id == kPad) break;
    if (id == kBos) continue;
    out.push_back(vocab.character(id));
  }
  return encode_utf8(out);
}

std::pair<std::string, std::string> detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  if (seq.ids.empty() || seq.ids[0] != kBos) throw VocabularyError("sequence must start with BOS");
  const std::span<const TokenId> ids(seq.ids);
  return {decode_ids(ids.subspan(1, seq.response_start - 1), vocab),
          decode_ids(ids.subspan(seq.response_start), vocab)};
}

void validate_training_sequence(const TokenSequence& seq, std::size_t index) {
  if (seq.ids.empty() || seq.ids[0] != kBos) {
    throw DomainError("record " + std::to_string(index) + ": sequence must start with BOS");
  }
  if (seq.response_start < 1 || seq.response_start >= seq.length()) {
    throw DomainError("record " + std::to_string(index) + ": invalid response boundary");
  }
  if (seq.length() - seq.response_start < 3) {
    throw SequenceTooShortError("record " + std::to_string(index) +
                                ": response region needs at least 3 tokens (response + EOS), got " +
                                std::to_string(seq.length() - seq.response_start));
  }
}

}  // namespace ava::data
