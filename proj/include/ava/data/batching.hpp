#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ava/data/vocab.hpp"

namespace ava::data {

// Right-padded rows with PAD plus per-position masks. `valid` marks
// positions < length; `response` marks the response region (response tokens
// and EOS).
struct PaddedBatch {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> response;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> response_starts;
  std::vector<std::size_t> record_indices;

  TokenId id(std::size_t r, std::size_t c) const { return ids[r * width + c]; }
  // The unpadded sequence of one row.
  TokenSequence row(std::size_t r) const;
};

PaddedBatch pad_batch(std::span<const TokenSequence> records, std::span<const std::size_t> indices);

// Partitions [0, n) into batches, shuffled deterministically from seed
// (unshuffled when shuffle is false). The last batch may be smaller.
std::vector<std::vector<std::size_t>> index_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle = true);

// Rejects records longer than max_len (LengthError naming the record index).
std::vector<PaddedBatch> make_batches(std::span<const TokenSequence> records, std::size_t batch_size,
                                      std::size_t max_len, std::uint64_t seed, bool shuffle = true);

struct PairBatch {
  PaddedBatch chosen;
  PaddedBatch rejected;
};

std::vector<PairBatch> make_pair_batches(std::span<const SequencePair> pairs, std::size_t batch_size,
                                         std::size_t max_len, std::uint64_t seed, bool shuffle = true);

void check_max_len(std::span<const TokenSequence> records, std::size_t max_len);

}  // namespace ava::data
