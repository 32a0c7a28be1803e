#include "ava/data/batching.hpp"

#include <algorithm>
#include <numeric>

#include "ava/errors.hpp"
#include "ava/rng.hpp"

namespace ava::data {

TokenSequence PaddedBatch::row(std::size_t r) const {
  TokenSequence seq;
  seq.ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(r * width),
                 ids.begin() + static_cast<std::ptrdiff_t>(r * width + lengths[r]));
  seq.response_start = response_starts[r];
  return seq;
}

PaddedBatch pad_batch(std::span<const TokenSequence> records, std::span<const std::size_t> indices) {
  PaddedBatch b;
  b.rows = indices.size();
  for (std::size_t idx : indices) b.width = std::max(b.width, records[idx].length());
  b.ids.assign(b.rows * b.width, kPad);
  b.valid.assign(b.rows * b.width, 0);
  b.response.assign(b.rows * b.width, 0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const TokenSequence& seq = records[indices[r]];
    for (std::size_t c = 0; c < seq.length(); ++c) {
      b.ids[r * b.width + c] = seq.ids[c];
      b.valid[r * b.width + c] = 1;
      b.response[r * b.width + c] = c >= seq.response_start ? 1 : 0;
    }
    b.lengths.push_back(seq.length());
    b.response_starts.push_back(seq.response_start);
    b.record_indices.push_back(indices[r]);
  }
  return b;
}

std::vector<std::vector<std::size_t>> index_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void check_max_len(std::span<const TokenSequence> records, std::size_t max_len) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].length() > max_len) {
      throw LengthError("record " + std::to_string(i) + " has length " +
                        std::to_string(records[i].length()) + " > max_len " + std::to_string(max_len));
    }
  }
}

std::vector<PaddedBatch> make_batches(std::span<const TokenSequence> records, std::size_t batch_size,
                                      std::size_t max_len, std::uint64_t seed, bool shuffle) {
  check_max_len(records, max_len);
  std::vector<PaddedBatch> out;
  for (const auto& idx : index_batches(records.size(), batch_size, seed, shuffle)) {
    out.push_back(pad_batch(records, idx));
  }
  return out;
}

std::vector<PairBatch> make_pair_batches(std::span<const SequencePair> pairs, std::size_t batch_size,
                                         std::size_t max_len, std::uint64_t seed, bool shuffle) {
  std::vector<TokenSequence> chosen, rejected;
  chosen.reserve(pairs.size());
  rejected.reserve(pairs.size());
  for (const auto& p : pairs) {
    chosen.push_back(p.chosen);
    rejected.push_back(p.rejected);
  }
  check_max_len(chosen, max_len);
  check_max_len(rejected, max_len);
  std::vector<PairBatch> out;
  for (const auto& idx : index_batches(pairs.size(), batch_size, seed, shuffle)) {
    out.push_back({pad_batch(chosen, idx), pad_batch(rejected, idx)});
  }
  return out;
}

}  // namespace ava::data
