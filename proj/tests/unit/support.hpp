#pragma once

// Hand-rolled generators and small fixtures shared by the unit suites.

#include <cmath>
#include <string>
#include <vector>

#include "ava/data/vocab.hpp"
#include "ava/grad/array.hpp"
#include "ava/rng.hpp"
#include "ava/tqr/config.hpp"

namespace testing {

inline std::vector<double> random_vector(ava::Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

inline ava::grad::Array<double> random_array(ava::Rng& rng, ava::grad::Shape shape, double lo = -1.0,
                                             double hi = 1.0) {
  const auto n = ava::grad::numel(shape);
  return ava::grad::Array<double>(std::move(shape), random_vector(rng, n, lo, hi));
}

inline std::string random_text(ava::Rng& rng, std::size_t min_len, std::size_t max_len, const std::string& alphabet) {
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
  return s;
}

inline ava::data::Vocabulary abcd_vocab() {
  return ava::data::Vocabulary(std::vector<char32_t>{U'a', U'b', U'c', U'd', U'x', U'y', U'z'});
}

// Random training sequence: prompt over xyz, response of >= 2 chars over abcd.
inline ava::data::TokenSequence random_sequence(ava::Rng& rng, const ava::data::Vocabulary& vocab,
                                                std::size_t max_response = 8) {
  return ava::data::tokenize(random_text(rng, 0, 3, "xyz"), random_text(rng, 2, max_response, "abcd"), vocab);
}

inline ava::tqr::ModelConfig toy_config(std::size_t vocab_size) {
  ava::tqr::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq_len = 24;
  return c;
}

}  // namespace testing
