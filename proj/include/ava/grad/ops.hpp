#pragma once

// Differentiable primitives recorded on a Tape. Rank-2 arrays are [rows, cols]
// row-major; vectors are rank 1. All ops throw ShapeError on mismatched inputs.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ava/grad/tape.hpp"

namespace ava::grad {

// Elementwise, identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
template <typename T> Var<T> softplus(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> log_sigmoid(const Var<T>& a);
template <typename T> Var<T> gelu(const Var<T>& a);

// Row broadcasting: x[r, c] + bias[c]; x[r, c] * w[r].
template <typename T> Var<T> add_row_bias(const Var<T>& x, const Var<T>& bias);
template <typename T> Var<T> mul_rows(const Var<T>& x, const Var<T>& w);

// a[m, k] * b[k, n] and a[m, k] * b[n, k]^T.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> softmax_rows(const Var<T>& x);
template <typename T> Var<T> log_softmax_rows(const Var<T>& x);
// Square input; row i is a softmax over columns 0..i, zero above the diagonal.
template <typename T> Var<T> causal_softmax_rows(const Var<T>& x);
template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5));

// table[ids[i], :] stacked into [ids.size(), cols].
template <typename T> Var<T> gather_rows(const Var<T>& table, std::span<const std::int32_t> ids);
// x[r_i, c_i] for each index pair, as a vector.
template <typename T>
Var<T> gather_elements(const Var<T>& x, std::span<const std::pair<std::size_t, std::size_t>> index);
// Contiguous range of a vector.
template <typename T> Var<T> slice(const Var<T>& v, std::size_t start, std::size_t count);
template <typename T> Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t count);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
// Column means over rows: [r, c] -> [c].
template <typename T> Var<T> mean_rows(const Var<T>& x);
// Elementwise mean of equally shaped inputs.
template <typename T> Var<T> average(const std::vector<Var<T>>& parts);
template <typename T> Var<T> sum(const Var<T>& x);

// Elementwise Gaussian terms; sigma must be positive.
template <typename T> Var<T> gaussian_log_pdf(const Var<T>& x, const Var<T>& mu, const Var<T>& sigma);
template <typename T> Var<T> gaussian_kl_to_std_normal(const Var<T>& mu, const Var<T>& sigma);

}  // namespace ava::grad
