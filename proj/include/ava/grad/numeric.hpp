#pragma once

// Numerically stable scalar and vector primitives. The differentiable ops in
// ops.hpp use these same kernels for their forward values.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ava/errors.hpp"

namespace ava::grad {

namespace detail {

template <typename T>
void check_vector(std::span<const T> v, const char* what) {
  if (v.empty()) {
    throw ShapeError(std::string(what) + ": empty input");
  }
  for (T x : v) {
    if (std::isnan(x)) {
      throw NumericError(std::string(what) + ": NaN input");
    }
  }
}

template <typename T>
void check_sigma(T sigma, const char* what) {
  if (!(sigma > T{0})) {
    throw DomainError(std::string(what) + ": sigma must be positive, got " +
                      std::to_string(static_cast<double>(sigma)));
  }
}

}  // namespace detail

// log(sum(exp(v))) with max subtraction.
template <typename T>
T log_sum_exp(std::span<const T> v) {
  T m = *std::max_element(v.begin(), v.end());
  if (std::isinf(m)) {
    return m;
  }
  T s{0};
  for (T x : v) {
    s += std::exp(x - m);
  }
  return m + std::log(s);
}

template <typename T>
void softmax_into(std::span<const T> v, std::span<T> out) {
  T m = *std::max_element(v.begin(), v.end());
  T s{0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (T& x : out) {
    x /= s;
  }
}

template <typename T>
void log_softmax_into(std::span<const T> v, std::span<T> out) {
  T lse = log_sum_exp(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] - lse;
  }
}

template <typename T>
std::vector<T> softmax(std::span<const T> v) {
  detail::check_vector(v, "softmax");
  std::vector<T> out(v.size());
  softmax_into<T>(v, out);
  return out;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& v) {
  return softmax(std::span<const T>(v));
}

// Fused form: v - logsumexp(v), never log(softmax(v)).
template <typename T>
std::vector<T> log_softmax(std::span<const T> v) {
  detail::check_vector(v, "log_softmax");
  std::vector<T> out(v.size());
  log_softmax_into<T>(v, out);
  return out;
}

template <typename T>
std::vector<T> log_softmax(const std::vector<T>& v) {
  return log_softmax(std::span<const T>(v));
}

template <typename T>
T gaussian_log_pdf(T x, T mu, T sigma) {
  detail::check_sigma(sigma, "gaussian_log_pdf");
  const T z = (x - mu) / sigma;
  return -T{0.5} * std::log(T{2} * std::numbers::pi_v<T>) - std::log(sigma) - T{0.5} * z * z;
}

// KL(N(mu, sigma^2) || N(0, 1)).
template <typename T>
T gaussian_kl_to_std_normal(T mu, T sigma) {
  detail::check_sigma(sigma, "gaussian_kl_to_std_normal");
  return -std::log(sigma) + (sigma * sigma + mu * mu) / T{2} - T{0.5};
}

template <typename T>
T logistic(T x) {
  if (x >= T{0}) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

// log(1 + exp(x)) without overflow.
template <typename T>
T softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T log_logistic(T x) {
  return -softplus(-x);
}

}  // namespace ava::grad
