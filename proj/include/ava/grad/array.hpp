#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ava/errors.hpp"

namespace ava::grad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major array. Rank 1 and rank 2 are the only ranks the model needs;
// elementwise operations accept any rank.
template <typename T>
struct Array {
  Shape shape;
  std::vector<T> data;

  Array() = default;

  explicit Array(Shape s, T fill = T{0}) : shape(std::move(s)), data(numel(shape), fill) {}

  Array(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (numel(shape) != data.size()) {
      throw ShapeError("array data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_string(shape));
    }
  }

  static Array scalar(T value) { return Array(Shape{1}, std::vector<T>{value}); }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  T& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  T item() const {
    if (data.size() != 1) {
      throw ShapeError("item() requires a single-element array, got " + shape_string(shape));
    }
    return data[0];
  }

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

template <typename To, typename From>
Array<To> cast(const Array<From>& a) {
  Array<To> out(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data[i] = static_cast<To>(a.data[i]);
  }
  return out;
}

}  // namespace ava::grad
