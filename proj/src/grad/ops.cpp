#include "ava/grad/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ava/grad/numeric.hpp"

namespace ava::grad {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void require_rank2(const Var<T>& a, const char* op) {
  if (a.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 input, got " + shape_string(a.shape()));
  }
}

template <typename T>
void require_rank1(const Var<T>& a, const char* op) {
  if (a.shape().size() != 1) {
    throw ShapeError(std::string(op) + ": expected rank-1 input, got " + shape_string(a.shape()));
  }
}

// Elementwise map with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Var<T> unary(const char* op, const Var<T>& a, F f, D dydx) {
  const Array<T>& x = a.value();
  Array<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(y), {a}, [ia, dydx](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    const Array<T>& x = t.value(ia);
    const Array<T>& y = t.value(self);
    if (Array<T>* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * dydx(x[i], y[i]);
    }
  });
}

template <typename T>
void check_positive(const Array<T>& sigma, const char* op) {
  for (T s : sigma.data) {
    if (!(s > T{0})) {
      throw DomainError(std::string(op) + ": sigma must be positive, got " +
                        std::to_string(static_cast<double>(s)));
    }
  }
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Array<T> y = a.value();
  const Array<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(y), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    if (Array<T>* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Array<T>* gb = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Array<T> y = a.value();
  const Array<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(y), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    if (Array<T>* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Array<T>* gb = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Array<T> y = a.value();
  const Array<T>& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(y), {a, b}, [ia, ib](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    const Array<T>& av = t.value(ia);
    const Array<T>& bv = t.value(ib);
    if (Array<T>* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Array<T>* gb = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary<T>(
      "scale", a, [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset) {
  return unary<T>(
      "add_scalar", a, [offset](T x) { return x + offset; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  for (T x : a.value().data) {
    if (!(x > T{0})) throw NumericError("log: non-positive input");
  }
  return unary<T>(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

template <typename T>
Var<T> softplus(const Var<T>& a) {
  return unary<T>(
      "softplus", a, [](T x) { return grad::softplus(x); },
      [](T x, T) { return logistic(x); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary<T>(
      "sigmoid", a, [](T x) { return logistic(x); }, [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> log_sigmoid(const Var<T>& a) {
  return unary<T>(
      "log_sigmoid", a, [](T x) { return log_logistic(x); },
      [](T x, T) { return logistic(-x); });
}

// tanh approximation.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr T k = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = T(0.044715);
  return unary<T>(
      "gelu", a,
      [](T x) { return T(0.5) * x * (T{1} + std::tanh(k * (x + c * x * x * x))); },
      [](T x, T) {
        const T th = std::tanh(k * (x + c * x * x * x));
        return T(0.5) * (T{1} + th) +
               T(0.5) * x * (T{1} - th * th) * k * (T{1} + T{3} * c * x * x);
      });
}

template <typename T>
Var<T> add_row_bias(const Var<T>& x, const Var<T>& bias) {
  require_rank2(x, "add_row_bias");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (bias.value().size() != c) throw ShapeError("add_row_bias: bias length mismatch");
  Array<T> y = x.value();
  const Array<T>& b = bias.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] += b[j];
  const std::size_t ix = x.id(), ib = bias.id();
  return x.tape().record("add_row_bias", std::move(y), {x, bias},
                         [ix, ib, r, c](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           if (Array<T>* gx = t.grad_sink(ix)) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                           }
                           if (Array<T>* gb = t.grad_sink(ib)) {
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j) (*gb)[j] += g[i * c + j];
                           }
                         });
}

template <typename T>
Var<T> mul_rows(const Var<T>& x, const Var<T>& w) {
  require_rank2(x, "mul_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (w.value().size() != r) throw ShapeError("mul_rows: weight length mismatch");
  Array<T> y = x.value();
  const Array<T>& wv = w.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] *= wv[i];
  const std::size_t ix = x.id(), iw = w.id();
  return x.tape().record("mul_rows", std::move(y), {x, w},
                         [ix, iw, r, c](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           const Array<T>& xv = t.value(ix);
                           const Array<T>& wv = t.value(iw);
                           if (Array<T>* gx = t.grad_sink(ix)) {
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < c; ++j)
                                 (*gx)[i * c + j] += g[i * c + j] * wv[i];
                           }
                           if (Array<T>* gw = t.grad_sink(iw)) {
                             for (std::size_t i = 0; i < r; ++i) {
                               T acc{0};
                               for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * xv[i * c + j];
                               (*gw)[i] += acc;
                             }
                           }
                         });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimension mismatch " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Array<T> y(Shape{m, n});
  {
    const T* A = a.value().data.data();
    const T* B = b.value().data.data();
    T* Y = y.data.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = A[i * k + p];
        const T* brow = B + p * n;
        T* yrow = Y + i * n;
        for (std::size_t j = 0; j < n; ++j) yrow[j] += aip * brow[j];
      }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(y), {a, b},
                         [ia, ib, m, k, n](Tape<T>& t, std::size_t self) {
                           const T* G = t.out_grad(self).data.data();
                           const T* A = t.value(ia).data.data();
                           const T* B = t.value(ib).data.data();
                           if (Array<T>* ga = t.grad_sink(ia)) {
                             T* GA = ga->data.data();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 T acc{0};
                                 const T* grow = G + i * n;
                                 const T* brow = B + p * n;
                                 for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                 GA[i * k + p] += acc;
                               }
                           }
                           if (Array<T>* gb = t.grad_sink(ib)) {
                             T* GB = gb->data.data();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 const T aip = A[i * k + p];
                                 const T* grow = G + i * n;
                                 T* gbrow = GB + p * n;
                                 for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                               }
                           }
                         });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw ShapeError("matmul_nt: inner dimension mismatch " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  }
  Array<T> y(Shape{m, n});
  {
    const T* A = a.value().data.data();
    const T* B = b.value().data.data();
    T* Y = y.data.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T acc{0};
        const T* arow = A + i * k;
        const T* brow = B + j * k;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        Y[i * n + j] = acc;
      }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul_nt", std::move(y), {a, b},
                         [ia, ib, m, k, n](Tape<T>& t, std::size_t self) {
                           const T* G = t.out_grad(self).data.data();
                           const T* A = t.value(ia).data.data();
                           const T* B = t.value(ib).data.data();
                           if (Array<T>* ga = t.grad_sink(ia)) {
                             T* GA = ga->data.data();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) {
                                 const T g = G[i * n + j];
                                 const T* brow = B + j * k;
                                 T* garow = GA + i * k;
                                 for (std::size_t p = 0; p < k; ++p) garow[p] += g * brow[p];
                               }
                           }
                           if (Array<T>* gb = t.grad_sink(ib)) {
                             T* GB = gb->data.data();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) {
                                 const T g = G[i * n + j];
                                 const T* arow = A + i * k;
                                 T* gbrow = GB + j * k;
                                 for (std::size_t p = 0; p < k; ++p) gbrow[p] += g * arow[p];
                               }
                           }
                         });
}

namespace {

// Shared backward for row softmaxes: gx = y * (g - <g, y>) over the active
// prefix of each row.
template <typename T>
void softmax_backward(Tape<T>& t, std::size_t self, std::size_t ix, std::size_t r, std::size_t c,
                      bool causal) {
  const Array<T>& g = t.out_grad(self);
  const Array<T>& y = t.value(self);
  Array<T>* gx = t.grad_sink(ix);
  if (!gx) return;
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t width = causal ? i + 1 : c;
    T dot{0};
    for (std::size_t j = 0; j < width; ++j) dot += g[i * c + j] * y[i * c + j];
    for (std::size_t j = 0; j < width; ++j) (*gx)[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
  }
}

}  // namespace

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const Array<T>& xv = x.value();
  Array<T> y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    std::span<const T> row(xv.data.data() + i * c, c);
    detail::check_vector(row, "softmax_rows");
    softmax_into<T>(row, std::span<T>(y.data.data() + i * c, c));
  }
  const std::size_t ix = x.id();
  return x.tape().record("softmax_rows", std::move(y), {x},
                         [ix, r, c](Tape<T>& t, std::size_t self) {
                           softmax_backward(t, self, ix, r, c, false);
                         });
}

template <typename T>
Var<T> causal_softmax_rows(const Var<T>& x) {
  require_rank2(x, "causal_softmax_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (r != c) throw ShapeError("causal_softmax_rows: expected a square input");
  const Array<T>& xv = x.value();
  Array<T> y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    std::span<const T> row(xv.data.data() + i * c, i + 1);
    detail::check_vector(row, "causal_softmax_rows");
    softmax_into<T>(row, std::span<T>(y.data.data() + i * c, i + 1));
  }
  const std::size_t ix = x.id();
  return x.tape().record("causal_softmax_rows", std::move(y), {x},
                         [ix, r, c](Tape<T>& t, std::size_t self) {
                           softmax_backward(t, self, ix, r, c, true);
                         });
}

template <typename T>
Var<T> log_softmax_rows(const Var<T>& x) {
  require_rank2(x, "log_softmax_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const Array<T>& xv = x.value();
  Array<T> y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    std::span<const T> row(xv.data.data() + i * c, c);
    detail::check_vector(row, "log_softmax_rows");
    log_softmax_into<T>(row, std::span<T>(y.data.data() + i * c, c));
  }
  const std::size_t ix = x.id();
  return x.tape().record("log_softmax_rows", std::move(y), {x},
                         [ix, r, c](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           const Array<T>& y = t.value(self);
                           Array<T>* gx = t.grad_sink(ix);
                           if (!gx) return;
                           for (std::size_t i = 0; i < r; ++i) {
                             T gsum{0};
                             for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
                             for (std::size_t j = 0; j < c; ++j)
                               (*gx)[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gsum;
                           }
                         });
}

template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  require_rank2(x, "layer_norm_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (gain.value().size() != c || bias.value().size() != c) {
    throw ShapeError("layer_norm_rows: gain/bias length mismatch");
  }
  const Array<T>& xv = x.value();
  const Array<T>& gv = gain.value();
  const Array<T>& bv = bias.value();
  Array<T> y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = xv.data.data() + i * c;
    T mean{0};
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<T>(c);
    T var{0};
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(c);
    const T rstd = T{1} / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = (row[j] - mean) * rstd * gv[j] + bv[j];
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      "layer_norm_rows", std::move(y), {x, gain, bias},
      [ix, ig, ib, r, c, eps](Tape<T>& t, std::size_t self) {
        const Array<T>& g = t.out_grad(self);
        const Array<T>& xv = t.value(ix);
        const Array<T>& gv = t.value(ig);
        Array<T>* gx = t.grad_sink(ix);
        Array<T>* gg = t.grad_sink(ig);
        Array<T>* gb = t.grad_sink(ib);
        std::vector<T> xhat(c), dxhat(c);
        for (std::size_t i = 0; i < r; ++i) {
          const T* row = xv.data.data() + i * c;
          T mean{0};
          for (std::size_t j = 0; j < c; ++j) mean += row[j];
          mean /= static_cast<T>(c);
          T var{0};
          for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
          var /= static_cast<T>(c);
          const T rstd = T{1} / std::sqrt(var + eps);
          T mean_d{0}, mean_dx{0};
          for (std::size_t j = 0; j < c; ++j) {
            xhat[j] = (row[j] - mean) * rstd;
            dxhat[j] = g[i * c + j] * gv[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[j];
          }
          mean_d /= static_cast<T>(c);
          mean_dx /= static_cast<T>(c);
          for (std::size_t j = 0; j < c; ++j) {
            if (gb) (*gb)[j] += g[i * c + j];
            if (gg) (*gg)[j] += g[i * c + j] * xhat[j];
            if (gx) (*gx)[i * c + j] += rstd * (dxhat[j] - mean_d - xhat[j] * mean_dx);
          }
        }
      });
}

template <typename T>
Var<T> gather_rows(const Var<T>& table, std::span<const std::int32_t> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t v = table.shape()[0], c = table.shape()[1];
  const Array<T>& tv = table.value();
  Array<T> y(Shape{ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw DomainError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                        std::to_string(v) + " rows");
    }
    std::copy_n(tv.data.data() + static_cast<std::size_t>(ids[i]) * c, c, y.data.data() + i * c);
  }
  const std::size_t it = table.id();
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  return table.tape().record("gather_rows", std::move(y), {table},
                             [it, c, idx = std::move(idx)](Tape<T>& t, std::size_t self) {
                               const Array<T>& g = t.out_grad(self);
                               Array<T>* gt = t.grad_sink(it);
                               if (!gt) return;
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                 T* dst = gt->data.data() + static_cast<std::size_t>(idx[i]) * c;
                                 for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j];
                               }
                             });
}

template <typename T>
Var<T> gather_elements(const Var<T>& x,
                       std::span<const std::pair<std::size_t, std::size_t>> index) {
  require_rank2(x, "gather_elements");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const Array<T>& xv = x.value();
  Array<T> y(Shape{index.size()});
  std::vector<std::size_t> flat(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto [ri, ci] = index[i];
    if (ri >= r || ci >= c) throw ShapeError("gather_elements: index out of range");
    flat[i] = ri * c + ci;
    y[i] = xv[flat[i]];
  }
  const std::size_t ix = x.id();
  return x.tape().record("gather_elements", std::move(y), {x},
                         [ix, flat = std::move(flat)](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           if (Array<T>* gx = t.grad_sink(ix)) {
                             for (std::size_t i = 0; i < flat.size(); ++i) (*gx)[flat[i]] += g[i];
                           }
                         });
}

template <typename T>
Var<T> slice(const Var<T>& v, std::size_t start, std::size_t count) {
  require_rank1(v, "slice");
  if (start + count > v.value().size()) throw ShapeError("slice: range out of bounds");
  const Array<T>& vv = v.value();
  Array<T> y(Shape{count});
  std::copy_n(vv.data.begin() + static_cast<std::ptrdiff_t>(start), count, y.data.begin());
  const std::size_t iv = v.id();
  return v.tape().record("slice", std::move(y), {v}, [iv, start](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    if (Array<T>* gv = t.grad_sink(iv)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gv)[start + i] += g[i];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (start + count > c) throw ShapeError("slice_cols: range out of bounds");
  const Array<T>& xv = x.value();
  Array<T> y(Shape{r, count});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.data.data() + i * c + start, count, y.data.data() + i * count);
  const std::size_t ix = x.id();
  return x.tape().record("slice_cols", std::move(y), {x},
                         [ix, r, c, start, count](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           if (Array<T>* gx = t.grad_sink(ix)) {
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t j = 0; j < count; ++j)
                                 (*gx)[i * c + start + j] += g[i * count + j];
                           }
                         });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  for (const auto& p : parts) require_rank2(p, "concat_cols");
  const std::size_t r = parts.front().shape()[0];
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.shape()[0] != r) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.shape()[1]);
    ids.push_back(p.id());
    total += p.shape()[1];
  }
  Array<T> y(Shape{r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array<T>& pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.data.data() + i * widths[k], widths[k], y.data.data() + i * total + off);
    off += widths[k];
  }
  Tape<T>& tape = parts.front().tape();
  return tape.record("concat_cols", std::move(y), ids,
                     [ids, widths, r, total](Tape<T>& t, std::size_t self) {
                       const Array<T>& g = t.out_grad(self);
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (Array<T>* gp = t.grad_sink(ids[k])) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               (*gp)[i * widths[k] + j] += g[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

template <typename T>
Var<T> mean_rows(const Var<T>& x) {
  require_rank2(x, "mean_rows");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  const Array<T>& xv = x.value();
  Array<T> y(Shape{c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j] += xv[i * c + j];
  const T inv = T{1} / static_cast<T>(r);
  for (auto& v : y.data) v *= inv;
  const std::size_t ix = x.id();
  return x.tape().record("mean_rows", std::move(y), {x}, [ix, r, c, inv](Tape<T>& t, std::size_t self) {
    const Array<T>& g = t.out_grad(self);
    if (Array<T>* gx = t.grad_sink(ix)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gx)[i * c + j] += g[j] * inv;
    }
  });
}

template <typename T>
Var<T> average(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("average: no inputs");
  if (parts.size() == 1) return parts.front();
  Var<T> acc = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) acc = add(acc, parts[k]);
  return scale(acc, T{1} / static_cast<T>(parts.size()));
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  const Array<T>& xv = x.value();
  T s{0};
  for (T v : xv.data) s += v;
  const std::size_t ix = x.id();
  return x.tape().record("sum", Array<T>::scalar(s), {x}, [ix](Tape<T>& t, std::size_t self) {
    const T g = t.out_grad(self)[0];
    if (Array<T>* gx = t.grad_sink(ix)) {
      for (auto& v : gx->data) v += g;
    }
  });
}

template <typename T>
Var<T> gaussian_log_pdf(const Var<T>& x, const Var<T>& mu, const Var<T>& sigma) {
  require_same_shape(x, mu, "gaussian_log_pdf");
  require_same_shape(x, sigma, "gaussian_log_pdf");
  check_positive(sigma.value(), "gaussian_log_pdf");
  const Array<T>& xv = x.value();
  const Array<T>& mv = mu.value();
  const Array<T>& sv = sigma.value();
  Array<T> y(xv.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = grad::gaussian_log_pdf(xv[i], mv[i], sv[i]);
  const std::size_t ix = x.id(), im = mu.id(), is = sigma.id();
  return x.tape().record("gaussian_log_pdf", std::move(y), {x, mu, sigma},
                         [ix, im, is](Tape<T>& t, std::size_t self) {
                           const Array<T>& g = t.out_grad(self);
                           const Array<T>& xv = t.value(ix);
                           const Array<T>& mv = t.value(im);
                           const Array<T>& sv = t.value(is);
                           Array<T>* gx = t.grad_sink(ix);
                           Array<T>* gm = t.grad_sink(im);
                           Array<T>* gs = t.grad_sink(is);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const T d = xv[i] - mv[i];
                             const T s2 = sv[i] * sv[i];
                             if (gx) (*gx)[i] -= g[i] * d / s2;
                             if (gm) (*gm)[i] += g[i] * d / s2;
                             if (gs) (*gs)[i] += g[i] * (-T{1} / sv[i] + d * d / (s2 * sv[i]));
                           }
                         });
}

template <typename T>
Var<T> gaussian_kl_to_std_normal(const Var<T>& mu, const Var<T>& sigma) {
  require_same_shape(mu, sigma, "gaussian_kl_to_std_normal");
  check_positive(sigma.value(), "gaussian_kl_to_std_normal");
  const Array<T>& mv = mu.value();
  const Array<T>& sv = sigma.value();
  Array<T> y(mv.shape);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = grad::gaussian_kl_to_std_normal(mv[i], sv[i]);
  const std::size_t im = mu.id(), is = sigma.id();
  return mu.tape().record("gaussian_kl_to_std_normal", std::move(y), {mu, sigma},
                          [im, is](Tape<T>& t, std::size_t self) {
                            const Array<T>& g = t.out_grad(self);
                            const Array<T>& mv = t.value(im);
                            const Array<T>& sv = t.value(is);
                            Array<T>* gm = t.grad_sink(im);
                            Array<T>* gs = t.grad_sink(is);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              if (gm) (*gm)[i] += g[i] * mv[i];
                              if (gs) (*gs)[i] += g[i] * (sv[i] - T{1} / sv[i]);
                            }
                          });
}

#define AVA_INSTANTIATE_OPS(T)                                                                   \
  template Var<T> add(const Var<T>&, const Var<T>&);                                             \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                             \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                             \
  template Var<T> scale(const Var<T>&, T);                                                       \
  template Var<T> add_scalar(const Var<T>&, T);                                                  \
  template Var<T> exp(const Var<T>&);                                                            \
  template Var<T> log(const Var<T>&);                                                            \
  template Var<T> softplus(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                        \
  template Var<T> log_sigmoid(const Var<T>&);                                                    \
  template Var<T> gelu(const Var<T>&);                                                           \
  template Var<T> add_row_bias(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul_rows(const Var<T>&, const Var<T>&);                                        \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                          \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                       \
  template Var<T> softmax_rows(const Var<T>&);                                                   \
  template Var<T> log_softmax_rows(const Var<T>&);                                               \
  template Var<T> causal_softmax_rows(const Var<T>&);                                            \
  template Var<T> layer_norm_rows(const Var<T>&, const Var<T>&, const Var<T>&, T);               \
  template Var<T> gather_rows(const Var<T>&, std::span<const std::int32_t>);                     \
  template Var<T> gather_elements(const Var<T>&,                                                 \
                                  std::span<const std::pair<std::size_t, std::size_t>>);         \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t);                                \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                           \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                       \
  template Var<T> mean_rows(const Var<T>&);                                                      \
  template Var<T> average(const std::vector<Var<T>>&);                                           \
  template Var<T> sum(const Var<T>&);                                                            \
  template Var<T> gaussian_log_pdf(const Var<T>&, const Var<T>&, const Var<T>&);                 \
  template Var<T> gaussian_kl_to_std_normal(const Var<T>&, const Var<T>&);

AVA_INSTANTIATE_OPS(float)
AVA_INSTANTIATE_OPS(double)

}  // namespace ava::grad
