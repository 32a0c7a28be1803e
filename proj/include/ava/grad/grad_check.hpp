#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ava/grad/tape.hpp"

namespace ava::grad {

// A scalar function of parameter leaves, rebuilt on a fresh tape per call.
using ScalarFunction =
    std::function<Var<double>(Tape<double>&, std::span<const Var<double>> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Location of the worst component.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients against central differences
// (f(x+eps) - f(x-eps)) / 2eps for every component of every parameter.
// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
// Throws NumericError if f is non-finite at any evaluation.
GradCheckResult grad_check(const ScalarFunction& f, std::vector<Array<double>> params,
                           double epsilon);

}  // namespace ava::grad
