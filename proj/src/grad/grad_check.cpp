#include "ava/grad/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ava::grad {

namespace {

double evaluate(const ScalarFunction& f, const std::vector<Array<double>>& params) {
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p));
  const double value = f(tape, leaves).item();
  if (!std::isfinite(value)) throw NumericError("grad_check: non-finite function value");
  return value;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::vector<Array<double>> params,
                           double epsilon) {
  std::vector<Array<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.leaf(p));
    Var<double> out = f(tape, leaves);
    if (!std::isfinite(out.item())) throw NumericError("grad_check: non-finite function value");
    tape.backward(out);
    for (const auto& leaf : leaves) analytic.push_back(tape.gradient(leaf));
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + epsilon;
      const double plus = evaluate(f, params);
      params[p][i] = saved - epsilon;
      const double minus = evaluate(f, params);
      params[p][i] = saved;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ava::grad
