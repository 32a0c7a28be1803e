#include "ava/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ava::eval {

double round9(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

nlohmann::json round_reals(const nlohmann::json& j) {
  if (j.is_number_float()) return round9(j.get<double>());
  if (j.is_array() || j.is_object()) {
    nlohmann::json out = j;
    for (auto& v : out) v = round_reals(v);
    return out;
  }
  return j;
}

std::string dump_report(const nlohmann::json& j) { return round_reals(j).dump(2) + "\n"; }

}  // namespace ava::eval
