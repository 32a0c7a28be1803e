#pragma once

#include <string>

#include <json.hpp>

namespace ava::eval {

// Rounds to 9 significant digits so printed reports are stable.
double round9(double v);

// Applies round9 to every floating-point value in a JSON tree.
nlohmann::json round_reals(const nlohmann::json& j);

// round_reals followed by an indented dump with a trailing newline.
std::string dump_report(const nlohmann::json& j);

}  // namespace ava::eval
