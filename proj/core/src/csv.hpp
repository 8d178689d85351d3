#pragma once

// Small CSV helpers shared by the file formats. Fields never contain commas
// or quotes (identifiers and numbers only), so no quoting is implemented.

#include <string>
#include <vector>

#include "plcattest/value.hpp"

namespace plcattest::csv {

std::vector<std::string> split(const std::string& line);

/// Fixed-point with 6 decimals.
std::string fixed6(double x);

/// Bools as 0/1, enums as integers, reals with 6 decimals.
std::string format_value(const Value& v);

double parse_double(const std::string& cell, std::size_t line);
Value parse_value(const std::string& cell, const ValueKind& kind, std::size_t line);

}  // namespace plcattest::csv
