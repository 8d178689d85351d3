#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "plcattest/error.hpp"

namespace plcattest::csv {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string format_value(const Value& v) {
  if (v.kind() == Kind::Real) return fixed6(v.as_real());
  return std::to_string(v.as_enum());
}

namespace {

[[noreturn]] void bad(const std::string& cell, std::size_t line, const char* what) {
  throw FormatError("line " + std::to_string(line) + ": '" + cell + "' is not " + what);
}

}  // namespace

double parse_double(const std::string& cell, std::size_t line) {
  double x = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [p, ec] = std::from_chars(cell.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x)) bad(cell, line, "a finite number");
  return x;
}

Value parse_value(const std::string& cell, const ValueKind& kind, std::size_t line) {
  if (kind.kind == Kind::Real) return Value::real(parse_double(cell, line));
  int v = 0;
  const auto* end = cell.data() + cell.size();
  auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc() || p != end || v < 0 || v >= kind.domain_size()) bad(cell, line, "a valid discrete value");
  return kind.kind == Kind::Bool ? Value::boolean(v != 0) : Value::enumeration(v);
}

}  // namespace plcattest::csv
