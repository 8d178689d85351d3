#include "plcattest/value.hpp"

#include <cmath>
#include <sstream>

#include "plcattest/error.hpp"

namespace plcattest {

std::string to_string(const ValueKind& k) {
  switch (k.kind) {
    case Kind::Bool:
      return "BOOL";
    case Kind::Enum:
      return "ENUM(" + std::to_string(k.cardinality) + ")";
    case Kind::Real:
      return "REAL";
  }
  return "?";
}

Value Value::real(double r) {
  if (!std::isfinite(r)) throw Error("non-finite REAL value");
  return Value(Kind::Real, 0, r);
}

bool Value::conforms(const ValueKind& k) const {
  if (kind_ != k.kind) return false;
  switch (kind_) {
    case Kind::Bool:
      return ival_ == 0 || ival_ == 1;
    case Kind::Enum:
      return ival_ >= 0 && ival_ < k.cardinality;
    case Kind::Real:
      return std::isfinite(rval_);
  }
  return false;
}

Value Value::from_numeric(const ValueKind& k, double x) {
  switch (k.kind) {
    case Kind::Bool:
      return boolean(x != 0.0);
    case Kind::Enum:
      return enumeration(static_cast<std::int32_t>(std::lround(x)));
    case Kind::Real:
      return real(x);
  }
  return {};
}

std::string to_string(const Value& v) {
  switch (v.kind()) {
    case Kind::Bool:
      return v.as_bool() ? "1" : "0";
    case Kind::Enum:
      return std::to_string(v.as_enum());
    case Kind::Real: {
      std::ostringstream os;
      os.precision(17);
      os << v.as_real();
      std::string s = os.str();
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
  }
  return "?";
}

}  // namespace plcattest
