#pragma once

#include <cstdint>
#include <string>

namespace plcattest {

enum class Kind : std::uint8_t { Bool, Enum, Real };

/// Static type of a variable or expression. `cardinality` is meaningful for
/// Enum only (values are 0 .. cardinality-1).
struct ValueKind {
  Kind kind = Kind::Bool;
  int cardinality = 2;

  static ValueKind boolean() { return {Kind::Bool, 2}; }
  static ValueKind enumeration(int card) { return {Kind::Enum, card}; }
  static ValueKind real() { return {Kind::Real, 0}; }

  bool discrete() const { return kind != Kind::Real; }
  /// Number of distinct values for discrete kinds.
  int domain_size() const { return kind == Kind::Bool ? 2 : cardinality; }

  friend bool operator==(const ValueKind&, const ValueKind&) = default;
};

std::string to_string(const ValueKind& k);

/// A runtime value: Bool bit, Enum ordinal or finite Real.
class Value {
 public:
  Value() = default;

  static Value boolean(bool b) { return Value(Kind::Bool, b ? 1 : 0, 0.0); }
  static Value enumeration(std::int32_t v) { return Value(Kind::Enum, v, 0.0); }
  static Value real(double r);

  Kind kind() const { return kind_; }
  bool as_bool() const { return ival_ != 0; }
  std::int32_t as_enum() const { return ival_; }
  double as_real() const { return rval_; }

  /// Numeric view used for feature vectors: bits as 0/1, enums as their
  /// ordinal, reals as-is.
  double numeric() const { return kind_ == Kind::Real ? rval_ : static_cast<double>(ival_); }

  /// Whether the value is admissible for a variable of kind `k`.
  bool conforms(const ValueKind& k) const;

  /// Builds a value of kind `k` from its numeric view (inverse of numeric()).
  static Value from_numeric(const ValueKind& k, double x);

  friend bool operator==(const Value& a, const Value& b) {
    return a.kind_ == b.kind_ && a.ival_ == b.ival_ && a.rval_ == b.rval_;
  }

 private:
  Value(Kind k, std::int32_t i, double r) : kind_(k), ival_(i), rval_(r) {}

  Kind kind_ = Kind::Bool;
  std::int32_t ival_ = 0;
  double rval_ = 0.0;
};

std::string to_string(const Value& v);

}  // namespace plcattest
