#pragma once

// Structured-text-like PLC dialect: declarations, a typed AST, a parser and
// a deterministic single-scan interpreter.
//
// File layout (.stx):
//
//   PROGRAM name;                                    (optional)
//   VAR
//     ident : BOOL|ENUM(k)|REAL := init; CLASS cls; [RANGE lo hi;]
//   END_VAR
//   LATCH                                            (optional)
//     block FROM ident;
//   END_LATCH
//   BODY
//     statements
//   END_BODY
//
// See docs/stx-grammar.md for the full grammar.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plcattest/error.hpp"
#include "plcattest/value.hpp"

namespace plcattest::stlang {

using plcattest::Kind;
using plcattest::Value;
using plcattest::ValueKind;

class ParseError : public Error {
 public:
  ParseError(int line, int col, const std::string& message);
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

class TypeError : public Error {
 public:
  TypeError(std::string ident, std::string expected, std::string found);
  const std::string& ident() const { return ident_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string ident_;
  std::string expected_;
  std::string found_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

enum class VarClass : std::uint8_t {
  SensorReading,
  AlarmBit,
  ActuatorState,
  StateVar,
  Timer,
  HealthyFlag,
  OutputCommand,
  Internal,
};

std::string_view to_string(VarClass c);
std::optional<VarClass> var_class_from_string(std::string_view s);

/// True for classes that are supplied by the plant on every scan.
inline bool is_input_class(VarClass c) {
  return c != VarClass::OutputCommand && c != VarClass::Internal;
}

/// Checks the dotted-identifier shape `[A-Za-z_][A-Za-z0-9_]*(\.[...])*`.
bool valid_ident(std::string_view name);

using VarId = int;

struct VarDecl {
  std::string ident;
  VarClass cls = VarClass::Internal;
  ValueKind kind;
  Value initial;
  /// Sampling range for REAL variables; ignored for discrete kinds.
  double range_lo = 0.0;
  double range_hi = 100.0;

  bool operator==(const VarDecl&) const = default;
};

enum class BinOp : std::uint8_t { And, Or, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul };

std::string_view to_string(BinOp op);

struct Expr {
  enum class Tag : std::uint8_t { Literal, Var, Not, Binary };

  Tag tag = Tag::Literal;
  Value literal;
  VarId var = -1;
  BinOp op = BinOp::And;
  std::vector<Expr> args;
  /// Resolved static type.
  ValueKind type;

  static Expr lit(Value v, ValueKind type);
  static Expr ref(VarId id, ValueKind type);
  static Expr negate(Expr e);
  static Expr binary(BinOp op, Expr lhs, Expr rhs, ValueKind type);

  bool operator==(const Expr&) const;
};

struct Stmt;

struct CaseArm {
  std::int32_t value = 0;
  std::vector<Stmt> body;

  bool operator==(const CaseArm&) const;
};

struct Stmt {
  enum class Tag : std::uint8_t { Assign, If, SetD, Case };

  Tag tag = Tag::Assign;
  VarId target = -1;  // Assign target or Case selector
  int block = -1;     // SetD block index
  Expr expr;          // Assign rhs or If condition
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;  // If else branch or Case ELSE
  std::vector<CaseArm> arms;

  bool operator==(const Stmt&) const;
};

/// A set-dominant latch: four declared BOOL sub-fields sharing a prefix.
struct SetdBlock {
  std::string name;
  VarId enable_in = -1;
  VarId set = -1;
  VarId reset = -1;
  VarId out = -1;
  /// Input whose value seeds the latch when a scan starts from a bare input
  /// snapshot (dataset generation, attestation).
  std::optional<VarId> latch_from;

  bool operator==(const SetdBlock&) const = default;
};

struct InputSnapshot {
  std::vector<Value> values;
  bool operator==(const InputSnapshot&) const = default;
};

struct OutputSnapshot {
  std::vector<Value> commands;
  bool operator==(const OutputSnapshot&) const = default;
};

/// Previous Out bit of every SetD block, aligned with Program::blocks().
using LatchState = std::vector<bool>;

struct InputInfo {
  std::string ident;
  VarClass cls;
  ValueKind kind;
};

/// Parsed and type-checked control program. Immutable once built.
class Program {
 public:
  /// Builds and validates a program; throws TypeError on any violation.
  /// `latch_sources` pairs a block name with the ident that seeds it.
  static Program build(std::string name, std::vector<VarDecl> decls,
                       std::vector<std::pair<std::string, std::string>> latch_sources,
                       std::vector<Stmt> body);

  /// Same declarations and latch sources, different statements. Re-runs
  /// the type checker.
  Program with_body(std::vector<Stmt> body) const;

  const std::string& name() const { return name_; }
  const std::vector<VarDecl>& decls() const { return decls_; }
  const VarDecl& decl(VarId id) const { return decls_.at(static_cast<std::size_t>(id)); }
  const std::vector<Stmt>& body() const { return body_; }
  const std::vector<SetdBlock>& blocks() const { return blocks_; }
  const std::vector<VarId>& input_order() const { return inputs_; }
  const std::vector<VarId>& output_order() const { return outputs_; }

  std::optional<VarId> find(std::string_view ident) const;
  /// Position of `id` in input_order(), if it is an input.
  std::optional<std::size_t> input_position(VarId id) const;

  bool operator==(const Program& other) const;

 private:
  Program() = default;
  void check_body() const;

  std::string name_;
  std::vector<VarDecl> decls_;
  std::vector<Stmt> body_;
  std::vector<SetdBlock> blocks_;
  std::vector<VarId> inputs_;
  std::vector<VarId> outputs_;
  std::vector<int> input_pos_;  // per decl, -1 if not an input
};

Program parse_program(std::string_view text, std::string default_name = "main");
Program load_program(const std::string& path);

/// Canonical text form; comments are not preserved.
std::string unparse(const Program& prog);
std::string unparse_expr(const Program& prog, const Expr& e);

std::vector<InputInfo> list_inputs(const Program& prog);

struct ScanResult {
  OutputSnapshot outputs;
  LatchState latches;
  /// Final value of every declared variable (indexed by VarId).
  std::vector<Value> env;
};

/// Executes the body once, top to bottom.
ScanResult scan(const Program& prog, const InputSnapshot& input, const LatchState& latches);

/// All-zero latch state.
LatchState initial_latches(const Program& prog);

/// Latch context implied by an input snapshot: each block with a LATCH
/// source takes that input's value, the others start at 0.
LatchState latches_from_input(const Program& prog, const InputSnapshot& input);

/// Snapshot holding every input's declared initial value.
InputSnapshot default_inputs(const Program& prog);

/// Evaluates a type-checked expression against a variable environment.
Value eval(const Expr& e, const std::vector<Value>& env);

}  // namespace plcattest::stlang
