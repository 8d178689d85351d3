#include <algorithm>
#include <set>
#include <unordered_map>

#include "plcattest/stlang.hpp"

namespace plcattest::stlang {

ParseError::ParseError(int line, int col, const std::string& message)
    : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
      line_(line),
      col_(col) {}

TypeError::TypeError(std::string ident, std::string expected, std::string found)
    : Error("type error at '" + ident + "': expected " + expected + ", found " + found),
      ident_(std::move(ident)),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

namespace {

constexpr std::pair<VarClass, std::string_view> kClassNames[] = {
    {VarClass::SensorReading, "SensorReading"}, {VarClass::AlarmBit, "AlarmBit"},
    {VarClass::ActuatorState, "ActuatorState"}, {VarClass::StateVar, "StateVar"},
    {VarClass::Timer, "Timer"},                 {VarClass::HealthyFlag, "HealthyFlag"},
    {VarClass::OutputCommand, "OutputCommand"}, {VarClass::Internal, "Internal"},
};

bool ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

}  // namespace

std::string_view to_string(VarClass c) {
  for (const auto& [cls, name] : kClassNames)
    if (cls == c) return name;
  return "?";
}

std::optional<VarClass> var_class_from_string(std::string_view s) {
  for (const auto& [cls, name] : kClassNames)
    if (name == s) return cls;
  return std::nullopt;
}

bool valid_ident(std::string_view name) {
  if (name.empty()) return false;
  bool segment_start = true;
  for (char c : name) {
    if (segment_start) {
      if (!ident_start(c)) return false;
      segment_start = false;
    } else if (c == '.') {
      segment_start = true;
    } else if (!ident_char(c)) {
      return false;
    }
  }
  return !segment_start;
}

std::string_view to_string(BinOp op) {
  switch (op) {
    case BinOp::And: return "AND";
    case BinOp::Or: return "OR";
    case BinOp::Eq: return "=";
    case BinOp::Ne: return "<>";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
  }
  return "?";
}

Expr Expr::lit(Value v, ValueKind type) {
  Expr e;
  e.tag = Tag::Literal;
  e.literal = v;
  e.type = type;
  return e;
}

Expr Expr::ref(VarId id, ValueKind type) {
  Expr e;
  e.tag = Tag::Var;
  e.var = id;
  e.type = type;
  return e;
}

Expr Expr::negate(Expr inner) {
  Expr e;
  e.tag = Tag::Not;
  e.type = ValueKind::boolean();
  e.args.push_back(std::move(inner));
  return e;
}

Expr Expr::binary(BinOp op, Expr lhs, Expr rhs, ValueKind type) {
  Expr e;
  e.tag = Tag::Binary;
  e.op = op;
  e.type = type;
  e.args.push_back(std::move(lhs));
  e.args.push_back(std::move(rhs));
  return e;
}

bool Expr::operator==(const Expr& o) const {
  if (tag != o.tag || !(type == o.type)) return false;
  switch (tag) {
    case Tag::Literal: return literal == o.literal;
    case Tag::Var: return var == o.var;
    case Tag::Not: return args == o.args;
    case Tag::Binary: return op == o.op && args == o.args;
  }
  return false;
}

bool CaseArm::operator==(const CaseArm& o) const { return value == o.value && body == o.body; }

bool Stmt::operator==(const Stmt& o) const {
  if (tag != o.tag) return false;
  switch (tag) {
    case Tag::Assign: return target == o.target && expr == o.expr;
    case Tag::If: return expr == o.expr && then_body == o.then_body && else_body == o.else_body;
    case Tag::SetD: return block == o.block;
    case Tag::Case: return target == o.target && arms == o.arms && else_body == o.else_body;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

class BodyChecker {
 public:
  explicit BodyChecker(const Program& p) : prog_(p) {}

  void stmts(const std::vector<Stmt>& body) {
    for (const Stmt& s : body) stmt(s);
  }

 private:
  const VarDecl& var(VarId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= prog_.decls().size())
      throw TypeError("#" + std::to_string(id), "declared variable", "unknown id");
    return prog_.decl(id);
  }

  void stmt(const Stmt& s) {
    switch (s.tag) {
      case Stmt::Tag::Assign: {
        const VarDecl& d = var(s.target);
        if (d.cls == VarClass::SensorReading || d.cls == VarClass::AlarmBit)
          throw TypeError(d.ident, "writable variable", std::string(to_string(d.cls)));
        expr(s.expr, d.ident);
        if (s.expr.type.kind != d.kind.kind)
          throw TypeError(d.ident, to_string(d.kind), to_string(s.expr.type));
        break;
      }
      case Stmt::Tag::If:
        expr(s.expr, "IF");
        if (s.expr.type.kind != Kind::Bool)
          throw TypeError("IF", "BOOL", to_string(s.expr.type));
        stmts(s.then_body);
        stmts(s.else_body);
        break;
      case Stmt::Tag::SetD:
        if (s.block < 0 || static_cast<std::size_t>(s.block) >= prog_.blocks().size())
          throw TypeError("SETD", "declared SETD block", "#" + std::to_string(s.block));
        break;
      case Stmt::Tag::Case: {
        const VarDecl& d = var(s.target);
        if (!d.kind.discrete()) throw TypeError(d.ident, "BOOL or ENUM selector", "REAL");
        std::set<std::int32_t> seen;
        for (const CaseArm& arm : s.arms) {
          if (arm.value < 0 || arm.value >= d.kind.domain_size())
            throw TypeError(d.ident, "case label < " + std::to_string(d.kind.domain_size()),
                            std::to_string(arm.value));
          if (!seen.insert(arm.value).second)
            throw TypeError(d.ident, "distinct case labels", std::to_string(arm.value));
          stmts(arm.body);
        }
        stmts(s.else_body);
        break;
      }
    }
  }

  void expr(const Expr& e, const std::string& ctx) {
    switch (e.tag) {
      case Expr::Tag::Literal:
        if (!e.literal.conforms(e.type))
          throw TypeError(ctx, to_string(e.type), "literal " + to_string(e.literal));
        return;
      case Expr::Tag::Var: {
        const VarDecl& d = var(e.var);
        if (!(d.kind == e.type)) throw TypeError(d.ident, to_string(d.kind), to_string(e.type));
        return;
      }
      case Expr::Tag::Not:
        if (e.args.size() != 1) throw TypeError(ctx, "unary operand", "malformed NOT");
        expr(e.args[0], ctx);
        if (e.args[0].type.kind != Kind::Bool || e.type.kind != Kind::Bool)
          throw TypeError(ctx, "BOOL", to_string(e.args[0].type));
        return;
      case Expr::Tag::Binary: {
        if (e.args.size() != 2) throw TypeError(ctx, "binary operands", "malformed expression");
        expr(e.args[0], ctx);
        expr(e.args[1], ctx);
        const Kind l = e.args[0].type.kind;
        const Kind r = e.args[1].type.kind;
        switch (e.op) {
          case BinOp::And:
          case BinOp::Or:
            if (l != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(e.args[0].type));
            if (r != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(e.args[1].type));
            if (e.type.kind != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(e.type));
            return;
          case BinOp::Eq:
          case BinOp::Ne:
          case BinOp::Lt:
          case BinOp::Le:
          case BinOp::Gt:
          case BinOp::Ge: {
            if (l != r) throw TypeError(ctx, to_string(e.args[0].type), to_string(e.args[1].type));
            const bool ordered = e.op != BinOp::Eq && e.op != BinOp::Ne;
            if (ordered && l == Kind::Bool)
              throw TypeError(ctx, "ENUM or REAL operands", "BOOL");
            if (e.type.kind != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(e.type));
            return;
          }
          case BinOp::Add:
          case BinOp::Sub:
          case BinOp::Mul:
            if (l != Kind::Real) throw TypeError(ctx, "REAL", to_string(e.args[0].type));
            if (r != Kind::Real) throw TypeError(ctx, "REAL", to_string(e.args[1].type));
            if (e.type.kind != Kind::Real) throw TypeError(ctx, "REAL", to_string(e.type));
            return;
        }
        return;
      }
    }
  }

  const Program& prog_;
};

}  // namespace

Program Program::build(std::string name, std::vector<VarDecl> decls,
                       std::vector<std::pair<std::string, std::string>> latch_sources,
                       std::vector<Stmt> body) {
  Program p;
  p.name_ = std::move(name);
  p.decls_ = std::move(decls);
  p.body_ = std::move(body);

  std::unordered_map<std::string, VarId> index;
  for (std::size_t i = 0; i < p.decls_.size(); ++i) {
    const VarDecl& d = p.decls_[i];
    if (!valid_ident(d.ident)) throw TypeError(d.ident, "identifier", "malformed name");
    if (!index.emplace(d.ident, static_cast<VarId>(i)).second)
      throw TypeError(d.ident, "single declaration", "duplicate declaration");
    if (d.kind.kind == Kind::Enum && d.kind.cardinality < 1)
      throw TypeError(d.ident, "ENUM cardinality >= 1", std::to_string(d.kind.cardinality));
    if (!d.initial.conforms(d.kind))
      throw TypeError(d.ident, to_string(d.kind), "initial value " + to_string(d.initial));
    if (d.cls == VarClass::OutputCommand && !d.kind.discrete())
      throw TypeError(d.ident, "BOOL or ENUM output command", "REAL");
    if (d.cls == VarClass::SensorReading && d.kind.kind != Kind::Real)
      throw TypeError(d.ident, "REAL sensor reading", to_string(d.kind));
    if (d.kind.kind == Kind::Real && !(d.range_lo < d.range_hi))
      throw TypeError(d.ident, "RANGE lo < hi", "empty range");
  }

  p.input_pos_.assign(p.decls_.size(), -1);
  for (std::size_t i = 0; i < p.decls_.size(); ++i) {
    const VarDecl& d = p.decls_[i];
    if (is_input_class(d.cls)) {
      p.input_pos_[i] = static_cast<int>(p.inputs_.size());
      p.inputs_.push_back(static_cast<VarId>(i));
    } else if (d.cls == VarClass::OutputCommand) {
      p.outputs_.push_back(static_cast<VarId>(i));
    }
  }

  constexpr std::string_view kEnable = ".EnableIn";
  for (std::size_t i = 0; i < p.decls_.size(); ++i) {
    const std::string& id = p.decls_[i].ident;
    if (id.size() <= kEnable.size() || !id.ends_with(kEnable)) continue;
    SetdBlock b;
    b.name = id.substr(0, id.size() - kEnable.size());
    auto field = [&](std::string_view suffix) -> VarId {
      auto it = index.find(b.name + std::string(suffix));
      if (it == index.end())
        throw TypeError(b.name, "SETD sub-field " + std::string(suffix), "undeclared");
      if (p.decls_[static_cast<std::size_t>(it->second)].kind.kind != Kind::Bool)
        throw TypeError(b.name + std::string(suffix), "BOOL",
                        to_string(p.decls_[static_cast<std::size_t>(it->second)].kind));
      return it->second;
    };
    b.enable_in = field(".EnableIn");
    b.set = field(".Set");
    b.reset = field(".Reset");
    b.out = field(".Out");
    p.blocks_.push_back(std::move(b));
  }

  for (const auto& [block, source] : latch_sources) {
    auto bit = std::find_if(p.blocks_.begin(), p.blocks_.end(),
                            [&](const SetdBlock& b) { return b.name == block; });
    if (bit == p.blocks_.end()) throw TypeError(block, "SETD block", "unknown block");
    auto sit = index.find(source);
    if (sit == index.end()) throw TypeError(source, "declared input", "undeclared");
    const VarDecl& sd = p.decls_[static_cast<std::size_t>(sit->second)];
    if (!is_input_class(sd.cls)) throw TypeError(source, "input variable", std::string(to_string(sd.cls)));
    if (sd.kind.kind != Kind::Bool) throw TypeError(source, "BOOL", to_string(sd.kind));
    if (bit->latch_from) throw TypeError(block, "single LATCH source", "duplicate");
    bit->latch_from = sit->second;
  }

  p.check_body();
  return p;
}

Program Program::with_body(std::vector<Stmt> body) const {
  Program p = *this;
  p.body_ = std::move(body);
  p.check_body();
  return p;
}

void Program::check_body() const { BodyChecker(*this).stmts(body_); }

std::optional<VarId> Program::find(std::string_view ident) const {
  for (std::size_t i = 0; i < decls_.size(); ++i)
    if (decls_[i].ident == ident) return static_cast<VarId>(i);
  return std::nullopt;
}

std::optional<std::size_t> Program::input_position(VarId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= input_pos_.size()) return std::nullopt;
  const int pos = input_pos_[static_cast<std::size_t>(id)];
  if (pos < 0) return std::nullopt;
  return static_cast<std::size_t>(pos);
}

bool Program::operator==(const Program& o) const {
  return name_ == o.name_ && decls_ == o.decls_ && blocks_ == o.blocks_ && body_ == o.body_;
}

std::vector<InputInfo> list_inputs(const Program& prog) {
  std::vector<InputInfo> out;
  out.reserve(prog.input_order().size());
  for (VarId id : prog.input_order()) {
    const VarDecl& d = prog.decl(id);
    out.push_back({d.ident, d.cls, d.kind});
  }
  return out;
}

LatchState initial_latches(const Program& prog) { return LatchState(prog.blocks().size(), false); }

LatchState latches_from_input(const Program& prog, const InputSnapshot& input) {
  LatchState l(prog.blocks().size(), false);
  for (std::size_t b = 0; b < prog.blocks().size(); ++b) {
    const auto& src = prog.blocks()[b].latch_from;
    if (!src) continue;
    auto pos = prog.input_position(*src);
    l[b] = input.values.at(*pos).as_bool();
  }
  return l;
}

InputSnapshot default_inputs(const Program& prog) {
  InputSnapshot s;
  for (VarId id : prog.input_order()) s.values.push_back(prog.decl(id).initial);
  return s;
}

}  // namespace plcattest::stlang
