#include <cmath>

#include "plcattest/stlang.hpp"

namespace plcattest::stlang {

namespace {

Value finite(double r) {
  if (!std::isfinite(r)) throw EvalError("arithmetic overflow");
  return Value::real(r);
}

}  // namespace

Value eval(const Expr& e, const std::vector<Value>& env) {
  switch (e.tag) {
    case Expr::Tag::Literal:
      return e.literal;
    case Expr::Tag::Var:
      return env[static_cast<std::size_t>(e.var)];
    case Expr::Tag::Not:
      return Value::boolean(!eval(e.args[0], env).as_bool());
    case Expr::Tag::Binary:
      break;
  }

  // Short-circuit is observationally identical here (no side effects).
  if (e.op == BinOp::And) {
    return Value::boolean(eval(e.args[0], env).as_bool() && eval(e.args[1], env).as_bool());
  }
  if (e.op == BinOp::Or) {
    return Value::boolean(eval(e.args[0], env).as_bool() || eval(e.args[1], env).as_bool());
  }

  const Value a = eval(e.args[0], env);
  const Value b = eval(e.args[1], env);
  const double x = a.numeric();
  const double y = b.numeric();
  switch (e.op) {
    case BinOp::Eq: return Value::boolean(x == y);
    case BinOp::Ne: return Value::boolean(x != y);
    case BinOp::Lt: return Value::boolean(x < y);
    case BinOp::Le: return Value::boolean(x <= y);
    case BinOp::Gt: return Value::boolean(x > y);
    case BinOp::Ge: return Value::boolean(x >= y);
    case BinOp::Add: return finite(x + y);
    case BinOp::Sub: return finite(x - y);
    case BinOp::Mul: return finite(x * y);
    default: break;
  }
  throw EvalError("malformed expression");
}

namespace {

class Interp {
 public:
  Interp(const Program& p, std::vector<Value>& env) : prog_(p), env_(env) {}

  void run(const std::vector<Stmt>& body) {
    for (const Stmt& s : body) exec(s);
  }

 private:
  void exec(const Stmt& s) {
    switch (s.tag) {
      case Stmt::Tag::Assign: {
        Value v = eval(s.expr, env_);
        const VarDecl& d = prog_.decl(s.target);
        if (!v.conforms(d.kind)) {
          if (d.kind.kind == Kind::Real) throw EvalError("non-finite value assigned to " + d.ident);
          throw EvalError("value " + to_string(v) + " out of range for " + d.ident + " : " +
                          to_string(d.kind));
        }
        env_[static_cast<std::size_t>(s.target)] = v;
        return;
      }
      case Stmt::Tag::If:
        run(eval(s.expr, env_).as_bool() ? s.then_body : s.else_body);
        return;
      case Stmt::Tag::SetD: {
        const SetdBlock& b = prog_.blocks()[static_cast<std::size_t>(s.block)];
        auto at = [&](VarId id) -> Value& { return env_[static_cast<std::size_t>(id)]; };
        if (!at(b.enable_in).as_bool()) return;  // disabled: hold previous Out
        if (at(b.set).as_bool()) {
          at(b.out) = Value::boolean(true);
        } else if (at(b.reset).as_bool()) {
          at(b.out) = Value::boolean(false);
        }
        return;
      }
      case Stmt::Tag::Case: {
        const Value sel = env_[static_cast<std::size_t>(s.target)];
        const std::int32_t key = sel.kind() == Kind::Bool ? (sel.as_bool() ? 1 : 0) : sel.as_enum();
        for (const CaseArm& arm : s.arms) {
          if (arm.value == key) {
            run(arm.body);
            return;
          }
        }
        run(s.else_body);
        return;
      }
    }
  }

  const Program& prog_;
  std::vector<Value>& env_;
};

}  // namespace

ScanResult scan(const Program& prog, const InputSnapshot& input, const LatchState& latches) {
  const auto& inputs = prog.input_order();
  if (input.values.size() != inputs.size())
    throw EvalError("input snapshot has " + std::to_string(input.values.size()) + " values, program " +
                    prog.name() + " expects " + std::to_string(inputs.size()));
  if (latches.size() != prog.blocks().size()) throw EvalError("latch state does not match SETD blocks");

  ScanResult r;
  r.env.reserve(prog.decls().size());
  for (const VarDecl& d : prog.decls()) r.env.push_back(d.initial);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const VarDecl& d = prog.decl(inputs[i]);
    if (!input.values[i].conforms(d.kind))
      throw EvalError("input " + d.ident + " = " + to_string(input.values[i]) + " does not conform to " +
                      to_string(d.kind));
    r.env[static_cast<std::size_t>(inputs[i])] = input.values[i];
  }
  for (std::size_t b = 0; b < latches.size(); ++b)
    r.env[static_cast<std::size_t>(prog.blocks()[b].out)] = Value::boolean(latches[b]);

  Interp(prog, r.env).run(prog.body());

  r.outputs.commands.reserve(prog.output_order().size());
  for (VarId id : prog.output_order()) r.outputs.commands.push_back(r.env[static_cast<std::size_t>(id)]);
  r.latches.resize(prog.blocks().size());
  for (std::size_t b = 0; b < prog.blocks().size(); ++b)
    r.latches[b] = r.env[static_cast<std::size_t>(prog.blocks()[b].out)].as_bool();
  return r;
}

}  // namespace plcattest::stlang
