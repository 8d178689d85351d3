#include <sstream>

#include "plcattest/stlang.hpp"

namespace plcattest::stlang {
namespace {

int precedence(const Expr& e) {
  if (e.tag != Expr::Tag::Binary) return 6;
  switch (e.op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Add:
    case BinOp::Sub: return 4;
    case BinOp::Mul: return 5;
    default: return 3;
  }
}

void emit_expr(std::ostream& os, const Program& p, const Expr& e) {
  switch (e.tag) {
    case Expr::Tag::Literal:
      os << to_string(e.literal);
      return;
    case Expr::Tag::Var:
      os << p.decl(e.var).ident;
      return;
    case Expr::Tag::Not: {
      const bool paren = e.args[0].tag == Expr::Tag::Binary;
      os << "NOT ";
      if (paren) os << '(';
      emit_expr(os, p, e.args[0]);
      if (paren) os << ')';
      return;
    }
    case Expr::Tag::Binary: {
      const int prec = precedence(e);
      // Left-associative grammar: the left operand may share our precedence,
      // the right one must bind tighter to survive a reparse.
      const bool lp = precedence(e.args[0]) < prec;
      const bool rp = precedence(e.args[1]) <= prec;
      if (lp) os << '(';
      emit_expr(os, p, e.args[0]);
      if (lp) os << ')';
      os << ' ' << to_string(e.op) << ' ';
      if (rp) os << '(';
      emit_expr(os, p, e.args[1]);
      if (rp) os << ')';
      return;
    }
  }
}

void emit_stmts(std::ostream& os, const Program& p, const std::vector<Stmt>& body, int depth);

void emit_stmt(std::ostream& os, const Program& p, const Stmt& s, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (s.tag) {
    case Stmt::Tag::Assign:
      os << pad << p.decl(s.target).ident << " := ";
      emit_expr(os, p, s.expr);
      os << ";\n";
      return;
    case Stmt::Tag::SetD:
      os << pad << "SETD(" << p.blocks()[static_cast<std::size_t>(s.block)].name << ");\n";
      return;
    case Stmt::Tag::If:
      os << pad << "IF ";
      emit_expr(os, p, s.expr);
      os << " THEN\n";
      emit_stmts(os, p, s.then_body, depth + 1);
      if (!s.else_body.empty()) {
        os << pad << "ELSE\n";
        emit_stmts(os, p, s.else_body, depth + 1);
      }
      os << pad << "END_IF;\n";
      return;
    case Stmt::Tag::Case:
      os << pad << "CASE " << p.decl(s.target).ident << " OF\n";
      for (const CaseArm& arm : s.arms) {
        os << pad << "  " << arm.value << ":\n";
        emit_stmts(os, p, arm.body, depth + 2);
      }
      if (!s.else_body.empty()) {
        os << pad << "  ELSE\n";
        emit_stmts(os, p, s.else_body, depth + 2);
      }
      os << pad << "END_CASE;\n";
      return;
  }
}

void emit_stmts(std::ostream& os, const Program& p, const std::vector<Stmt>& body, int depth) {
  for (const Stmt& s : body) emit_stmt(os, p, s, depth);
}

}  // namespace

std::string unparse_expr(const Program& prog, const Expr& e) {
  std::ostringstream os;
  emit_expr(os, prog, e);
  return os.str();
}

std::string unparse(const Program& prog) {
  std::ostringstream os;
  os << "PROGRAM " << prog.name() << ";\n";
  os << "VAR\n";
  for (const VarDecl& d : prog.decls()) {
    os << "  " << d.ident << " : " << to_string(d.kind) << " := " << to_string(d.initial) << "; CLASS "
       << to_string(d.cls) << ";";
    if (d.kind.kind == Kind::Real)
      os << " RANGE " << to_string(Value::real(d.range_lo)) << ' ' << to_string(Value::real(d.range_hi)) << ';';
    os << '\n';
  }
  os << "END_VAR\n";
  bool any_latch = false;
  for (const SetdBlock& b : prog.blocks()) any_latch = any_latch || b.latch_from.has_value();
  if (any_latch) {
    os << "LATCH\n";
    for (const SetdBlock& b : prog.blocks())
      if (b.latch_from) os << "  " << b.name << " FROM " << prog.decl(*b.latch_from).ident << ";\n";
    os << "END_LATCH\n";
  }
  os << "BODY\n";
  emit_stmts(os, prog, prog.body(), 1);
  os << "END_BODY\n";
  return os.str();
}

}  // namespace plcattest::stlang
