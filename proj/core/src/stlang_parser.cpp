#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "plcattest/stlang.hpp"

namespace plcattest::stlang {
namespace {

enum class Tok { Ident, Int, Real, Keyword, Symbol, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int col = 1;
};

constexpr std::string_view kKeywords[] = {
    "PROGRAM", "VAR",   "END_VAR",  "LATCH",    "END_LATCH", "FROM",   "BODY",
    "END_BODY", "CLASS", "RANGE",   "BOOL",     "ENUM",      "REAL",   "IF",
    "THEN",    "ELSIF", "ELSE",     "END_IF",   "CASE",      "OF",     "END_CASE",
    "SETD",    "AND",   "OR",       "NOT",      "TRUE",      "FALSE",
};

// Recognised so they can be rejected with a precise message.
constexpr std::string_view kUnsupported[] = {
    "WHILE", "FOR", "REPEAT", "FUNCTION", "FUNCTION_BLOCK", "RETURN", "EXIT", "GOTO",
};

std::string upper(std::string_view s) {
  std::string u(s);
  for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return u;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        lex_word(t);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else {
        lex_symbol(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
      if (peek() == '(' && peek(1) == '*') {
        const int l = line_, c = col_;
        advance();
        advance();
        while (pos_ < src_.size() && !(peek() == '*' && peek(1) == ')')) advance();
        if (pos_ >= src_.size()) throw ParseError(l, c, "unterminated comment");
        advance();
        advance();
        continue;
      }
      return;
    }
  }

  void lex_word(Token& t) {
    const std::size_t start = pos_;
    for (;;) {
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
        advance();
      if (peek() == '.' && (std::isalpha(static_cast<unsigned char>(peek(1))) || peek(1) == '_')) {
        advance();
        continue;
      }
      break;
    }
    t.text = std::string(src_.substr(start, pos_ - start));
    const std::string u = upper(t.text);
    for (auto kw : kUnsupported)
      if (u == kw) throw ParseError(t.line, t.col, "unsupported construct '" + t.text + "'");
    for (auto kw : kKeywords) {
      if (u == kw) {
        t.kind = Tok::Keyword;
        t.text = u;
        return;
      }
    }
    t.kind = Tok::Ident;
  }

  void lex_number(Token& t) {
    const std::size_t start = pos_;
    bool real = false;
    while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      real = true;
      advance();
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      const char n1 = peek(1);
      const bool sign = n1 == '+' || n1 == '-';
      if (std::isdigit(static_cast<unsigned char>(sign ? peek(2) : n1))) {
        real = true;
        advance();
        if (sign) advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
    }
    if (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_')
      throw ParseError(line_, col_, "malformed number");
    t.kind = real ? Tok::Real : Tok::Int;
    t.text = std::string(src_.substr(start, pos_ - start));
  }

  void lex_symbol(Token& t) {
    const char c = peek();
    const char n = peek(1);
    auto two = [&](const char* s) {
      t.text = s;
      advance();
      advance();
    };
    t.kind = Tok::Symbol;
    if (c == ':' && n == '=') return two(":=");
    if (c == '<' && n == '>') return two("<>");
    if (c == '<' && n == '=') return two("<=");
    if (c == '>' && n == '=') return two(">=");
    switch (c) {
      case ':':
      case ';':
      case ',':
      case '(':
      case ')':
      case '=':
      case '<':
      case '>':
      case '+':
      case '-':
      case '*':
        t.text = std::string(1, c);
        advance();
        return;
      default:
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// Untyped expression straight from the grammar; typed in a second pass so
// that integer literals can take the kind their context demands.
struct Raw {
  enum class Tag { IntLit, RealLit, Var, Not, Binary } tag = Tag::IntLit;
  long long ival = 0;
  double rval = 0.0;
  VarId var = -1;
  BinOp op = BinOp::And;
  std::vector<Raw> args;
  int line = 0;
  int col = 0;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string default_name)
      : toks_(std::move(toks)), name_(std::move(default_name)) {}

  Program run() {
    if (at_kw("PROGRAM")) {
      next();
      name_ = expect(Tok::Ident, "program name").text;
      expect_sym(";");
    }
    expect_kw("VAR");
    while (!at_kw("END_VAR")) decl();
    next();
    std::vector<std::pair<std::string, std::string>> latches;
    if (at_kw("LATCH")) {
      next();
      while (!at_kw("END_LATCH")) {
        std::string block = expect(Tok::Ident, "SETD block name").text;
        expect_kw("FROM");
        const Token& src = expect(Tok::Ident, "latch source");
        if (!index_.contains(src.text))
          throw ParseError(src.line, src.col, "undeclared identifier '" + src.text + "'");
        expect_sym(";");
        latches.emplace_back(std::move(block), src.text);
      }
      next();
    }
    // Blocks are derived from the declarations; a throwaway build gives us
    // their indices and validates the declaration section.
    skeleton_ = Program::build(name_, decls_, latches, {});
    expect_kw("BODY");
    std::vector<Stmt> body = stmts_until({"END_BODY"});
    next();
    if (cur().kind != Tok::End) fail("trailing input after END_BODY");
    return Program::build(name_, decls_, latches, std::move(body));
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_kw(std::string_view kw) const { return cur().kind == Tok::Keyword && cur().text == kw; }
  bool at_sym(std::string_view s) const { return cur().kind == Tok::Symbol && cur().text == s; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(cur().line, cur().col, msg);
  }

  std::string describe() const {
    return cur().kind == Tok::End ? std::string("end of input") : "'" + cur().text + "'";
  }

  const Token& expect(Tok kind, const char* what) {
    if (cur().kind != kind) fail(std::string("expected ") + what + ", found " + describe());
    return next();
  }
  void expect_kw(std::string_view kw) {
    if (!at_kw(kw)) fail("expected " + std::string(kw) + ", found " + describe());
    next();
  }
  void expect_sym(std::string_view s) {
    if (!at_sym(s)) fail("expected '" + std::string(s) + "', found " + describe());
    next();
  }

  double signed_number(bool* is_int = nullptr) {
    bool neg = false;
    if (at_sym("-")) {
      neg = true;
      next();
    }
    if (cur().kind != Tok::Int && cur().kind != Tok::Real) fail("expected number, found " + describe());
    if (is_int) *is_int = cur().kind == Tok::Int;
    const double v = std::strtod(next().text.c_str(), nullptr);
    return neg ? -v : v;
  }

  void decl() {
    const Token& id = expect(Tok::Ident, "variable name");
    VarDecl d;
    d.ident = id.text;
    expect_sym(":");
    if (at_kw("BOOL")) {
      next();
      d.kind = ValueKind::boolean();
    } else if (at_kw("REAL")) {
      next();
      d.kind = ValueKind::real();
    } else if (at_kw("ENUM")) {
      next();
      expect_sym("(");
      d.kind = ValueKind::enumeration(std::atoi(expect(Tok::Int, "cardinality").text.c_str()));
      expect_sym(")");
    } else {
      fail("expected BOOL, ENUM(k) or REAL, found " + describe());
    }
    expect_sym(":=");
    bool is_int = false;
    const Token init_tok = cur();
    const double init = signed_number(&is_int);
    switch (d.kind.kind) {
      case Kind::Bool:
        if (!is_int || (init != 0.0 && init != 1.0))
          throw TypeError(d.ident, "BOOL", "initial value " + init_tok.text);
        d.initial = Value::boolean(init != 0.0);
        break;
      case Kind::Enum:
        if (!is_int) throw TypeError(d.ident, to_string(d.kind), "REAL initial value");
        d.initial = Value::enumeration(static_cast<std::int32_t>(init));
        break;
      case Kind::Real:
        d.initial = Value::real(init);
        break;
    }
    expect_sym(";");
    expect_kw("CLASS");
    const Token& cls = expect(Tok::Ident, "variable class");
    auto vc = var_class_from_string(cls.text);
    if (!vc) throw ParseError(cls.line, cls.col, "unknown variable class '" + cls.text + "'");
    d.cls = *vc;
    expect_sym(";");
    if (at_kw("RANGE")) {
      next();
      d.range_lo = signed_number();
      d.range_hi = signed_number();
      expect_sym(";");
    }
    if (index_.contains(d.ident))
      throw ParseError(id.line, id.col, "duplicate declaration of '" + d.ident + "'");
    index_.emplace(d.ident, static_cast<VarId>(decls_.size()));
    decls_.push_back(std::move(d));
  }

  VarId resolve(const Token& t) const {
    auto it = index_.find(t.text);
    if (it == index_.end()) throw ParseError(t.line, t.col, "undeclared identifier '" + t.text + "'");
    return it->second;
  }

  std::vector<Stmt> stmts_until(std::initializer_list<std::string_view> stops) {
    std::vector<Stmt> out;
    for (;;) {
      for (auto s : stops)
        if (at_kw(s)) return out;
      if (cur().kind == Tok::Int) return out;  // next CASE arm label
      if (cur().kind == Tok::End) fail("unexpected end of input");
      out.push_back(stmt());
    }
  }

  Stmt stmt() {
    if (at_kw("IF")) {
      next();
      return if_tail();
    }
    if (at_kw("CASE")) return case_stmt();
    if (at_kw("SETD")) {
      next();
      expect_sym("(");
      const Token& b = expect(Tok::Ident, "SETD block");
      Stmt s;
      s.tag = Stmt::Tag::SetD;
      const auto& blocks = skeleton_->blocks();
      for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].name == b.text) s.block = static_cast<int>(i);
      if (s.block < 0) throw ParseError(b.line, b.col, "'" + b.text + "' is not a SETD block");
      expect_sym(")");
      expect_sym(";");
      return s;
    }
    if (cur().kind != Tok::Ident) fail("expected statement, found " + describe());
    const Token& target = next();
    Stmt s;
    s.tag = Stmt::Tag::Assign;
    s.target = resolve(target);
    expect_sym(":=");
    const VarDecl& d = decls_[static_cast<std::size_t>(s.target)];
    s.expr = typed(expr(), d.kind, d.ident);
    if (s.expr.type.kind != d.kind.kind) throw TypeError(d.ident, to_string(d.kind), to_string(s.expr.type));
    expect_sym(";");
    return s;
  }

  // After IF / ELSIF.
  Stmt if_tail() {
    Stmt s;
    s.tag = Stmt::Tag::If;
    s.expr = typed(expr(), ValueKind::boolean(), "IF");
    if (s.expr.type.kind != Kind::Bool) throw TypeError("IF", "BOOL", to_string(s.expr.type));
    expect_kw("THEN");
    s.then_body = stmts_until({"ELSIF", "ELSE", "END_IF"});
    if (cur().kind == Tok::Int) fail("unexpected number");
    if (at_kw("ELSIF")) {
      next();
      s.else_body.push_back(if_tail());
      return s;  // the nested tail consumed END_IF
    }
    if (at_kw("ELSE")) {
      next();
      s.else_body = stmts_until({"END_IF"});
      if (cur().kind == Tok::Int) fail("unexpected number");
    }
    expect_kw("END_IF");
    expect_sym(";");
    return s;
  }

  Stmt case_stmt() {
    next();
    Stmt s;
    s.tag = Stmt::Tag::Case;
    const Token& sel = expect(Tok::Ident, "CASE selector");
    s.target = resolve(sel);
    expect_kw("OF");
    while (cur().kind == Tok::Int) {
      CaseArm arm;
      arm.value = std::atoi(next().text.c_str());
      expect_sym(":");
      arm.body = stmts_until({"ELSE", "END_CASE"});
      s.arms.push_back(std::move(arm));
    }
    if (at_kw("ELSE")) {
      next();
      s.else_body = stmts_until({"END_CASE"});
      if (cur().kind == Tok::Int) fail("case label after ELSE");
    }
    expect_kw("END_CASE");
    expect_sym(";");
    return s;
  }

  // Precedence climbing: OR < AND < comparison < additive < multiplicative.
  Raw expr() { return or_expr(); }

  Raw make_bin(BinOp op, Raw l, Raw r, const Token& at) {
    Raw b;
    b.tag = Raw::Tag::Binary;
    b.op = op;
    b.line = at.line;
    b.col = at.col;
    b.args.push_back(std::move(l));
    b.args.push_back(std::move(r));
    return b;
  }

  Raw or_expr() {
    Raw l = and_expr();
    while (at_kw("OR")) {
      const Token t = next();
      l = make_bin(BinOp::Or, std::move(l), and_expr(), t);
    }
    return l;
  }

  Raw and_expr() {
    Raw l = cmp_expr();
    while (at_kw("AND")) {
      const Token t = next();
      l = make_bin(BinOp::And, std::move(l), cmp_expr(), t);
    }
    return l;
  }

  Raw cmp_expr() {
    Raw l = add_expr();
    for (;;) {
      static const std::pair<std::string_view, BinOp> ops[] = {
          {"=", BinOp::Eq}, {"<>", BinOp::Ne}, {"<", BinOp::Lt},
          {"<=", BinOp::Le}, {">", BinOp::Gt},  {">=", BinOp::Ge}};
      bool matched = false;
      for (const auto& [sym, op] : ops) {
        if (at_sym(sym)) {
          const Token t = next();
          l = make_bin(op, std::move(l), add_expr(), t);
          matched = true;
          break;
        }
      }
      if (!matched) return l;
    }
  }

  Raw add_expr() {
    Raw l = mul_expr();
    while (at_sym("+") || at_sym("-")) {
      const Token t = next();
      l = make_bin(t.text == "+" ? BinOp::Add : BinOp::Sub, std::move(l), mul_expr(), t);
    }
    return l;
  }

  Raw mul_expr() {
    Raw l = unary();
    while (at_sym("*")) {
      const Token t = next();
      l = make_bin(BinOp::Mul, std::move(l), unary(), t);
    }
    return l;
  }

  Raw unary() {
    if (at_kw("NOT")) {
      const Token t = next();
      Raw r;
      r.tag = Raw::Tag::Not;
      r.line = t.line;
      r.col = t.col;
      r.args.push_back(unary());
      return r;
    }
    return primary();
  }

  Raw primary() {
    const Token t = cur();
    Raw r;
    r.line = t.line;
    r.col = t.col;
    if (at_sym("(")) {
      next();
      Raw inner = expr();
      expect_sym(")");
      return inner;
    }
    if (at_kw("TRUE") || at_kw("FALSE")) {
      next();
      r.tag = Raw::Tag::IntLit;
      r.ival = t.text == "TRUE" ? 1 : 0;
      return r;
    }
    bool neg = false;
    if (at_sym("-")) {
      neg = true;
      next();
      if (cur().kind != Tok::Int && cur().kind != Tok::Real) fail("expected number after '-'");
    }
    if (cur().kind == Tok::Int) {
      const Token& n = next();
      if (neg) {
        r.tag = Raw::Tag::RealLit;
        r.rval = -std::strtod(n.text.c_str(), nullptr);
      } else {
        r.tag = Raw::Tag::IntLit;
        r.ival = std::atoll(n.text.c_str());
      }
      return r;
    }
    if (cur().kind == Tok::Real) {
      r.tag = Raw::Tag::RealLit;
      r.rval = std::strtod(next().text.c_str(), nullptr);
      if (neg) r.rval = -r.rval;
      return r;
    }
    if (cur().kind == Tok::Ident) {
      r.tag = Raw::Tag::Var;
      r.var = resolve(next());
      return r;
    }
    fail("expected expression, found " + describe());
  }

  // Contextual typing. `expected` only steers untyped integer literals; the
  // caller checks the resulting kind.
  Expr typed(const Raw& r, std::optional<ValueKind> expected, const std::string& ctx) {
    switch (r.tag) {
      case Raw::Tag::IntLit: {
        const ValueKind k = expected.value_or(ValueKind::real());
        switch (k.kind) {
          case Kind::Bool:
            if (r.ival != 0 && r.ival != 1) throw TypeError(ctx, "BOOL", std::to_string(r.ival));
            return Expr::lit(Value::boolean(r.ival != 0), k);
          case Kind::Enum:
            if (r.ival < 0 || r.ival >= k.cardinality)
              throw TypeError(ctx, to_string(k), "literal " + std::to_string(r.ival));
            return Expr::lit(Value::enumeration(static_cast<std::int32_t>(r.ival)), k);
          case Kind::Real:
            return Expr::lit(Value::real(static_cast<double>(r.ival)), k);
        }
        break;
      }
      case Raw::Tag::RealLit:
        return Expr::lit(Value::real(r.rval), ValueKind::real());
      case Raw::Tag::Var:
        return Expr::ref(r.var, decls_[static_cast<std::size_t>(r.var)].kind);
      case Raw::Tag::Not: {
        Expr a = typed(r.args[0], ValueKind::boolean(), ctx);
        if (a.type.kind != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(a.type));
        return Expr::negate(std::move(a));
      }
      case Raw::Tag::Binary:
        return typed_binary(r, ctx);
    }
    throw ParseError(r.line, r.col, "malformed expression");
  }

  Expr typed_binary(const Raw& r, const std::string& ctx) {
    const Raw& lr = r.args[0];
    const Raw& rr = r.args[1];
    switch (r.op) {
      case BinOp::And:
      case BinOp::Or: {
        Expr l = typed(lr, ValueKind::boolean(), ctx);
        Expr rt = typed(rr, ValueKind::boolean(), ctx);
        if (l.type.kind != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(l.type));
        if (rt.type.kind != Kind::Bool) throw TypeError(ctx, "BOOL", to_string(rt.type));
        return Expr::binary(r.op, std::move(l), std::move(rt), ValueKind::boolean());
      }
      case BinOp::Add:
      case BinOp::Sub:
      case BinOp::Mul: {
        Expr l = typed(lr, ValueKind::real(), ctx);
        Expr rt = typed(rr, ValueKind::real(), ctx);
        if (l.type.kind != Kind::Real) throw TypeError(ctx, "REAL", to_string(l.type));
        if (rt.type.kind != Kind::Real) throw TypeError(ctx, "REAL", to_string(rt.type));
        return Expr::binary(r.op, std::move(l), std::move(rt), ValueKind::real());
      }
      default: {
        Expr l, rt;
        if (lr.tag == Raw::Tag::IntLit && rr.tag != Raw::Tag::IntLit) {
          rt = typed(rr, std::nullopt, ctx);
          l = typed(lr, rt.type, ctx);
        } else {
          l = typed(lr, std::nullopt, ctx);
          rt = typed(rr, l.type, ctx);
        }
        if (l.type.kind != rt.type.kind) throw TypeError(ctx, to_string(l.type), to_string(rt.type));
        const bool ordered = r.op != BinOp::Eq && r.op != BinOp::Ne;
        if (ordered && l.type.kind == Kind::Bool)
          throw TypeError(ctx, "ENUM or REAL operands", "BOOL");
        return Expr::binary(r.op, std::move(l), std::move(rt), ValueKind::boolean());
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::string name_;
  std::vector<VarDecl> decls_;
  std::unordered_map<std::string, VarId> index_;
  std::optional<Program> skeleton_;
};

}  // namespace

Program parse_program(std::string_view text, std::string default_name) {
  return Parser(Lexer(text).run(), std::move(default_name)).run();
}

Program load_program(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open program file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  if (!valid_ident(stem)) stem = "main";
  return parse_program(ss.str(), stem);
}

}  // namespace plcattest::stlang
