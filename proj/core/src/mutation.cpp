#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "plcattest/mutation.hpp"
#include "plcattest/rng.hpp"

namespace plcattest::attack {

using stlang::BinOp;
using stlang::Expr;
using stlang::Program;
using stlang::Stmt;
using stlang::VarId;

namespace {

constexpr std::array<std::string_view, 7> kKindNames = {
    "ConstantReplace", "RelOpReplace", "LogicOpReplace", "CondNegate",
    "AssignRhsReplace", "StmtDelete", "SetdFieldZero"};

constexpr std::array<BinOp, 6> kRelOps = {BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge};

bool is_relational(BinOp op) { return std::find(kRelOps.begin(), kRelOps.end(), op) != kRelOps.end(); }

std::vector<Value> domain(const ValueKind& k) {
  std::vector<Value> out;
  if (k.kind == Kind::Bool) {
    out = {Value::boolean(false), Value::boolean(true)};
  } else if (k.kind == Kind::Enum) {
    for (int v = 0; v < k.cardinality; ++v) out.push_back(Value::enumeration(v));
  }
  return out;
}

class Enumerator {
 public:
  explicit Enumerator(const Program& prog) : prog_(prog) {
    for (const auto& b : prog.blocks()) {
      setd_fields_.push_back(b.enable_in);
      setd_fields_.push_back(b.set);
      setd_fields_.push_back(b.reset);
    }
  }

  std::vector<MutationOp> run() {
    stmts(prog_.body(), "s");
    return std::move(ops_);
  }

 private:
  void add(MutationKind kind, const std::string& site, std::string detail) {
    MutationOp op;
    op.kind = kind;
    op.site = site;
    op.detail = std::move(detail);
    ops_.push_back(std::move(op));
  }

  void stmts(const std::vector<Stmt>& body, const std::string& prefix) {
    for (std::size_t i = 0; i < body.size(); ++i) stmt(body[i], prefix + std::to_string(i));
  }

  void stmt(const Stmt& s, const std::string& path) {
    add(MutationKind::StmtDelete, path, "");
    switch (s.tag) {
      case Stmt::Tag::Assign: {
        expr(s.expr, path + ".r");
        const bool setd_field = std::find(setd_fields_.begin(), setd_fields_.end(), s.target) != setd_fields_.end();
        if (setd_field) {
          for (bool b : {false, true}) {
            const Value v = Value::boolean(b);
            if (s.expr.tag == Expr::Tag::Literal && s.expr.literal == v) continue;
            add(MutationKind::SetdFieldZero, path, to_string(v));
            ops_.back().value = v;
          }
        }
        for (VarId id = 0; id < static_cast<VarId>(prog_.decls().size()); ++id) {
          if (id == s.target || !(prog_.decl(id).kind == s.expr.type)) continue;
          if (s.expr.tag == Expr::Tag::Var && s.expr.var == id) continue;
          add(MutationKind::AssignRhsReplace, path, prog_.decl(id).ident);
          ops_.back().var = id;
        }
        if (s.expr.tag != Expr::Tag::Literal && !setd_field) {
          for (const Value& v : domain(s.expr.type)) {
            add(MutationKind::AssignRhsReplace, path, to_string(v));
            ops_.back().value = v;
          }
        }
        break;
      }
      case Stmt::Tag::If:
        add(MutationKind::CondNegate, path, "NOT");
        expr(s.expr, path + ".r");
        stmts(s.then_body, path + ".t");
        stmts(s.else_body, path + ".e");
        break;
      case Stmt::Tag::SetD:
        break;
      case Stmt::Tag::Case:
        for (std::size_t a = 0; a < s.arms.size(); ++a) stmts(s.arms[a].body, path + ".a" + std::to_string(a) + ".");
        stmts(s.else_body, path + ".e");
        break;
    }
  }

  void expr(const Expr& e, const std::string& path) {
    switch (e.tag) {
      case Expr::Tag::Literal:
        if (e.type.kind == Kind::Real) {
          const Value v = Value::real(e.literal.as_real() == 0.0 ? 1.0 : 0.0);
          add(MutationKind::ConstantReplace, path, to_string(v));
          ops_.back().value = v;
        } else {
          for (const Value& v : domain(e.type)) {
            if (v == e.literal) continue;
            add(MutationKind::ConstantReplace, path, to_string(v));
            ops_.back().value = v;
          }
        }
        break;
      case Expr::Tag::Var:
        break;
      case Expr::Tag::Not:
        expr(e.args[0], path + ".c0");
        break;
      case Expr::Tag::Binary:
        if (e.op == BinOp::And || e.op == BinOp::Or) {
          const BinOp other = e.op == BinOp::And ? BinOp::Or : BinOp::And;
          add(MutationKind::LogicOpReplace, path, std::string(stlang::to_string(other)));
          ops_.back().op = other;
        } else if (is_relational(e.op)) {
          const bool ordered_ok = e.args[0].type.kind != Kind::Bool;
          for (BinOp r : kRelOps) {
            if (r == e.op) continue;
            if (!ordered_ok && r != BinOp::Eq && r != BinOp::Ne) continue;
            add(MutationKind::RelOpReplace, path, std::string(stlang::to_string(r)));
            ops_.back().op = r;
          }
        }
        expr(e.args[0], path + ".c0");
        expr(e.args[1], path + ".c1");
        break;
    }
  }

  const Program& prog_;
  std::vector<VarId> setd_fields_;
  std::vector<MutationOp> ops_;
};

std::size_t parse_index(std::string_view tok, std::size_t skip, const std::string& site) {
  std::size_t v = 0;
  const char* b = tok.data() + skip;
  const char* e = tok.data() + tok.size();
  const auto [p, ec] = std::from_chars(b, e, v);
  if (b == e || ec != std::errc() || p != e) throw Error("malformed mutation site '" + site + "'");
  return v;
}

struct Located {
  std::vector<Stmt>* container = nullptr;
  std::size_t index = 0;
  Expr* expr = nullptr;  // set when the site names an expression
};

Located locate(std::vector<Stmt>& body, const std::string& site) {
  std::vector<std::string_view> toks;
  std::string_view rest(site);
  while (true) {
    const auto dot = rest.find('.');
    toks.push_back(rest.substr(0, dot));
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }
  auto bad = [&] { return Error("mutation site '" + site + "' does not exist"); };
  if (toks.empty() || toks[0].empty() || toks[0][0] != 's') throw bad();

  Located at;
  at.container = &body;
  at.index = parse_index(toks[0], 1, site);
  if (at.index >= body.size()) throw bad();
  std::size_t i = 1;
  while (i < toks.size()) {
    const std::string_view t = toks[i];
    Stmt& s = (*at.container)[at.index];
    if (t == "r") break;
    std::vector<Stmt>* next = nullptr;
    if (!t.empty() && t[0] == 't') {
      next = &s.then_body;
    } else if (!t.empty() && t[0] == 'e') {
      next = &s.else_body;
    } else if (!t.empty() && t[0] == 'a') {
      const std::size_t arm = parse_index(t, 1, site);
      if (arm >= s.arms.size() || i + 1 >= toks.size()) throw bad();
      next = &s.arms[arm].body;
      ++i;
      at.container = next;
      at.index = parse_index(toks[i], 0, site);
      if (at.index >= next->size()) throw bad();
      ++i;
      continue;
    } else {
      throw bad();
    }
    at.container = next;
    at.index = parse_index(t, 1, site);
    if (at.index >= next->size()) throw bad();
    ++i;
  }
  if (i < toks.size()) {
    Expr* e = &(*at.container)[at.index].expr;
    for (++i; i < toks.size(); ++i) {
      const std::string_view t = toks[i];
      if (t.empty() || t[0] != 'c') throw bad();
      const std::size_t c = parse_index(t, 1, site);
      if (c >= e->args.size()) throw bad();
      e = &e->args[c];
    }
    at.expr = e;
  }
  return at;
}

}  // namespace

std::string_view to_string(MutationKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<MutationKind> mutation_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == s) return static_cast<MutationKind>(i);
  return std::nullopt;
}

std::vector<MutationOp> enumerate_sites(const Program& prog) { return Enumerator(prog).run(); }

Program apply_mutation(const Program& prog, const MutationOp& op) {
  std::vector<Stmt> body = prog.body();
  Located at = locate(body, op.site);
  Stmt& s = (*at.container)[at.index];
  auto need_expr = [&]() -> Expr& {
    if (!at.expr) throw Error(std::string(to_string(op.kind)) + " needs an expression site, got '" + op.site + "'");
    return *at.expr;
  };
  switch (op.kind) {
    case MutationKind::ConstantReplace: {
      Expr& e = need_expr();
      if (e.tag != Expr::Tag::Literal) throw Error("site '" + op.site + "' is not a literal");
      e.literal = op.value;
      break;
    }
    case MutationKind::RelOpReplace:
    case MutationKind::LogicOpReplace: {
      Expr& e = need_expr();
      if (e.tag != Expr::Tag::Binary) throw Error("site '" + op.site + "' is not a binary expression");
      e.op = op.op;
      break;
    }
    case MutationKind::CondNegate:
      if (s.tag != Stmt::Tag::If) throw Error("site '" + op.site + "' is not an IF");
      s.expr = Expr::negate(std::move(s.expr));
      break;
    case MutationKind::AssignRhsReplace:
      if (s.tag != Stmt::Tag::Assign) throw Error("site '" + op.site + "' is not an assignment");
      s.expr = op.var >= 0 ? Expr::ref(op.var, prog.decl(op.var).kind) : Expr::lit(op.value, s.expr.type);
      break;
    case MutationKind::SetdFieldZero:
      if (s.tag != Stmt::Tag::Assign) throw Error("site '" + op.site + "' is not an assignment");
      s.expr = Expr::lit(op.value, ValueKind::boolean());
      break;
    case MutationKind::StmtDelete:
      at.container->erase(at.container->begin() + static_cast<std::ptrdiff_t>(at.index));
      break;
  }
  return prog.with_body(std::move(body));
}

bool outputs_differ(const Program& parent, const Program& mutant, const stlang::InputSnapshot& in) {
  const auto latches = stlang::latches_from_input(parent, in);
  return stlang::scan(parent, in, latches).outputs != stlang::scan(mutant, in, latches).outputs;
}

std::vector<Mutant> make_effective_mutants(const Program& prog, const MutantSearch& search) {
  std::vector<MutationOp> ops = enumerate_sites(prog);
  if (ops.empty()) throw ExhaustedCandidates("program '" + prog.name() + "' has no mutation sites");
  Rng rng(mix_seed(search.seed, 0x6d7574u));
  for (std::size_t i = ops.size(); i > 1; --i) std::swap(ops[i - 1], ops[rng.below(i)]);

  const dataset::InputSampler sampler(prog);
  std::vector<Mutant> out;
  for (std::size_t c = 0; c < ops.size() && out.size() < search.count; ++c) {
    Program m = apply_mutation(prog, ops[c]);
    if (m == prog) continue;
    if (std::any_of(out.begin(), out.end(), [&](const Mutant& k) { return k.program == m; })) continue;
    Rng trial_rng(mix_seed(search.seed, c + 1));
    for (std::size_t t = 0; t < search.trials_per_candidate; ++t) {
      auto in = sampler.draw(trial_rng);
      if (!outputs_differ(prog, m, in)) continue;
      char id[16];
      std::snprintf(id, sizeof id, "m%02zu", out.size() + 1);
      out.push_back({prog.name() + "_" + id, std::move(m), ops[c], prog.name(), std::move(in)});
      break;
    }
  }
  if (out.size() < search.count)
    throw ExhaustedCandidates("only " + std::to_string(out.size()) + " effective mutants of '" + prog.name() +
                              "' out of " + std::to_string(ops.size()) + " candidates");
  return out;
}

std::vector<stlang::InputSnapshot> effective_inputs(const Mutant& mutant, const Program& parent, std::size_t count,
                                                    std::uint64_t seed, std::uint64_t max_attempts) {
  std::vector<stlang::InputSnapshot> out;
  if (count == 0) return out;
  if (mutant.witness && outputs_differ(parent, mutant.program, *mutant.witness)) out.push_back(*mutant.witness);
  const dataset::InputSampler sampler(parent);
  Rng rng(seed);
  for (std::uint64_t a = 0; out.size() < count; ++a) {
    if (a >= max_attempts)
      throw Timeout("found " + std::to_string(out.size()) + " of " + std::to_string(count) + " effective inputs for " +
                    mutant.id + " in " + std::to_string(max_attempts) + " attempts");
    auto in = sampler.draw(rng);
    if (outputs_differ(parent, mutant.program, in)) out.push_back(std::move(in));
  }
  return out;
}

DetectionResult detect_mutant(const Mutant& mutant, const std::vector<stlang::InputSnapshot>& inputs,
                              const LabelPredictor& predict, const dataset::LabelCodec& codec) {
  DetectionResult r;
  r.mutant = mutant.id;
  for (const auto& in : inputs) {
    const auto actual = stlang::scan(mutant.program, in, stlang::latches_from_input(mutant.program, in)).outputs;
    ++r.inputs;
    r.detected += predict(in) != codec.encode(actual);
  }
  return r;
}

LabelPredictor program_oracle(const Program& parent) {
  auto codec = dataset::LabelCodec::for_program(parent);
  return [parent, codec](const stlang::InputSnapshot& in) {
    return codec.encode(stlang::scan(parent, in, stlang::latches_from_input(parent, in)).outputs);
  };
}

void write_mutant_bundle(const std::string& dir, const std::vector<Mutant>& mutants) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    if (!os) throw IoError("cannot write " + (fs::path(dir) / name).string());
    return os;
  };
  std::ofstream manifest = open("manifest.csv");
  std::ofstream witnesses = open("witnesses.csv");
  manifest << "mutantId,opKind,site,witnessRow\n";
  bool header = false;
  std::size_t row = 0;
  for (const Mutant& m : mutants) {
    open(m.id + ".stx") << stlang::unparse(m.program);
    std::string witness_row;
    if (m.witness) {
      if (!header) {
        witnesses << "row";
        for (VarId id : m.program.input_order()) witnesses << ',' << m.program.decl(id).ident;
        witnesses << '\n';
        header = true;
      }
      witnesses << row;
      for (const Value& v : m.witness->values) witnesses << ',' << csv::format_value(v);
      witnesses << '\n';
      witness_row = std::to_string(row++);
    }
    manifest << m.id << ',' << to_string(m.op.kind) << ',' << m.op.site << ',' << witness_row << '\n';
  }
  if (!manifest || !witnesses) throw IoError("failed writing mutant bundle in " + dir);
}

}  // namespace plcattest::attack
