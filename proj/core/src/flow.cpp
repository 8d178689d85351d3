#include "plcattest/flow.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "plcattest/rng.hpp"

namespace plcattest::flow {

using stlang::InputSnapshot;
using stlang::Program;

std::uint64_t ImportanceScores::score(const std::string& ident) const {
  for (std::size_t i = 0; i < idents.size(); ++i)
    if (idents[i] == ident) return scores[i];
  throw Error("no importance score for '" + ident + "'");
}

Value mutate_value(const Value& v, const stlang::VarDecl& decl, Rng& rng) {
  switch (decl.kind.kind) {
    case Kind::Bool:
      return Value::boolean(!v.as_bool());
    case Kind::Enum: {
      const auto card = static_cast<std::uint64_t>(decl.kind.cardinality);
      if (card < 2) return v;
      auto x = static_cast<std::int32_t>(rng.below(card - 1));
      if (x >= v.as_enum()) ++x;
      return Value::enumeration(x);
    }
    case Kind::Real:
      break;
  }
  for (;;) {
    const double x = rng.uniform(decl.range_lo, decl.range_hi);
    if (x != v.as_real()) return Value::real(x);
  }
}

ImportanceScores score_inputs(const Program& prog, const std::vector<InputSnapshot>& seed_rows,
                              const ScoreParams& params) {
  if (seed_rows.empty()) throw EmptyTrace();
  const std::size_t n = prog.input_order().size();
  const std::size_t subset = params.subset_size == 0 ? (n + 3) / 4 : params.subset_size;
  if (subset > n) throw Error("subset size " + std::to_string(subset) + " exceeds input count " + std::to_string(n));

  ImportanceScores s;
  for (stlang::VarId id : prog.input_order()) s.idents.push_back(prog.decl(id).ident);
  s.scores.assign(n, 0);
  s.trials = params.iterations;

  std::vector<std::size_t> order(n);
  for (std::uint64_t it = 0; it < params.iterations; ++it) {
    Rng rng(mix_seed(params.seed, it));
    const InputSnapshot& base = seed_rows[rng.below(seed_rows.size())];
    const auto baseline = stlang::scan(prog, base, stlang::latches_from_input(prog, base)).outputs;

    // Partial Fisher-Yates: the first `subset` entries form K.
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < subset; ++i) std::swap(order[i], order[i + rng.below(n - i)]);

    for (std::size_t j = 0; j < subset; ++j) {
      const std::size_t k = order[j];
      InputSnapshot v = base;
      v.values[k] = mutate_value(v.values[k], prog.decl(prog.input_order()[k]), rng);
      const auto out = stlang::scan(prog, v, stlang::latches_from_input(prog, v)).outputs;
      if (!(out == baseline)) ++s.scores[k];
    }
  }
  return s;
}

std::vector<std::string> select_important(const ImportanceScores& scores, const SelectPolicy& policy) {
  const std::size_t n = scores.idents.size();
  std::vector<bool> keep(n, false);
  if (policy.kind == SelectPolicy::Kind::Nonzero) {
    for (std::size_t i = 0; i < n; ++i) keep[i] = scores.scores[i] > 0;
  } else {
    if (policy.m > n) throw Error("top-m selection with m > number of inputs");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores.scores[a] > scores.scores[b]; });
    for (std::size_t i = 0; i < policy.m; ++i) keep[idx[i]] = true;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(scores.idents[i]);
  return out;
}

void write_scores_csv(std::ostream& os, const ImportanceScores& scores) {
  os << "ident,score,trials\n";
  for (std::size_t i = 0; i < scores.idents.size(); ++i)
    os << scores.idents[i] << ',' << scores.scores[i] << ',' << scores.trials << '\n';
}

}  // namespace plcattest::flow
