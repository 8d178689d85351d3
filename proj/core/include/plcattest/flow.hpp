#pragma once

// Dynamic input-importance analysis: mutate one input at a time on rows of
// a normal trace and count how often the program's output label changes.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "plcattest/rng.hpp"
#include "plcattest/stlang.hpp"

namespace plcattest::flow {

class EmptyTrace : public Error {
 public:
  EmptyTrace() : Error("seed trace is empty") {}
};

struct ImportanceScores {
  std::vector<std::string> idents;  // program input order
  std::vector<std::uint64_t> scores;
  std::uint64_t trials = 0;

  std::uint64_t score(const std::string& ident) const;
  bool operator==(const ImportanceScores&) const = default;
};

struct ScoreParams {
  std::uint64_t iterations = 1000;
  /// Inputs mutated per iteration; 0 means ceil(n / 4).
  std::size_t subset_size = 0;
  std::uint64_t seed = 1;
};

/// Each iteration draws a seed row, then mutates every input of a random
/// subset K separately (always from the same baseline), rescans with the
/// latch context implied by the mutated row, and scores k when the
/// output commands differ from the baseline.
ImportanceScores score_inputs(const stlang::Program& prog, const std::vector<stlang::InputSnapshot>& seed_rows,
                              const ScoreParams& params);

/// A fresh value of the same kind that differs from `v`: bools flip, enums
/// are redrawn among the other values, reals are redrawn over [lo, hi).
Value mutate_value(const Value& v, const stlang::VarDecl& decl, Rng& rng);

struct SelectPolicy {
  enum class Kind { Nonzero, TopM } kind = Kind::Nonzero;
  std::size_t m = 0;

  static SelectPolicy nonzero() { return {}; }
  static SelectPolicy top(std::size_t m) { return {Kind::TopM, m}; }
};

/// Selected idents in declaration order. Top-m ties go to the earlier input.
std::vector<std::string> select_important(const ImportanceScores& scores, const SelectPolicy& policy);

/// `ident,score,trials`
void write_scores_csv(std::ostream& os, const ImportanceScores& scores);

}  // namespace plcattest::flow
