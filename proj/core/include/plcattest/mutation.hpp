#pragma once

// Single-edit code mutations of a control program and the search for
// effective mutants (ones that change the output on some input).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plcattest/dataset.hpp"
#include "plcattest/stlang.hpp"

namespace plcattest::attack {

class ExhaustedCandidates : public Error {
 public:
  using Error::Error;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

enum class MutationKind : std::uint8_t {
  ConstantReplace,
  RelOpReplace,
  LogicOpReplace,
  CondNegate,
  AssignRhsReplace,
  StmtDelete,
  SetdFieldZero,
};

std::string_view to_string(MutationKind k);
std::optional<MutationKind> mutation_kind_from_string(std::string_view s);

/// One concrete edit. Sites are AST paths: `s3` is top-level statement 3,
/// `.t1` / `.e0` step into THEN / ELSE bodies, `.a2.1` into CASE arm 2
/// (ELSE of a CASE is `.e`), `.r` selects the statement's expression and
/// `.c0` / `.c1` its operands.
struct MutationOp {
  MutationKind kind = MutationKind::ConstantReplace;
  std::string site;
  /// Replacement as source text (operator, literal or identifier).
  std::string detail;

  stlang::BinOp op = stlang::BinOp::And;
  stlang::VarId var = -1;
  Value value;

  bool operator==(const MutationOp&) const = default;
};

/// Every applicable edit, in body order.
std::vector<MutationOp> enumerate_sites(const stlang::Program& prog);

/// The program with `op` applied. Throws Error if the site does not exist.
stlang::Program apply_mutation(const stlang::Program& prog, const MutationOp& op);

struct Mutant {
  std::string id;
  stlang::Program program;
  MutationOp op;
  std::string parent;
  std::optional<stlang::InputSnapshot> witness;
};

/// Scans parent and mutant on the same input (latches taken from the
/// input) and reports whether the output commands differ.
bool outputs_differ(const stlang::Program& parent, const stlang::Program& mutant, const stlang::InputSnapshot& in);

struct MutantSearch {
  std::size_t count = 20;
  std::size_t trials_per_candidate = 5000;
  std::uint64_t seed = 1;
};

/// Draws candidate edits at random without replacement and keeps those
/// with a witness among `trials_per_candidate` random inputs. Edits that
/// reproduce an already accepted program are skipped. Throws
/// ExhaustedCandidates when the candidates run out first.
std::vector<Mutant> make_effective_mutants(const stlang::Program& prog, const MutantSearch& search);

/// `count` inputs on which mutant and parent differ, starting with the
/// stored witness. Throws Timeout after `max_attempts` random draws.
std::vector<stlang::InputSnapshot> effective_inputs(const Mutant& mutant, const stlang::Program& parent,
                                                    std::size_t count, std::uint64_t seed,
                                                    std::uint64_t max_attempts = 2'000'000);

struct DetectionResult {
  std::string mutant;
  std::size_t inputs = 0;
  std::size_t detected = 0;

  double rate() const { return inputs == 0 ? 0.0 : static_cast<double>(detected) / static_cast<double>(inputs); }
};

using LabelPredictor = std::function<dataset::Label(const stlang::InputSnapshot&)>;

/// An input is detected when the predicted label differs from the label of
/// the mutant's actual outputs.
DetectionResult detect_mutant(const Mutant& mutant, const std::vector<stlang::InputSnapshot>& inputs,
                              const LabelPredictor& predict, const dataset::LabelCodec& codec);

/// Predictor that runs the parent program itself.
LabelPredictor program_oracle(const stlang::Program& parent);

/// Mutant bundle: `<id>.stx` per mutant plus `manifest.csv` with
/// `mutantId,opKind,site,witnessRow`; witness rows go to `witnesses.csv`.
void write_mutant_bundle(const std::string& dir, const std::vector<Mutant>& mutants);

}  // namespace plcattest::attack
