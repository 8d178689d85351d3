#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "plcattest/mutation.hpp"
#include "plcattest/plant.hpp"
#include "progen.hpp"

using namespace plcattest;
using namespace plcattest::attack;
using plcattest::testutil::output_of;
using plcattest::testutil::set_input;
using stlang::Program;

namespace {

std::string data_file(const std::string& name) { return std::string(PLCATTEST_TEST_DATA) + "/" + name; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

// Parent and mutant texts differ in exactly one line, or (deletions) the
// mutant is the parent with one contiguous block of lines removed.
::testing::AssertionResult one_edit(const Program& parent, const Program& mutant, MutationKind kind) {
  const auto a = lines(stlang::unparse(parent));
  const auto b = lines(stlang::unparse(mutant));
  std::size_t head = 0;
  while (head < a.size() && head < b.size() && a[head] == b[head]) ++head;
  std::size_t tail = 0;
  while (tail < a.size() - head && tail < b.size() - head && a[a.size() - 1 - tail] == b[b.size() - 1 - tail]) ++tail;
  const std::size_t ga = a.size() - head - tail, gb = b.size() - head - tail;
  if (kind == MutationKind::StmtDelete) {
    if (gb == 0 && ga >= 1) return ::testing::AssertionSuccess();
  } else if (ga == 1 && gb == 1) {
    return ::testing::AssertionSuccess();
  }
  return ::testing::AssertionFailure() << to_string(kind) << " changed " << ga << " lines into " << gb;
}

const std::string kDeadArm = R"(VAR
  a : BOOL := 0; CLASS AlarmBit;
  b : BOOL := 0; CLASS AlarmBit;
  q : BOOL := 0; CLASS OutputCommand;
  k : ENUM(3) := 0; CLASS Internal;
END_VAR
BODY
  k := 0;
  CASE k OF
    0:
      q := a AND b;
    1:
      q := a OR b;
      q := NOT q;
  END_CASE;
END_BODY
)";

}  // namespace

TEST(Sites, InletHasEnableInZero) {
  const Program p = stlang::load_program(data_file("inlet.stx"));
  const auto ops = enumerate_sites(p);
  bool found = false;
  for (const auto& op : ops)
    if (op.kind == MutationKind::SetdFieldZero && op.site == "s0" && op.value == Value::boolean(false)) {
      found = true;
      EXPECT_NE(stlang::unparse(apply_mutation(p, op)).find("_MV_101_SR.EnableIn := 0;"), std::string::npos);
    }
  EXPECT_TRUE(found);
}

TEST(Sites, EmptyBody) {
  const Program p = stlang::parse_program("VAR\n  x : BOOL := 0; CLASS OutputCommand;\nEND_VAR\nBODY\nEND_BODY\n");
  EXPECT_TRUE(enumerate_sites(p).empty());
  EXPECT_THROW(make_effective_mutants(p, {}), ExhaustedCandidates);
}

TEST(Sites, KindNames) {
  for (int k = 0; k < 7; ++k) {
    const auto kind = static_cast<MutationKind>(k);
    EXPECT_EQ(mutation_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_FALSE(mutation_kind_from_string("Bogus").has_value());
}

TEST(Apply, BadSite) {
  const Program p = plant::builtin_miniplant().programs[0];
  MutationOp op;
  op.kind = MutationKind::StmtDelete;
  op.site = "s999";
  EXPECT_THROW(apply_mutation(p, op), Error);
  op.site = "x1";
  EXPECT_THROW(apply_mutation(p, op), Error);
}

TEST(Apply, OneEditOnBuiltins) {
  for (const auto& p : plant::builtin_miniplant().programs) {
    const auto ops = enumerate_sites(p);
    EXPECT_GT(ops.size(), 50u);
    std::set<std::string> kinds;
    for (const auto& op : ops) {
      const Program m = apply_mutation(p, op);
      EXPECT_TRUE(one_edit(p, m, op.kind)) << p.name() << " " << op.site << " " << op.detail;
      EXPECT_EQ(stlang::parse_program(stlang::unparse(m)), m);
      kinds.insert(std::string(to_string(op.kind)));
    }
    EXPECT_GE(kinds.size(), 6u) << p.name();
  }
}

TEST(Apply, OneEditOnGenerated) {
  testutil::ProgramGen gen(31);
  for (int i = 0; i < 100; ++i) {
    const Program p = stlang::parse_program(gen.next());
    for (const auto& op : enumerate_sites(p)) ASSERT_TRUE(one_edit(p, apply_mutation(p, op), op.kind)) << op.site;
  }
}

TEST(Effective, InletSetZeroWitness) {
  const Program p = stlang::load_program(data_file("inlet.stx"));
  MutationOp op;
  for (const auto& o : enumerate_sites(p))
    if (o.kind == MutationKind::SetdFieldZero && o.site == "s1" && o.value == Value::boolean(false)) op = o;
  ASSERT_EQ(op.site, "s1");
  const Program m = apply_mutation(p, op);
  EXPECT_NE(stlang::unparse(m).find("_MV_101_SR.Set := 0;"), std::string::npos);

  auto witness = stlang::default_inputs(p);
  set_input(p, witness, "HMI_LIT101.AL", Value::boolean(true));
  EXPECT_TRUE(outputs_differ(p, m, witness));
  const auto latch = stlang::LatchState{false, false};
  EXPECT_TRUE(output_of(p, stlang::scan(p, witness, latch).outputs, "_MV101_AutoInp").as_bool());
  EXPECT_FALSE(output_of(m, stlang::scan(m, witness, latch).outputs, "_MV101_AutoInp").as_bool());
}

TEST(Effective, UnreachableArmDiscarded) {
  const Program p = stlang::parse_program(kDeadArm);
  const auto ops = enumerate_sites(p);
  std::size_t dead = 0;
  Rng rng(4);
  for (const auto& op : ops) {
    if (op.site.rfind("s1.a1.", 0) != 0) continue;
    ++dead;
    const Program m = apply_mutation(p, op);
    for (int t = 0; t < 5000; ++t) ASSERT_FALSE(outputs_differ(p, m, dataset::random_inputs(p, rng))) << op.site;
  }
  EXPECT_GT(dead, 0u);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto ms = make_effective_mutants(p, {3, 5000, seed});
    ASSERT_EQ(ms.size(), 3u);
    for (const auto& m : ms) EXPECT_NE(m.op.site.rfind("s1.a1.", 0), 0u) << m.op.site;
  }
}

TEST(Effective, TwentyOnStage1) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto ms = make_effective_mutants(p, {20, 5000, 7});
  ASSERT_EQ(ms.size(), 20u);
  std::set<std::string> ids, texts{stlang::unparse(p)};
  for (const auto& m : ms) {
    ASSERT_TRUE(m.witness.has_value());
    EXPECT_TRUE(outputs_differ(p, m.program, *m.witness)) << m.id;
    EXPECT_EQ(m.parent, "plc1");
    ids.insert(m.id);
    texts.insert(stlang::unparse(m.program));
  }
  EXPECT_EQ(ids.size(), 20u);
  EXPECT_EQ(texts.size(), 21u);
  EXPECT_EQ(ms[0].id, "plc1_m01");
}

TEST(Effective, Deterministic) {
  const Program p = plant::builtin_miniplant().programs[2];
  const auto a = make_effective_mutants(p, {5, 1000, 3});
  const auto b = make_effective_mutants(p, {5, 1000, 3});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].op, b[i].op);
    EXPECT_EQ(a[i].witness, b[i].witness);
  }
}

TEST(EffectiveInputs, WitnessFirstAndAllDiffer) {
  const Program p = plant::builtin_miniplant().programs[1];
  const auto ms = make_effective_mutants(p, {3, 5000, 1});
  for (const auto& m : ms) {
    const auto one = effective_inputs(m, p, 1, 9);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0], *m.witness);
    const auto many = effective_inputs(m, p, 200, 9);
    ASSERT_EQ(many.size(), 200u);
    for (const auto& in : many) ASSERT_TRUE(outputs_differ(p, m.program, in));
  }
}

TEST(EffectiveInputs, TimeoutWhenRare) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto ms = make_effective_mutants(p, {1, 5000, 2});
  EXPECT_THROW(effective_inputs(ms[0], p, 100000, 1, 10), Timeout);
}

TEST(Detect, OracleCatchesEverything) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto codec = dataset::LabelCodec::for_program(p);
  const auto oracle = program_oracle(p);
  for (const auto& m : make_effective_mutants(p, {5, 5000, 11})) {
    const auto inputs = effective_inputs(m, p, 100, 2);
    const auto r = detect_mutant(m, inputs, oracle, codec);
    EXPECT_EQ(r.inputs, 100u);
    EXPECT_EQ(r.rate(), 1.0);
  }
}

TEST(Detect, MutantAsItsOwnModelMissesAll) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto codec = dataset::LabelCodec::for_program(p);
  const auto ms = make_effective_mutants(p, {1, 5000, 11});
  const auto r = detect_mutant(ms[0], effective_inputs(ms[0], p, 50, 2), program_oracle(ms[0].program), codec);
  EXPECT_EQ(r.detected, 0u);
}

TEST(Bundle, Files) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto ms = make_effective_mutants(p, {3, 5000, 5});
  const auto dir = std::filesystem::temp_directory_path() / "plcattest_bundle_test";
  std::filesystem::remove_all(dir);
  write_mutant_bundle(dir.string(), ms);
  std::ifstream manifest(dir / "manifest.csv");
  std::string header;
  std::getline(manifest, header);
  EXPECT_EQ(header, "mutantId,opKind,site,witnessRow");
  for (const auto& m : ms) {
    ASSERT_TRUE(std::filesystem::exists(dir / (m.id + ".stx")));
    EXPECT_EQ(stlang::load_program((dir / (m.id + ".stx")).string()).body(), m.program.body());
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "witnesses.csv"));
  std::filesystem::remove_all(dir);
}
