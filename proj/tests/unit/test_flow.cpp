#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"
#include "plcattest/flow.hpp"
#include "plcattest/plant.hpp"

using namespace plcattest;
using namespace plcattest::flow;
using stlang::InputSnapshot;
using stlang::Program;

namespace {

std::vector<InputSnapshot> seed_rows(const Program& prog) {
  const auto mp = plant::builtin_miniplant();
  std::vector<InputSnapshot> rows;
  for (const auto& init : plant::builtin_initial_states()) {
    const auto tr = plant::generate_trace(mp.programs, mp.config, init, 3600.0, 17);
    const plant::InputBinding bind(tr.schema, prog);
    for (const auto& r : tr.rows) rows.push_back(bind.snapshot(r));
  }
  return rows;
}

stlang::OutputSnapshot run(const Program& p, const InputSnapshot& in) {
  return stlang::scan(p, in, stlang::latches_from_input(p, in)).outputs;
}

}  // namespace

TEST(Importance, DeadInputScoresZero) {
  const Program p = stlang::parse_program(R"(VAR
  a : BOOL := 0; CLASS AlarmBit;
  dead : BOOL := 0; CLASS StateVar;
  q : BOOL := 0; CLASS OutputCommand;
END_VAR
BODY
  q := a;
END_BODY
)");
  std::vector<InputSnapshot> rows{stlang::default_inputs(p)};
  const auto s = score_inputs(p, rows, {500, 1, 3});
  EXPECT_EQ(s.score("dead"), 0u);
  EXPECT_GT(s.score("a"), 0u);
  EXPECT_EQ(s.trials, 500u);
}

TEST(Importance, EmptyTrace) {
  const Program p = plant::builtin_miniplant().programs[0];
  EXPECT_THROW(score_inputs(p, {}, {}), EmptyTrace);
}

TEST(Importance, LowAlarmMattersOnStage1) {
  const Program p = plant::builtin_miniplant().programs[0];
  const auto rows = seed_rows(p);
  const std::size_t k = *p.input_position(*p.find("HMI_LIT101.AL"));
  bool oracle = false;
  for (const auto& r : rows) {
    InputSnapshot v = r;
    v.values[k] = Value::boolean(!v.values[k].as_bool());
    if (!(run(p, v) == run(p, r))) {
      oracle = true;
      break;
    }
  }
  ASSERT_TRUE(oracle);
  const auto s = score_inputs(p, rows, {5000, 0, 1});
  EXPECT_GT(s.score("HMI_LIT101.AL"), 0u);
}

TEST(Importance, TimersAndHealthyFlagsScoreZero) {
  for (const auto& p : plant::builtin_miniplant().programs) {
    const auto s = score_inputs(p, seed_rows(p), {5000, 0, 9});
    for (stlang::VarId id : p.input_order()) {
      const auto& d = p.decl(id);
      if (d.cls == stlang::VarClass::Timer || d.cls == stlang::VarClass::HealthyFlag)
        EXPECT_EQ(s.score(d.ident), 0u) << p.name() << " " << d.ident;
    }
  }
}

TEST(Importance, Deterministic) {
  const Program p = plant::builtin_miniplant().programs[1];
  const auto rows = seed_rows(p);
  EXPECT_EQ(score_inputs(p, rows, {1000, 0, 4}), score_inputs(p, rows, {1000, 0, 4}));
}

TEST(Importance, SubsetTooLarge) {
  const Program p = plant::builtin_miniplant().programs[0];
  EXPECT_THROW(score_inputs(p, {stlang::default_inputs(p)}, {10, 1000, 1}), Error);
}

TEST(Mutate, AlwaysDiffers) {
  const Program p = plant::builtin_miniplant().programs[0];
  Rng rng(8);
  const auto in = stlang::default_inputs(p);
  for (int rep = 0; rep < 50; ++rep)
    for (std::size_t k = 0; k < in.values.size(); ++k) {
      const auto& d = p.decl(p.input_order()[k]);
      const Value v = mutate_value(in.values[k], d, rng);
      EXPECT_FALSE(v == in.values[k]);
      EXPECT_TRUE(v.conforms(d.kind));
    }
}

TEST(Select, NonzeroAndTop) {
  const ImportanceScores s{{"a", "b", "c"}, {5, 0, 2}, 10};
  EXPECT_EQ(select_important(s, SelectPolicy::nonzero()), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(select_important(s, SelectPolicy::top(1)), (std::vector<std::string>{"a"}));
  const ImportanceScores tie{{"a", "b"}, {3, 3}, 10};
  EXPECT_EQ(select_important(tie, SelectPolicy::top(1)), (std::vector<std::string>{"a"}));
  EXPECT_THROW(select_important(s, SelectPolicy::top(4)), Error);
}

TEST(Select, ScoresCsv) {
  std::ostringstream os;
  write_scores_csv(os, {{"a", "b"}, {1, 0}, 7});
  EXPECT_EQ(os.str(), "ident,score,trials\na,1,7\nb,0,7\n");
}
