#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "plcattest/attester.hpp"

using namespace plcattest;
using namespace plcattest::attester;
using plant::Trace;

namespace {

struct Fixture {
  plant::MiniPlant mp = plant::builtin_miniplant();
  std::vector<Trace> traces;

  Fixture() {
    for (const auto& init : plant::builtin_initial_states())
      traces.push_back(plant::generate_trace(mp.programs, mp.config, init, 3600.0, 21));
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

Trace attacked_trace(std::size_t init) {
  auto mp = plant::builtin_miniplant();
  mp.programs[0] = plant::builtin_attacked_plc1();
  return plant::generate_trace(mp.programs, mp.config, plant::builtin_initial_states()[init], 1800.0, 21);
}

std::optional<std::size_t> first_alarm(const AttestResult& r) {
  for (const auto& e : r.events)
    if (e.alarm) return e.t;
  return std::nullopt;
}

}  // namespace

TEST(Targets, Stage1) {
  const auto& f = fx();
  const auto t = check_targets(f.mp.programs[0], f.mp.config, f.traces[0].schema);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].actuator, "P101");
  EXPECT_EQ(t[0].kind, plant::ActuatorKind::Pump);
  EXPECT_EQ(t[2].actuator, "MV101");
  EXPECT_EQ(t[2].kind, plant::ActuatorKind::Valve);
}

TEST(Attest, OracleHasNoFalseAlarms) {
  const auto& f = fx();
  const AttesterConfig cfg;
  for (const auto& prog : f.mp.programs)
    for (const auto& tr : f.traces) {
      const auto r = attest_trace(tr, check_targets(prog, f.mp.config, tr.schema), oracle_predictor(prog, tr.schema), cfg);
      EXPECT_EQ(r.report.false_alarms, 0u) << prog.name();
      const std::size_t rows_checked = tr.rows.size() - static_cast<std::size_t>(cfg.max_window());
      EXPECT_EQ(r.report.total_checks, rows_checked * prog.output_order().size());
    }
}

TEST(Attest, AttackRaisesAlarmAtDivergence) {
  const auto& f = fx();
  const auto tr = attacked_trace(1);
  const auto& normal = f.mp.programs[0];
  const auto attacked = plant::builtin_attacked_plc1();
  const auto ref = oracle_predictor(normal, tr.schema);
  const auto act = oracle_predictor(attacked, tr.schema);
  std::size_t t0 = 0;
  while (t0 < tr.rows.size() && ref(tr.rows[t0]) == act(tr.rows[t0])) ++t0;
  ASSERT_LT(t0, tr.rows.size());
  const auto r = attest_trace(tr, check_targets(normal, f.mp.config, tr.schema), ref, AttesterConfig{});
  ASSERT_TRUE(first_alarm(r).has_value());
  EXPECT_EQ(*first_alarm(r), t0);
  EXPECT_GT(r.report.false_alarms, 0u);
}

TEST(Attest, WindowValidation) {
  AttesterConfig cfg;
  cfg.valve = {5, 4};
  EXPECT_THROW(cfg.validate(), Error);
  cfg.valve = {-1, 3};
  EXPECT_THROW(cfg.validate(), Error);
  const auto& f = fx();
  const auto& tr = f.traces[0];
  EXPECT_THROW(AttestStream(check_targets(f.mp.programs[0], f.mp.config, tr.schema),
                            oracle_predictor(f.mp.programs[0], tr.schema), cfg),
               Error);
}

TEST(Attest, MalformedTraces) {
  const auto& f = fx();
  Trace tr = f.traces[0];
  const auto targets = check_targets(f.mp.programs[0], f.mp.config, tr.schema);
  const auto pred = oracle_predictor(f.mp.programs[0], tr.schema);
  Trace shortt = tr;
  shortt.rows.resize(5);
  EXPECT_THROW(attest_trace(shortt, targets, pred, {}), MalformedTrace);
  Trace bad = tr;
  bad.rows[7].readings.pop_back();
  EXPECT_THROW(attest_trace(bad, targets, pred, {}), MalformedTrace);
  Trace back = tr;
  back.rows[9].t = back.rows[8].t;
  EXPECT_THROW(attest_trace(back, targets, pred, {}), MalformedTrace);
}

TEST(Stream, MatchesOffline) {
  const auto& f = fx();
  const AttesterConfig cfg;
  for (const auto& tr : {f.traces[2], attacked_trace(0)}) {
    const auto& prog = f.mp.programs[0];
    const auto targets = check_targets(prog, f.mp.config, tr.schema);
    const auto pred = oracle_predictor(prog, tr.schema);
    AttestStream stream(targets, pred, cfg);
    std::vector<AttestEvent> events;
    for (const auto& row : tr.rows) {
      const auto out = stream.push(row);
      events.insert(events.end(), out.begin(), out.end());
      ASSERT_LE(stream.buffered(), static_cast<std::size_t>(cfg.max_window()) + 1);
    }
    EXPECT_EQ(stream.max_buffered(), static_cast<std::size_t>(cfg.max_window()) + 1);
    EXPECT_EQ(events, attest_trace(tr, targets, pred, cfg).events);
  }
}

TEST(Stream, OutOfOrder) {
  const auto& f = fx();
  const auto& tr = f.traces[0];
  AttestStream stream(check_targets(f.mp.programs[0], f.mp.config, tr.schema),
                      oracle_predictor(f.mp.programs[0], tr.schema), {});
  stream.push(tr.rows[5]);
  EXPECT_THROW(stream.push(tr.rows[3]), OutOfOrderRow);
  EXPECT_THROW(stream.push(tr.rows[5]), OutOfOrderRow);
}

TEST(Ensemble, OfOneMatchesSingle) {
  const auto& f = fx();
  const auto tr = attacked_trace(1);
  const auto& prog = f.mp.programs[0];
  const auto targets = check_targets(prog, f.mp.config, tr.schema);
  const auto pred = oracle_predictor(prog, tr.schema);
  const auto a = attest_trace(tr, targets, pred, {});
  const auto b = ensemble_attest(tr, targets, {pred}, {});
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.report.false_alarms, b.report.false_alarms);
  EXPECT_THROW(ensemble_attest(tr, targets, {}, {}), Error);
}

TEST(Ensemble, AlarmsAtLeastMembers) {
  const auto& f = fx();
  const auto tr = attacked_trace(1);
  const auto& prog = f.mp.programs[0];
  const auto targets = check_targets(prog, f.mp.config, tr.schema);
  const auto normal = oracle_predictor(prog, tr.schema);
  const auto attacked = oracle_predictor(plant::builtin_attacked_plc1(), tr.schema);
  // A member that sticks to its first prediction lags behind both.
  auto frozen = std::make_shared<std::optional<stlang::OutputSnapshot>>();
  const RowPredictor stale = [frozen, normal](const plant::TraceRow& row) {
    if (!*frozen) *frozen = normal(row);
    return **frozen;
  };
  const std::vector<RowPredictor> members{normal, attacked, stale};
  const auto ens = ensemble_attest(tr, targets, members, {});
  std::optional<std::size_t> earliest;
  for (const auto& m : members) {
    const auto single = attest_trace(tr, targets, m, {});
    EXPECT_GE(ens.report.false_alarms, single.report.false_alarms);
    for (std::size_t i = 0; i < single.events.size(); ++i)
      if (single.events[i].alarm) ASSERT_TRUE(ens.events[i].alarm);
    if (auto t = first_alarm(single); t && (!earliest || *t < *earliest)) earliest = t;
  }
  ASSERT_TRUE(earliest.has_value());
  EXPECT_EQ(first_alarm(ens), earliest);
}

TEST(Report, Formats) {
  std::ostringstream os;
  write_events_csv(os, {{3, "MV101", 2, 1, true}, {4, "P101", 1, 1, false}});
  EXPECT_EQ(os.str(), "t,actuator,predicted,observed,verdict\n3,MV101,2,1,alarm\n4,P101,1,1,ok\n");
  const std::string j = report_json({2000, 1});
  EXPECT_NE(j.find("\"totalChecks\": 2000"), std::string::npos);
  EXPECT_NE(j.find("\"rate\": 0.0005"), std::string::npos);
  EXPECT_EQ(FalseAlarmReport{}.rate(), 0.0);
}

TEST(Features, Builder) {
  const auto& f = fx();
  const auto& tr = f.traces[0];
  AttestModel model;
  model.sensors = f.mp.config.sensors;
  learner::TrainConfig quick = learner::TrainConfig::nn1();
  quick.epochs = 50;
  model.nn1 = learner::train_nn1(model.sensors, 500, quick);
  model.features = {"HMI_LIT101.AH", "HMI_LIT101.AL", "HMI_MV201.Status", "HMI_P1_STATE"};
  model.nn2 = learner::init_model(learner::MlpSpec::nn2(4, 12), 1);
  const FeatureBuilder fb(model, tr.schema);
  EXPECT_EQ(fb.dim(), 4u);
  EXPECT_EQ(fb.alarm_output(0), 0);
  EXPECT_EQ(fb.alarm_output(1), 2);
  EXPECT_EQ(fb.alarm_output(2), -1);
  const auto& row = tr.rows[100];
  const std::vector<bool> fake(4 * model.sensors.size(), true);
  const auto fv = fb.features(row, fake);
  EXPECT_EQ(fv[0], 1.0);
  EXPECT_EQ(fv[1], 1.0);
  const auto col = static_cast<std::size_t>(std::find(tr.schema.actuators.begin(), tr.schema.actuators.end(), "HMI_MV201.Status") -
                                            tr.schema.actuators.begin());
  EXPECT_EQ(fv[2], row.actuators[col].numeric());
  EXPECT_EQ(fb.readings(row).size(), model.sensors.size());

  model.features.push_back("NOPE");
  EXPECT_THROW(FeatureBuilder(model, tr.schema), MalformedTrace);
  model.features.pop_back();
  model.nn2 = learner::init_model(learner::MlpSpec::nn2(3, 12), 1);
  EXPECT_THROW(FeatureBuilder(model, tr.schema), learner::DimensionMismatch);
}
