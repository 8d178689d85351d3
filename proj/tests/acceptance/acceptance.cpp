// End-to-end acceptance run on the built-in miniplant. Prints one
// PASS/FAIL line per criterion and exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "helpers.hpp"
#include "plcattest/experiment.hpp"
#include "progen.hpp"

using namespace plcattest;
using experiment::Workbench;
using stlang::InputSnapshot;
using stlang::LatchState;
using stlang::Program;
using stlang::Value;
using testutil::output_of;
using testutil::set_input;

namespace {

using Clock = std::chrono::steady_clock;

void log(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

// Shared pipeline state, built lazily.
struct Pipeline {
  Workbench wb{experiment::ExperimentConfig{}};
  std::map<std::string, std::vector<std::string>> important;
  std::map<std::string, flow::ImportanceScores> scores;
  std::map<std::string, dataset::Dataset> data;
  std::map<std::string, learner::MlpModel> nn2;
  std::optional<learner::MlpModel> nn1;

  const flow::ImportanceScores& score(const Program& p) {
    auto it = scores.find(p.name());
    if (it != scores.end()) return it->second;
    log("importance analysis for " + p.name());
    const auto& s = scores.emplace(p.name(), experiment::importance(wb, p)).first->second;
    important[p.name()] = experiment::important_inputs(s);
    return s;
  }
  const std::vector<std::string>& inputs(const Program& p) {
    score(p);
    return important.at(p.name());
  }
  const dataset::Dataset& dataset(const Program& p) {
    auto it = data.find(p.name());
    if (it != data.end()) return it->second;
    log("collecting " + std::to_string(wb.config().train_size()) + " rows for " + p.name());
    return data.emplace(p.name(), experiment::training_set(wb, p, inputs(p), wb.config().train_size())).first->second;
  }
  const learner::MlpModel& model2(const Program& p) {
    auto it = nn2.find(p.name());
    if (it != nn2.end()) return it->second;
    log("training NN2 for " + p.name());
    return nn2.emplace(p.name(), experiment::train_nn2(wb, dataset(p))).first->second;
  }
  const learner::MlpModel& model1() {
    if (!nn1) {
      log("training NN1");
      nn1 = experiment::train_nn1(wb);
    }
    return *nn1;
  }
  attester::AttestModel attest_model(const Program& p) {
    return {inputs(p), wb.plant().config.sensors, model1(), model2(p)};
  }
};

Pipeline& pipe() {
  static Pipeline p;
  return p;
}

// 1. Cross-validated accuracy over the size sweep.
void crit1(Outcome& o) {
  auto& P = pipe();
  const auto& cfg = P.wb.config();
  std::vector<experiment::SweepRow> rows;
  for (const auto& prog : P.wb.programs()) P.dataset(prog);
  const auto t0 = Clock::now();
  for (const auto& prog : P.wb.programs()) {
    auto r = experiment::cv_sweep(prog, P.dataset(prog), cfg, P.wb.seeds().train, log);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const double secs = seconds_since(t0);

  std::cout << "\n| size";
  for (const auto& prog : P.wb.programs()) std::cout << " | " << prog.name();
  std::cout << " |\n|---";
  for (std::size_t i = 0; i < P.wb.programs().size(); ++i) std::cout << "|---";
  std::cout << "|\n";
  for (std::size_t n : cfg.sweep) {
    std::cout << "| " << n;
    for (const auto& prog : P.wb.programs())
      for (const auto& r : rows)
        if (r.program == prog.name() && r.size == n) std::cout << " | " << fmt(r.accuracy);
    std::cout << " |\n";
  }
  std::cout << '\n';

  for (const auto& r : rows) {
    if (r.size == 90000) o.require(r.accuracy >= 0.99, r.program + " at 90000 is " + fmt(r.accuracy));
    if (r.size == 10000) o.require(r.accuracy >= 0.95, r.program + " at 10000 is " + fmt(r.accuracy));
  }
  o.require(secs <= 600.0, "sweep took " + fmt(secs, 0) + " s");
  o.detail << "sweep " << fmt(secs, 0) << " s";
}

// 2. NN1 against the threshold mapper on held-out readings.
void crit2(Outcome& o) {
  auto& P = pipe();
  const auto& nn1 = P.model1();
  const auto& sensors = P.wb.plant().config.sensors;
  Rng rng(mix_seed(P.wb.config().seed, 0x4e4e31u));
  const std::size_t want = 100000;
  std::size_t n = 0, ok = 0;
  std::vector<double> x(sensors.size());
  while (n < want) {
    for (std::size_t s = 0; s < sensors.size(); ++s) x[s] = rng.uniform(sensors[s].min, sensors[s].max);
    const auto got = learner::nn1_alarms(nn1, x);
    for (std::size_t s = 0; s < sensors.size() && n < want; ++s) {
      const auto& sp = sensors[s];
      const double band = 0.001 * sp.span();
      const double r = x[s];
      if (std::abs(r - sp.ll) < band || std::abs(r - sp.l) < band || std::abs(r - sp.h) < band ||
          std::abs(r - sp.hh) < band)
        continue;
      const auto truth = plant::alarms_from_reading(r, sp).as_array();
      bool same = true;
      for (std::size_t k = 0; k < 4; ++k) same = same && got[4 * s + k] == truth[k];
      ok += same;
      ++n;
    }
  }
  const double agree = static_cast<double>(ok) / static_cast<double>(n);
  o.require(agree >= 0.999, "agreement " + fmt(agree, 6));
  o.detail << "agreement " << fmt(agree, 6) << " over " << n << " readings";
}

// 3. False alarms on the normal trace, the oracle, and the seeded bias case.
void crit3(Outcome& o) {
  auto& P = pipe();
  const auto& cfg = P.wb.config();
  const auto& tr = P.wb.validation_trace();
  o.require(tr.rows.size() == 14400, "trace has " + std::to_string(tr.rows.size()) + " rows");
  for (const auto& prog : P.wb.programs()) {
    const auto targets = attester::check_targets(prog, P.wb.plant().config, tr.schema);
    const auto model = P.attest_model(prog);
    const auto nn = attester::attest_trace(tr, targets, attester::model_predictor(prog, model, tr.schema), cfg.attester);
    const auto orc = attester::attest_trace(tr, targets, attester::oracle_predictor(prog, tr.schema), cfg.attester);
    o.detail << prog.name() << " nn " << fmt(nn.report.rate(), 6) << " oracle " << orc.report.false_alarms << "; ";
    o.require(nn.report.rate() <= 0.001, prog.name() + " nn rate " + fmt(nn.report.rate(), 6));
    o.require(orc.report.false_alarms == 0, prog.name() + " oracle alarms " + std::to_string(orc.report.false_alarms));
  }
  const Program& prog = P.wb.programs().front();
  log("seeded bias case for " + prog.name());
  const auto targets = attester::check_targets(prog, P.wb.plant().config, tr.schema);
  const auto base = P.attest_model(prog);
  const auto bc = experiment::make_bias_case(P.wb, prog, base, P.dataset(prog));
  double rates[2];
  for (int i = 0; i < 2; ++i) {
    auto m = base;
    m.nn2 = experiment::train_nn2(P.wb, i == 0 ? bc.biased : bc.fixed);
    rates[i] = attester::attest_trace(tr, targets, attester::model_predictor(prog, m, tr.schema), cfg.attester).report.rate();
  }
  o.detail << "bias " << fmt(rates[0], 6) << " -> fixed " << fmt(rates[1], 6);
  o.require(rates[0] > 0.001, "seeded bias did not raise alarms");
  o.require(rates[1] <= 0.001, "fixed rate " + fmt(rates[1], 6));
}

// 4. Mutant detection.
void crit4(Outcome& o) {
  auto& P = pipe();
  const auto& cfg = P.wb.config();
  for (const auto& prog : P.wb.programs()) {
    log("mutants of " + prog.name());
    const auto ms = experiment::mutants_for(P.wb, prog);
    const auto rows =
        experiment::detect_all(P.wb, prog, ms, experiment::snapshot_predictor(prog, P.inputs(prog), P.model2(prog)));
    std::size_t inputs = 0, detected = 0;
    for (const auto& r : rows) {
      inputs += r.inputs;
      detected += r.detected;
      o.require(r.inputs == cfg.effective_inputs, r.mutant + " has " + std::to_string(r.inputs) + " inputs");
    }
    o.require(ms.size() == cfg.mutants, prog.name() + " has " + std::to_string(ms.size()) + " mutants");
    o.require(detected == inputs, prog.name() + " detected " + std::to_string(detected) + "/" + std::to_string(inputs));
    o.detail << prog.name() << " " << ms.size() << " mutants " << detected << "/" << inputs << "; ";
  }
}

// 5. Adversarial noise trends, pooled across programs.
void crit5(Outcome& o) {
  auto& P = pipe();
  const auto& cfg = P.wb.config();
  log("adversarial samples");
  const auto samples = experiment::adversarial_samples(P.wb);
  const auto& schema = P.wb.validation_trace().schema;
  std::map<std::pair<attack::Scenario, double>, std::pair<std::size_t, std::size_t>> pooled;
  std::cout << "\n| program | scenario | bound | successes | trials | rate |\n|---|---|---|---|---|---|\n";
  for (const auto& prog : P.wb.programs()) {
    log("adversarial search on " + prog.name());
    for (const auto& r : attack::success_rates(prog, P.attest_model(prog), schema, samples, cfg.adv)) {
      std::cout << "| " << prog.name() << " | " << attack::to_string(r.scenario) << " | " << r.bound << " | "
                << r.successes << " | " << r.trials << " | " << fmt(r.rate()) << " |\n";
      auto& acc = pooled[{r.scenario, r.bound}];
      acc.first += r.successes;
      acc.second += r.trials;
    }
  }
  std::cout << '\n';
  auto rate = [&](attack::Scenario s, double b) {
    const auto& [k, n] = pooled.at({s, b});
    return n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
  };
  using attack::Scenario;
  const auto& bounds = cfg.adv.bounds;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const double any = rate(Scenario::AnyChange, bounds[i]), tgt = rate(Scenario::Targeted, bounds[i]);
    o.detail << bounds[i] << ": any " << fmt(any) << " targeted " << fmt(tgt) << "; ";
    if (i > 0) o.require(any >= rate(Scenario::AnyChange, bounds[i - 1]), "any-change drops at " + fmt(bounds[i], 2));
    o.require(tgt <= any, "targeted above any-change at " + fmt(bounds[i], 2));
  }
  const double t1 = rate(Scenario::Targeted, 0.01);
  const double a10 = rate(Scenario::AnyChange, 0.10), t10 = rate(Scenario::Targeted, 0.10);
  o.require(t1 <= 0.05, "targeted at 1% is " + fmt(t1));
  o.require(a10 >= 5.0 * t10, "any-change at 10% is only " + fmt(t10 > 0 ? a10 / t10 : 0.0, 2) + "x targeted");
}

// 6. Interpreter goldens, latch truth table, round-trip.
void crit6(Outcome& o) {
  const std::string dir = PLCATTEST_TEST_DATA;
  const Program p = stlang::load_program(dir + "/inlet.stx");
  const Program att = stlang::load_program(dir + "/inlet_attacked.stx");
  InputSnapshot low = stlang::default_inputs(p);
  set_input(p, low, "HMI_LIT101.AL", Value::boolean(true));
  auto r = stlang::scan(p, low, stlang::initial_latches(p));
  o.require(output_of(p, r.outputs, "_MV101_AutoInp").as_bool() && r.latches == LatchState{true, false},
            "low alarm does not open MV101");
  const InputSnapshot idle = stlang::default_inputs(p);
  o.require(output_of(p, stlang::scan(p, idle, LatchState{true, false}).outputs, "_MV101_AutoInp").as_bool(),
            "latched Out not held");
  o.require(!output_of(p, stlang::scan(p, idle, LatchState{false, false}).outputs, "_MV101_AutoInp").as_bool(),
            "idle MV101 opens");
  InputSnapshot alow = stlang::default_inputs(att);
  set_input(att, alow, "HMI_LIT101.AL", Value::boolean(true));
  o.require(!output_of(att, stlang::scan(att, alow, stlang::initial_latches(att)).outputs, "_MV101_AutoInp").as_bool(),
            "attacked variant opens MV101");
  InputSnapshot duty = stlang::default_inputs(p);
  set_input(p, duty, "HMI_MV201.Status", Value::enumeration(2));
  set_input(p, duty, "HMI_LIT301.AL", Value::boolean(true));
  o.require(output_of(p, stlang::scan(p, duty, stlang::initial_latches(p)).outputs, "_P_RAW_WATER_DUTY_AutoInp").as_bool(),
            "pump duty not set");

  const Program latch = stlang::parse_program(R"(VAR
  en : BOOL := 0; CLASS StateVar;
  s : BOOL := 0; CLASS StateVar;
  r : BOOL := 0; CLASS StateVar;
  q : BOOL := 0; CLASS OutputCommand;
  L.EnableIn : BOOL := 0; CLASS Internal;
  L.Set : BOOL := 0; CLASS Internal;
  L.Reset : BOOL := 0; CLASS Internal;
  L.Out : BOOL := 0; CLASS Internal;
END_VAR
BODY
  L.EnableIn := en;
  L.Set := s;
  L.Reset := r;
  SETD(L);
  q := L.Out;
END_BODY
)");
  int table_ok = 0;
  for (int bits = 0; bits < 16; ++bits) {
    const bool en = bits & 8, s = bits & 4, rs = bits & 2, prev = bits & 1;
    const bool want = en ? (s ? true : (rs ? false : prev)) : prev;
    InputSnapshot in = stlang::default_inputs(latch);
    set_input(latch, in, "en", Value::boolean(en));
    set_input(latch, in, "s", Value::boolean(s));
    set_input(latch, in, "r", Value::boolean(rs));
    const auto res = stlang::scan(latch, in, LatchState{prev});
    table_ok += res.latches[0] == want && output_of(latch, res.outputs, "q").as_bool() == want;
  }
  o.require(table_ok == 16, "latch table " + std::to_string(table_ok) + "/16");

  testutil::ProgramGen gen(2024);
  int round = 0;
  for (int i = 0; i < 1000; ++i) {
    const Program g = stlang::parse_program(gen.next());
    const std::string u = stlang::unparse(g);
    const Program back = stlang::parse_program(u);
    round += back == g && stlang::unparse(back) == u;
  }
  o.require(round == 1000, "round-trip " + std::to_string(round) + "/1000");
  o.detail << "latch table " << table_ok << "/16, round-trip " << round << "/1000";
}

// 7. Gradient check and byte-exact training.
void crit7(Outcome& o) {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    learner::MlpSpec s;
    s.input_dim = 1 + rng.below(5);
    const auto layers = rng.below(3);
    for (std::uint64_t l = 0; l < layers; ++l) s.hidden.push_back(1 + rng.below(8));
    s.output = rng.coin() ? learner::OutputKind::Softmax : learner::OutputKind::Sigmoid;
    s.output_dim = (s.output == learner::OutputKind::Softmax ? 2 : 1) + rng.below(4);
    std::vector<double> x(s.input_dim), t;
    for (auto& v : x) v = rng.uniform(-1, 1);
    if (s.output == learner::OutputKind::Softmax) t.push_back(static_cast<double>(rng.below(s.output_dim)));
    else for (std::size_t k = 0; k < s.output_dim; ++k) t.push_back(rng.coin() ? 1.0 : 0.0);
    worst = std::max(worst, learner::gradient_check(s, rng.next(), x, t));
  }
  o.require(worst <= 1e-4, "max rel error " + std::to_string(worst));

  auto& P = pipe();
  const Program& prog = P.wb.programs().front();
  const auto ds = experiment::prefix(P.dataset(prog), 10000);
  const auto a = learner::model_to_json(experiment::train_nn2(P.wb, ds));
  const auto b = learner::model_to_json(experiment::train_nn2(P.wb, ds));
  o.require(a == b, "retrained model differs");
  o.detail << "max rel error " << worst << ", retrain " << (a == b ? "identical" : "differs") << " ("
           << a.size() << " bytes)";
}

// Copies each row of `from` into the input layout of `to` by identifier.
std::vector<InputSnapshot> rebind(const Program& from, const Program& to, const std::vector<InputSnapshot>& rows) {
  std::vector<InputSnapshot> out;
  for (const auto& r : rows) {
    InputSnapshot s = stlang::default_inputs(to);
    for (std::size_t k = 0; k < from.input_order().size(); ++k) {
      const auto id = to.find(from.decl(from.input_order()[k]).ident);
      s.values[*to.input_position(*id)] = r.values[k];
    }
    out.push_back(std::move(s));
  }
  return out;
}

// 8. Importance soundness.
void crit8(Outcome& o) {
  auto& P = pipe();
  const auto& cfg = P.wb.config();
  for (const auto& prog : P.wb.programs()) {
    const auto& s = P.score(prog);
    std::uint64_t best_alarm = 0, best_timer = 0;
    for (std::size_t k = 0; k < s.idents.size(); ++k) {
      const auto cls = prog.decl(*prog.find(s.idents[k])).cls;
      if (cls == stlang::VarClass::Timer || cls == stlang::VarClass::HealthyFlag) {
        o.require(s.scores[k] == 0, prog.name() + " " + s.idents[k] + " scores " + std::to_string(s.scores[k]));
        best_timer = std::max(best_timer, s.scores[k]);
      }
      if (cls == stlang::VarClass::AlarmBit) best_alarm = std::max(best_alarm, s.scores[k]);
    }
    o.require(best_alarm > best_timer, prog.name() + " alarms do not outscore timers");
    o.detail << prog.name() << " alarm " << best_alarm << " timer " << best_timer << "; ";

    // The same program with an input nothing reads.
    std::string text = stlang::unparse(prog);
    text.insert(text.find("VAR\n") + 4, "  DEAD_INPUT : BOOL := 0; CLASS StateVar;\n");
    const Program dead = stlang::parse_program(text, prog.name());
    std::vector<InputSnapshot> rows;
    for (const auto& tr : P.wb.normal_traces()) {
      const plant::InputBinding bind(tr.schema, prog);
      for (const auto& row : tr.rows) rows.push_back(bind.snapshot(row));
    }
    const auto ds = flow::score_inputs(dead, rebind(prog, dead, rows),
                                       {cfg.importance_iterations, cfg.importance_subset, P.wb.seeds().importance});
    o.require(ds.score("DEAD_INPUT") == 0, prog.name() + " dead input scores " + std::to_string(ds.score("DEAD_INPUT")));
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"interpreter goldens, latch table, round-trip", crit6},
      {"gradient check and training determinism", crit7},
      {"importance soundness", crit8},
      {"NN1 agreement with alarm thresholds", crit2},
      {"cross-validated accuracy sweep", crit1},
      {"false alarms and bias fix", crit3},
      {"mutant detection", crit4},
      {"adversarial noise trends", crit5},
  };
  const int order[] = {6, 7, 8, 2, 1, 3, 4, 5};
  std::map<int, std::string> lines;
  bool all = true;
  const auto start = Clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = order[i];
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail.str()
         << " [" << fmt(seconds_since(t0), 1) << " s]";
    std::cout << line.str() << std::endl;
    lines[id] = line.str();
    all = all && o.pass;
  }
  std::cout << "\nSummary (" << fmt(seconds_since(start), 0) << " s):\n";
  for (const auto& [id, l] : lines) std::cout << l << '\n';
  return all ? 0 : 1;
}
