#include <algorithm>
#include <memory>
#include <ostream>

#include "json.hpp"

#include "plcattest/attester.hpp"

namespace plcattest::attester {

using plant::ActuatorKind;
using plant::TraceRow;

namespace {

std::optional<std::size_t> find(const std::vector<std::string>& v, const std::string& x) {
  const auto it = std::find(v.begin(), v.end(), x);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

std::int32_t as_state(const Value& v) { return v.kind() == Kind::Bool ? (v.as_bool() ? 1 : 0) : v.as_enum(); }

template <typename RowAt>
AttestEvent check(std::size_t t, const CheckTarget& target, std::int32_t predicted, RowAt row_at,
                  const AttesterConfig& cfg) {
  const CheckWindow w = target.kind == ActuatorKind::Valve ? cfg.valve : cfg.pump;
  AttestEvent ev;
  ev.t = t;
  ev.actuator = target.actuator;
  ev.predicted = predicted;
  ev.observed = as_state(row_at(w.hi).actuators[target.column]);
  bool changing = false;
  for (int k = w.lo; k <= w.hi; ++k) {
    const std::int32_t obs = as_state(row_at(k).actuators[target.column]);
    if (obs == predicted) {
      ev.observed = obs;
      return ev;
    }
    changing = changing || (target.kind == ActuatorKind::Valve && obs == plant::valve::kChanging);
  }
  if (changing) {
    ev.observed = plant::valve::kChanging;
    return ev;
  }
  ev.alarm = true;
  return ev;
}

void check_trace(const plant::Trace& trace, const AttesterConfig& cfg) {
  cfg.validate();
  const auto& s = trace.schema;
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    if (r.readings.size() != s.sensors.size() || r.alarms.size() != s.alarms.size() ||
        r.actuators.size() != s.actuators.size() || r.vars.size() != s.vars.size())
      throw MalformedTrace("row " + std::to_string(i) + " does not match the trace columns");
    if (i > 0 && !(r.t > trace.rows[i - 1].t)) throw MalformedTrace("time not increasing at row " + std::to_string(i));
  }
  if (trace.rows.size() <= static_cast<std::size_t>(cfg.max_window()))
    throw MalformedTrace("trace has " + std::to_string(trace.rows.size()) + " rows, needs more than " +
                         std::to_string(cfg.max_window()));
}

}  // namespace

FeatureBuilder::FeatureBuilder(const AttestModel& model, const plant::TraceSchema& schema) : model_(&model) {
  for (const auto& spec : model.sensors) {
    const auto at = find(schema.sensors, spec.ident);
    if (!at) throw MalformedTrace("trace has no reading column for " + spec.ident);
    sensor_cols_.push_back(*at);
  }
  for (const std::string& f : model.features) {
    Col c{Col::Src::Var, 0, -1};
    for (std::size_t s = 0; s < model.sensors.size() && c.nn1_out < 0; ++s) {
      const auto ids = plant::alarm_idents(model.sensors[s]);
      for (std::size_t b = 0; b < ids.size(); ++b)
        if (ids[b] == f) c = {Col::Src::Nn1, 0, static_cast<int>(4 * s + b)};
    }
    if (c.nn1_out < 0) {
      if (auto at = find(schema.sensors, f)) {
        c = {Col::Src::Reading, *at, -1};
      } else if (auto at2 = find(schema.alarms, f)) {
        c = {Col::Src::Alarm, *at2, -1};
      } else if (auto at3 = find(schema.actuators, f)) {
        c = {Col::Src::Actuator, *at3, -1};
      } else if (auto at4 = find(schema.vars, f)) {
        c = {Col::Src::Var, *at4, -1};
      } else {
        throw MalformedTrace("trace has no column for feature " + f);
      }
    }
    cols_.push_back(c);
  }
  if (model.nn2.spec.input_dim != cols_.size())
    throw learner::DimensionMismatch("NN2 expects " + std::to_string(model.nn2.spec.input_dim) + " features, model lists " +
                                     std::to_string(cols_.size()));
}

std::vector<double> FeatureBuilder::readings(const TraceRow& row) const {
  std::vector<double> r(sensor_cols_.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = row.readings[sensor_cols_[i]];
  return r;
}

std::vector<double> FeatureBuilder::features(const TraceRow& row) const {
  if (sensor_cols_.empty()) return features(row, {});
  return features(row, learner::nn1_alarms(model_->nn1, readings(row)));
}

std::vector<double> FeatureBuilder::features(const TraceRow& row, const std::vector<bool>& nn1_out) const {
  std::vector<double> fv(cols_.size());
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    const Col& c = cols_[j];
    switch (c.src) {
      case Col::Src::Nn1: fv[j] = nn1_out.at(static_cast<std::size_t>(c.nn1_out)) ? 1.0 : 0.0; break;
      case Col::Src::Reading: fv[j] = row.readings[c.index]; break;
      case Col::Src::Alarm: fv[j] = row.alarms[c.index] ? 1.0 : 0.0; break;
      case Col::Src::Actuator: fv[j] = row.actuators[c.index].numeric(); break;
      case Col::Src::Var: fv[j] = row.vars[c.index].numeric(); break;
    }
  }
  return fv;
}

RowPredictor model_predictor(const stlang::Program& prog, const AttestModel& model, const plant::TraceSchema& schema) {
  auto owned = std::make_shared<const AttestModel>(model);
  auto fb = std::make_shared<const FeatureBuilder>(*owned, schema);
  const auto codec = dataset::LabelCodec::for_program(prog);
  return [owned, fb, codec](const TraceRow& row) {
    return codec.decode(learner::predict(owned->nn2, fb->features(row)).label);
  };
}

RowPredictor oracle_predictor(const stlang::Program& prog, const plant::TraceSchema& schema) {
  auto binding = std::make_shared<const plant::InputBinding>(schema, prog);
  return [prog, binding](const TraceRow& row) {
    const auto in = binding->snapshot(row);
    return stlang::scan(prog, in, stlang::latches_from_input(prog, in)).outputs;
  };
}

void AttesterConfig::validate() const {
  for (const CheckWindow& w : {pump, valve})
    if (w.lo < 0 || w.hi < w.lo) throw Error("check window [" + std::to_string(w.lo) + "," + std::to_string(w.hi) + "] is empty");
}

int AttesterConfig::max_window() const { return std::max(pump.hi, valve.hi); }

std::vector<CheckTarget> check_targets(const stlang::Program& prog, const plant::PlantConfig& config,
                                       const plant::TraceSchema& schema) {
  std::vector<CheckTarget> out;
  for (std::size_t i = 0; i < prog.output_order().size(); ++i) {
    const std::string& cmd = prog.decl(prog.output_order()[i]).ident;
    for (const auto& w : config.wiring) {
      if (w.program != prog.name() || w.command != cmd) continue;
      const auto* act = config.actuator(w.actuator);
      if (!act) throw Error("wiring names unknown actuator " + w.actuator);
      const auto col = find(schema.actuators, act->state_ident);
      if (!col) throw MalformedTrace("trace has no column for " + act->state_ident);
      out.push_back({i, act->name, *col, act->kind});
    }
  }
  return out;
}

AttestResult attest_trace(const plant::Trace& trace, const std::vector<CheckTarget>& targets,
                          const RowPredictor& predict, const AttesterConfig& cfg) {
  return ensemble_attest(trace, targets, {predict}, cfg);
}

AttestResult ensemble_attest(const plant::Trace& trace, const std::vector<CheckTarget>& targets,
                             const std::vector<RowPredictor>& members, const AttesterConfig& cfg) {
  if (members.empty()) throw Error("ensemble needs at least one model");
  check_trace(trace, cfg);
  AttestResult res;
  const std::size_t last = trace.rows.size() - static_cast<std::size_t>(cfg.max_window());
  for (std::size_t t = 0; t < last; ++t) {
    auto row_at = [&](int k) -> const TraceRow& { return trace.rows[t + static_cast<std::size_t>(k)]; };
    std::vector<stlang::OutputSnapshot> preds;
    for (const auto& m : members) preds.push_back(m(trace.rows[t]));
    for (const CheckTarget& tg : targets) {
      AttestEvent chosen;
      for (std::size_t m = 0; m < preds.size(); ++m) {
        AttestEvent ev = check(t, tg, as_state(preds[m].commands[tg.output]), row_at, cfg);
        if (m == 0 || (ev.alarm && !chosen.alarm)) chosen = std::move(ev);
      }
      ++res.report.total_checks;
      res.report.false_alarms += chosen.alarm;
      res.events.push_back(std::move(chosen));
    }
  }
  return res;
}

AttestStream::AttestStream(std::vector<CheckTarget> targets, RowPredictor predict, AttesterConfig cfg)
    : targets_(std::move(targets)), predict_(std::move(predict)), cfg_(cfg) {
  cfg_.validate();
}

std::vector<AttestEvent> AttestStream::push(TraceRow row) {
  if (started_ && !(row.t > last_time_))
    throw OutOfOrderRow("row at t=" + std::to_string(row.t) + " arrived after t=" + std::to_string(last_time_));
  started_ = true;
  last_time_ = row.t;
  predictions_.push_back(predict_(row));
  rows_.push_back(std::move(row));
  max_buffered_ = std::max(max_buffered_, rows_.size());

  std::vector<AttestEvent> out;
  if (rows_.size() == static_cast<std::size_t>(cfg_.max_window()) + 1) {
    auto row_at = [&](int k) -> const TraceRow& { return rows_[static_cast<std::size_t>(k)]; };
    for (const CheckTarget& tg : targets_)
      out.push_back(check(next_t_, tg, as_state(predictions_.front().commands[tg.output]), row_at, cfg_));
    rows_.pop_front();
    predictions_.pop_front();
    ++next_t_;
  }
  return out;
}

void write_events_csv(std::ostream& os, const std::vector<AttestEvent>& events) {
  os << "t,actuator,predicted,observed,verdict\n";
  for (const auto& e : events)
    os << e.t << ',' << e.actuator << ',' << e.predicted << ',' << e.observed << ',' << (e.alarm ? "alarm" : "ok") << '\n';
}

std::string report_json(const FalseAlarmReport& report) {
  nlohmann::ordered_json j;
  j["totalChecks"] = report.total_checks;
  j["falseAlarms"] = report.false_alarms;
  j["rate"] = report.rate();
  return j.dump(2);
}

}  // namespace plcattest::attester
