#include <algorithm>
#include <cmath>
#include <set>

#include "plcattest/plant.hpp"
#include "plcattest/rng.hpp"

namespace plcattest::plant {

using stlang::Program;
using stlang::Value;
using stlang::VarClass;

void SensorSpec::validate() const {
  if (!(ll < l && l < h && h < hh)) throw Error("sensor " + ident + ": thresholds must satisfy LL < L < H < HH");
  if (!(min <= ll && hh <= max)) throw Error("sensor " + ident + ": thresholds must lie within the range");
}

AlarmBits alarms_from_reading(double reading, const SensorSpec& spec) {
  AlarmBits a;
  a.hh = reading >= spec.hh;
  a.h = reading >= spec.h;
  a.l = reading <= spec.l;
  a.ll = reading <= spec.ll;
  return a;
}

std::array<std::string, 4> alarm_idents(const SensorSpec& spec) {
  const std::string base = "HMI_" + spec.ident;
  return {base + ".AH", base + ".AHH", base + ".AL", base + ".ALL"};
}

const SensorSpec* PlantConfig::sensor(const std::string& ident) const {
  for (const auto& s : sensors)
    if (s.ident == ident) return &s;
  return nullptr;
}

const ActuatorSpec* PlantConfig::actuator(const std::string& name) const {
  for (const auto& a : actuators)
    if (a.name == name) return &a;
  return nullptr;
}

const ActuatorSpec* PlantConfig::actuator_by_state(const std::string& state_ident) const {
  for (const auto& a : actuators)
    if (a.state_ident == state_ident) return &a;
  return nullptr;
}

namespace {

std::optional<std::size_t> tank_index(const PlantConfig& c, const std::string& id) {
  for (std::size_t i = 0; i < c.tanks.size(); ++i)
    if (c.tanks[i].id == id) return i;
  return std::nullopt;
}

std::size_t actuator_index(const PlantConfig& c, const std::string& name) {
  for (std::size_t i = 0; i < c.actuators.size(); ++i)
    if (c.actuators[i].name == name) return i;
  throw Error("unknown actuator '" + name + "'");
}

bool actuator_active(const ActuatorSpec& a, const Value& state) {
  return a.kind == ActuatorKind::Valve ? state.as_enum() == valve::kOpen : state.as_bool();
}

bool flow_active(const FlowPath& f, const std::vector<Value>& states, const PlantConfig& c) {
  for (const auto& group : f.gates) {
    bool any = false;
    for (const auto& name : group) {
      const std::size_t i = actuator_index(c, name);
      any = any || actuator_active(c.actuators[i], states[i]);
    }
    if (!any) return false;
  }
  return true;
}

// Alarm ident -> (sensor index, position in AlarmBits order).
std::optional<std::pair<std::size_t, int>> alarm_source(const PlantConfig& c, const std::string& ident) {
  for (std::size_t s = 0; s < c.sensors.size(); ++s) {
    const auto ids = alarm_idents(c.sensors[s]);
    for (int k = 0; k < 4; ++k)
      if (ids[static_cast<std::size_t>(k)] == ident) return std::make_pair(s, k);
  }
  return std::nullopt;
}

}  // namespace

void PlantConfig::validate(const std::vector<Program>& programs) const {
  if (!(dt > 0.0)) throw Error("plant dt must be positive");
  if (valve_transition_steps < 0) throw Error("valve transition steps must be >= 0");
  if (noise_fraction < 0.0) throw Error("noise fraction must be >= 0");
  for (const auto& s : sensors) {
    s.validate();
    if (s.source == SensorSpec::Source::Level && !tank_index(*this, s.source_ref))
      throw Error("sensor " + s.ident + " reads unknown tank '" + s.source_ref + "'");
    if (s.source == SensorSpec::Source::Flow &&
        std::none_of(flows.begin(), flows.end(), [&](const FlowPath& f) { return f.id == s.source_ref; }))
      throw Error("sensor " + s.ident + " reads unknown flow '" + s.source_ref + "'");
  }
  for (const auto& a : actuators) {
    if (a.kind == ActuatorKind::Valve && a.cardinality < 3)
      throw Error("valve " + a.name + " needs at least 3 states (open, closed, changing)");
    if (a.kind == ActuatorKind::Pump && a.cardinality != 2) throw Error("pump " + a.name + " must have 2 states");
  }
  for (const auto& f : flows) {
    if (!f.from.empty() && !tank_index(*this, f.from)) throw Error("flow " + f.id + ": unknown tank " + f.from);
    if (!f.to.empty() && !tank_index(*this, f.to)) throw Error("flow " + f.id + ": unknown tank " + f.to);
    for (const auto& g : f.gates)
      for (const auto& n : g) actuator_index(*this, n);
  }
  for (const auto& w : wiring) {
    const auto* a = actuator(w.actuator);
    if (!a) throw Error("wire " + w.program + "." + w.command + " drives unknown actuator " + w.actuator);
  }
  for (const Program& p : programs) {
    for (stlang::VarId id : p.input_order()) {
      const auto& d = p.decl(id);
      switch (d.cls) {
        case VarClass::SensorReading:
          if (!sensor(d.ident)) throw Error(p.name() + ": sensor input " + d.ident + " has no plant sensor");
          break;
        case VarClass::AlarmBit:
          if (!alarm_source(*this, d.ident))
            throw Error(p.name() + ": alarm input " + d.ident + " has no plant sensor");
          break;
        case VarClass::ActuatorState: {
          const auto* a = actuator_by_state(d.ident);
          if (!a) throw Error(p.name() + ": actuator state " + d.ident + " has no plant actuator");
          if (!(a->state_kind() == d.kind))
            throw Error(p.name() + ": " + d.ident + " declared " + to_string(d.kind) + ", plant reports " +
                        to_string(a->state_kind()));
          break;
        }
        default:
          break;
      }
    }
    for (const auto& w : wiring) {
      if (w.program != p.name()) continue;
      auto id = p.find(w.command);
      if (!id || p.decl(*id).cls != VarClass::OutputCommand)
        throw Error("wire " + w.program + "." + w.command + " is not an output command");
    }
  }
}

PlantState step_physics(const PlantState& state, const std::vector<Value>& actuator_states,
                        const PlantConfig& config) {
  PlantState next = state;
  next.actuator_states = actuator_states;
  std::vector<double> net(config.tanks.size(), 0.0);
  for (const FlowPath& f : config.flows) {
    if (!flow_active(f, actuator_states, config)) continue;
    if (auto i = tank_index(config, f.from)) net[*i] -= f.rate;
    if (auto i = tank_index(config, f.to)) net[*i] += f.rate;
  }
  for (std::size_t i = 0; i < config.tanks.size(); ++i)
    next.levels[i] = std::clamp(state.levels[i] + config.dt * net[i], 0.0, config.tanks[i].capacity);
  return next;
}

std::vector<double> sensor_readings(const PlantState& state, const PlantConfig& config) {
  std::vector<double> out;
  out.reserve(config.sensors.size());
  for (const SensorSpec& s : config.sensors) {
    double v = 0.0;
    if (s.source == SensorSpec::Source::Level) {
      v = state.levels[*tank_index(config, s.source_ref)];
    } else {
      for (const FlowPath& f : config.flows)
        if (f.id == s.source_ref && flow_active(f, state.actuator_states, config)) v += f.rate;
    }
    out.push_back(std::clamp(v, s.min, s.max));
  }
  return out;
}

std::vector<std::string> TraceSchema::header() const {
  std::vector<std::string> h{"t"};
  h.insert(h.end(), sensors.begin(), sensors.end());
  h.insert(h.end(), alarms.begin(), alarms.end());
  h.insert(h.end(), actuators.begin(), actuators.end());
  h.insert(h.end(), vars.begin(), vars.end());
  return h;
}

TraceSchema make_schema(const std::vector<Program>& programs, const PlantConfig& config) {
  TraceSchema s;
  for (const auto& sensor : config.sensors) {
    s.sensors.push_back(sensor.ident);
    for (const auto& a : alarm_idents(sensor)) s.alarms.push_back(a);
  }
  for (const auto& a : config.actuators) {
    s.actuators.push_back(a.state_ident);
    s.actuator_kinds.push_back(a.state_kind());
  }
  std::set<std::string> seen;
  for (const Program& p : programs) {
    for (stlang::VarId id : p.input_order()) {
      const auto& d = p.decl(id);
      if (d.cls != VarClass::StateVar && d.cls != VarClass::Timer && d.cls != VarClass::HealthyFlag) continue;
      if (!seen.insert(d.ident).second) continue;
      s.vars.push_back(d.ident);
      s.var_kinds.push_back(d.kind);
      s.var_classes.push_back(d.cls);
    }
  }
  return s;
}

InputBinding::InputBinding(const TraceSchema& schema, const Program& prog) {
  auto find = [](const std::vector<std::string>& v, const std::string& x) -> std::optional<std::size_t> {
    auto it = std::find(v.begin(), v.end(), x);
    if (it == v.end()) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
  };
  for (stlang::VarId id : prog.input_order()) {
    const auto& d = prog.decl(id);
    std::optional<std::size_t> at;
    Col col = Col::Var;
    switch (d.cls) {
      case VarClass::SensorReading:
        col = Col::Reading;
        at = find(schema.sensors, d.ident);
        break;
      case VarClass::AlarmBit:
        col = Col::Alarm;
        at = find(schema.alarms, d.ident);
        break;
      case VarClass::ActuatorState:
        col = Col::Actuator;
        at = find(schema.actuators, d.ident);
        break;
      default:
        col = Col::Var;
        at = find(schema.vars, d.ident);
        break;
    }
    if (!at) throw Error("trace has no column for input " + d.ident + " of " + prog.name());
    cols_.emplace_back(col, *at);
  }
}

stlang::InputSnapshot InputBinding::snapshot(const TraceRow& row) const {
  stlang::InputSnapshot s;
  s.values.reserve(cols_.size());
  for (const auto& [col, i] : cols_) {
    switch (col) {
      case Col::Reading: s.values.push_back(Value::real(row.readings[i])); break;
      case Col::Alarm: s.values.push_back(Value::boolean(row.alarms[i])); break;
      case Col::Actuator: s.values.push_back(row.actuators[i]); break;
      case Col::Var: s.values.push_back(row.vars[i]); break;
    }
  }
  return s;
}

namespace {

struct ActuatorRuntime {
  Value state;
  std::int32_t target = valve::kClosed;
  int remaining = 0;
};

}  // namespace

Trace generate_trace(const std::vector<Program>& programs, const PlantConfig& config, const PlantInit& init,
                     double duration_seconds, std::uint64_t seed) {
  if (!(duration_seconds > 0.0)) throw Error("trace duration must be positive");
  config.validate(programs);
  Rng rng(seed);

  Trace trace;
  trace.schema = make_schema(programs, config);
  const TraceSchema& schema = trace.schema;

  PlantState state;
  for (const Tank& t : config.tanks) {
    auto it = init.levels.find(t.id);
    state.levels.push_back(it == init.levels.end() ? 0.0 : std::clamp(it->second, 0.0, t.capacity));
  }
  std::vector<ActuatorRuntime> act;
  for (const ActuatorSpec& a : config.actuators) {
    ActuatorRuntime r;
    auto it = init.actuators.find(a.name);
    if (a.kind == ActuatorKind::Valve) {
      r.target = it == init.actuators.end() ? valve::kClosed : it->second;
      if (r.target != valve::kOpen && r.target != valve::kClosed)
        throw Error("initial state of valve " + a.name + " must be open or closed");
      r.state = Value::enumeration(r.target);
    } else {
      r.state = Value::boolean(it != init.actuators.end() && it->second != 0);
    }
    act.push_back(r);
  }
  auto current_states = [&] {
    std::vector<Value> v;
    for (const auto& r : act) v.push_back(r.state);
    return v;
  };
  state.actuator_states = current_states();

  std::vector<Value> vars;
  for (std::size_t i = 0; i < schema.vars.size(); ++i) {
    auto it = init.vars.find(schema.vars[i]);
    Value v;
    if (it != init.vars.end()) {
      v = it->second;
    } else {
      for (const Program& p : programs)
        if (auto id = p.find(schema.vars[i])) {
          v = p.decl(*id).initial;
          break;
        }
    }
    if (!v.conforms(schema.var_kinds[i])) throw Error("initial value for " + schema.vars[i] + " has wrong kind");
    vars.push_back(v);
  }

  std::vector<InputBinding> bindings;
  std::vector<stlang::LatchState> latches;
  std::vector<std::vector<std::pair<stlang::VarId, std::size_t>>> writeback;  // state var -> vars column
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> wires;       // output pos -> actuator
  for (const Program& p : programs) {
    bindings.emplace_back(schema, p);
    std::vector<std::pair<stlang::VarId, std::size_t>> wb;
    for (stlang::VarId id : p.input_order()) {
      if (p.decl(id).cls != VarClass::StateVar) continue;
      auto it = std::find(schema.vars.begin(), schema.vars.end(), p.decl(id).ident);
      wb.emplace_back(id, static_cast<std::size_t>(it - schema.vars.begin()));
    }
    writeback.push_back(std::move(wb));
    std::vector<std::pair<std::size_t, std::size_t>> pw;
    for (const Wire& w : config.wiring) {
      if (w.program != p.name()) continue;
      const auto id = *p.find(w.command);
      const auto& outs = p.output_order();
      const auto pos = static_cast<std::size_t>(std::find(outs.begin(), outs.end(), id) - outs.begin());
      pw.emplace_back(pos, actuator_index(config, w.actuator));
    }
    wires.push_back(std::move(pw));
    latches.emplace_back();
  }

  const auto steps = static_cast<std::size_t>(std::llround(duration_seconds / config.dt));
  trace.rows.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    TraceRow row;
    row.t = static_cast<double>(k) * config.dt;
    row.readings = sensor_readings(state, config);
    if (config.noise_fraction > 0.0) {
      for (std::size_t s = 0; s < row.readings.size(); ++s) {
        const SensorSpec& spec = config.sensors[s];
        const double a = config.noise_fraction * spec.span();
        row.readings[s] = std::clamp(row.readings[s] + rng.uniform(-a, a), spec.min, spec.max);
      }
    }
    for (std::size_t s = 0; s < config.sensors.size(); ++s)
      for (bool b : alarms_from_reading(row.readings[s], config.sensors[s]).as_array()) row.alarms.push_back(b);
    row.actuators = state.actuator_states;
    row.vars = vars;

    std::vector<std::optional<Value>> commands(config.actuators.size());
    for (std::size_t p = 0; p < programs.size(); ++p) {
      const auto input = bindings[p].snapshot(row);
      if (k == 0) latches[p] = stlang::latches_from_input(programs[p], input);
      auto res = stlang::scan(programs[p], input, latches[p]);
      latches[p] = std::move(res.latches);
      for (const auto& [id, col] : writeback[p]) vars[col] = res.env[static_cast<std::size_t>(id)];
      for (const auto& [pos, a] : wires[p]) commands[a] = res.outputs.commands[pos];
    }
    trace.rows.push_back(std::move(row));

    for (std::size_t a = 0; a < act.size(); ++a) {
      ActuatorRuntime& r = act[a];
      const ActuatorSpec& spec = config.actuators[a];
      if (spec.kind == ActuatorKind::Pump) {
        if (commands[a]) r.state = Value::boolean(commands[a]->as_bool());
        continue;
      }
      std::int32_t cmd = r.target;
      if (commands[a]) {
        const std::int32_t c = commands[a]->kind() == Kind::Bool ? (commands[a]->as_bool() ? valve::kOpen : valve::kClosed)
                                                                 : commands[a]->as_enum();
        if (c == valve::kOpen || c == valve::kClosed) cmd = c;
      }
      if (cmd != r.target) {
        r.target = cmd;
        r.remaining = config.valve_transition_steps;
        r.state = Value::enumeration(r.remaining > 0 ? valve::kChanging : r.target);
      } else if (r.remaining > 0) {
        --r.remaining;
        r.state = Value::enumeration(r.remaining > 0 ? valve::kChanging : r.target);
      }
    }
    state = step_physics(state, current_states(), config);

    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (schema.var_classes[i] != VarClass::Timer) continue;
      double hi = 86400.0;
      for (const Program& p : programs)
        if (auto id = p.find(schema.vars[i])) {
          hi = p.decl(*id).range_hi;
          break;
        }
      vars[i] = Value::real(std::fmod(vars[i].as_real() + config.dt, hi));
    }
  }
  return trace;
}

}  // namespace plcattest::plant
