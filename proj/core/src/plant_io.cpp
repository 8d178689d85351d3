#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "csv.hpp"
#include "plcattest/plant.hpp"

namespace plcattest::plant {

using nlohmann::json;
using stlang::Value;

void write_trace_csv(std::ostream& os, const Trace& trace) {
  const auto header = trace.schema.header();
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const TraceRow& r : trace.rows) {
    os << csv::fixed6(r.t);
    for (double x : r.readings) os << ',' << csv::fixed6(x);
    for (bool b : r.alarms) os << ',' << (b ? '1' : '0');
    for (const Value& v : r.actuators) os << ',' << v.as_enum();
    for (const Value& v : r.vars) os << ',' << csv::format_value(v);
    os << '\n';
  }
}

Trace read_trace_csv(std::istream& is, const TraceSchema& schema) {
  Trace trace;
  trace.schema = schema;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("trace CSV is empty");
  if (csv::split(line) != schema.header()) throw FormatError("trace CSV header does not match the plant schema");
  const std::size_t ns = schema.sensors.size(), na = schema.alarms.size(), nc = schema.actuators.size(),
                    nv = schema.vars.size();
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 1 + ns + na + nc + nv)
      throw FormatError("trace CSV line " + std::to_string(lineno) + ": expected " +
                        std::to_string(1 + ns + na + nc + nv) + " fields");
    TraceRow r;
    std::size_t c = 0;
    r.t = csv::parse_double(cells[c++], lineno);
    if (!trace.rows.empty() && !(r.t > trace.rows.back().t))
      throw FormatError("trace CSV line " + std::to_string(lineno) + ": time is not increasing");
    for (std::size_t i = 0; i < ns; ++i) r.readings.push_back(csv::parse_double(cells[c++], lineno));
    for (std::size_t i = 0; i < na; ++i) r.alarms.push_back(csv::parse_value(cells[c++], ValueKind::boolean(), lineno).as_bool());
    for (std::size_t i = 0; i < nc; ++i) r.actuators.push_back(csv::parse_value(cells[c++], schema.actuator_kinds[i], lineno));
    for (std::size_t i = 0; i < nv; ++i) r.vars.push_back(csv::parse_value(cells[c++], schema.var_kinds[i], lineno));
    trace.rows.push_back(std::move(r));
  }
  return trace;
}

std::string plant_config_to_json(const PlantConfig& c) {
  json j;
  j["dt"] = c.dt;
  j["valve_transition_steps"] = c.valve_transition_steps;
  j["noise_fraction"] = c.noise_fraction;
  j["tanks"] = json::array();
  for (const Tank& t : c.tanks) j["tanks"].push_back({{"id", t.id}, {"capacity", t.capacity}});
  j["flows"] = json::array();
  for (const FlowPath& f : c.flows)
    j["flows"].push_back({{"id", f.id}, {"from", f.from}, {"to", f.to}, {"rate", f.rate}, {"gates", f.gates}});
  j["sensors"] = json::array();
  for (const SensorSpec& s : c.sensors)
    j["sensors"].push_back({{"ident", s.ident},
                            {"unit", s.unit},
                            {"range", {s.min, s.max}},
                            {"thresholds", {{"LL", s.ll}, {"L", s.l}, {"H", s.h}, {"HH", s.hh}}},
                            {"source", s.source == SensorSpec::Source::Level ? "level" : "flow"},
                            {"ref", s.source_ref}});
  j["actuators"] = json::array();
  for (const ActuatorSpec& a : c.actuators)
    j["actuators"].push_back({{"name", a.name},
                              {"state", a.state_ident},
                              {"kind", a.kind == ActuatorKind::Valve ? "valve" : "pump"},
                              {"cardinality", a.cardinality}});
  j["wiring"] = json::array();
  for (const Wire& w : c.wiring)
    j["wiring"].push_back({{"program", w.program}, {"command", w.command}, {"actuator", w.actuator}});
  return j.dump(2) + "\n";
}

PlantConfig plant_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    PlantConfig c;
    c.dt = j.value("dt", 1.0);
    c.valve_transition_steps = j.value("valve_transition_steps", 8);
    c.noise_fraction = j.value("noise_fraction", 0.0);
    for (const auto& t : j.at("tanks")) c.tanks.push_back({t.at("id"), t.value("capacity", 1000.0)});
    for (const auto& f : j.at("flows")) {
      FlowPath p;
      p.id = f.at("id");
      p.from = f.value("from", "");
      p.to = f.value("to", "");
      p.rate = f.at("rate");
      p.gates = f.value("gates", std::vector<std::vector<std::string>>{});
      c.flows.push_back(std::move(p));
    }
    for (const auto& s : j.at("sensors")) {
      SensorSpec spec;
      spec.ident = s.at("ident");
      spec.unit = s.value("unit", "");
      spec.min = s.at("range").at(0);
      spec.max = s.at("range").at(1);
      const auto& th = s.at("thresholds");
      spec.ll = th.at("LL");
      spec.l = th.at("L");
      spec.h = th.at("H");
      spec.hh = th.at("HH");
      const std::string src = s.value("source", "level");
      if (src != "level" && src != "flow") throw FormatError("sensor " + spec.ident + ": unknown source " + src);
      spec.source = src == "level" ? SensorSpec::Source::Level : SensorSpec::Source::Flow;
      spec.source_ref = s.at("ref");
      c.sensors.push_back(std::move(spec));
    }
    for (const auto& a : j.at("actuators")) {
      ActuatorSpec spec;
      spec.name = a.at("name");
      spec.state_ident = a.value("state", "HMI_" + spec.name + ".Status");
      const std::string kind = a.at("kind");
      if (kind != "valve" && kind != "pump") throw FormatError("actuator " + spec.name + ": unknown kind " + kind);
      spec.kind = kind == "valve" ? ActuatorKind::Valve : ActuatorKind::Pump;
      spec.cardinality = a.value("cardinality", spec.kind == ActuatorKind::Valve ? 3 : 2);
      c.actuators.push_back(std::move(spec));
    }
    for (const auto& w : j.at("wiring")) c.wiring.push_back({w.at("program"), w.at("command"), w.at("actuator")});
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("plant config: ") + e.what());
  }
}

}  // namespace plcattest::plant
