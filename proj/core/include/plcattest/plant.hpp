#pragma once

// Desk-scale reference plant: three tank stages controlled by three PLC
// programs, with a forward-Euler tank model used to produce historian-style
// "normal" traces.

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plcattest/stlang.hpp"

namespace plcattest::plant {

struct SensorSpec {
  enum class Source { Level, Flow };

  std::string ident;
  std::string unit;
  double min = 0.0;
  double max = 1.0;
  double ll = 0.0;
  double l = 0.0;
  double h = 0.0;
  double hh = 0.0;
  /// What the sensor measures: a tank level or the rate of a flow path.
  Source source = Source::Level;
  std::string source_ref;

  double span() const { return max - min; }
  /// Throws Error unless LL < L < H < HH and min <= LL, HH <= max.
  void validate() const;
};

/// Alarm bits of one reading, in the fixed order (H, HH, L, LL).
struct AlarmBits {
  bool h = false;
  bool hh = false;
  bool l = false;
  bool ll = false;

  std::array<bool, 4> as_array() const { return {h, hh, l, ll}; }
  bool operator==(const AlarmBits&) const = default;
};

AlarmBits alarms_from_reading(double reading, const SensorSpec& spec);

/// Program identifiers of a sensor's alarms, same order as AlarmBits:
/// HMI_<ident>.AH, .AHH, .AL, .ALL.
std::array<std::string, 4> alarm_idents(const SensorSpec& spec);

enum class ActuatorKind { Valve, Pump };

/// Valve states (ENUM(3)); pumps are BOOL on/off.
namespace valve {
inline constexpr std::int32_t kChanging = 0;
inline constexpr std::int32_t kClosed = 1;
inline constexpr std::int32_t kOpen = 2;
}  // namespace valve

struct ActuatorSpec {
  std::string name;         // e.g. MV101
  std::string state_ident;  // plant-reported state, e.g. HMI_MV101.Status
  ActuatorKind kind = ActuatorKind::Pump;
  int cardinality = 2;

  ValueKind state_kind() const {
    return kind == ActuatorKind::Valve ? ValueKind::enumeration(cardinality) : ValueKind::boolean();
  }
};

struct Tank {
  std::string id;
  double capacity = 1000.0;
};

/// A flow between two tanks (empty id = outside the plant). Active when
/// every gate group has at least one active actuator (open valve / running
/// pump); a path without gates always flows.
struct FlowPath {
  std::string id;
  std::string from;
  std::string to;
  double rate = 0.0;
  std::vector<std::vector<std::string>> gates;
};

/// Connects a program's output command to the actuator it drives.
struct Wire {
  std::string program;
  std::string command;
  std::string actuator;
};

struct PlantConfig {
  std::vector<Tank> tanks;
  std::vector<FlowPath> flows;
  std::vector<SensorSpec> sensors;
  std::vector<ActuatorSpec> actuators;
  std::vector<Wire> wiring;
  double dt = 1.0;
  /// Steps a valve reports "changing" before reaching a new target.
  int valve_transition_steps = 8;
  /// Optional uniform sensor noise, as a fraction of each sensor's span.
  double noise_fraction = 0.0;

  const SensorSpec* sensor(const std::string& ident) const;
  const ActuatorSpec* actuator(const std::string& name) const;
  const ActuatorSpec* actuator_by_state(const std::string& state_ident) const;

  /// Checks the internal structure and that every plant-facing input of the
  /// given programs (readings, alarms, actuator states) maps to an element.
  void validate(const std::vector<stlang::Program>& programs) const;
};

/// Physical state of the plant between two scans.
struct PlantState {
  std::vector<double> levels;                   // per tank
  std::vector<stlang::Value> actuator_states;   // per actuator
};

/// One Euler step of the tank model under the given actuator states.
PlantState step_physics(const PlantState& state, const std::vector<stlang::Value>& actuator_states,
                        const PlantConfig& config);

/// Noise-free sensor readings for a plant state, clamped to sensor ranges.
std::vector<double> sensor_readings(const PlantState& state, const PlantConfig& config);

struct TraceSchema {
  std::vector<std::string> sensors;
  std::vector<std::string> alarms;
  std::vector<std::string> actuators;  // state idents
  std::vector<ValueKind> actuator_kinds;
  std::vector<std::string> vars;
  std::vector<ValueKind> var_kinds;
  std::vector<stlang::VarClass> var_classes;

  std::vector<std::string> header() const;
  bool operator==(const TraceSchema&) const = default;
};

struct TraceRow {
  double t = 0.0;
  std::vector<double> readings;
  std::vector<bool> alarms;
  std::vector<stlang::Value> actuators;
  std::vector<stlang::Value> vars;

  bool operator==(const TraceRow&) const = default;
};

/// Resolves a program's inputs against trace columns once, so snapshots
/// can be cut from many rows cheaply.
class InputBinding {
 public:
  InputBinding(const TraceSchema& schema, const stlang::Program& prog);
  stlang::InputSnapshot snapshot(const TraceRow& row) const;

 private:
  enum class Col { Reading, Alarm, Actuator, Var };
  std::vector<std::pair<Col, std::size_t>> cols_;
};

struct Trace {
  TraceSchema schema;
  std::vector<TraceRow> rows;

  stlang::InputSnapshot snapshot(const stlang::Program& prog, std::size_t row) const {
    return InputBinding(schema, prog).snapshot(rows.at(row));
  }
  bool operator==(const Trace&) const = default;
};

/// Column layout for a plant running the given programs.
TraceSchema make_schema(const std::vector<stlang::Program>& programs, const PlantConfig& config);

struct PlantInit {
  std::string name;
  std::map<std::string, double> levels;            // tank id -> level
  std::map<std::string, std::int32_t> actuators;   // actuator name -> state
  std::map<std::string, stlang::Value> vars;       // program variable overrides
};

/// Closed-loop simulation: readings -> alarms -> scan every program ->
/// actuator transitions -> physics, once per dt. Deterministic given seed.
Trace generate_trace(const std::vector<stlang::Program>& programs, const PlantConfig& config,
                     const PlantInit& init, double duration_seconds, std::uint64_t seed);

struct MiniPlant {
  std::vector<stlang::Program> programs;
  PlantConfig config;
};

/// The built-in three-stage reference plant. Stage 1 carries the raw water
/// inlet valve / raw water pump logic; stages 2 and 3 are analogs built from
/// the same constructs.
MiniPlant builtin_miniplant();

/// Source text of the built-in programs (plc1, plc2, plc3).
std::vector<std::pair<std::string, std::string>> builtin_program_sources();

/// Stage-1 program with the inlet-valve attack applied (SETD disabled and
/// its Set input forced to 0).
stlang::Program builtin_attacked_plc1();

/// Documented starting configurations; running each covers every actuator
/// state of the built-in plant.
std::vector<PlantInit> builtin_initial_states();

// Trace CSV: t,<sensors>,<alarms>,<actuators>,<vars>; reals with 6 decimals.
void write_trace_csv(std::ostream& os, const Trace& trace);
Trace read_trace_csv(std::istream& is, const TraceSchema& schema);

// Plant configuration as JSON (see docs/formats.md).
std::string plant_config_to_json(const PlantConfig& config);
PlantConfig plant_config_from_json(const std::string& text);

}  // namespace plcattest::plant
