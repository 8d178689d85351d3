#include <string>

#include "plcattest/plant.hpp"

namespace plcattest::plant {
namespace {

// Stage 1: raw water tank T101. The SETD section is the raw water inlet valve
// and raw water pump logic, kept statement for statement.
constexpr const char* kPlc1 = R"(PROGRAM plc1;
VAR
  HMI_LIT101.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_MV101.Status : ENUM(3) := 1; CLASS ActuatorState;
  HMI_P101.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P102.Status : BOOL := 0; CLASS ActuatorState;
  HMI_MV201.Status : ENUM(3) := 1; CLASS ActuatorState;
  HMI_P1_STATE : ENUM(4) := 2; CLASS StateVar;
  HMI_P1_SHUTDOWN : BOOL := 0; CLASS StateVar;
  HMI_P101.Fault : BOOL := 0; CLASS StateVar;
  _MV101_AutoInp : BOOL := 0; CLASS StateVar;
  _P_RAW_WATER_DUTY_AutoInp : BOOL := 0; CLASS StateVar;
  HMI_P1_TIMER : REAL := 0.0; CLASS Timer; RANGE 0.0 86400.0;
  HMI_LIT101.Healthy : BOOL := 1; CLASS HealthyFlag;
  P101 : BOOL := 0; CLASS OutputCommand;
  P102 : BOOL := 0; CLASS OutputCommand;
  MV101 : ENUM(3) := 1; CLASS OutputCommand;
  _MV_101_SR.EnableIn : BOOL := 0; CLASS Internal;
  _MV_101_SR.Set : BOOL := 0; CLASS Internal;
  _MV_101_SR.Reset : BOOL := 0; CLASS Internal;
  _MV_101_SR.Out : BOOL := 0; CLASS Internal;
  _P_RAW_WATER_DUTY_SR.EnableIn : BOOL := 0; CLASS Internal;
  _P_RAW_WATER_DUTY_SR.Set : BOOL := 0; CLASS Internal;
  _P_RAW_WATER_DUTY_SR.Reset : BOOL := 0; CLASS Internal;
  _P_RAW_WATER_DUTY_SR.Out : BOOL := 0; CLASS Internal;
  _P1_SCADA_ALARM : BOOL := 0; CLASS Internal;
  _P1_RUNTIME : REAL := 0.0; CLASS Internal; RANGE 0.0 86400.0;
END_VAR
LATCH
  _MV_101_SR FROM _MV101_AutoInp;
  _P_RAW_WATER_DUTY_SR FROM _P_RAW_WATER_DUTY_AutoInp;
END_LATCH
BODY
  (*OPEN RAW WATER OUTLET VALVE, MV201*)
  (*MV-101 , Raw Water Inlet Valve Control*)
  _MV_101_SR.EnableIn := 1;
  _MV_101_SR.Set := HMI_LIT101.AL;
  _MV_101_SR.Reset := HMI_LIT101.AH;
  SETD(_MV_101_SR);
  _MV101_AutoInp := _MV_101_SR.Out;

  _P_RAW_WATER_DUTY_SR.EnableIn := 1;
  _P_RAW_WATER_DUTY_SR.Set := HMI_MV201.Status =2 AND HMI_LIT301.AL;

  _P_RAW_WATER_DUTY_SR.Reset := HMI_MV201.Status <>2 OR HMI_LIT301.AH;
  SETD(_P_RAW_WATER_DUTY_SR);
  _P_RAW_WATER_DUTY_AutoInp := _P_RAW_WATER_DUTY_SR.Out;

  IF HMI_P1_SHUTDOWN THEN
    HMI_P1_STATE :=3;
    HMI_P1_SHUTDOWN :=0;
  END_IF;

  (* SCADA-only bookkeeping *)
  IF NOT HMI_LIT101.Healthy THEN
    _P1_SCADA_ALARM := 1;
  END_IF;
  _P1_RUNTIME := HMI_P1_TIMER + 1.0;

  (* Drive the actuators while the process runs; P102 stands by for P101 *)
  CASE HMI_P1_STATE OF
    2:
      IF _MV101_AutoInp THEN
        MV101 := 2;
      ELSE
        MV101 := 1;
      END_IF;
      P101 := _P_RAW_WATER_DUTY_AutoInp AND NOT HMI_P101.Fault;
      P102 := _P_RAW_WATER_DUTY_AutoInp AND HMI_P101.Fault;
    ELSE
      MV101 := 1;
      P101 := 0;
      P102 := 0;
  END_CASE;
END_BODY
)";

// Stage 2: transfer valve MV201 into T301 plus dosing pumps on the transfer line.
constexpr const char* kPlc2 = R"(PROGRAM plc2;
VAR
  HMI_LIT101.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT101.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_FIT201.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_FIT201.AH : BOOL := 0; CLASS AlarmBit;
  HMI_FIT201.AL : BOOL := 0; CLASS AlarmBit;
  HMI_FIT201.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_MV201.Status : ENUM(3) := 1; CLASS ActuatorState;
  HMI_P201.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P202.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P101.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P2_STATE : ENUM(4) := 2; CLASS StateVar;
  HMI_P201.Fault : BOOL := 0; CLASS StateVar;
  _MV201_AutoInp : BOOL := 0; CLASS StateVar;
  HMI_P2_TIMER : REAL := 0.0; CLASS Timer; RANGE 0.0 86400.0;
  HMI_FIT201.Healthy : BOOL := 1; CLASS HealthyFlag;
  P201 : BOOL := 0; CLASS OutputCommand;
  P202 : BOOL := 0; CLASS OutputCommand;
  MV201 : ENUM(3) := 1; CLASS OutputCommand;
  _MV_201_SR.EnableIn : BOOL := 0; CLASS Internal;
  _MV_201_SR.Set : BOOL := 0; CLASS Internal;
  _MV_201_SR.Reset : BOOL := 0; CLASS Internal;
  _MV_201_SR.Out : BOOL := 0; CLASS Internal;
  _P2_SCADA_ALARM : BOOL := 0; CLASS Internal;
  _P2_RUNTIME : REAL := 0.0; CLASS Internal; RANGE 0.0 86400.0;
END_VAR
LATCH
  _MV_201_SR FROM _MV201_AutoInp;
END_LATCH
BODY
  (* MV-201, transfer valve: open on T301 low unless T101 is nearly empty *)
  _MV_201_SR.EnableIn := 1;
  _MV_201_SR.Set := HMI_LIT301.AL AND NOT HMI_LIT101.ALL;
  _MV_201_SR.Reset := HMI_LIT301.AH OR HMI_LIT101.ALL;
  SETD(_MV_201_SR);
  _MV201_AutoInp := _MV_201_SR.Out;

  IF NOT HMI_FIT201.Healthy THEN
    _P2_SCADA_ALARM := 1;
  END_IF;
  _P2_RUNTIME := HMI_P2_TIMER + 1.0;

  IF HMI_P2_STATE = 2 THEN
    IF _MV201_AutoInp THEN
      MV201 := 2;
    ELSE
      MV201 := 1;
    END_IF;
    (* dose only while water actually flows through the open valve *)
    IF HMI_MV201.Status = 2 AND NOT HMI_FIT201.AL THEN
      P201 := NOT HMI_P201.Fault;
      P202 := HMI_P201.Fault;
    ELSE
      P201 := 0;
      P202 := 0;
    END_IF;
  ELSE
    MV201 := 1;
    P201 := 0;
    P202 := 0;
  END_IF;
END_BODY
)";

// Stage 3: feed pumps T301 -> T401 through MV301, overflow drain MV302.
constexpr const char* kPlc3 = R"(PROGRAM plc3;
VAR
  HMI_LIT301.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT301.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT401.AHH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT401.AH : BOOL := 0; CLASS AlarmBit;
  HMI_LIT401.AL : BOOL := 0; CLASS AlarmBit;
  HMI_LIT401.ALL : BOOL := 0; CLASS AlarmBit;
  HMI_MV301.Status : ENUM(3) := 1; CLASS ActuatorState;
  HMI_MV302.Status : ENUM(3) := 1; CLASS ActuatorState;
  HMI_P301.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P302.Status : BOOL := 0; CLASS ActuatorState;
  HMI_P3_STATE : ENUM(4) := 2; CLASS StateVar;
  HMI_P301.Fault : BOOL := 0; CLASS StateVar;
  _P_UF_FEED_DUTY_AutoInp : BOOL := 0; CLASS StateVar;
  _MV302_AutoInp : BOOL := 0; CLASS StateVar;
  HMI_P3_TIMER : REAL := 0.0; CLASS Timer; RANGE 0.0 86400.0;
  HMI_LIT401.Healthy : BOOL := 1; CLASS HealthyFlag;
  P301 : BOOL := 0; CLASS OutputCommand;
  P302 : BOOL := 0; CLASS OutputCommand;
  MV301 : ENUM(3) := 1; CLASS OutputCommand;
  MV302 : ENUM(3) := 1; CLASS OutputCommand;
  _P_UF_FEED_DUTY_SR.EnableIn : BOOL := 0; CLASS Internal;
  _P_UF_FEED_DUTY_SR.Set : BOOL := 0; CLASS Internal;
  _P_UF_FEED_DUTY_SR.Reset : BOOL := 0; CLASS Internal;
  _P_UF_FEED_DUTY_SR.Out : BOOL := 0; CLASS Internal;
  _MV_302_SR.EnableIn : BOOL := 0; CLASS Internal;
  _MV_302_SR.Set : BOOL := 0; CLASS Internal;
  _MV_302_SR.Reset : BOOL := 0; CLASS Internal;
  _MV_302_SR.Out : BOOL := 0; CLASS Internal;
  _P3_SCADA_ALARM : BOOL := 0; CLASS Internal;
  _P3_RUNTIME : REAL := 0.0; CLASS Internal; RANGE 0.0 86400.0;
END_VAR
LATCH
  _P_UF_FEED_DUTY_SR FROM _P_UF_FEED_DUTY_AutoInp;
  _MV_302_SR FROM _MV302_AutoInp;
END_LATCH
BODY
  (* UF feed duty: refill T401 while T301 holds water, or unload a high T301 *)
  _P_UF_FEED_DUTY_SR.EnableIn := 1;
  _P_UF_FEED_DUTY_SR.Set := (HMI_LIT401.AL OR HMI_LIT301.AH) AND NOT HMI_LIT301.ALL;
  _P_UF_FEED_DUTY_SR.Reset := HMI_LIT401.AH OR HMI_LIT301.ALL;
  SETD(_P_UF_FEED_DUTY_SR);
  _P_UF_FEED_DUTY_AutoInp := _P_UF_FEED_DUTY_SR.Out;

  (* MV-302, overflow drain for T301 *)
  _MV_302_SR.EnableIn := 1;
  _MV_302_SR.Set := HMI_LIT301.AHH;
  _MV_302_SR.Reset := NOT HMI_LIT301.AH;
  SETD(_MV_302_SR);
  _MV302_AutoInp := _MV_302_SR.Out;

  IF NOT HMI_LIT401.Healthy THEN
    _P3_SCADA_ALARM := 1;
  END_IF;
  _P3_RUNTIME := HMI_P3_TIMER + 1.0;

  CASE HMI_P3_STATE OF
    2:
      IF _P_UF_FEED_DUTY_AutoInp THEN
        MV301 := 2;
      ELSE
        MV301 := 1;
      END_IF;
      (* feed pumps only run against a fully open outlet *)
      IF _P_UF_FEED_DUTY_AutoInp AND HMI_MV301.Status = 2 THEN
        P301 := NOT HMI_P301.Fault;
        P302 := HMI_P301.Fault;
      END_IF;
      IF _MV302_AutoInp THEN
        MV302 := 2;
      END_IF;
    3:
      MV301 := 1;
      MV302 := 1;
  END_CASE;
END_BODY
)";

SensorSpec level_sensor(const std::string& ident, const std::string& tank) {
  SensorSpec s;
  s.ident = ident;
  s.unit = "mm";
  s.min = 0.0;
  s.max = 1000.0;
  // Levels move on a 5 mm grid; thresholds sit between grid points.
  s.ll = 102.5;
  s.l = 252.5;
  s.h = 802.5;
  s.hh = 902.5;
  s.source = SensorSpec::Source::Level;
  s.source_ref = tank;
  return s;
}

ActuatorSpec valve_spec(const std::string& name) {
  return {name, "HMI_" + name + ".Status", ActuatorKind::Valve, 3};
}

ActuatorSpec pump_spec(const std::string& name) {
  return {name, "HMI_" + name + ".Status", ActuatorKind::Pump, 2};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> builtin_program_sources() {
  return {{"plc1", kPlc1}, {"plc2", kPlc2}, {"plc3", kPlc3}};
}

MiniPlant builtin_miniplant() {
  MiniPlant mp;
  for (const auto& [name, src] : builtin_program_sources()) mp.programs.push_back(stlang::parse_program(src, name));

  PlantConfig& c = mp.config;
  c.dt = 1.0;
  c.valve_transition_steps = 8;
  c.tanks = {{"T101", 1000.0}, {"T301", 1000.0}, {"T401", 1000.0}};
  c.flows = {
      {"RAW_IN", "", "T101", 10.0, {{"MV101"}}},
      {"P1_TRANSFER", "T101", "T301", 10.0, {{"P101", "P102"}, {"MV201"}}},
      {"P3_TRANSFER", "T301", "T401", 10.0, {{"P301", "P302"}, {"MV301"}}},
      {"T301_DRAIN", "T301", "", 10.0, {{"MV302"}}},
      {"DEMAND", "T401", "", 5.0, {}},
  };
  c.sensors = {level_sensor("LIT101", "T101"), level_sensor("LIT301", "T301"), level_sensor("LIT401", "T401")};
  SensorSpec fit;
  fit.ident = "FIT201";
  fit.unit = "m3/h";
  fit.min = 0.0;
  fit.max = 20.0;
  fit.ll = 1.25;
  fit.l = 2.5;
  fit.h = 15.0;
  fit.hh = 17.5;
  fit.source = SensorSpec::Source::Flow;
  fit.source_ref = "P1_TRANSFER";
  c.sensors.push_back(fit);

  c.actuators = {valve_spec("MV101"), pump_spec("P101"), pump_spec("P102"), valve_spec("MV201"),
                 pump_spec("P201"),   pump_spec("P202"), valve_spec("MV301"), valve_spec("MV302"),
                 pump_spec("P301"),   pump_spec("P302")};
  c.wiring = {
      {"plc1", "MV101", "MV101"}, {"plc1", "P101", "P101"}, {"plc1", "P102", "P102"},
      {"plc2", "MV201", "MV201"}, {"plc2", "P201", "P201"}, {"plc2", "P202", "P202"},
      {"plc3", "MV301", "MV301"}, {"plc3", "MV302", "MV302"}, {"plc3", "P301", "P301"},
      {"plc3", "P302", "P302"},
  };
  c.validate(mp.programs);
  return mp;
}

stlang::Program builtin_attacked_plc1() {
  std::string src = kPlc1;
  auto replace = [&](const std::string& from, const std::string& to) {
    const auto pos = src.find(from);
    if (pos == std::string::npos) throw Error("attack site not found: " + from);
    src.replace(pos, from.size(), to);
  };
  replace("_MV_101_SR.EnableIn := 1;", "_MV_101_SR.EnableIn := 0;");
  replace("_MV_101_SR.Set := HMI_LIT101.AL;", "_MV_101_SR.Set := 0;");
  return stlang::parse_program(src, "plc1");
}

std::vector<PlantInit> builtin_initial_states() {
  std::vector<PlantInit> inits;
  {
    PlantInit p;
    p.name = "nominal";
    p.levels = {{"T101", 500.0}, {"T301", 500.0}, {"T401", 500.0}};
    inits.push_back(p);
  }
  {
    PlantInit p;
    p.name = "empty";
    p.levels = {{"T101", 0.0}, {"T301", 0.0}, {"T401", 0.0}};
    inits.push_back(p);
  }
  {
    // Duty pumps marked faulty so the standby pumps carry the load.
    PlantInit p;
    p.name = "standby_pumps";
    p.levels = {{"T101", 300.0}, {"T301", 200.0}, {"T401", 200.0}};
    p.vars = {{"HMI_P101.Fault", stlang::Value::boolean(true)},
              {"HMI_P201.Fault", stlang::Value::boolean(true)},
              {"HMI_P301.Fault", stlang::Value::boolean(true)}};
    inits.push_back(p);
  }
  {
    // T301 above its HH mark: the overflow drain MV302 has to act.
    PlantInit p;
    p.name = "t301_overfull";
    p.levels = {{"T101", 700.0}, {"T301", 950.0}, {"T401", 900.0}};
    p.actuators = {{"MV101", valve::kOpen}};
    inits.push_back(p);
  }
  return inits;
}

}  // namespace plcattest::plant
