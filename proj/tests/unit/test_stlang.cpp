#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "plcattest/plant.hpp"
#include "plcattest/stlang.hpp"
#include "progen.hpp"

using namespace plcattest;
using namespace plcattest::stlang;
using plcattest::testutil::output_of;
using plcattest::testutil::set_input;

namespace {

std::string data_file(const std::string& name) { return std::string(PLCATTEST_TEST_DATA) + "/" + name; }

int count_tag(const std::vector<Stmt>& body, Stmt::Tag tag) {
  int n = 0;
  for (const auto& s : body) {
    if (s.tag == tag) ++n;
    n += count_tag(s.then_body, tag) + count_tag(s.else_body, tag);
    for (const auto& arm : s.arms) n += count_tag(arm.body, tag);
  }
  return n;
}

const std::string kTiny = R"(VAR
  x : BOOL := 0; CLASS OutputCommand;
  y : BOOL := 0; CLASS AlarmBit;
END_VAR
BODY
END_BODY
)";

}  // namespace

TEST(Parse, InletStructure) {
  const Program p = load_program(data_file("inlet.stx"));
  EXPECT_EQ(p.name(), "inlet");
  EXPECT_EQ(count_tag(p.body(), Stmt::Tag::SetD), 2);
  EXPECT_EQ(count_tag(p.body(), Stmt::Tag::If), 1);
  ASSERT_EQ(p.blocks().size(), 2u);
  EXPECT_EQ(p.blocks()[0].name, "_MV_101_SR");
  EXPECT_EQ(p.blocks()[1].name, "_P_RAW_WATER_DUTY_SR");
}

TEST(Parse, EmptyBody) {
  const Program p = parse_program(kTiny);
  EXPECT_TRUE(p.body().empty());
  EXPECT_EQ(p.name(), "main");
}

TEST(Parse, BoolRealMismatchIsTypeError) {
  const std::string text = R"(VAR
  x : BOOL := 0; CLASS OutputCommand;
  y : BOOL := 0; CLASS AlarmBit;
END_VAR
BODY
  x := y AND 1.5;
END_BODY
)";
  EXPECT_THROW(parse_program(text), TypeError);
}

TEST(Parse, UndeclaredIdentifier) {
  const std::string text = R"(VAR
  x : BOOL := 0; CLASS OutputCommand;
END_VAR
BODY
  x := nope;
END_BODY
)";
  EXPECT_THROW(parse_program(text), Error);
}

TEST(Parse, ErrorPosition) {
  const std::string text = "VAR\n  x : BOOL := 0; CLASS OutputCommand;\nEND_VAR\nBODY\n  x := ;\nEND_BODY\n";
  try {
    parse_program(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_GT(e.col(), 1);
  }
}

TEST(Parse, ScannerCannotWriteAlarm) {
  const std::string text = R"(VAR
  x : BOOL := 0; CLASS OutputCommand;
  y : BOOL := 0; CLASS AlarmBit;
END_VAR
BODY
  y := 1;
END_BODY
)";
  EXPECT_THROW(parse_program(text), Error);
}

TEST(Scan, InletLowAlarmOpensValve) {
  const Program p = load_program(data_file("inlet.stx"));
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "HMI_LIT101.AL", Value::boolean(true));
  const auto r = scan(p, in, initial_latches(p));
  EXPECT_TRUE(output_of(p, r.outputs, "_MV101_AutoInp").as_bool());
  EXPECT_EQ(r.latches, (LatchState{true, false}));
}

TEST(Scan, InletHoldsPreviousOut) {
  const Program p = load_program(data_file("inlet.stx"));
  const InputSnapshot in = default_inputs(p);
  const auto held = scan(p, in, LatchState{true, false});
  EXPECT_TRUE(output_of(p, held.outputs, "_MV101_AutoInp").as_bool());
  const auto idle = scan(p, in, LatchState{false, false});
  EXPECT_FALSE(output_of(p, idle.outputs, "_MV101_AutoInp").as_bool());
}

TEST(Scan, InletAttackedStaysClosed) {
  const Program p = load_program(data_file("inlet_attacked.stx"));
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "HMI_LIT101.AL", Value::boolean(true));
  const auto r = scan(p, in, initial_latches(p));
  EXPECT_FALSE(output_of(p, r.outputs, "_MV101_AutoInp").as_bool());
}

TEST(Scan, InletPumpDuty) {
  const Program p = load_program(data_file("inlet.stx"));
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "HMI_MV201.Status", Value::enumeration(2));
  set_input(p, in, "HMI_LIT301.AL", Value::boolean(true));
  EXPECT_TRUE(output_of(p, scan(p, in, initial_latches(p)).outputs, "_P_RAW_WATER_DUTY_AutoInp").as_bool());
  set_input(p, in, "HMI_MV201.Status", Value::enumeration(1));
  EXPECT_FALSE(output_of(p, scan(p, in, LatchState{false, true}).outputs, "_P_RAW_WATER_DUTY_AutoInp").as_bool());
}

TEST(Scan, ShutdownResetsState) {
  const Program p = load_program(data_file("inlet.stx"));
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "HMI_P1_SHUTDOWN", Value::boolean(true));
  const auto r = scan(p, in, initial_latches(p));
  EXPECT_EQ(r.env[static_cast<std::size_t>(*p.find("HMI_P1_STATE"))], Value::enumeration(3));
  EXPECT_EQ(r.env[static_cast<std::size_t>(*p.find("HMI_P1_SHUTDOWN"))], Value::boolean(false));
}

TEST(Scan, SetdTruthTable) {
  const std::string text = R"(VAR
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
)";
  const Program p = parse_program(text);
  for (int bits = 0; bits < 16; ++bits) {
    const bool en = bits & 8, s = bits & 4, r = bits & 2, prev = bits & 1;
    bool expect = prev;
    if (en && s) expect = true;
    else if (en && r) expect = false;
    InputSnapshot in = default_inputs(p);
    set_input(p, in, "en", Value::boolean(en));
    set_input(p, in, "s", Value::boolean(s));
    set_input(p, in, "r", Value::boolean(r));
    const auto res = scan(p, in, LatchState{prev});
    EXPECT_EQ(res.outputs.commands[0].as_bool(), expect) << "en=" << en << " s=" << s << " r=" << r << " prev=" << prev;
    EXPECT_EQ(res.latches[0], expect);
  }
}

TEST(Scan, EnumOutOfRange) {
  const std::string text = R"(VAR
  e : ENUM(3) := 0; CLASS OutputCommand;
  k : ENUM(4) := 0; CLASS StateVar;
END_VAR
BODY
  e := k;
END_BODY
)";
  const Program p = parse_program(text);
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "k", Value::enumeration(2));
  EXPECT_EQ(scan(p, in, initial_latches(p)).outputs.commands[0], Value::enumeration(2));
  set_input(p, in, "k", Value::enumeration(3));
  EXPECT_THROW(scan(p, in, initial_latches(p)), EvalError);
}

TEST(Scan, Deterministic) {
  testutil::ProgramGen gen(7);
  for (int i = 0; i < 50; ++i) {
    const Program p = parse_program(gen.next());
    const InputSnapshot in = default_inputs(p);
    const auto a = scan(p, in, initial_latches(p));
    const auto b = scan(p, in, initial_latches(p));
    EXPECT_EQ(a.outputs, b.outputs);
    EXPECT_EQ(a.latches, b.latches);
  }
}

TEST(ListInputs, BuiltinPlc1) {
  const auto mp = plant::builtin_miniplant();
  const auto inputs = list_inputs(mp.programs[0]);
  auto find = [&](const std::string& id) -> const InputInfo* {
    for (const auto& i : inputs)
      if (i.ident == id) return &i;
    return nullptr;
  };
  ASSERT_NE(find("HMI_LIT101.AL"), nullptr);
  EXPECT_EQ(find("HMI_LIT101.AL")->cls, VarClass::AlarmBit);
  ASSERT_NE(find("HMI_MV201.Status"), nullptr);
  EXPECT_EQ(find("HMI_MV201.Status")->cls, VarClass::ActuatorState);
  ASSERT_NE(find("HMI_P1_SHUTDOWN"), nullptr);
  EXPECT_EQ(find("HMI_P1_SHUTDOWN")->cls, VarClass::StateVar);

  std::size_t n = 0;
  for (const auto& d : mp.programs[0].decls()) n += is_input_class(d.cls);
  EXPECT_EQ(inputs.size(), n);
}

TEST(ListInputs, NoInputs) {
  const std::string text = "VAR\n  x : BOOL := 0; CLASS OutputCommand;\nEND_VAR\nBODY\n  x := 1;\nEND_BODY\n";
  EXPECT_TRUE(list_inputs(parse_program(text)).empty());
}

TEST(Unparse, InletRoundTrip) {
  const Program p = load_program(data_file("inlet.stx"));
  EXPECT_EQ(parse_program(unparse(p), "x"), p);
}

TEST(Unparse, CommentsDropped) {
  std::string with = kTiny;
  with.insert(with.find("END_BODY"), "  (* nothing here *)\n");
  EXPECT_EQ(unparse(parse_program(kTiny)), unparse(parse_program(with)));
}

TEST(Unparse, GeneratedRoundTrip) {
  testutil::ProgramGen gen(2024);
  for (int i = 0; i < 1000; ++i) {
    const std::string text = gen.next();
    const Program p = parse_program(text);
    const std::string u = unparse(p);
    const Program q = parse_program(u);
    ASSERT_EQ(q, p) << text;
    ASSERT_EQ(unparse(q), u);
  }
}

TEST(Unparse, BuiltinRoundTrip) {
  for (const auto& p : plant::builtin_miniplant().programs) EXPECT_EQ(parse_program(unparse(p)), p);
}

TEST(Program, InputsArePure) {
  testutil::ProgramGen gen(99);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Program p = parse_program(gen.next());
    InputSnapshot in = default_inputs(p);
    in.values[0] = Value::boolean(rng.coin());
    const auto r = scan(p, in, initial_latches(p));
    for (std::size_t k = 0; k < p.input_order().size(); ++k) {
      const auto cls = p.decl(p.input_order()[k]).cls;
      if (cls == VarClass::SensorReading || cls == VarClass::AlarmBit)
        EXPECT_EQ(r.env[static_cast<std::size_t>(p.input_order()[k])], in.values[k]);
    }
  }
}

TEST(Program, LatchFromInput) {
  const Program p = plant::builtin_miniplant().programs[0];
  InputSnapshot in = default_inputs(p);
  set_input(p, in, "_MV101_AutoInp", Value::boolean(true));
  EXPECT_EQ(latches_from_input(p, in), (LatchState{true, false}));
}

TEST(Value, FromNumericRoundTrip) {
  EXPECT_EQ(Value::from_numeric(ValueKind::enumeration(3), 2.0), Value::enumeration(2));
  EXPECT_EQ(Value::from_numeric(ValueKind::boolean(), 1.0), Value::boolean(true));
  EXPECT_DOUBLE_EQ(Value::from_numeric(ValueKind::real(), 4.5).as_real(), 4.5);
  EXPECT_TRUE(Value::enumeration(2).conforms(ValueKind::enumeration(3)));
  EXPECT_FALSE(Value::enumeration(3).conforms(ValueKind::enumeration(3)));
}
