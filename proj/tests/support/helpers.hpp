#pragma once

#include <string>

#include "plcattest/stlang.hpp"

namespace plcattest::testutil {

inline void set_input(const stlang::Program& prog, stlang::InputSnapshot& in, const std::string& ident, Value v) {
  const auto id = prog.find(ident);
  if (!id) throw Error("no such variable: " + ident);
  in.values.at(*prog.input_position(*id)) = v;
}

inline Value output_of(const stlang::Program& prog, const stlang::OutputSnapshot& out, const std::string& ident) {
  const auto& order = prog.output_order();
  for (std::size_t i = 0; i < order.size(); ++i)
    if (prog.decl(order[i]).ident == ident) return out.commands.at(i);
  throw Error("no such output: " + ident);
}

}  // namespace plcattest::testutil
