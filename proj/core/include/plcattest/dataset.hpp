#pragma once

// Training data for the attestation models: the actuator-command label codec,
// random input generation and the collect loop.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "plcattest/rng.hpp"
#include "plcattest/stlang.hpp"

namespace plcattest::dataset {

using Label = std::uint32_t;

class InvalidState : public Error {
 public:
  using Error::Error;
};

/// Bit layout of one output in a label.
struct CodecField {
  std::string ident;
  ValueKind kind;
  int width = 1;

  bool operator==(const CodecField&) const = default;
};

/// Packs every output command into one integer, first field most
/// significant. BOOL outputs take one bit. ENUM(3) outputs are valves:
/// closed = 10, open = 01, changing = 11 (00 is unused). Other enums use
/// their plain binary ordinal.
class LabelCodec {
 public:
  LabelCodec() = default;
  explicit LabelCodec(std::vector<CodecField> fields);

  /// One field per output command, in output order.
  static LabelCodec for_program(const stlang::Program& prog);

  const std::vector<CodecField>& fields() const { return fields_; }
  int width() const { return width_; }

  Label encode(const stlang::OutputSnapshot& out) const;
  stlang::OutputSnapshot decode(Label label) const;
  bool valid(Label label) const;
  /// Every valid label, ascending.
  std::vector<Label> valid_labels() const;

  /// Label as a bit string of width() characters.
  std::string bits(Label label) const;

  bool operator==(const LabelCodec&) const = default;

 private:
  std::vector<CodecField> fields_;
  int width_ = 0;
};

/// Positions of selected inputs within a program's input order.
class FeatureSlicer {
 public:
  FeatureSlicer(const stlang::Program& prog, const std::vector<std::string>& important);

  const std::vector<std::string>& idents() const { return idents_; }
  const std::vector<ValueKind>& kinds() const { return kinds_; }
  const std::vector<stlang::VarClass>& classes() const { return classes_; }
  std::size_t dim() const { return pos_.size(); }

  void slice(const stlang::InputSnapshot& in, double* out) const;
  std::vector<double> slice(const stlang::InputSnapshot& in) const;

 private:
  std::vector<std::string> idents_;
  std::vector<ValueKind> kinds_;
  std::vector<stlang::VarClass> classes_;
  std::vector<std::size_t> pos_;
};

/// Uniform draw of a full input snapshot. Bools and enums are uniform over
/// their domain, reals over their declared range. The AH/AHH/AL/ALL bits of
/// one sensor are drawn jointly from the 9 combinations with HH => H and
/// LL => L.
stlang::InputSnapshot random_inputs(const stlang::Program& prog, Rng& rng);

/// random_inputs with the per-program layout work done once.
class InputSampler {
 public:
  explicit InputSampler(const stlang::Program& prog);
  stlang::InputSnapshot draw(Rng& rng) const;

 private:
  struct Slot {
    enum class Tag { Alarms, Bool, Enum, Real } tag;
    std::array<int, 4> alarm_pos{-1, -1, -1, -1};  // H, HH, L, LL
    std::size_t pos = 0;
    int card = 0;
    double lo = 0.0, hi = 0.0;
  };
  std::size_t n_ = 0;
  std::vector<Slot> slots_;
};

struct Dataset {
  std::vector<std::string> input_spec;
  std::vector<ValueKind> input_kinds;
  LabelCodec codec;
  std::uint64_t seed = 0;
  /// Row-major, input_spec.size() values per row.
  std::vector<double> features;
  std::vector<Label> labels;

  std::size_t dim() const { return input_spec.size(); }
  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim(), dim()}; }
  void push(std::span<const double> fv, Label label);

  bool operator==(const Dataset&) const = default;
};

/// Collection loop: n random inputs, one scan each (latches from
/// the input's latch sources), label = encoded outputs. Sample i uses its
/// own stream derived from (seed, i).
Dataset collect(const stlang::Program& prog, const std::vector<std::string>& important, std::size_t n,
                std::uint64_t seed);

/// Appends `copies` identical rows.
Dataset oversample(Dataset ds, std::span<const double> fv, Label label, std::size_t copies);

/// `f0..f{k-1},label`, plus a JSON sidecar with input spec and codec.
void write_dataset_csv(std::ostream& os, const Dataset& ds);
std::string dataset_meta_json(const Dataset& ds);
Dataset read_dataset(std::istream& csv, const std::string& meta_json);

}  // namespace plcattest::dataset
