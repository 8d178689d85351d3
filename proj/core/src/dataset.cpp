#include "plcattest/dataset.hpp"

#include <istream>
#include <map>
#include <ostream>

#include "csv.hpp"
#include "json.hpp"

namespace plcattest::dataset {

using stlang::InputSnapshot;
using stlang::OutputSnapshot;
using stlang::Program;
using stlang::VarClass;

namespace {

int field_width(const ValueKind& k) {
  if (k.kind == Kind::Bool) return 1;
  if (k.kind == Kind::Enum && k.cardinality == 3) return 2;
  if (k.kind == Kind::Enum) {
    int w = 1;
    while ((1 << w) < k.cardinality) ++w;
    return w;
  }
  throw Error("REAL outputs cannot be label-encoded");
}

bool is_valve(const ValueKind& k) { return k.kind == Kind::Enum && k.cardinality == 3; }

// valve ordinal (0 changing, 1 closed, 2 open) -> bits
constexpr Label kValveBits[3] = {0b11, 0b10, 0b01};

}  // namespace

LabelCodec::LabelCodec(std::vector<CodecField> fields) : fields_(std::move(fields)) {
  for (auto& f : fields_) {
    f.width = field_width(f.kind);
    width_ += f.width;
  }
  if (width_ > 16) throw Error("label codec wider than 16 bits");
}

LabelCodec LabelCodec::for_program(const Program& prog) {
  std::vector<CodecField> f;
  for (stlang::VarId id : prog.output_order()) f.push_back({prog.decl(id).ident, prog.decl(id).kind, 0});
  return LabelCodec(std::move(f));
}

Label LabelCodec::encode(const OutputSnapshot& out) const {
  if (out.commands.size() != fields_.size()) throw InvalidState("output snapshot does not match the codec layout");
  Label l = 0;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const CodecField& f = fields_[i];
    const Value& v = out.commands[i];
    if (!v.conforms(f.kind)) throw InvalidState("undefined state " + to_string(v) + " for " + f.ident);
    Label bits = 0;
    if (f.kind.kind == Kind::Bool) bits = v.as_bool() ? 1 : 0;
    else if (is_valve(f.kind)) bits = kValveBits[v.as_enum()];
    else bits = static_cast<Label>(v.as_enum());
    l = (l << f.width) | bits;
  }
  return l;
}

OutputSnapshot LabelCodec::decode(Label label) const {
  if (width_ < 32 && (label >> width_) != 0) throw InvalidState("label " + std::to_string(label) + " is too wide");
  OutputSnapshot out;
  out.commands.resize(fields_.size());
  int shift = 0;
  for (std::size_t i = fields_.size(); i-- > 0;) {
    const CodecField& f = fields_[i];
    const Label bits = (label >> shift) & ((Label{1} << f.width) - 1);
    shift += f.width;
    if (f.kind.kind == Kind::Bool) {
      out.commands[i] = Value::boolean(bits != 0);
    } else if (is_valve(f.kind)) {
      int v = -1;
      for (int s = 0; s < 3; ++s)
        if (kValveBits[s] == bits) v = s;
      if (v < 0) throw InvalidState("label " + std::to_string(label) + " has no valve state for " + f.ident);
      out.commands[i] = Value::enumeration(v);
    } else {
      if (static_cast<int>(bits) >= f.kind.cardinality)
        throw InvalidState("label " + std::to_string(label) + " has no state for " + f.ident);
      out.commands[i] = Value::enumeration(static_cast<std::int32_t>(bits));
    }
  }
  return out;
}

bool LabelCodec::valid(Label label) const {
  try {
    decode(label);
    return true;
  } catch (const InvalidState&) {
    return false;
  }
}

std::vector<Label> LabelCodec::valid_labels() const {
  std::vector<Label> out;
  for (Label l = 0; l < (Label{1} << width_); ++l)
    if (valid(l)) out.push_back(l);
  return out;
}

std::string LabelCodec::bits(Label label) const {
  std::string s;
  for (int i = width_ - 1; i >= 0; --i) s.push_back(((label >> i) & 1) ? '1' : '0');
  return s;
}

FeatureSlicer::FeatureSlicer(const Program& prog, const std::vector<std::string>& important) : idents_(important) {
  for (const auto& ident : important) {
    auto id = prog.find(ident);
    if (!id) throw Error(prog.name() + " has no variable '" + ident + "'");
    auto pos = prog.input_position(*id);
    if (!pos) throw Error("'" + ident + "' is not an input of " + prog.name());
    pos_.push_back(*pos);
    kinds_.push_back(prog.decl(*id).kind);
    classes_.push_back(prog.decl(*id).cls);
  }
}

void FeatureSlicer::slice(const InputSnapshot& in, double* out) const {
  for (std::size_t i = 0; i < pos_.size(); ++i) out[i] = in.values[pos_[i]].numeric();
}

std::vector<double> FeatureSlicer::slice(const InputSnapshot& in) const {
  std::vector<double> v(pos_.size());
  slice(in, v.data());
  return v;
}

InputSampler::InputSampler(const Program& prog) : n_(prog.input_order().size()) {
  const auto& order = prog.input_order();
  static const char* kSuffix[4] = {".AH", ".AHH", ".AL", ".ALL"};
  std::map<std::string, std::size_t> group_slot;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& d = prog.decl(order[i]);
    if (d.cls == VarClass::AlarmBit && d.kind.kind == Kind::Bool) {
      bool placed = false;
      for (int k = 0; k < 4 && !placed; ++k) {
        const std::string suf = kSuffix[k];
        if (d.ident.size() <= suf.size() || d.ident.compare(d.ident.size() - suf.size(), suf.size(), suf) != 0)
          continue;
        const std::string base = d.ident.substr(0, d.ident.size() - suf.size());
        auto [it, fresh] = group_slot.try_emplace(base, slots_.size());
        if (fresh) slots_.push_back(Slot{Slot::Tag::Alarms});
        slots_[it->second].alarm_pos[static_cast<std::size_t>(k)] = static_cast<int>(i);
        placed = true;
      }
      if (placed) continue;
    }
    Slot s{Slot::Tag::Bool};
    s.pos = i;
    if (d.kind.kind == Kind::Enum) {
      s.tag = Slot::Tag::Enum;
      s.card = d.kind.cardinality;
    } else if (d.kind.kind == Kind::Real) {
      s.tag = Slot::Tag::Real;
      s.lo = d.range_lo;
      s.hi = d.range_hi;
    }
    slots_.push_back(s);
  }
}

InputSnapshot InputSampler::draw(Rng& rng) const {
  InputSnapshot s;
  s.values.resize(n_);
  for (const Slot& slot : slots_) {
    switch (slot.tag) {
      case Slot::Tag::Alarms: {
        const auto combo = rng.below(9);
        const auto high = combo / 3;  // 0 none, 1 H, 2 H+HH
        const auto low = combo % 3;   // 0 none, 1 L, 2 L+LL
        const bool bits[4] = {high >= 1, high == 2, low >= 1, low == 2};
        for (std::size_t k = 0; k < 4; ++k)
          if (slot.alarm_pos[k] >= 0) s.values[static_cast<std::size_t>(slot.alarm_pos[k])] = Value::boolean(bits[k]);
        break;
      }
      case Slot::Tag::Bool: s.values[slot.pos] = Value::boolean(rng.coin()); break;
      case Slot::Tag::Enum:
        s.values[slot.pos] = Value::enumeration(static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(slot.card))));
        break;
      case Slot::Tag::Real: s.values[slot.pos] = Value::real(rng.uniform(slot.lo, slot.hi)); break;
    }
  }
  return s;
}

InputSnapshot random_inputs(const Program& prog, Rng& rng) { return InputSampler(prog).draw(rng); }

void Dataset::push(std::span<const double> fv, Label label) {
  if (fv.size() != dim()) throw Error("feature vector arity does not match dataset");
  features.insert(features.end(), fv.begin(), fv.end());
  labels.push_back(label);
}

Dataset collect(const Program& prog, const std::vector<std::string>& important, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error("collect needs n >= 1");
  const FeatureSlicer slicer(prog, important);
  Dataset ds;
  ds.input_spec = slicer.idents();
  ds.input_kinds = slicer.kinds();
  ds.codec = LabelCodec::for_program(prog);
  ds.seed = seed;
  ds.features.resize(n * slicer.dim());
  ds.labels.resize(n);
  const InputSampler sampler(prog);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    const InputSnapshot in = sampler.draw(rng);
    const auto res = stlang::scan(prog, in, stlang::latches_from_input(prog, in));
    slicer.slice(in, ds.features.data() + i * slicer.dim());
    ds.labels[i] = ds.codec.encode(res.outputs);
  }
  return ds;
}

Dataset oversample(Dataset ds, std::span<const double> fv, Label label, std::size_t copies) {
  if (fv.size() != ds.dim()) throw Error("oversampled row arity does not match dataset");
  for (std::size_t c = 0; c < copies; ++c) ds.push(fv, label);
  return ds;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t j = 0; j < ds.dim(); ++j) os << 'f' << j << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      if (ds.input_kinds[j].discrete()) os << static_cast<long long>(r[j]);
      else os << csv::fixed6(r[j]);
      os << ',';
    }
    os << ds.labels[i] << '\n';
  }
}

namespace {

nlohmann::json kind_json(const ValueKind& k) {
  switch (k.kind) {
    case Kind::Bool: return "BOOL";
    case Kind::Enum: return "ENUM(" + std::to_string(k.cardinality) + ")";
    case Kind::Real: return "REAL";
  }
  return "";
}

ValueKind kind_from_json(const std::string& s) {
  if (s == "BOOL") return ValueKind::boolean();
  if (s == "REAL") return ValueKind::real();
  if (s.rfind("ENUM(", 0) == 0 && s.back() == ')') return ValueKind::enumeration(std::stoi(s.substr(5)));
  throw FormatError("unknown value kind '" + s + "'");
}

}  // namespace

std::string dataset_meta_json(const Dataset& ds) {
  nlohmann::json j;
  j["format"] = "plcattest-dataset";
  j["version"] = 1;
  j["seed"] = ds.seed;
  j["rows"] = ds.size();
  j["inputs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.dim(); ++i)
    j["inputs"].push_back({{"ident", ds.input_spec[i]}, {"kind", kind_json(ds.input_kinds[i])}});
  j["codec"] = nlohmann::json::array();
  for (const auto& f : ds.codec.fields())
    j["codec"].push_back({{"ident", f.ident}, {"kind", kind_json(f.kind)}, {"width", f.width}});
  return j.dump(2) + "\n";
}

Dataset read_dataset(std::istream& is, const std::string& meta_json) {
  Dataset ds;
  try {
    const auto j = nlohmann::json::parse(meta_json);
    if (j.at("format") != "plcattest-dataset") throw FormatError("not a dataset sidecar");
    if (j.at("version") != 1) throw FormatError("unsupported dataset version " + j.at("version").dump());
    ds.seed = j.at("seed");
    for (const auto& in : j.at("inputs")) {
      ds.input_spec.push_back(in.at("ident"));
      ds.input_kinds.push_back(kind_from_json(in.at("kind")));
    }
    std::vector<CodecField> fields;
    for (const auto& f : j.at("codec")) fields.push_back({f.at("ident"), kind_from_json(f.at("kind")), 0});
    ds.codec = LabelCodec(std::move(fields));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset sidecar: ") + e.what());
  }
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset CSV is empty");
  if (csv::split(line).size() != ds.dim() + 1) throw FormatError("dataset CSV header does not match sidecar");
  std::size_t lineno = 1;
  std::vector<double> fv(ds.dim());
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != ds.dim() + 1) throw FormatError("dataset CSV line " + std::to_string(lineno) + ": wrong arity");
    for (std::size_t k = 0; k < ds.dim(); ++k) fv[k] = csv::parse_double(cells[k], lineno);
    const double l = csv::parse_double(cells.back(), lineno);
    if (l < 0 || l != static_cast<double>(static_cast<Label>(l)) || !ds.codec.valid(static_cast<Label>(l)))
      throw FormatError("dataset CSV line " + std::to_string(lineno) + ": invalid label");
    ds.push(fv, static_cast<Label>(l));
  }
  return ds;
}

}  // namespace plcattest::dataset
