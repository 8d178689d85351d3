#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "csv.hpp"
#include "json.hpp"
#include "plcattest/experiment.hpp"

#ifndef PLCATTEST_VERSION
#define PLCATTEST_VERSION "dev"
#endif

namespace plcattest::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using stlang::Program;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw FormatError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_train(const json& j, const std::string& where, learner::TrainConfig& t) {
  check_keys(j, where, {"learningRate", "epochs", "batchSize", "samples"});
  get(j, "learningRate", t.learning_rate);
  get(j, "epochs", t.epochs);
  get(j, "batchSize", t.batch_size);
}

json train_json(const learner::TrainConfig& t) {
  return {{"learningRate", t.learning_rate}, {"epochs", t.epochs}, {"batchSize", t.batch_size}};
}

std::size_t program_index(const Workbench& wb, const Program& prog) {
  for (std::size_t i = 0; i < wb.programs().size(); ++i)
    if (wb.programs()[i].name() == prog.name()) return i;
  throw Error("program '" + prog.name() + "' is not part of the workbench");
}

std::vector<std::vector<std::string>> read_csv_file(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line))
    if (!line.empty()) rows.push_back(csv::split(line));
  return rows;
}

std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(trace_seconds > 0.0)) throw Error("traceSeconds must be positive");
  if (importance_iterations < 1) throw Error("importance iterations must be >= 1");
  if (sweep.empty()) throw Error("sweep needs at least one size");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (sweep[i] < 1) throw Error("sweep sizes must be >= 1");
    if (i > 0 && sweep[i] <= sweep[i - 1]) throw Error("sweep sizes must be strictly increasing");
  }
  if (folds < 2) throw Error("folds must be >= 2");
  if (nn1_samples < 1 || mutants < 1 || trials_per_candidate < 1 || effective_inputs < 1)
    throw Error("counts must be >= 1");
  if (bias_copies < 1 || fix_copies < 1) throw Error("bias copies must be >= 1");
  train.validate();
  nn1_train.validate();
  adv.validate();
  attester.validate();
  if (!programs.empty() && plant_config.empty()) throw Error("custom programs need a plantConfig");
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(j, "config", {"seed", "programs", "plantConfig", "initialStates", "traceSeconds", "importance", "sweep", "folds",
                             "train", "nn1", "mutation", "bias", "adversarial", "attester"});
    get(j, "seed", c.seed);
    get(j, "programs", c.programs);
    get(j, "plantConfig", c.plant_config);
    get(j, "traceSeconds", c.trace_seconds);
    get(j, "sweep", c.sweep);
    get(j, "folds", c.folds);
    if (j.contains("initialStates")) {
      for (const auto& s : j.at("initialStates")) {
        check_keys(s, "initialStates entry", {"name", "levels", "actuators", "vars"});
        plant::PlantInit p;
        get(s, "name", p.name);
        get(s, "levels", p.levels);
        get(s, "actuators", p.actuators);
        if (s.contains("vars")) {
          for (const auto& [k, v] : s.at("vars").items()) {
            if (v.is_boolean()) p.vars[k] = Value::boolean(v.get<bool>());
            else if (v.is_number_integer()) p.vars[k] = Value::enumeration(v.get<std::int32_t>());
            else p.vars[k] = Value::real(v.get<double>());
          }
        }
        c.initial_states.push_back(std::move(p));
      }
    }
    if (j.contains("importance")) {
      const auto& a = j.at("importance");
      check_keys(a, "importance", {"iterations", "subset"});
      get(a, "iterations", c.importance_iterations);
      get(a, "subset", c.importance_subset);
    }
    if (j.contains("train")) read_train(j.at("train"), "train", c.train);
    if (j.contains("nn1")) {
      read_train(j.at("nn1"), "nn1", c.nn1_train);
      get(j.at("nn1"), "samples", c.nn1_samples);
    }
    if (j.contains("mutation")) {
      const auto& m = j.at("mutation");
      check_keys(m, "mutation", {"count", "trialsPerCandidate", "effectiveInputs"});
      get(m, "count", c.mutants);
      get(m, "trialsPerCandidate", c.trials_per_candidate);
      get(m, "effectiveInputs", c.effective_inputs);
    }
    if (j.contains("bias")) {
      const auto& b = j.at("bias");
      check_keys(b, "bias", {"copies", "fixCopies"});
      get(b, "copies", c.bias_copies);
      get(b, "fixCopies", c.fix_copies);
    }
    if (j.contains("adversarial")) {
      const auto& a = j.at("adversarial");
      check_keys(a, "adversarial", {"bounds", "samples", "budget", "exhaustiveLimit", "gridPoints"});
      get(a, "bounds", c.adv.bounds);
      get(a, "samples", c.adv.sample_count);
      get(a, "budget", c.adv.budget);
      get(a, "exhaustiveLimit", c.adv.exhaustive_limit);
      get(a, "gridPoints", c.adv.grid_points);
    }
    if (j.contains("attester")) {
      const auto& a = j.at("attester");
      check_keys(a, "attester", {"pump", "valve"});
      auto window = [&](const char* key, attester::CheckWindow& w) {
        if (!a.contains(key)) return;
        const auto v = a.at(key).get<std::vector<int>>();
        if (v.size() != 2) throw FormatError(std::string("attester.") + key + " must be [lo, hi]");
        w = {v[0], v[1]};
      };
      window("pump", c.attester.pump);
      window("valve", c.attester.valve);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["programs"] = c.programs;
  j["plantConfig"] = c.plant_config;
  json inits = json::array();
  for (const auto& p : c.initial_states) {
    json vars = json::object();
    for (const auto& [k, v] : p.vars) {
      if (v.kind() == Kind::Bool) vars[k] = v.as_bool();
      else if (v.kind() == Kind::Enum) vars[k] = v.as_enum();
      else vars[k] = v.as_real();
    }
    inits.push_back({{"name", p.name}, {"levels", p.levels}, {"actuators", p.actuators}, {"vars", vars}});
  }
  j["initialStates"] = inits;
  j["traceSeconds"] = c.trace_seconds;
  j["importance"] = {{"iterations", c.importance_iterations}, {"subset", c.importance_subset}};
  j["sweep"] = c.sweep;
  j["folds"] = c.folds;
  j["train"] = train_json(c.train);
  j["nn1"] = train_json(c.nn1_train);
  j["nn1"]["samples"] = c.nn1_samples;
  j["mutation"] = {{"count", c.mutants}, {"trialsPerCandidate", c.trials_per_candidate},
                   {"effectiveInputs", c.effective_inputs}};
  j["bias"] = {{"copies", c.bias_copies}, {"fixCopies", c.fix_copies}};
  j["adversarial"] = {{"bounds", c.adv.bounds},
                      {"samples", c.adv.sample_count},
                      {"budget", c.adv.budget},
                      {"exhaustiveLimit", c.adv.exhaustive_limit},
                      {"gridPoints", c.adv.grid_points}};
  j["attester"] = {{"pump", {c.attester.pump.lo, c.attester.pump.hi}},
                   {"valve", {c.attester.valve.lo, c.attester.valve.hi}}};
  return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_text(path)); }

Seeds derive_seeds(std::uint64_t master) {
  return {mix_seed(master, 1), mix_seed(master, 2), mix_seed(master, 3),
          mix_seed(master, 4), mix_seed(master, 5), mix_seed(master, 6)};
}

Workbench::Workbench(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.programs.empty()) {
    plant_ = plant::builtin_miniplant();
  } else {
    for (const auto& p : cfg_.programs) plant_.programs.push_back(stlang::load_program(p));
    plant_.config = plant::plant_config_from_json(read_text(cfg_.plant_config));
    plant_.config.validate(plant_.programs);
  }
  if (!cfg_.initial_states.empty()) inits_ = cfg_.initial_states;
  else if (cfg_.programs.empty()) inits_ = plant::builtin_initial_states();
  else inits_ = {plant::PlantInit{"default", {}, {}, {}}};
  for (auto& init : inits_) {
    for (auto& [ident, v] : init.vars) {
      for (const auto& p : plant_.programs) {
        if (auto id = p.find(ident)) {
          v = Value::from_numeric(p.decl(*id).kind, v.numeric());
          break;
        }
      }
    }
  }
}

const Program& Workbench::program(const std::string& name) const {
  for (const auto& p : plant_.programs)
    if (p.name() == name) return p;
  throw Error("no program named '" + name + "'");
}

const std::vector<plant::Trace>& Workbench::normal_traces() const {
  if (traces_.empty()) {
    for (std::size_t i = 0; i < inits_.size(); ++i)
      traces_.push_back(plant::generate_trace(plant_.programs, plant_.config, inits_[i], cfg_.trace_seconds,
                                              mix_seed(cfg_.seed, 0x7472u + i)));
  }
  return traces_;
}

flow::ImportanceScores importance(const Workbench& wb, const Program& prog) {
  std::vector<stlang::InputSnapshot> rows;
  for (const auto& tr : wb.normal_traces()) {
    const plant::InputBinding bind(tr.schema, prog);
    for (const auto& r : tr.rows) rows.push_back(bind.snapshot(r));
  }
  flow::ScoreParams p;
  p.iterations = wb.config().importance_iterations;
  p.subset_size = wb.config().importance_subset;
  p.seed = mix_seed(wb.seeds().importance, program_index(wb, prog));
  return flow::score_inputs(prog, rows, p);
}

std::vector<std::string> important_inputs(const flow::ImportanceScores& scores) {
  return flow::select_important(scores, flow::SelectPolicy::nonzero());
}

dataset::Dataset training_set(const Workbench& wb, const Program& prog, const std::vector<std::string>& important,
                              std::size_t n) {
  return dataset::collect(prog, important, n, mix_seed(wb.seeds().dataset, program_index(wb, prog)));
}

dataset::Dataset prefix(const dataset::Dataset& ds, std::size_t n) {
  if (n > ds.size()) throw Error("prefix of " + std::to_string(n) + " rows from a dataset of " + std::to_string(ds.size()));
  dataset::Dataset out = ds;
  out.features.resize(n * ds.dim());
  out.labels.resize(n);
  return out;
}

learner::MlpModel train_nn1(const Workbench& wb) {
  learner::TrainConfig tc = wb.config().nn1_train;
  tc.seed = wb.seeds().nn1;
  return learner::train_nn1(wb.plant().config.sensors, wb.config().nn1_samples, tc);
}

learner::MlpModel train_nn2(const Workbench& wb, const dataset::Dataset& ds) {
  learner::TrainConfig tc = wb.config().train;
  tc.seed = wb.seeds().train;
  return learner::train(ds, learner::MlpSpec::nn2(ds.dim(), 1), tc);
}

attack::LabelPredictor snapshot_predictor(const Program& prog, const std::vector<std::string>& important,
                                          const learner::MlpModel& nn2) {
  auto slicer = std::make_shared<const dataset::FeatureSlicer>(prog, important);
  auto model = std::make_shared<const learner::MlpModel>(nn2);
  return [slicer, model](const stlang::InputSnapshot& in) { return learner::predict(*model, slicer->slice(in)).label; };
}

std::vector<SweepRow> cv_sweep(const Program& prog, const dataset::Dataset& full, const ExperimentConfig& cfg,
                               std::uint64_t seed, const Progress& progress) {
  std::vector<SweepRow> rows;
  learner::TrainConfig tc = cfg.train;
  tc.seed = seed;
  for (std::size_t n : cfg.sweep) {
    const auto m = learner::kfold_cv(prefix(full, n), learner::MlpSpec::nn2(full.dim(), 1), tc, cfg.folds);
    rows.push_back({prog.name(), n, m.accuracy});
    if (progress) progress(prog.name() + " n=" + std::to_string(n) + " accuracy=" + pct(m.accuracy));
  }
  return rows;
}

BiasCase make_bias_case(const Workbench& wb, const Program& prog, const attester::AttestModel& model,
                        const dataset::Dataset& ds) {
  const plant::Trace& tr = wb.validation_trace();
  const attester::FeatureBuilder fb(model, tr.schema);
  const plant::InputBinding bind(tr.schema, prog);
  const auto codec = dataset::LabelCodec::for_program(prog);
  std::map<std::vector<double>, std::pair<std::size_t, std::size_t>> freq;  // fv -> (count, first row)
  for (std::size_t i = 0; i < tr.rows.size(); ++i) {
    auto [it, fresh] = freq.try_emplace(fb.features(tr.rows[i]), 0, i);
    ++it->second.first;
  }
  auto best = freq.begin();
  for (auto it = freq.begin(); it != freq.end(); ++it)
    if (it->second.first > best->second.first) best = it;

  BiasCase bc;
  bc.fv = best->first;
  const auto in = bind.snapshot(tr.rows[best->second.second]);
  bc.correct = codec.encode(stlang::scan(prog, in, stlang::latches_from_input(prog, in)).outputs);
  Rng rng(mix_seed(wb.seeds().train, 0xb1a5u));
  bc.wrong = attack::flip_one_actuator(codec, bc.correct, rng);

  bc.biased = ds;
  bc.biased.features.clear();
  bc.biased.labels.clear();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.row(i);
    if (std::equal(r.begin(), r.end(), bc.fv.begin(), bc.fv.end())) continue;
    bc.biased.push(r, ds.labels[i]);
  }
  bc.biased = dataset::oversample(std::move(bc.biased), bc.fv, bc.wrong, wb.config().bias_copies);
  bc.fixed = dataset::oversample(bc.biased, bc.fv, bc.correct, wb.config().fix_copies);
  return bc;
}

std::vector<attack::Mutant> mutants_for(const Workbench& wb, const Program& prog) {
  attack::MutantSearch s;
  s.count = wb.config().mutants;
  s.trials_per_candidate = wb.config().trials_per_candidate;
  s.seed = mix_seed(wb.seeds().mutants, program_index(wb, prog));
  return attack::make_effective_mutants(prog, s);
}

std::vector<MutantRow> detect_all(const Workbench& wb, const Program& prog, const std::vector<attack::Mutant>& mutants,
                                  const attack::LabelPredictor& predict) {
  const auto codec = dataset::LabelCodec::for_program(prog);
  const std::uint64_t base = mix_seed(mix_seed(wb.seeds().mutants, program_index(wb, prog)), 0x1000u);
  std::vector<MutantRow> rows;
  for (std::size_t k = 0; k < mutants.size(); ++k) {
    const auto& m = mutants[k];
    const auto inputs = attack::effective_inputs(m, prog, wb.config().effective_inputs, mix_seed(base, k));
    const auto d = attack::detect_mutant(m, inputs, predict, codec);
    rows.push_back({prog.name(), m.id, std::string(attack::to_string(m.op.kind)), m.op.site, d.inputs, d.detected});
  }
  return rows;
}

std::vector<plant::TraceRow> adversarial_samples(const Workbench& wb) {
  std::vector<const plant::TraceRow*> pool;
  for (const auto& tr : wb.normal_traces())
    for (const auto& r : tr.rows) pool.push_back(&r);
  Rng rng(mix_seed(wb.seeds().adversarial, 0));
  std::vector<plant::TraceRow> out;
  out.reserve(wb.config().adv.sample_count);
  for (std::size_t i = 0; i < wb.config().adv.sample_count; ++i) out.push_back(*pool[rng.below(pool.size())]);
  return out;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "program,size,accuracy\n";
  for (const auto& r : rows) os << r.program << ',' << r.size << ',' << csv::fixed6(r.accuracy) << '\n';
}

void write_false_alarm_csv(std::ostream& os, const std::vector<FalseAlarmRow>& rows) {
  os << "program,model,totalChecks,falseAlarms,rate\n";
  for (const auto& r : rows)
    os << r.program << ',' << r.model << ',' << r.report.total_checks << ',' << r.report.false_alarms << ','
       << csv::fixed6(r.report.rate()) << '\n';
}

void write_mutant_csv(std::ostream& os, const std::vector<MutantRow>& rows) {
  os << "program,mutant,op,site,inputs,detected,rate\n";
  for (const auto& r : rows) {
    const double rate = r.inputs == 0 ? 0.0 : static_cast<double>(r.detected) / static_cast<double>(r.inputs);
    os << r.program << ',' << r.mutant << ',' << r.op << ',' << r.site << ',' << r.inputs << ',' << r.detected << ','
       << csv::fixed6(rate) << '\n';
  }
}

void write_adv_rows_csv(std::ostream& os, const std::vector<AdvRow>& rows) {
  os << "program,scenario,bound,successes,trials,rate\n";
  for (const auto& r : rows)
    os << r.program << ',' << attack::to_string(r.result.scenario) << ',' << csv::fixed6(r.result.bound) << ','
       << r.result.successes << ',' << r.result.trials << ',' << csv::fixed6(r.result.rate()) << '\n';
}

std::string render_report(const std::string& dir) {
  std::ostringstream md;
  md << "# Attestation experiment report\n";
  const fs::path d(dir);

  // Columns in first-seen order.
  auto ordered = [](const std::vector<std::vector<std::string>>& rows, std::size_t col) {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (std::find(out.begin(), out.end(), r.at(col)) == out.end()) out.push_back(r.at(col));
    return out;
  };
  auto table = [&](const std::vector<std::vector<std::string>>& rows, std::size_t row_col, std::size_t col_col,
                   std::size_t val_col, const std::string& corner, const std::function<bool(const std::vector<std::string>&)>& keep) {
    std::vector<std::vector<std::string>> kept;
    for (const auto& r : rows)
      if (keep(r)) kept.push_back(r);
    const auto rk = ordered(kept, row_col);
    const auto ck = ordered(kept, col_col);
    md << "\n| " << corner;
    for (const auto& c : ck) md << " | " << c;
    md << " |\n|---";
    for (std::size_t i = 0; i < ck.size(); ++i) md << "|---";
    md << "|\n";
    for (const auto& r : rk) {
      md << "| " << r;
      for (const auto& c : ck) {
        std::string v = "";
        for (const auto& x : kept)
          if (x[row_col] == r && x[col_col] == c) v = x[val_col];
        md << " | " << v;
      }
      md << " |\n";
    }
  };
  auto all = [](const std::vector<std::string>&) { return true; };

  if (fs::exists(d / "xval.csv")) {
    md << "\n## Cross-validation accuracy by training size\n";
    table(read_csv_file(d / "xval.csv"), 1, 0, 2, "size", all);
  }
  if (fs::exists(d / "false_alarms.csv")) {
    md << "\n## False alarm rates on the normal trace\n";
    table(read_csv_file(d / "false_alarms.csv"), 0, 1, 4, "program", all);
  }
  if (fs::exists(d / "detection.csv")) {
    const auto rows = read_csv_file(d / "detection.csv");
    md << "\n## Mutant detection\n\n| program | mutant | op | site | inputs | detected | rate |\n"
          "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      md << '|';
      for (const auto& c : r) md << ' ' << c << " |";
      md << '\n';
    }
    std::map<std::string, std::pair<std::size_t, std::size_t>> tot;
    for (const auto& r : rows) {
      tot[r.at(0)].first += std::stoul(r.at(4));
      tot[r.at(0)].second += std::stoul(r.at(5));
    }
    md << "\n| program | inputs | detected | rate |\n|---|---|---|---|\n";
    for (const auto& [p, t] : tot)
      md << "| " << p << " | " << t.first << " | " << t.second << " | "
         << pct(t.first == 0 ? 0.0 : static_cast<double>(t.second) / static_cast<double>(t.first)) << " |\n";
  }
  if (fs::exists(d / "adversarial.csv")) {
    const auto rows = read_csv_file(d / "adversarial.csv");
    md << "\n## Adversarial noise, any change\n";
    table(rows, 2, 0, 5, "bound", [](const auto& r) { return r.at(1) == "anyChange"; });
    md << "\n## Adversarial noise, targeted change\n";
    table(rows, 2, 0, 5, "bound", [](const auto& r) { return r.at(1) == "targeted"; });
  }
  return md.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text(path)); }

void write_manifest(const std::string& dir, const std::string& command, const ExperimentConfig& cfg,
                    const std::vector<std::string>& inputs) {
  json j;
  j["tool"] = "plcattest";
  j["version"] = PLCATTEST_VERSION;
  j["command"] = command;
  j["config"] = json::parse(config_to_json(cfg));
  const Seeds s = derive_seeds(cfg.seed);
  j["seeds"] = {{"master", cfg.seed}, {"importance", s.importance}, {"dataset", s.dataset}, {"train", s.train},
                {"nn1", s.nn1}, {"mutants", s.mutants}, {"adversarial", s.adversarial}};
  json in = json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  j["inputs"] = in;

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json out = json::array();
  for (const auto& f : files)
    out.push_back({{"path", fs::relative(f, dir).generic_string()},
                   {"bytes", fs::file_size(f)},
                   {"sha256", sha256_file(f.string())}});
  j["outputs"] = out;
  std::ofstream os(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!os) throw IoError("cannot write manifest in " + dir);
  os << j.dump(2) << '\n';
}

}  // namespace plcattest::experiment
