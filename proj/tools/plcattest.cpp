// plcattest: command line front-end for the attestation workbench.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "plcattest/experiment.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace plcattest;
using experiment::Workbench;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string program;
};

std::vector<std::string> g_inputs;

experiment::ExperimentConfig load(const Common& c) {
  experiment::ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = experiment::load_config(c.config);
    g_inputs.push_back(c.config);
    for (const auto& p : cfg.programs) g_inputs.push_back(p);
    if (!cfg.plant_config.empty()) g_inputs.push_back(cfg.plant_config);
  }
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::vector<const stlang::Program*> selected(const Workbench& wb, const Common& c) {
  std::vector<const stlang::Program*> out;
  for (const auto& p : wb.programs())
    if (c.program.empty() || p.name() == c.program) out.push_back(&p);
  if (out.empty()) throw Error("no program named '" + c.program + "'");
  return out;
}

void log(const std::string& msg) { std::cerr << "[plcattest] " << msg << '\n'; }

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::ofstream create(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

/// Cached pipeline stages: each artefact is loaded from the output
/// directory when present, otherwise computed and saved.
class Stages {
 public:
  Stages(const Workbench& wb, fs::path out) : wb_(wb), out_(std::move(out)) {}

  std::vector<std::string> important(const stlang::Program& p) {
    const fs::path f = out_ / "important" / (p.name() + ".json");
    if (fs::exists(f)) return json::parse(read_text(f)).at("important").get<std::vector<std::string>>();
    log("importance analysis for " + p.name());
    const auto scores = experiment::importance(wb_, p);
    const auto imp = experiment::important_inputs(scores);
    {
      auto os = create(out_ / "important" / (p.name() + ".scores.csv"));
      flow::write_scores_csv(os, scores);
    }
    create(f) << json{{"program", p.name()}, {"important", imp}}.dump(2) << '\n';
    return imp;
  }

  const dataset::Dataset& data(const stlang::Program& p) {
    auto it = data_.find(p.name());
    if (it != data_.end()) return it->second;
    const auto imp = important(p);
    log("collecting " + std::to_string(wb_.config().train_size()) + " samples for " + p.name());
    return data_.emplace(p.name(), experiment::training_set(wb_, p, imp, wb_.config().train_size())).first->second;
  }

  const learner::MlpModel& nn1() {
    if (nn1_) return *nn1_;
    const fs::path f = out_ / "models" / "nn1.json";
    if (fs::exists(f)) {
      nn1_ = learner::load_model(f.string());
    } else {
      log("training NN1");
      nn1_ = experiment::train_nn1(wb_);
      fs::create_directories(f.parent_path());
      learner::save_model(*nn1_, f.string());
    }
    return *nn1_;
  }

  learner::MlpModel nn2(const stlang::Program& p) {
    const fs::path f = out_ / "models" / (p.name() + ".nn2.json");
    if (fs::exists(f)) return learner::load_model(f.string());
    log("training NN2 for " + p.name());
    auto m = experiment::train_nn2(wb_, data(p));
    fs::create_directories(f.parent_path());
    learner::save_model(m, f.string());
    return m;
  }

  attester::AttestModel model(const stlang::Program& p) {
    return {important(p), wb_.plant().config.sensors, nn1(), nn2(p)};
  }

  std::vector<attack::Mutant> mutants(const stlang::Program& p) {
    log("searching effective mutants of " + p.name());
    auto ms = experiment::mutants_for(wb_, p);
    attack::write_mutant_bundle((out_ / "mutants" / p.name()).string(), ms);
    return ms;
  }

 private:
  const Workbench& wb_;
  fs::path out_;
  std::map<std::string, dataset::Dataset> data_;
  std::optional<learner::MlpModel> nn1_;
};

void finish(const Common& c, const std::string& cmd, const experiment::ExperimentConfig& cfg) {
  experiment::write_manifest(c.out, cmd, cfg, g_inputs);
}

void print_file(const fs::path& p) { std::cout << read_text(p); }

// --- subcommands -----------------------------------------------------------

int cmd_parse(const std::string& file, bool show) {
  const auto prog = stlang::load_program(file);
  if (show) {
    std::cout << stlang::unparse(prog);
    return 0;
  }
  std::cout << "program " << prog.name() << ": " << prog.decls().size() << " declarations, " << prog.body().size()
            << " statements, " << prog.blocks().size() << " SETD blocks\n";
  std::cout << "inputs:\n";
  for (const auto& i : stlang::list_inputs(prog))
    std::cout << "  " << i.ident << ' ' << stlang::to_string(i.cls) << ' ' << to_string(i.kind) << '\n';
  std::cout << "outputs:\n";
  for (auto id : prog.output_order()) std::cout << "  " << prog.decl(id).ident << ' ' << to_string(prog.decl(id).kind) << '\n';
  return 0;
}

int cmd_scan(const std::string& file, const std::vector<std::string>& sets, const std::vector<std::string>& latches) {
  const auto prog = stlang::load_program(file);
  auto in = stlang::default_inputs(prog);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected ident=value, got '" + s + "'");
    const std::string ident = s.substr(0, eq);
    const auto id = prog.find(ident);
    const auto pos = id ? prog.input_position(*id) : std::nullopt;
    if (!pos) throw Error("'" + ident + "' is not an input of " + prog.name());
    double x = 0.0;
    try {
      x = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("bad value in '" + s + "'");
    }
    const Value v = Value::from_numeric(prog.decl(*id).kind, x);
    if (!v.conforms(prog.decl(*id).kind)) throw Error("value out of range in '" + s + "'");
    in.values[*pos] = v;
  }
  auto lat = stlang::latches_from_input(prog, in);
  for (const auto& l : latches) {
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--latch", "expected block=0|1, got '" + l + "'");
    bool found = false;
    for (std::size_t b = 0; b < prog.blocks().size(); ++b) {
      if (prog.blocks()[b].name == l.substr(0, eq)) {
        lat[b] = l.substr(eq + 1) == "1";
        found = true;
      }
    }
    if (!found) throw Error("no SETD block '" + l.substr(0, eq) + "'");
  }
  const auto res = stlang::scan(prog, in, lat);
  for (std::size_t i = 0; i < prog.output_order().size(); ++i)
    std::cout << prog.decl(prog.output_order()[i]).ident << '=' << to_string(res.outputs.commands[i]) << '\n';
  for (std::size_t b = 0; b < prog.blocks().size(); ++b)
    std::cout << prog.blocks()[b].name << ".Out=" << (res.latches[b] ? 1 : 0) << '\n';
  return 0;
}

int cmd_important(const Common& c) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  for (const auto* p : selected(wb, c)) {
    fs::remove(fs::path(c.out) / "important" / (p->name() + ".json"));
    const auto imp = st.important(*p);
    std::cout << p->name() << ':';
    for (const auto& i : imp) std::cout << ' ' << i;
    std::cout << '\n';
  }
  finish(c, "important", cfg);
  return 0;
}

int cmd_gen(const Common& c, std::size_t size) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  for (const auto* p : selected(wb, c)) {
    const auto ds = experiment::training_set(wb, *p, st.important(*p), size);
    const fs::path base = fs::path(c.out) / "datasets" / p->name();
    {
      auto os = create(base.string() + ".csv");
      dataset::write_dataset_csv(os, ds);
    }
    create(base.string() + ".meta.json") << dataset::dataset_meta_json(ds) << '\n';
    std::cout << p->name() << ": " << ds.size() << " rows, " << ds.dim() << " features, label width "
              << ds.codec.width() << '\n';
  }
  finish(c, "gen", cfg);
  return 0;
}

int cmd_train(const Common& c) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  fs::remove(fs::path(c.out) / "models" / "nn1.json");
  st.nn1();
  for (const auto* p : selected(wb, c)) {
    fs::remove(fs::path(c.out) / "models" / (p->name() + ".nn2.json"));
    const auto m = st.nn2(*p);
    std::cout << p->name() << ": training accuracy " << learner::accuracy(m, st.data(*p)) << '\n';
  }
  finish(c, "train", cfg);
  return 0;
}

int cmd_xval(const Common& c) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  const auto seeds = wb.seeds();
  std::vector<experiment::SweepRow> rows;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto* p : selected(wb, c)) {
    auto r = experiment::cv_sweep(*p, st.data(*p), cfg, seeds.train, log);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    auto os = create(fs::path(c.out) / "xval.csv");
    experiment::write_sweep_csv(os, rows);
  }
  print_file(fs::path(c.out) / "xval.csv");
  log("sweep took " + std::to_string(static_cast<int>(secs)) + " s");
  finish(c, "xval", cfg);
  return 0;
}

int cmd_trace(const Common& c, const std::string& init_name, std::optional<double> seconds, bool attacked) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  const plant::PlantInit* init = nullptr;
  for (const auto& i : wb.initial_states())
    if (init_name.empty() || i.name == init_name) {
      init = &i;
      break;
    }
  if (!init) throw Error("no initial state named '" + init_name + "'");
  auto programs = wb.programs();
  if (attacked) {
    if (!cfg.programs.empty()) throw Error("--attacked applies to the built-in plant only");
    programs.front() = plant::builtin_attacked_plc1();
  }
  const auto tr = plant::generate_trace(programs, wb.plant().config, *init, seconds.value_or(cfg.trace_seconds), cfg.seed);
  const fs::path f = fs::path(c.out) / "traces" / (init->name + (attacked ? "_attacked" : "") + ".csv");
  {
    auto os = create(f);
    plant::write_trace_csv(os, tr);
  }
  std::cout << f.string() << ": " << tr.rows.size() << " rows\n";
  finish(c, "trace", cfg);
  return 0;
}

int cmd_validate(const Common& c, const std::string& trace_file, bool with_bias) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  plant::Trace tr;
  if (trace_file.empty()) {
    tr = wb.validation_trace();
  } else {
    std::ifstream is(trace_file);
    if (!is) throw IoError("cannot read " + trace_file);
    tr = plant::read_trace_csv(is, plant::make_schema(wb.programs(), wb.plant().config));
    g_inputs.push_back(trace_file);
  }
  std::vector<experiment::FalseAlarmRow> rows;
  for (const auto* p : selected(wb, c)) {
    const auto targets = attester::check_targets(*p, wb.plant().config, tr.schema);
    const auto model = st.model(*p);
    const auto res = attester::attest_trace(tr, targets, attester::model_predictor(*p, model, tr.schema), cfg.attester);
    const auto oracle = attester::attest_trace(tr, targets, attester::oracle_predictor(*p, tr.schema), cfg.attester);
    const fs::path dir = fs::path(c.out) / "validate";
    {
      auto os = create(dir / (p->name() + ".events.csv"));
      attester::write_events_csv(os, res.events);
    }
    create(dir / (p->name() + ".report.json")) << attester::report_json(res.report) << '\n';
    rows.push_back({p->name(), "nn", res.report});
    rows.push_back({p->name(), "oracle", oracle.report});
    if (with_bias && trace_file.empty()) {
      log("seeded bias case for " + p->name());
      const auto bc = experiment::make_bias_case(wb, *p, model, st.data(*p));
      for (const auto& [name, ds] : {std::pair{"biased", &bc.biased}, std::pair{"oversampled", &bc.fixed}}) {
        attester::AttestModel m = model;
        m.nn2 = experiment::train_nn2(wb, *ds);
        const auto r = attester::attest_trace(tr, targets, attester::model_predictor(*p, m, tr.schema), cfg.attester);
        rows.push_back({p->name(), name, r.report});
      }
    }
  }
  {
    auto os = create(fs::path(c.out) / "false_alarms.csv");
    experiment::write_false_alarm_csv(os, rows);
  }
  print_file(fs::path(c.out) / "false_alarms.csv");
  finish(c, "validate", cfg);
  return 0;
}

int cmd_mutate(const Common& c) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  for (const auto* p : selected(wb, c)) {
    const auto ms = st.mutants(*p);
    for (const auto& m : ms) std::cout << m.id << ' ' << attack::to_string(m.op.kind) << ' ' << m.op.site << '\n';
  }
  finish(c, "mutate", cfg);
  return 0;
}

int cmd_detect(const Common& c, bool oracle) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  std::vector<experiment::MutantRow> rows;
  for (const auto* p : selected(wb, c)) {
    const auto ms = st.mutants(*p);
    const auto predict = oracle ? attack::program_oracle(*p) : experiment::snapshot_predictor(*p, st.important(*p), st.nn2(*p));
    log("detecting mutants of " + p->name());
    auto r = experiment::detect_all(wb, *p, ms, predict);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  {
    auto os = create(fs::path(c.out) / "detection.csv");
    experiment::write_mutant_csv(os, rows);
  }
  print_file(fs::path(c.out) / "detection.csv");
  finish(c, "detect", cfg);
  return 0;
}

int cmd_adv(const Common& c) {
  const auto cfg = load(c);
  Workbench wb(cfg);
  Stages st(wb, c.out);
  const auto samples = experiment::adversarial_samples(wb);
  const auto& schema = wb.validation_trace().schema;
  std::vector<experiment::AdvRow> rows;
  for (const auto* p : selected(wb, c)) {
    log("adversarial search on " + p->name());
    for (const auto& r : attack::success_rates(*p, st.model(*p), schema, samples, cfg.adv)) rows.push_back({p->name(), r});
  }
  {
    auto os = create(fs::path(c.out) / "adversarial.csv");
    experiment::write_adv_rows_csv(os, rows);
  }
  print_file(fs::path(c.out) / "adversarial.csv");
  finish(c, "adv", cfg);
  return 0;
}

int cmd_report(const Common& c) {
  const auto cfg = load(c);
  if (!fs::is_directory(c.out)) throw IoError("output directory " + c.out + " does not exist");
  const std::string md = experiment::render_report(c.out);
  create(fs::path(c.out) / "report.md") << md;
  std::cout << md;
  finish(c, "report", cfg);
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool program = true) {
  sub->add_option("-c,--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "override the master seed");
  if (program) sub->add_option("-p,--program", c.program, "restrict to one program");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioural code-integrity attestation workbench for PLC programs"};
  app.require_subcommand(1);
  Common c;

  std::string file;
  bool show = false;
  auto* parse = app.add_subcommand("parse", "parse and type-check a .stx program");
  parse->add_option("file", file, "program")->required()->check(CLI::ExistingFile);
  parse->add_flag("--unparse", show, "print the canonical text");

  std::vector<std::string> sets, latches;
  auto* scan = app.add_subcommand("scan", "run one scan cycle");
  scan->add_option("file", file, "program")->required()->check(CLI::ExistingFile);
  scan->add_option("--set", sets, "input override ident=value");
  scan->add_option("--latch", latches, "latch state block=0|1");

  auto* important = app.add_subcommand("important", "score inputs and select the important ones");
  add_common(important, c);

  std::size_t size = 10000;
  auto* gen = app.add_subcommand("gen", "generate training datasets");
  add_common(gen, c);
  gen->add_option("-n,--size", size, "rows per program")->check(CLI::PositiveNumber)->capture_default_str();

  auto* train = app.add_subcommand("train", "train NN1 and the per-program NN2 models");
  add_common(train, c);

  auto* xval = app.add_subcommand("xval", "cross-validated accuracy over the size sweep");
  add_common(xval, c);

  std::string init_name;
  std::optional<double> seconds;
  bool attacked = false;
  auto* trace = app.add_subcommand("trace", "generate a plant trace");
  add_common(trace, c, false);
  trace->add_option("--init", init_name, "initial state name");
  trace->add_option("--seconds", seconds, "duration")->check(CLI::PositiveNumber);
  trace->add_flag("--attacked", attacked, "run the attacked stage-1 program");

  std::string trace_file;
  bool no_bias = false;
  auto* validate = app.add_subcommand("validate", "attest a trace and report false alarms");
  add_common(validate, c);
  validate->add_option("--trace", trace_file, "trace CSV (default: the normal validation trace)")->check(CLI::ExistingFile);
  validate->add_flag("--no-bias", no_bias, "skip the seeded bias case");

  auto* mutate = app.add_subcommand("mutate", "generate effective mutants");
  add_common(mutate, c);

  bool oracle = false;
  auto* detect = app.add_subcommand("detect", "detection rate of the model on mutant inputs");
  add_common(detect, c);
  detect->add_flag("--oracle", oracle, "use the parent program as the model");

  auto* adv = app.add_subcommand("adv", "adversarial noise success rates");
  add_common(adv, c);

  auto* report = app.add_subcommand("report", "render Markdown tables from an output directory");
  add_common(report, c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (parse->parsed()) return cmd_parse(file, show);
    if (scan->parsed()) return cmd_scan(file, sets, latches);
    if (important->parsed()) return cmd_important(c);
    if (gen->parsed()) return cmd_gen(c, size);
    if (train->parsed()) return cmd_train(c);
    if (xval->parsed()) return cmd_xval(c);
    if (trace->parsed()) return cmd_trace(c, init_name, seconds, attacked);
    if (validate->parsed()) return cmd_validate(c, trace_file, !no_bias);
    if (mutate->parsed()) return cmd_mutate(c);
    if (detect->parsed()) return cmd_detect(c, oracle);
    if (adv->parsed()) return cmd_adv(c);
    if (report->parsed()) return cmd_report(c);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
