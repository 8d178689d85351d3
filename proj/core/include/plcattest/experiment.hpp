#pragma once

// End-to-end experiment pipeline on a plant: importance analysis, training
// data, NN1/NN2 training, and the four evaluations (cross-validation sweep,
// false alarms on normal traces, mutant detection, adversarial noise).

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "plcattest/adversarial.hpp"
#include "plcattest/attester.hpp"
#include "plcattest/flow.hpp"
#include "plcattest/learner.hpp"
#include "plcattest/mutation.hpp"

namespace plcattest::experiment {

struct ExperimentConfig {
  std::uint64_t seed = 2024;
  /// Empty: the built-in plant. Otherwise .stx paths plus a plant JSON.
  std::vector<std::string> programs;
  std::string plant_config;
  /// Empty: the built-in initial states.
  std::vector<plant::PlantInit> initial_states;

  double trace_seconds = 14400.0;
  std::uint64_t importance_iterations = 20000;
  std::size_t importance_subset = 0;
  std::vector<std::size_t> sweep{10000, 20000, 30000, 40000, 50000, 60000, 70000, 80000, 90000};
  std::size_t folds = 5;
  learner::TrainConfig train{0.001, 0.9, 0.999, 1e-8, 10, 64, 1};
  std::size_t nn1_samples = 10000;
  learner::TrainConfig nn1_train = learner::TrainConfig::nn1();

  std::size_t mutants = 20;
  std::size_t trials_per_candidate = 5000;
  std::size_t effective_inputs = 1000;

  std::size_t bias_copies = 50;
  std::size_t fix_copies = 100;

  attack::AdvConfig adv;
  attester::AttesterConfig attester;

  /// Throws Error on counts < 1 or a sweep that is not strictly increasing.
  void validate() const;
  std::size_t train_size() const { return sweep.back(); }
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// Derived seeds, one per pipeline stage.
struct Seeds {
  std::uint64_t importance, dataset, train, nn1, mutants, adversarial;
};
Seeds derive_seeds(std::uint64_t master);

/// Plant, programs and normal traces for one configuration.
class Workbench {
 public:
  explicit Workbench(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  Seeds seeds() const { return derive_seeds(cfg_.seed); }
  const plant::MiniPlant& plant() const { return plant_; }
  const std::vector<stlang::Program>& programs() const { return plant_.programs; }
  const stlang::Program& program(const std::string& name) const;
  const std::vector<plant::PlantInit>& initial_states() const { return inits_; }

  /// One trace of trace_seconds per initial state, generated on first use.
  const std::vector<plant::Trace>& normal_traces() const;
  /// The first initial state's trace; used for false-alarm validation.
  const plant::Trace& validation_trace() const { return normal_traces().front(); }

 private:
  ExperimentConfig cfg_;
  plant::MiniPlant plant_;
  std::vector<plant::PlantInit> inits_;
  mutable std::vector<plant::Trace> traces_;
};

flow::ImportanceScores importance(const Workbench& wb, const stlang::Program& prog);
std::vector<std::string> important_inputs(const flow::ImportanceScores& scores);

dataset::Dataset training_set(const Workbench& wb, const stlang::Program& prog, const std::vector<std::string>& important,
                              std::size_t n);
/// The first n rows (collect draws sample i from its own stream, so this
/// equals collecting n rows directly).
dataset::Dataset prefix(const dataset::Dataset& ds, std::size_t n);

learner::MlpModel train_nn1(const Workbench& wb);
learner::MlpModel train_nn2(const Workbench& wb, const dataset::Dataset& ds);

/// NN2 feature vector of a bare input snapshot (alarms as given).
attack::LabelPredictor snapshot_predictor(const stlang::Program& prog, const std::vector<std::string>& important,
                                          const learner::MlpModel& nn2);

using Progress = std::function<void(const std::string&)>;

struct SweepRow {
  std::string program;
  std::size_t size = 0;
  double accuracy = 0.0;
};
std::vector<SweepRow> cv_sweep(const stlang::Program& prog, const dataset::Dataset& full, const ExperimentConfig& cfg,
                               std::uint64_t seed, const Progress& progress = {});

struct FalseAlarmRow {
  std::string program;
  std::string model;  // nn, oracle, biased, oversampled
  attester::FalseAlarmReport report;
};

/// Seeded bias: the most frequent feature vector of the validation trace
/// loses its natural rows and gains `bias_copies` rows with one actuator
/// flipped; the fix adds `fix_copies` correctly labelled copies.
struct BiasCase {
  std::vector<double> fv;
  dataset::Label correct = 0;
  dataset::Label wrong = 0;
  dataset::Dataset biased;
  dataset::Dataset fixed;
};
BiasCase make_bias_case(const Workbench& wb, const stlang::Program& prog, const attester::AttestModel& model,
                        const dataset::Dataset& ds);

struct MutantRow {
  std::string program;
  std::string mutant;
  std::string op;
  std::string site;
  std::size_t inputs = 0;
  std::size_t detected = 0;
};

std::vector<attack::Mutant> mutants_for(const Workbench& wb, const stlang::Program& prog);
std::vector<MutantRow> detect_all(const Workbench& wb, const stlang::Program& prog,
                                  const std::vector<attack::Mutant>& mutants, const attack::LabelPredictor& predict);

/// Rows sampled uniformly (with replacement) from all normal traces.
std::vector<plant::TraceRow> adversarial_samples(const Workbench& wb);

struct AdvRow {
  std::string program;
  attack::AdvResult result;
};

// CSV forms of the result tables, and the Markdown report built from them.
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_false_alarm_csv(std::ostream& os, const std::vector<FalseAlarmRow>& rows);
void write_mutant_csv(std::ostream& os, const std::vector<MutantRow>& rows);
void write_adv_rows_csv(std::ostream& os, const std::vector<AdvRow>& rows);

/// Markdown tables from whichever of xval.csv, false_alarms.csv,
/// detection.csv and adversarial.csv exist in `dir`.
std::string render_report(const std::string& dir);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(const std::string& bytes);

/// Writes `dir/manifest.json`: command, config, seeds, input files and every
/// file under `dir` with its size and hash.
void write_manifest(const std::string& dir, const std::string& command, const ExperimentConfig& cfg,
                    const std::vector<std::string>& inputs);

}  // namespace plcattest::experiment
