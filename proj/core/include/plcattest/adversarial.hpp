#pragma once

// Adversarial sensor noise against the attester: which NN1 alarms can a
// bounded perturbation change, and can some combination of them change
// NN2's prediction.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "plcattest/attester.hpp"

namespace plcattest::attack {

struct AdvConfig {
  /// Noise bounds as fractions of each sensor's range.
  std::vector<double> bounds{0.01, 0.05, 0.10};
  std::size_t sample_count = 20000;
  /// Random candidates per sample when the search space is too large.
  std::size_t budget = 10000;
  /// Search spaces up to this size are enumerated.
  std::size_t exhaustive_limit = 4096;
  int grid_points = 41;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Scenario { AnyChange, Targeted };

std::string_view to_string(Scenario s);

struct AdvResult {
  Scenario scenario = Scenario::AnyChange;
  double bound = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;

  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

/// Values an NN1 output can take under the noise bound.
struct Achievable {
  bool zero = false;
  bool one = false;

  bool flippable() const { return zero && one; }
};

/// Evaluates thresholded NN1 on `grid_points` evenly spaced perturbations
/// of each reading in [-bound, +bound] x range (endpoints included, clamped
/// to the sensor range). One entry per NN1 output.
std::vector<Achievable> flippable_alarms(const learner::MlpModel& nn1, std::span<const double> readings,
                                         const std::vector<plant::SensorSpec>& specs, double bound,
                                         int grid_points = 41);

/// Feature positions the attacker may toggle, on top of a baseline vector.
struct SearchSpace {
  std::vector<double> baseline;
  std::vector<std::size_t> free;

  /// 2^|free|, saturating.
  std::size_t size() const;
};

/// Alarm features whose NN1 output is flippable become free; actuator and
/// variable features stay fixed.
SearchSpace search_space(const attester::FeatureBuilder& fb, std::vector<double> baseline,
                         const std::vector<Achievable>& achievable);

struct SearchLimits {
  std::size_t budget = 10000;
  std::size_t exhaustive_limit = 4096;
  std::uint64_t seed = 1;
  /// Use random search even when enumeration is possible.
  bool force_random = false;
};

/// Whether some assignment of the free features moves NN2's argmax label
/// away from its baseline prediction.
bool adv_any_change(const learner::MlpModel& nn2, const SearchSpace& space, const SearchLimits& limits);

/// Whether some assignment makes NN2 predict exactly `target`.
bool adv_targeted(const learner::MlpModel& nn2, const SearchSpace& space, dataset::Label target,
                  const SearchLimits& limits);

/// A label equal to `base` except for one output field, which takes a
/// different valid value. Field and value are drawn from `rng`.
dataset::Label flip_one_actuator(const dataset::LabelCodec& codec, dataset::Label base, Rng& rng);

/// Both scenarios for every bound over the sampled rows: two results per
/// bound, any-change first.
std::vector<AdvResult> success_rates(const stlang::Program& prog, const attester::AttestModel& model,
                                     const plant::TraceSchema& schema, const std::vector<plant::TraceRow>& samples,
                                     const AdvConfig& cfg);

/// `scenario,bound,successes,trials,rate`
void write_adv_csv(std::ostream& os, const std::vector<AdvResult>& results);

}  // namespace plcattest::attack
