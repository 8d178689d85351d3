#pragma once

// Runtime attestation of a plant trace: predict each program's actuator
// commands from a trace row, then check the commanded states show up in the
// trace within a per-actuator window.

#include <deque>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "plcattest/dataset.hpp"
#include "plcattest/learner.hpp"
#include "plcattest/plant.hpp"

namespace plcattest::attester {

class MalformedTrace : public Error {
 public:
  using Error::Error;
};

class OutOfOrderRow : public Error {
 public:
  using Error::Error;
};

/// NN1 over the plant sensors feeding NN2 over one program's important
/// inputs.
struct AttestModel {
  std::vector<std::string> features;
  std::vector<plant::SensorSpec> sensors;  // NN1 input order
  learner::MlpModel nn1;
  learner::MlpModel nn2;
};

/// Builds NN2 feature vectors from trace rows: alarm features come from the
/// thresholded NN1 outputs, everything else straight from the row.
class FeatureBuilder {
 public:
  FeatureBuilder(const AttestModel& model, const plant::TraceSchema& schema);

  std::size_t dim() const { return cols_.size(); }
  std::vector<double> features(const plant::TraceRow& row) const;
  /// Same, with the NN1 alarm outputs supplied by the caller.
  std::vector<double> features(const plant::TraceRow& row, const std::vector<bool>& nn1_out) const;
  /// Readings in NN1 input order.
  std::vector<double> readings(const plant::TraceRow& row) const;
  /// NN1 output index driving feature j, or -1.
  int alarm_output(std::size_t j) const { return cols_[j].nn1_out; }

 private:
  struct Col {
    enum class Src { Nn1, Reading, Alarm, Actuator, Var } src;
    std::size_t index = 0;
    int nn1_out = -1;
  };
  const AttestModel* model_;
  std::vector<Col> cols_;
  std::vector<std::size_t> sensor_cols_;
};

/// Predicted output commands of one program for a trace row.
using RowPredictor = std::function<stlang::OutputSnapshot(const plant::TraceRow&)>;

RowPredictor model_predictor(const stlang::Program& prog, const AttestModel& model, const plant::TraceSchema& schema);

/// Runs the program itself on the row, latches taken from the row.
RowPredictor oracle_predictor(const stlang::Program& prog, const plant::TraceSchema& schema);

struct CheckWindow {
  int lo = 1;
  int hi = 1;
};

struct AttesterConfig {
  CheckWindow pump{1, 1};
  CheckWindow valve{7, 10};

  /// Throws Error on an empty or negative window.
  void validate() const;
  int max_window() const;
};

/// One program output and the trace column reporting its actuator.
struct CheckTarget {
  std::size_t output = 0;  // position in the program's output order
  std::string actuator;
  std::size_t column = 0;  // trace actuator column
  plant::ActuatorKind kind = plant::ActuatorKind::Pump;
};

std::vector<CheckTarget> check_targets(const stlang::Program& prog, const plant::PlantConfig& config,
                                       const plant::TraceSchema& schema);

struct AttestEvent {
  std::size_t t = 0;  // row index
  std::string actuator;
  std::int32_t predicted = 0;
  std::int32_t observed = 0;
  bool alarm = false;

  bool operator==(const AttestEvent&) const = default;
};

struct FalseAlarmReport {
  std::size_t total_checks = 0;
  std::size_t false_alarms = 0;

  double rate() const {
    return total_checks == 0 ? 0.0 : static_cast<double>(false_alarms) / static_cast<double>(total_checks);
  }
};

struct AttestResult {
  std::vector<AttestEvent> events;
  FalseAlarmReport report;
};

/// Rows t with t + max window inside the trace are checked. Pumps must show
/// the predicted state exactly `pump.lo..hi` rows later. A valve passes if
/// the predicted state appears in its window, or the valve reports
/// "changing" anywhere in it.
AttestResult attest_trace(const plant::Trace& trace, const std::vector<CheckTarget>& targets,
                          const RowPredictor& predict, const AttesterConfig& cfg);

/// Alarm at (t, actuator) if any member raises one there.
AttestResult ensemble_attest(const plant::Trace& trace, const std::vector<CheckTarget>& targets,
                             const std::vector<RowPredictor>& members, const AttesterConfig& cfg);

/// Online attestation: events for row t are emitted when row t + max window
/// arrives. Holds at most max window + 1 rows.
class AttestStream {
 public:
  AttestStream(std::vector<CheckTarget> targets, RowPredictor predict, AttesterConfig cfg);

  std::vector<AttestEvent> push(plant::TraceRow row);
  std::size_t buffered() const { return rows_.size(); }
  std::size_t max_buffered() const { return max_buffered_; }

 private:
  std::vector<CheckTarget> targets_;
  RowPredictor predict_;
  AttesterConfig cfg_;
  std::deque<plant::TraceRow> rows_;
  std::deque<stlang::OutputSnapshot> predictions_;
  std::size_t next_t_ = 0;
  std::size_t max_buffered_ = 0;
  bool started_ = false;
  double last_time_ = 0.0;
};

/// `t,actuator,predicted,observed,verdict`
void write_events_csv(std::ostream& os, const std::vector<AttestEvent>& events);
/// `{"totalChecks": .., "falseAlarms": .., "rate": ..}`
std::string report_json(const FalseAlarmReport& report);

}  // namespace plcattest::attester
