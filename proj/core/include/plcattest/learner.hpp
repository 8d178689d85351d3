#pragma once

// Multilayer perceptrons trained with Adam on cross-entropy: NN2 (softmax
// over encoded actuator labels) and NN1 (per-sensor sigmoid alarm maps,
// combined block-diagonally).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plcattest/dataset.hpp"
#include "plcattest/plant.hpp"

namespace plcattest::learner {

using dataset::Label;

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};
class TooFewRows : public Error {
 public:
  using Error::Error;
};

enum class OutputKind { Softmax, Sigmoid };

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;  // ReLU layers
  std::size_t output_dim = 1;
  OutputKind output = OutputKind::Softmax;

  static MlpSpec nn2(std::size_t input_dim, std::size_t classes) { return {input_dim, {100, 50}, classes, OutputKind::Softmax}; }
  void validate() const;
  bool operator==(const MlpSpec&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;

  /// Full-batch settings used for NN1 with its default 10000 readings.
  static TrainConfig nn1() { return {2.0, 0.9, 0.999, 1e-8, 3000, 10000, 1}; }
  void validate() const;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
};

struct MlpModel {
  MlpSpec spec;
  std::vector<DenseLayer> layers;
  /// Inputs are mapped to (x - shift) * scale before the first layer.
  Eigen::VectorXd in_shift;
  Eigen::VectorXd in_scale;
  /// Softmax class index -> label, ascending.
  std::vector<Label> classes;
  TrainMeta meta;

  /// Output activations (probabilities) for raw inputs, one column each.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

/// Seeded initial model: weights uniform in +-sqrt(6 / fan_in) for hidden
/// layers and +-sqrt(3 / fan_in) for the output layer, biases 0, identity
/// input transform.
MlpModel init_model(const MlpSpec& spec, std::uint64_t seed);

struct Prediction {
  Label label = 0;
  std::vector<double> probabilities;
};

/// Softmax: argmax (lowest label on ties). Sigmoid: label has bit i set when
/// output i >= 0.5, output 0 most significant.
Prediction predict(const MlpModel& model, std::span<const double> fv);
/// Labels for many feature vectors (columns of x).
std::vector<Label> predict_labels(const MlpModel& model, const Eigen::MatrixXd& x);

/// Features of a dataset as a dim x N matrix.
Eigen::MatrixXd feature_matrix(const dataset::Dataset& ds);

/// Softmax NN over the label universe (observed labels plus every
/// codec-valid label). Inputs are min-max scaled using the training rows.
MlpModel train(const dataset::Dataset& ds, const MlpSpec& spec, const TrainConfig& cfg);

/// Lower-level entry point: targets are class indices (softmax) or a
/// 0/1 matrix (sigmoid, out x N). The model's input transform is kept.
void fit(MlpModel& model, const Eigen::MatrixXd& x, const std::vector<int>* classes, const Eigen::MatrixXd* targets,
         const TrainConfig& cfg);

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> fold_accuracies;
  std::map<std::pair<Label, Label>, std::size_t> confusion;  // (actual, predicted)
};

double accuracy(const MlpModel& model, const dataset::Dataset& ds);

/// Seeded fold partition; each fold model uses seed mix_seed(cfg.seed, fold).
Metrics kfold_cv(const dataset::Dataset& ds, const MlpSpec& spec, const TrainConfig& cfg, std::size_t k = 5);

/// Loss on one sample and the analytic gradient of every parameter, in
/// layer order (w column-major, then b). A softmax target is one class
/// index; a sigmoid target has one 0/1 entry per output.
double loss_and_gradient(const MlpModel& model, std::span<const double> x, std::span<const double> target,
                         std::vector<double>& grad);

/// Max relative error between backprop and central differences (step 1e-5)
/// over every parameter of a random model of `spec` (random weights and
/// biases) on one sample.
double gradient_check(const MlpSpec& spec, std::uint64_t seed, std::span<const double> x,
                      std::span<const double> target);

/// NN1: one sigmoid network (no hidden layer, 4 outputs) per sensor trained
/// on n uniform readings labelled by alarms_from_reading, then combined
/// block-diagonally. Input i is sensor i, outputs 4i..4i+3 its (H,HH,L,LL).
MlpModel train_nn1(const std::vector<plant::SensorSpec>& sensors, std::size_t n, const TrainConfig& cfg);

/// Thresholded NN1 outputs for one reading vector.
std::vector<bool> nn1_alarms(const MlpModel& nn1, std::span<const double> readings);

std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace plcattest::learner
