#include <algorithm>
#include <numeric>
#include <set>

#include "plcattest/learner.hpp"
#include "plcattest/rng.hpp"

namespace plcattest::learner {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd feature_matrix(const dataset::Dataset& ds) {
  return Eigen::Map<const MatrixXd>(ds.features.data(), static_cast<Eigen::Index>(ds.dim()),
                                    static_cast<Eigen::Index>(ds.size()));
}

namespace {

MlpModel train_on(const dataset::Dataset& ds, const std::vector<std::size_t>& rows, const MlpSpec& spec,
                  const TrainConfig& cfg) {
  if (ds.dim() != spec.input_dim)
    throw DimensionMismatch("dataset has " + std::to_string(ds.dim()) + " features, spec expects " +
                            std::to_string(spec.input_dim));
  if (spec.output != OutputKind::Softmax) throw DimensionMismatch("dataset training needs a softmax spec");
  if (rows.empty()) throw Error("cannot train on an empty dataset");

  std::set<Label> seen;
  MatrixXd x(static_cast<Eigen::Index>(ds.dim()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto r = ds.row(rows[j]);
    for (std::size_t i = 0; i < r.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i];
    seen.insert(ds.labels[rows[j]]);
  }
  std::set<Label> universe(seen);
  for (Label l : ds.codec.valid_labels()) universe.insert(l);
  const std::vector<Label> classes(universe.begin(), universe.end());

  MlpSpec s = spec;
  s.output_dim = classes.size();
  MlpModel m = init_model(s, mix_seed(cfg.seed, 0x1417u));
  m.classes = classes;
  const VectorXd lo = x.rowwise().minCoeff();
  const VectorXd hi = x.rowwise().maxCoeff();
  m.in_shift = lo;
  m.in_scale = (hi - lo).unaryExpr([](double d) { return d > 0.0 ? 1.0 / d : 1.0; });

  std::vector<int> cls(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    cls[j] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), ds.labels[rows[j]]) - classes.begin());
  fit(m, x, &cls, nullptr, cfg);
  return m;
}

}  // namespace

MlpModel train(const dataset::Dataset& ds, const MlpSpec& spec, const TrainConfig& cfg) {
  if (ds.size() == 0) throw Error("cannot train on an empty dataset");
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_on(ds, rows, spec, cfg);
}

double accuracy(const MlpModel& model, const dataset::Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  const auto pred = predict_labels(model, feature_matrix(ds));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += pred[i] == ds.labels[i];
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

Metrics kfold_cv(const dataset::Dataset& ds, const MlpSpec& spec, const TrainConfig& cfg, std::size_t k) {
  if (k < 2) throw Error("k-fold cross validation needs k >= 2");
  if (ds.size() < k) throw TooFewRows("dataset has " + std::to_string(ds.size()) + " rows, fewer than k = " + std::to_string(k));
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(mix_seed(cfg.seed, 0xf01du));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  Metrics m;
  const MatrixXd all = feature_matrix(ds);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * ds.size() / k, hi = (f + 1) * ds.size() / k;
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < perm.size(); ++i) (i >= lo && i < hi ? test_rows : train_rows).push_back(perm[i]);
    TrainConfig fc = cfg;
    fc.seed = mix_seed(cfg.seed, f);
    const MlpModel model = train_on(ds, train_rows, spec, fc);
    MatrixXd x(all.rows(), static_cast<Eigen::Index>(test_rows.size()));
    for (std::size_t j = 0; j < test_rows.size(); ++j)
      x.col(static_cast<Eigen::Index>(j)) = all.col(static_cast<Eigen::Index>(test_rows[j]));
    const auto pred = predict_labels(model, x);
    std::size_t ok = 0;
    for (std::size_t j = 0; j < test_rows.size(); ++j) {
      const Label actual = ds.labels[test_rows[j]];
      ok += pred[j] == actual;
      ++m.confusion[{actual, pred[j]}];
    }
    m.fold_accuracies.push_back(static_cast<double>(ok) / static_cast<double>(test_rows.size()));
  }
  m.accuracy = std::accumulate(m.fold_accuracies.begin(), m.fold_accuracies.end(), 0.0) / static_cast<double>(k);
  return m;
}

MlpModel train_nn1(const std::vector<plant::SensorSpec>& sensors, std::size_t n, const TrainConfig& cfg) {
  if (n < 1) throw Error("NN1 needs n >= 1 readings per sensor");
  if (sensors.empty()) throw Error("NN1 needs at least one sensor");
  const std::size_t s_count = sensors.size();
  MlpModel nn1 = init_model({s_count, {}, 4 * s_count, OutputKind::Sigmoid}, 0);
  nn1.layers[0].w.setZero();
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto& spec = sensors[s];
    spec.validate();
    Rng rng(mix_seed(cfg.seed, 0x4e4e0000u + s));
    MatrixXd x(1, static_cast<Eigen::Index>(n));
    MatrixXd y(4, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = rng.uniform(spec.min, spec.max);
      x(0, static_cast<Eigen::Index>(i)) = r;
      const auto bits = plant::alarms_from_reading(r, spec).as_array();
      for (std::size_t b = 0; b < 4; ++b) y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = bits[b] ? 1.0 : 0.0;
    }
    MlpModel single = init_model({1, {}, 4, OutputKind::Sigmoid}, mix_seed(cfg.seed, 0x4e310000u + s));
    single.in_shift(0) = spec.min + 0.5 * spec.span();
    single.in_scale(0) = 2.0 / spec.span();
    TrainConfig sc = cfg;
    sc.seed = mix_seed(cfg.seed, s);
    fit(single, x, nullptr, &y, sc);

    const auto si = static_cast<Eigen::Index>(s);
    nn1.in_shift(si) = single.in_shift(0);
    nn1.in_scale(si) = single.in_scale(0);
    nn1.layers[0].w.block(4 * si, si, 4, 1) = single.layers[0].w;
    nn1.layers[0].b.segment(4 * si, 4) = single.layers[0].b;
    nn1.meta.final_loss += single.meta.final_loss / static_cast<double>(s_count);
  }
  nn1.meta.seed = cfg.seed;
  nn1.meta.epochs = cfg.epochs;
  return nn1;
}

std::vector<bool> nn1_alarms(const MlpModel& nn1, std::span<const double> readings) {
  if (readings.size() != nn1.spec.input_dim) throw DimensionMismatch("NN1 expects one reading per sensor");
  const MatrixXd x = Eigen::Map<const MatrixXd>(readings.data(), static_cast<Eigen::Index>(readings.size()), 1);
  const MatrixXd p = nn1.forward(x);
  std::vector<bool> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = p(i, 0) >= 0.5;
  return out;
}

}  // namespace plcattest::learner
