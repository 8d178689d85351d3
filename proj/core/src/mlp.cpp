#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "plcattest/learner.hpp"
#include "plcattest/rng.hpp"

namespace plcattest::learner {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw DimensionMismatch("MLP dimensions must be >= 1");
  for (std::size_t h : hidden)
    if (h < 1) throw DimensionMismatch("hidden layer width must be >= 1");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
}

MlpModel init_model(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpModel m;
  m.spec = spec;
  m.in_shift = VectorXd::Zero(static_cast<Eigen::Index>(spec.input_dim));
  m.in_scale = VectorXd::Ones(static_cast<Eigen::Index>(spec.input_dim));
  Rng rng(seed);
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool last = l + 2 == dims.size();
    const double a = std::sqrt((last ? 3.0 : 6.0) / static_cast<double>(dims[l]));
    DenseLayer layer;
    layer.w.resize(static_cast<Eigen::Index>(dims[l + 1]), static_cast<Eigen::Index>(dims[l]));
    for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) layer.w(r, c) = rng.uniform(-a, a);
    layer.b = VectorXd::Zero(layer.w.rows());
    m.layers.push_back(std::move(layer));
  }
  if (spec.output == OutputKind::Softmax) {
    m.classes.resize(spec.output_dim);
    std::iota(m.classes.begin(), m.classes.end(), Label{0});
  }
  return m;
}

namespace {

MatrixXd normalize(const MlpModel& m, const MatrixXd& x) {
  return (x.colwise() - m.in_shift).array().colwise() * m.in_scale.array();
}

// Pre-activations of every layer; hidden ones are rectified in place.
void run_layers(const MlpModel& m, const MatrixXd& x0, std::vector<MatrixXd>& acts) {
  acts.resize(m.layers.size() + 1);
  acts[0] = x0;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    acts[l + 1].noalias() = m.layers[l].w * acts[l];
    acts[l + 1].colwise() += m.layers[l].b;
    if (l + 1 < m.layers.size()) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }
}

void softmax_inplace(MatrixXd& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    auto col = z.col(j);
    col.array() -= col.maxCoeff();
    col = col.array().exp();
    col /= col.sum();
  }
}

MatrixXd activate_output(const MlpModel& m, MatrixXd z) {
  if (m.spec.output == OutputKind::Softmax) {
    softmax_inplace(z);
    return z;
  }
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Loss summed over columns; writes dL/dz (not yet divided by batch size).
double output_loss(const MlpModel& m, const MatrixXd& z, const int* classes, const MatrixXd* targets, MatrixXd& dz,
                   bool want_loss) {
  double loss = 0.0;
  if (m.spec.output == OutputKind::Softmax) {
    dz = z;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      auto col = dz.col(j);
      const double mx = col.maxCoeff();
      col = (col.array() - mx).exp();
      const double s = col.sum();
      col /= s;
      const int c = classes[j];
      loss += mx + std::log(s) - z(c, j);
      col(c) -= 1.0;
    }
  } else {
    const auto za = z.array();
    const auto ya = targets->array();
    if (want_loss) loss = (za.max(0.0) - za * ya + (-za.abs()).exp().log1p()).sum();
    dz = ((1.0 + (-za).exp()).inverse() - ya).matrix();
  }
  return loss;
}

struct Grads {
  std::vector<MatrixXd> w;
  std::vector<VectorXd> b;
};

double backprop(const MlpModel& m, const MatrixXd& x0, const int* classes, const MatrixXd* targets, Grads& g,
                std::vector<MatrixXd>& acts, bool want_loss = true) {
  run_layers(m, x0, acts);
  MatrixXd dz;
  const double loss = output_loss(m, acts.back(), classes, targets, dz, want_loss);
  g.w.resize(m.layers.size());
  g.b.resize(m.layers.size());
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    g.w[l].noalias() = dz * acts[l].transpose();
    g.b[l] = dz.rowwise().sum();
    if (l == 0) break;
    MatrixXd da = m.layers[l].w.transpose() * dz;
    dz = (acts[l].array() > 0.0).select(da, 0.0);
  }
  return loss;
}

}  // namespace

MatrixXd MlpModel::forward(const MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != spec.input_dim)
    throw DimensionMismatch("expected " + std::to_string(spec.input_dim) + " features, got " + std::to_string(x.rows()));
  std::vector<MatrixXd> acts;
  run_layers(*this, normalize(*this, x), acts);
  return activate_output(*this, std::move(acts.back()));
}

Prediction predict(const MlpModel& model, std::span<const double> fv) {
  if (fv.size() != model.spec.input_dim)
    throw DimensionMismatch("expected " + std::to_string(model.spec.input_dim) + " features, got " + std::to_string(fv.size()));
  const MatrixXd x = Eigen::Map<const MatrixXd>(fv.data(), static_cast<Eigen::Index>(fv.size()), 1);
  const MatrixXd p = model.forward(x);
  Prediction r;
  r.probabilities.assign(p.data(), p.data() + p.size());
  r.label = predict_labels(model, x).front();
  return r;
}

std::vector<Label> predict_labels(const MlpModel& model, const MatrixXd& x) {
  const MatrixXd p = model.forward(x);
  std::vector<Label> out(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (model.spec.output == OutputKind::Softmax) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < p.rows(); ++i)
        if (p(i, j) > p(best, j)) best = i;
      out[static_cast<std::size_t>(j)] = model.classes[static_cast<std::size_t>(best)];
    } else {
      Label l = 0;
      for (Eigen::Index i = 0; i < p.rows(); ++i) l = (l << 1) | (p(i, j) >= 0.5 ? 1u : 0u);
      out[static_cast<std::size_t>(j)] = l;
    }
  }
  return out;
}

void fit(MlpModel& model, const MatrixXd& x, const std::vector<int>* classes, const MatrixXd* targets,
         const TrainConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.cols());
  if (n == 0) throw Error("cannot train on an empty dataset");
  if (static_cast<std::size_t>(x.rows()) != model.spec.input_dim)
    throw DimensionMismatch("training features have " + std::to_string(x.rows()) + " columns, model expects " +
                            std::to_string(model.spec.input_dim));
  const bool softmax = model.spec.output == OutputKind::Softmax;
  if (softmax && (!classes || classes->size() != n)) throw DimensionMismatch("class targets do not match rows");
  if (!softmax && (!targets || targets->cols() != x.cols() ||
                   static_cast<std::size_t>(targets->rows()) != model.spec.output_dim))
    throw DimensionMismatch("multi-label targets do not match the model");

  const MatrixXd xn = normalize(model, x);
  const std::size_t L = model.layers.size();
  Grads m1, m2, g;
  for (const auto& layer : model.layers) {
    m1.w.push_back(MatrixXd::Zero(layer.w.rows(), layer.w.cols()));
    m1.b.push_back(VectorXd::Zero(layer.b.size()));
  }
  m2 = m1;

  Rng shuffle(mix_seed(cfg.seed, 0x5348u));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<MatrixXd> acts;
  MatrixXd xb, yb;
  std::vector<int> cb;
  double b1t = 1.0, b2t = 1.0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[shuffle.below(i)]);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n - start);
      xb.resize(xn.rows(), static_cast<Eigen::Index>(bs));
      if (softmax) cb.resize(bs);
      else yb.resize(targets->rows(), static_cast<Eigen::Index>(bs));
      for (std::size_t j = 0; j < bs; ++j) {
        const auto src = static_cast<Eigen::Index>(perm[start + j]);
        xb.col(static_cast<Eigen::Index>(j)) = xn.col(src);
        if (softmax) cb[j] = (*classes)[static_cast<std::size_t>(src)];
        else yb.col(static_cast<Eigen::Index>(j)) = targets->col(src);
      }
      // The sigmoid loss value is only needed for the final report.
      epoch_loss += backprop(model, xb, softmax ? cb.data() : nullptr, softmax ? nullptr : &yb, g, acts,
                             softmax || epoch + 1 == cfg.epochs);

      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      const double step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
      const double inv = 1.0 / static_cast<double>(bs);
      for (std::size_t l = 0; l < L; ++l) {
        g.w[l] *= inv;
        g.b[l] *= inv;
        m1.w[l] = cfg.beta1 * m1.w[l] + (1.0 - cfg.beta1) * g.w[l];
        m2.w[l] = cfg.beta2 * m2.w[l] + (1.0 - cfg.beta2) * g.w[l].cwiseAbs2();
        m1.b[l] = cfg.beta1 * m1.b[l] + (1.0 - cfg.beta1) * g.b[l];
        m2.b[l] = cfg.beta2 * m2.b[l] + (1.0 - cfg.beta2) * g.b[l].cwiseAbs2();
        model.layers[l].w.array() -= step * m1.w[l].array() / (m2.w[l].array().sqrt() + cfg.epsilon);
        model.layers[l].b.array() -= step * m1.b[l].array() / (m2.b[l].array().sqrt() + cfg.epsilon);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NonFiniteLoss("training diverged in epoch " + std::to_string(epoch + 1));
  }
  for (const auto& layer : model.layers)
    if (!layer.w.allFinite() || !layer.b.allFinite()) throw NonFiniteLoss("training produced non-finite weights");
  model.meta = {cfg.seed, cfg.epochs, epoch_loss};
}

double loss_and_gradient(const MlpModel& model, std::span<const double> x, std::span<const double> target,
                         std::vector<double>& grad) {
  if (x.size() != model.spec.input_dim) throw DimensionMismatch("sample does not match the model input");
  const MatrixXd x0 = normalize(model, Eigen::Map<const MatrixXd>(x.data(), static_cast<Eigen::Index>(x.size()), 1));
  int cls = 0;
  MatrixXd y;
  if (model.spec.output == OutputKind::Softmax) {
    if (target.size() != 1 || target[0] < 0 || target[0] >= static_cast<double>(model.spec.output_dim))
      throw DimensionMismatch("softmax target must be one class index");
    cls = static_cast<int>(target[0]);
  } else {
    if (target.size() != model.spec.output_dim) throw DimensionMismatch("sigmoid target must have output_dim entries");
    y = Eigen::Map<const MatrixXd>(target.data(), static_cast<Eigen::Index>(target.size()), 1);
  }
  Grads g;
  std::vector<MatrixXd> acts;
  const double loss = backprop(model, x0, &cls, &y, g, acts);
  grad.clear();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    grad.insert(grad.end(), g.w[l].data(), g.w[l].data() + g.w[l].size());
    grad.insert(grad.end(), g.b[l].data(), g.b[l].data() + g.b[l].size());
  }
  return loss;
}

double gradient_check(const MlpSpec& spec, std::uint64_t seed, std::span<const double> x,
                      std::span<const double> target) {
  MlpModel m = init_model(spec, seed);
  // Zero biases can leave a ReLU exactly at its kink, where central
  // differences and the subgradient disagree.
  Rng rng(mix_seed(seed, 0xb1a5u));
  for (auto& layer : m.layers)
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = rng.uniform(-0.5, 0.5);
  std::vector<double> analytic, scratch;
  loss_and_gradient(m, x, target, analytic);
  std::vector<double*> params;
  for (auto& layer : m.layers) {
    for (Eigen::Index i = 0; i < layer.w.size(); ++i) params.push_back(layer.w.data() + i);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) params.push_back(layer.b.data() + i);
  }
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + h;
    const double up = loss_and_gradient(m, x, target, scratch);
    *params[i] = saved - h;
    const double down = loss_and_gradient(m, x, target, scratch);
    *params[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-7);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

// ---- serialisation ----

namespace {

constexpr int kModelVersion = 1;

nlohmann::json vec_json(const double* p, Eigen::Index n) { return std::vector<double>(p, p + n); }

}  // namespace

std::string model_to_json(const MlpModel& m) {
  nlohmann::json j;
  j["format"] = "plcattest-mlp";
  j["version"] = kModelVersion;
  j["spec"] = {{"input_dim", m.spec.input_dim},
               {"hidden", m.spec.hidden},
               {"output_dim", m.spec.output_dim},
               {"output", m.spec.output == OutputKind::Softmax ? "softmax" : "sigmoid"},
               {"hidden_activation", "relu"}};
  j["classes"] = m.classes;
  j["input_shift"] = vec_json(m.in_shift.data(), m.in_shift.size());
  j["input_scale"] = vec_json(m.in_scale.data(), m.in_scale.size());
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : m.layers) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.w;
    j["layers"].push_back({{"rows", layer.w.rows()},
                           {"cols", layer.w.cols()},
                           {"weights", vec_json(w.data(), w.size())},
                           {"bias", vec_json(layer.b.data(), layer.b.size())}});
  }
  j["train_meta"] = {{"seed", m.meta.seed}, {"epochs", m.meta.epochs}, {"final_loss", m.meta.final_loss}};
  return j.dump() + "\n";
}

MlpModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "plcattest-mlp") throw FormatError("not a plcattest model file");
    const int version = j.at("version");
    if (version != kModelVersion)
      throw FormatError("model version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelVersion) + ")");
    MlpModel m;
    const auto& s = j.at("spec");
    m.spec.input_dim = s.at("input_dim");
    m.spec.hidden = s.at("hidden").get<std::vector<std::size_t>>();
    m.spec.output_dim = s.at("output_dim");
    const std::string out = s.at("output");
    if (out != "softmax" && out != "sigmoid") throw FormatError("unknown output kind '" + out + "'");
    m.spec.output = out == "softmax" ? OutputKind::Softmax : OutputKind::Sigmoid;
    m.spec.validate();
    m.classes = j.at("classes").get<std::vector<Label>>();
    if (m.spec.output == OutputKind::Softmax && m.classes.size() != m.spec.output_dim)
      throw FormatError("class list does not match output_dim");
    const auto shift = j.at("input_shift").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    if (shift.size() != m.spec.input_dim || scale.size() != m.spec.input_dim)
      throw FormatError("input transform does not match input_dim");
    m.in_shift = Eigen::Map<const VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
    m.in_scale = Eigen::Map<const VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    std::size_t prev = m.spec.input_dim;
    std::vector<std::size_t> outs = m.spec.hidden;
    outs.push_back(m.spec.output_dim);
    if (j.at("layers").size() != outs.size()) throw FormatError("layer count does not match spec");
    for (std::size_t l = 0; l < outs.size(); ++l) {
      const auto& jl = j.at("layers").at(l);
      const std::size_t rows = jl.at("rows"), cols = jl.at("cols");
      if (rows != outs[l] || cols != prev) throw FormatError("layer " + std::to_string(l) + " has the wrong shape");
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (w.size() != rows * cols || b.size() != rows) throw FormatError("layer " + std::to_string(l) + " is truncated");
      DenseLayer layer;
      layer.w = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      layer.b = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(rows));
      m.layers.push_back(std::move(layer));
      prev = rows;
    }
    const auto& meta = j.at("train_meta");
    m.meta = {meta.at("seed"), meta.at("epochs"), meta.at("final_loss")};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << model_to_json(model);
  if (!os) throw IoError("write failed: " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace plcattest::learner
