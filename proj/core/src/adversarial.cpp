#include <algorithm>
#include <limits>
#include <ostream>

#include "csv.hpp"
#include "plcattest/adversarial.hpp"

namespace plcattest::attack {

using Eigen::MatrixXd;
using dataset::Label;

namespace {

constexpr std::size_t kChunk = 512;

/// Evaluates candidate masks in chunks; `hit` decides success per label.
template <typename Hit>
bool search(const learner::MlpModel& nn2, const SearchSpace& space, const SearchLimits& limits, Hit hit) {
  const std::size_t f = space.free.size();
  if (f == 0) return false;
  const auto dim = static_cast<Eigen::Index>(space.baseline.size());
  const bool exhaustive = !limits.force_random && f < 63 && space.size() <= limits.exhaustive_limit;
  const std::size_t total = exhaustive ? space.size() - 1 : limits.budget;  // mask 0 is the baseline
  Rng rng(limits.seed);
  MatrixXd x(dim, static_cast<Eigen::Index>(std::min(kChunk, total)));
  std::vector<char> flips(f);
  std::size_t done = 0;
  while (done < total) {
    const std::size_t n = std::min(kChunk, total - done);
    x.conservativeResize(dim, static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      for (Eigen::Index r = 0; r < dim; ++r) x(r, col) = space.baseline[static_cast<std::size_t>(r)];
      if (exhaustive) {
        const std::uint64_t mask = done + c + 1;
        for (std::size_t k = 0; k < f; ++k) flips[k] = ((mask >> k) & 1u) != 0;
      } else {
        // Redraw the empty mask: it is the baseline itself.
        bool any = false;
        while (!any)
          for (std::size_t k = 0; k < f; ++k) {
            flips[k] = rng.coin();
            any = any || flips[k];
          }
      }
      for (std::size_t k = 0; k < f; ++k) {
        if (flips[k]) {
          double& v = x(static_cast<Eigen::Index>(space.free[k]), col);
          v = v != 0.0 ? 0.0 : 1.0;
        }
      }
    }
    for (Label l : learner::predict_labels(nn2, x))
      if (hit(l)) return true;
    done += n;
  }
  return false;
}

}  // namespace

void AdvConfig::validate() const {
  if (bounds.empty()) throw Error("adversarial config needs at least one bound");
  for (double b : bounds)
    if (!(b > 0.0)) throw Error("noise bound must be positive");
  if (sample_count < 1) throw Error("adversarial sample count must be >= 1");
  if (grid_points < 2) throw Error("perturbation grid needs >= 2 points");
}

std::string_view to_string(Scenario s) { return s == Scenario::AnyChange ? "anyChange" : "targeted"; }

std::vector<Achievable> flippable_alarms(const learner::MlpModel& nn1, std::span<const double> readings,
                                         const std::vector<plant::SensorSpec>& specs, double bound, int grid_points) {
  if (readings.size() != specs.size() || nn1.spec.input_dim != specs.size())
    throw learner::DimensionMismatch("NN1 expects one reading per sensor");
  if (grid_points < 2) throw Error("perturbation grid needs >= 2 points");
  const auto s_count = static_cast<Eigen::Index>(specs.size());
  const Eigen::Index g = grid_points;
  MatrixXd x(s_count, s_count * g);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    const auto& spec = specs[static_cast<std::size_t>(s)];
    for (Eigen::Index k = 0; k < g; ++k) {
      const auto col = s * g + k;
      for (Eigen::Index r = 0; r < s_count; ++r) x(r, col) = readings[static_cast<std::size_t>(r)];
      const double delta = bound * spec.span() * (2.0 * static_cast<double>(k) / static_cast<double>(g - 1) - 1.0);
      x(s, col) = std::clamp(readings[static_cast<std::size_t>(s)] + delta, spec.min, spec.max);
    }
  }
  const MatrixXd p = nn1.forward(x);
  std::vector<Achievable> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index o = 0; o < p.rows(); ++o) {
    const Eigen::Index s = o / 4;  // block-diagonal: outputs 4s..4s+3 read sensor s
    for (Eigen::Index k = 0; k < g; ++k) {
      if (p(o, s * g + k) >= 0.5) out[static_cast<std::size_t>(o)].one = true;
      else out[static_cast<std::size_t>(o)].zero = true;
    }
  }
  return out;
}

std::size_t SearchSpace::size() const {
  if (free.size() >= 63) return std::numeric_limits<std::size_t>::max();
  return std::size_t{1} << free.size();
}

SearchSpace search_space(const attester::FeatureBuilder& fb, std::vector<double> baseline,
                         const std::vector<Achievable>& achievable) {
  SearchSpace s;
  s.baseline = std::move(baseline);
  for (std::size_t j = 0; j < fb.dim(); ++j) {
    const int o = fb.alarm_output(j);
    if (o >= 0 && achievable.at(static_cast<std::size_t>(o)).flippable()) s.free.push_back(j);
  }
  return s;
}

bool adv_any_change(const learner::MlpModel& nn2, const SearchSpace& space, const SearchLimits& limits) {
  if (space.free.empty()) return false;
  const Label base = learner::predict(nn2, space.baseline).label;
  return search(nn2, space, limits, [base](Label l) { return l != base; });
}

bool adv_targeted(const learner::MlpModel& nn2, const SearchSpace& space, Label target, const SearchLimits& limits) {
  if (space.free.empty()) return false;
  if (std::find(nn2.classes.begin(), nn2.classes.end(), target) == nn2.classes.end()) return false;
  return search(nn2, space, limits, [target](Label l) { return l == target; });
}

Label flip_one_actuator(const dataset::LabelCodec& codec, Label base, Rng& rng) {
  auto out = codec.decode(base);
  if (out.commands.empty()) throw Error("codec has no fields to flip");
  const std::size_t field = rng.below(out.commands.size());
  const ValueKind kind = codec.fields()[field].kind;
  const Value cur = out.commands[field];
  const auto n = static_cast<std::uint64_t>(kind.domain_size());
  const auto cur_ord = static_cast<std::uint64_t>(cur.kind() == Kind::Bool ? (cur.as_bool() ? 1 : 0) : cur.as_enum());
  std::uint64_t pick = rng.below(n - 1);
  if (pick >= cur_ord) ++pick;
  out.commands[field] = kind.kind == Kind::Bool ? Value::boolean(pick != 0)
                                                : Value::enumeration(static_cast<std::int32_t>(pick));
  return codec.encode(out);
}

std::vector<AdvResult> success_rates(const stlang::Program& prog, const attester::AttestModel& model,
                                     const plant::TraceSchema& schema, const std::vector<plant::TraceRow>& samples,
                                     const AdvConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw Error("adversarial evaluation needs at least one sample");
  const attester::FeatureBuilder fb(model, schema);
  const auto codec = dataset::LabelCodec::for_program(prog);
  std::vector<AdvResult> res;
  for (double b : cfg.bounds) {
    res.push_back({Scenario::AnyChange, b, 0, 0});
    res.push_back({Scenario::Targeted, b, 0, 0});
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto readings = fb.readings(samples[i]);
    const auto alarms = learner::nn1_alarms(model.nn1, readings);
    auto baseline = fb.features(samples[i], alarms);
    const Label base = learner::predict(model.nn2, baseline).label;
    Rng trng(mix_seed(cfg.seed, i));
    const Label target = flip_one_actuator(codec, base, trng);
    for (std::size_t bi = 0; bi < cfg.bounds.size(); ++bi) {
      const auto ach = flippable_alarms(model.nn1, readings, model.sensors, cfg.bounds[bi], cfg.grid_points);
      const SearchSpace space = search_space(fb, baseline, ach);
      const SearchLimits limits{cfg.budget, cfg.exhaustive_limit, mix_seed(mix_seed(cfg.seed, i), bi + 1), false};
      const bool targeted = adv_targeted(model.nn2, space, target, limits);
      const bool any = targeted || adv_any_change(model.nn2, space, limits);
      AdvResult& ra = res[2 * bi];
      AdvResult& rt = res[2 * bi + 1];
      ++ra.trials;
      ++rt.trials;
      ra.successes += any;
      rt.successes += targeted;
    }
  }
  return res;
}

void write_adv_csv(std::ostream& os, const std::vector<AdvResult>& results) {
  os << "scenario,bound,successes,trials,rate\n";
  for (const auto& r : results)
    os << to_string(r.scenario) << ',' << csv::fixed6(r.bound) << ',' << r.successes << ',' << r.trials << ','
       << csv::fixed6(r.rate()) << '\n';
}

}  // namespace plcattest::attack
