#pragma once

// First-order 6D pose recovery: Adam on the pose parameters (r, t) driven by
// the transformation loss and its analytic gradient.

#include <posekit/augmentation.hpp>
#include <posekit/geometry.hpp>
#include <posekit/metrics.hpp>
#include <posekit/synth.hpp>
#include <posekit/transform_loss.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <thread>
#include <vector>

namespace posekit::fit {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct FitConfig {
  double learning_rate = 1e-4;
  double rotation_lr_scale = 1.0;      // radians
  double translation_lr_scale = 100.0;  // millimeters
  int max_iterations = 2000;
  double clip_norm = 1e-3;
  double tolerance_mm = 0.05;
  double lr_factor = 0.5;
  int patience = 25;
  double min_learning_rate = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void validate(const FitConfig& c) {
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("FitConfig: learning rate must be positive");
  if (c.max_iterations <= 0) throw std::invalid_argument("FitConfig: max iterations must be positive");
  if (!(c.clip_norm > 0.0)) throw std::invalid_argument("FitConfig: clip threshold must be positive");
  if (!(c.lr_factor > 0.0 && c.lr_factor <= 1.0)) throw std::invalid_argument("FitConfig: lr factor must be in (0, 1]");
}

struct AdamState {
  Vec6 m = Vec6::Zero();
  Vec6 v = Vec6::Zero();
  long step = 0;
};

/// Rescales g to norm `threshold` when it is longer.
inline Vec6 clip_gradient(const Vec6& g, double threshold) {
  const double n = g.norm();
  if (n > threshold && n > 0.0) return g * (threshold / n);
  return g;
}

/// Gradient clipping followed by one bias-corrected Adam update. The first
/// three parameters (rotation) and last three (translation) use the learning
/// rate scaled by their block factor.
inline std::pair<Vec6, AdamState> adam_step(const Vec6& params, const Vec6& grad, AdamState state, const FitConfig& cfg) {
  if (!grad.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient");
  const Vec6 g = clip_gradient(grad, cfg.clip_norm);
  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  Vec6 out = params;
  for (int i = 0; i < 6; ++i) {
    const double lr = cfg.learning_rate * (i < 3 ? cfg.rotation_lr_scale : cfg.translation_lr_scale);
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    out[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return {out, state};
}

inline Vec6 to_params(const Pose& p) {
  Vec6 v;
  v << p.rotation.r, p.translation;
  return v;
}

inline Pose to_pose(const Vec6& v) {
  Pose p;
  p.rotation = AxisAngle(Vec3(v.head<3>()));
  p.translation = v.tail<3>();
  return p;
}

/// Equivalent rotation vector with angle in [0, pi] (no matrix round trip).
inline AxisAngle wrap_rotation(const AxisAngle& r) {
  const double theta = r.angle();
  if (theta <= std::numbers::pi) return r;
  const double wrapped = std::fmod(theta, 2.0 * std::numbers::pi);
  const Vec3 axis = r.r / theta;
  if (wrapped <= std::numbers::pi) return AxisAngle(wrapped * axis);
  return AxisAngle((wrapped - 2.0 * std::numbers::pi) * axis);
}

enum class FitStatus { converged, max_iterations, diverged };

inline std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max_iterations";
    case FitStatus::diverged: return "diverged";
  }
  return "unknown";
}

struct FitResult {
  Pose pose;                  // best iterate
  std::vector<double> trace;  // loss at every visited iterate
  int iterations = 0;
  FitStatus status = FitStatus::max_iterations;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Minimizes the transformation loss between the estimate and `target` over
/// the estimate's pose parameters. Returns the best iterate seen, so the final
/// loss never exceeds the initial one. The learning rate is multiplied by
/// lr_factor after `patience` iterations without improvement.
inline FitResult fit_pose(const Pose& init, const ObjectModel& model, const Pose& target, std::span<const Vec3> points,
                          const FitConfig& cfg) {
  validate(cfg);
  if (points.empty()) throw std::invalid_argument("fit_pose: empty point set");
  if (!(init.translation.z() > 0.0)) throw std::invalid_argument("fit_pose: initial t_z must be positive");

  FitResult res;
  FitConfig step_cfg = cfg;
  AdamState adam;
  Vec6 params = to_params(init);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  res.pose = init;

  for (int it = 0;; ++it) {
    const Pose current = to_pose(params);
    const LossAndGrad lg = loss_trans_grad(current, target, model, points);
    res.trace.push_back(lg.value);
    if (it == 0) res.initial_loss = lg.value;
    if (!std::isfinite(lg.value) || !lg.grad.d_r.allFinite() || !lg.grad.d_t.allFinite()) {
      res.status = FitStatus::diverged;
      break;
    }
    if (lg.value < best) {
      best = lg.value;
      res.pose = current;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      step_cfg.learning_rate = std::max(step_cfg.learning_rate * cfg.lr_factor, cfg.min_learning_rate);
      since_best = 0;
    }
    if (lg.value <= cfg.tolerance_mm) {
      res.status = FitStatus::converged;
      break;
    }
    if (it == cfg.max_iterations) {
      res.status = FitStatus::max_iterations;
      break;
    }
    Vec6 grad;
    grad << lg.grad.d_r, lg.grad.d_t;
    std::tie(params, adam) = adam_step(params, grad, adam, step_cfg);
    params.head<3>() = wrap_rotation(AxisAngle(Vec3(params.head<3>()))).r;
    res.iterations = it + 1;
  }
  res.final_loss = std::isfinite(best) ? best : res.trace.back();
  return res;
}

// ---------------------------------------------------------------------------
// Seeded trials

/// How the initial estimate is derived from the target.
enum class InitPerturbation {
  random_rigid,   // rotation about a random axis + translation in a random direction
  augmentation,   // in-plane rotation + depth scaling, as the 6D augmentation does
  scale_only,
  rotation_only,
};

inline std::string to_string(InitPerturbation p) {
  switch (p) {
    case InitPerturbation::random_rigid: return "random_rigid";
    case InitPerturbation::augmentation: return "6d_augmentation";
    case InitPerturbation::scale_only: return "scale_only";
    case InitPerturbation::rotation_only: return "rotation_only";
  }
  return "unknown";
}

struct TrialConfig {
  int trials = 100;
  std::uint64_t seed = 1;
  double rotation_deg = 5.0;
  double translation_mm = 20.0;
  double tz_min = 600.0;
  double tz_max = 1200.0;
  double success_fraction = 0.01;  // final ADD(-S) below this fraction of the diameter
  std::size_t loss_points = kDefaultLossPoints;
  InitPerturbation perturbation = InitPerturbation::random_rigid;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double init_add = 0.0;
  double final_add = 0.0;
  int iterations = 0;
  bool converged = false;
  bool success = false;
  bool loss_not_increased = true;
  FitStatus status = FitStatus::max_iterations;
};

inline std::uint64_t trial_seed(std::uint64_t base, int trial) {
  // splitmix64 step keeps per-trial streams decorrelated
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Target pose and perturbed initial estimate for one trial.
inline std::pair<Pose, Pose> make_trial_poses(const TrialConfig& tc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Pose target;
  target.rotation = synth::sample_uniform_rotation(rng);
  std::uniform_real_distribution<double> ux(-150.0, 150.0);
  std::uniform_real_distribution<double> uz(tc.tz_min, tc.tz_max);
  target.translation = Vec3(ux(rng), ux(rng), uz(rng));

  Pose init = target;
  const double rot_rad = tc.rotation_deg * std::numbers::pi / 180.0;
  std::bernoulli_distribution sign(0.5);
  switch (tc.perturbation) {
    case InitPerturbation::random_rigid: {
      std::normal_distribution<double> n(0.0, 1.0);
      Vec3 axis(n(rng), n(rng), n(rng));
      axis.normalize();
      Vec3 dir(n(rng), n(rng), n(rng));
      dir.normalize();
      init.rotation = compose(AxisAngle(rot_rad * axis), target.rotation);
      init.translation = target.translation + tc.translation_mm * dir;
      break;
    }
    case InitPerturbation::augmentation:
    case InitPerturbation::scale_only:
    case InitPerturbation::rotation_only: {
      const bool rotate = tc.perturbation != InitPerturbation::scale_only;
      const bool scale = tc.perturbation != InitPerturbation::rotation_only;
      const double theta = rotate ? (sign(rng) ? tc.rotation_deg : 360.0 - tc.rotation_deg) : 0.0;
      // depth change of translation_mm at the target's distance
      const double dz = tc.translation_mm * (sign(rng) ? 1.0 : -1.0);
      const double f_scale = scale ? target.translation.z() / (target.translation.z() + dz) : 1.0;
      init = augment_pose(target, theta, f_scale);
      break;
    }
  }
  return {target, init};
}

/// Trial object when none is given: an asymmetric 100 x 60 x 40 mm box.
inline ObjectModel default_trial_model() {
  return synth::make_model({"box", synth::ShapeKind::box, Vec3(100, 60, 40), 1000, 7});
}

inline TrialResult run_trial(const ObjectModel& model, const TrialConfig& tc, const FitConfig& cfg, int trial) {
  TrialResult r;
  r.trial = trial;
  r.seed = trial_seed(tc.seed, trial);
  const auto [target, init] = make_trial_poses(tc, r.seed);
  const auto points = sample_model_points(model, tc.loss_points, r.seed);
  const FitResult fit = fit_pose(init, model, target, points, cfg);
  r.init_add = add_auto(target, init, model, model.points);
  r.final_add = add_auto(target, fit.pose, model, model.points);
  r.iterations = fit.iterations;
  r.status = fit.status;
  r.converged = fit.status == FitStatus::converged;
  r.loss_not_increased = fit.final_loss <= fit.initial_loss;
  r.success = r.loss_not_increased && fit.status != FitStatus::diverged &&
              r.final_add < tc.success_fraction * model.diameter;
  return r;
}

/// Trials run on up to `threads` workers (0 = hardware concurrency); results
/// are in trial order and do not depend on the thread count.
inline std::vector<TrialResult> run_fit_trials(const ObjectModel& model, const TrialConfig& tc, const FitConfig& cfg,
                                               unsigned threads = 0) {
  if (tc.trials < 0) throw std::invalid_argument("run_fit_trials: negative trial count");
  std::vector<TrialResult> out(static_cast<std::size_t>(tc.trials));
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(1, tc.trials)));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int t; (t = next.fetch_add(1)) < tc.trials;) {
      try {
        out[static_cast<std::size_t>(t)] = run_trial(model, tc, cfg, t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

inline int count_successes(const std::vector<TrialResult>& rs) {
  return static_cast<int>(std::count_if(rs.begin(), rs.end(), [](const TrialResult& r) { return r.success; }));
}

/// CSV with the run's settings in leading '#' lines.
inline void write_trials_csv(std::ostream& out, const std::vector<TrialResult>& rs, const FitConfig& cfg,
                             const TrialConfig& tc) {
  out << "# learning_rate=" << cfg.learning_rate << " rotation_lr_scale=" << cfg.rotation_lr_scale
      << " translation_lr_scale=" << cfg.translation_lr_scale << " clip_norm=" << cfg.clip_norm
      << " max_iterations=" << cfg.max_iterations << " tolerance_mm=" << cfg.tolerance_mm
      << " lr_factor=" << cfg.lr_factor << " patience=" << cfg.patience << " min_learning_rate=" << cfg.min_learning_rate
      << '\n';
  out << "# perturbation=" << to_string(tc.perturbation) << " rotation_deg=" << tc.rotation_deg
      << " translation_mm=" << tc.translation_mm << " loss_points=" << tc.loss_points << " base_seed=" << tc.seed
      << '\n';
  out << "trial,seed,init_add,final_add,iterations,converged\n";
  for (const auto& r : rs) {
    out << r.trial << ',' << r.seed << ',' << r.init_add << ',' << r.final_add << ',' << r.iterations << ','
        << (r.converged ? 1 : 0) << '\n';
  }
}

struct AblationRow {
  InitPerturbation perturbation;
  int successes = 0;
  int trials = 0;
  double rate() const { return trials == 0 ? 0.0 : 100.0 * successes / trials; }
};

/// Success rates for every init-perturbation family on the same seeds.
inline std::vector<AblationRow> run_ablation(const ObjectModel& model, TrialConfig tc, const FitConfig& cfg,
                                             unsigned threads = 0) {
  std::vector<AblationRow> rows;
  for (auto p : {InitPerturbation::random_rigid, InitPerturbation::augmentation, InitPerturbation::scale_only,
                 InitPerturbation::rotation_only}) {
    tc.perturbation = p;
    const auto rs = run_fit_trials(model, tc, cfg, threads);
    rows.push_back({p, count_successes(rs), static_cast<int>(rs.size())});
  }
  return rows;
}

inline void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "init perturbation     success rate\n";
  for (const auto& r : rows) {
    const std::string name = to_string(r.perturbation);
    out << name << std::string(22 - std::min<std::size_t>(21, name.size()), ' ') << format_percent(r.rate()) << " ("
        << r.successes << '/' << r.trials << ")\n";
  }
}

}  // namespace posekit::fit
