#pragma once

// The acceptance criteria as runnable checks. Each check returns a verdict
// plus a one-line measurement; the runner adds the wall-clock limit. Shared by
// the acceptance test binary and `posekit selftest`.

#include <selftest/head_oracles.hpp>
#include <selftest/oracles.hpp>

#include <posekit/posekit.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace posekit::selftest {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id = 0;
  std::string name;
  double limit_seconds = 0.0;
  std::function<Outcome()> run;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double limit_seconds = 0.0;
  std::string detail;
};

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string count_of(long k, long n) { return std::to_string(k) + "/" + std::to_string(n); }

inline double frobenius(const Mat3& a, const Mat3& b) { return (a - b).norm(); }

inline synth::SceneSpec acceptance_scene() {
  synth::SceneSpec spec;
  spec.width = 320;
  spec.height = 240;
  // fx != fy on purpose: the warp has to carry the anisotropy.
  spec.intrinsics = {286.2, 286.8, 159.6, 121.1};
  spec.margin_px = 30;
  spec.objects.push_back({{"box", synth::ShapeKind::box, Vec3(80, 60, 40), 300, 1}, 600, 1100});
  spec.objects.push_back({{"can", synth::ShapeKind::cylinder, Vec3(30, 90, 0), 300, 2}, 600, 1100});
  spec.objects.push_back({{"blob", synth::ShapeKind::blob, Vec3(50, 40, 30), 300, 3}, 600, 1100});
  return spec;
}

// Central difference of the dispatching loss in parameter k (r then t).
inline double central_difference(const Pose& pred, const Pose& gt, const ObjectModel& m, std::span<const Vec3> pts,
                                 int k, double h) {
  Pose plus = pred, minus = pred;
  if (k < 3) {
    plus.rotation.r[k] += h;
    minus.rotation.r[k] -= h;
  } else {
    plus.translation[k - 3] += h;
    minus.translation[k - 3] -= h;
  }
  return (loss_trans(plus, gt, m, pts) - loss_trans(minus, gt, m, pts)) / (2 * h);
}

// A case is smooth when no residual vanishes and, for the symmetric loss, every
// nearest neighbour wins by a margin no finite-difference step can overturn.
inline bool is_smooth_case(const Pose& pred, const Pose& gt, std::span<const Vec3> pts, bool symmetric) {
  constexpr double kMargin = 1e-3;
  std::vector<Vec3> g, q;
  for (const auto& p : pts) {
    g.push_back(oracle::apply(gt, p));
    q.push_back(oracle::apply(pred, p));
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!symmetric) {
      if ((q[i] - g[i]).norm() < kMargin) return false;
      continue;
    }
    double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
    for (const auto& x : g) {
      const double d = (q[i] - x).norm();
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    if (d1 < kMargin || d2 - d1 < kMargin) return false;
  }
  return true;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

// 1: compound scaling table
inline Outcome check_scaling_table() {
  const int d_expected[8] = {2, 2, 2, 3, 3, 3, 4, 4};
  const int n_expected[8] = {1, 1, 1, 2, 2, 2, 3, 3};
  for (int phi = 0; phi <= head::kMaxPhi; ++phi) {
    for (int w : {64, 88, 112, 160, 224, 288, 384}) {
      const auto c = head::scaling_config(phi, w);
      if (c.d_iter != d_expected[phi] || c.n_iter != n_expected[phi] || c.n_groups != w / 16) {
        return {false, "mismatch at phi=" + std::to_string(phi) + " w=" + std::to_string(w)};
      }
    }
  }
  return {true, "phi 0..7: d_iter 2,2,2,3,3,3,4,4  n_iter 1,1,1,2,2,2,3,3"};
}

// 2: transformation loss equals the evaluation metric
inline Outcome check_loss_equals_metric() {
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<int> count(20, 120);
  double worst_abs = 0.0, worst_rel = 0.0;
  long bad = 0;
  const int pairs = 1000;
  for (int i = 0; i < pairs; ++i) {
    const auto pts = oracle::random_cloud(rng, count(rng));
    const Pose gt = oracle::random_pose(rng), pred = oracle::random_pose(rng);
    for (bool symmetric : {false, true}) {
      const double loss = symmetric ? loss_sym(pred, gt, pts) : loss_asym(pred, gt, pts);
      const double metric = symmetric ? add_s_metric(gt, pred, pts) : add_metric(gt, pred, pts);
      const double abs = std::abs(loss - metric);
      const double rel = abs / std::max(1.0, std::abs(metric));
      worst_abs = std::max(worst_abs, abs);
      worst_rel = std::max(worst_rel, rel);
      if (abs > 1e-12) ++bad;
    }
  }
  return {bad == 0, std::to_string(2 * pairs) + " comparisons, max abs diff " + detail::fmt("%.3g", worst_abs) +
                        " mm, max rel diff " + detail::fmt("%.3g", worst_rel) + " (tol 1e-12 abs)"};
}

// 3: analytic gradient vs central differences
inline Outcome check_gradients() {
  std::mt19937_64 rng(3003);
  long smooth = 0, agree = 0, total = 0;
  for (bool symmetric : {false, true}) {
    for (int i = 0; i < 100; ++i) {
      const auto pts = oracle::random_cloud(rng, 80);
      const auto model = make_object_model("m", pts, symmetric);
      const Pose gt = oracle::random_pose(rng);
      Pose pred = gt;
      pred.rotation = compose(AxisAngle(oracle::random_rotation_vector(rng, 0.05, 0.6)), gt.rotation);
      pred.translation += 25.0 * oracle::random_unit(rng);
      ++total;
      if (!detail::is_smooth_case(pred, gt, pts, symmetric)) continue;
      ++smooth;
      const auto lg = loss_trans_grad(pred, gt, model, pts);
      double worst = 0.0;
      for (int k = 0; k < 6; ++k) {
        const double g = k < 3 ? lg.grad.d_r[k] : lg.grad.d_t[k - 3];
        const double fd = detail::central_difference(pred, gt, model, pts, k, k < 3 ? 1e-6 : 1e-4);
        worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-3));
      }
      if (worst < 1e-4) ++agree;
    }
  }
  const bool ok = smooth > 0 && agree * 100 >= smooth * 99;
  return {ok, detail::count_of(agree, smooth) + " smooth cases within 1e-4 relative (" +
                  detail::count_of(smooth, total) + " cases smooth)"};
}

// 4: augmented poses reproject onto the warped image
inline Outcome check_augmentation_consistency() {
  const auto spec = detail::acceptance_scene();
  const auto models = synth::build_models(spec);
  const auto& k = spec.intrinsics;
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> theta(0.0, 360.0), scale(0.7, 1.3);
  double worst_points = 0.0, worst_center = 0.0;
  long checked = 0;
  const int frames = 200;
  for (int f = 0; f < frames; ++f) {
    const auto frame = synth::sample_scene(spec, models, rng);
    const double th = theta(rng), s = scale(rng);
    for (const auto& ann : frame.annotations) {
      const Pose rot_only = augment_pose(ann.pose, th, 1.0);
      for (const auto& x : models.at(ann.model_id).points) {
        const Vec2 before = project(k, transform_point(ann.pose, x));
        const Vec2 after = project(k, transform_point(rot_only, x));
        worst_points = std::max(worst_points, (warp_point(before, th, 1.0, k) - after).norm());
        ++checked;
      }
      const Pose both = augment_pose(ann.pose, th, s);
      const Vec2 c0 = project(k, ann.pose.translation);
      const Vec2 c1 = project(k, both.translation);
      worst_center = std::max(worst_center, (warp_point(c0, th, s, k) - c1).norm());
    }
  }
  const bool ok = worst_points < 1e-6 && worst_center < 1e-6;
  return {ok, std::to_string(frames) + " frames, " + std::to_string(checked) + " points: max point error " +
                  detail::fmt("%.3g", worst_points) + " px, max center error " + detail::fmt("%.3g", worst_center) +
                  " px"};
}

// 5: (theta, f) followed by (-theta, 1/f) is the identity
inline Outcome check_augmentation_inverse() {
  std::mt19937_64 rng(5005);
  std::uniform_real_distribution<double> theta(0.0, 360.0), scale(0.7, 1.3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose p = oracle::random_pose(rng);
    const double th = theta(rng), s = scale(rng);
    const Pose back = augment_pose(augment_pose(p, th, s), -th, 1.0 / s);
    worst = std::max({worst, (back.translation - p.translation).norm(),
                      detail::frobenius(axis_angle_to_matrix(back.rotation), axis_angle_to_matrix(p.rotation))});
  }
  return {worst < 1e-9, "1000 cases, max deviation " + detail::fmt("%.3g", worst)};
}

// 6: first-order pose fitting from seeded perturbations
inline Outcome check_fit_trials() {
  const auto model = fit::default_trial_model();
  const fit::TrialConfig tc;
  const auto rs = fit::run_fit_trials(model, tc, fit::FitConfig{});
  const int wins = fit::count_successes(rs);
  const bool monotone = std::all_of(rs.begin(), rs.end(), [](const auto& r) { return r.loss_not_increased; });
  int max_iter = 0;
  for (const auto& r : rs) max_iter = std::max(max_iter, r.iterations);
  return {wins >= 95 && monotone, detail::count_of(wins, tc.trials) + " below 1% of diameter, max " +
                                      std::to_string(max_iter) + " iterations, final loss never above initial: " +
                                      (monotone ? "yes" : "no")};
}

// 7: a symmetric twin scores zero under ADD-S but not under ADD
inline Outcome check_symmetric_twin() {
  const auto can = synth::make_model({"can", synth::ShapeKind::cylinder, Vec3(40, 120, 0), 1000, 4});
  const Pose gt{AxisAngle(0.3, -0.4, 1.2), Vec3(10, 20, 800)};
  const Pose twin{compose(gt.rotation, AxisAngle(0, 0, std::numbers::pi)), gt.translation};
  const double adds = add_s_metric(gt, twin, can.points);
  const double add = add_metric(gt, twin, can.points);
  const auto as_asym = make_object_model("can_asym", can.points, false);
  const bool dispatch = add_auto(gt, twin, can, can.points) == adds &&
                        add_auto(gt, twin, as_asym, can.points) == add;
  const bool ok = can.symmetric && adds < 1e-6 * can.diameter && add >= 0.1 * can.diameter && dispatch;
  return {ok, "ADD-S " + detail::fmt("%.3g", adds) + " mm, ADD " + detail::fmt("%.4g", add) + " mm, d " +
                  detail::fmt("%.4g", can.diameter) + " mm, dispatch " + (dispatch ? "ok" : "wrong")};
}

// 8: the correctness threshold is strict
inline Outcome check_correct_boundary() {
  for (double d : {1.0, 37.5, 100.0, 172.3, 1000.0}) {
    const double at = 0.1 * d;
    if (is_correct(at, d)) return {false, "distance 0.1 d counted correct for d=" + detail::fmt("%g", d)};
    if (!is_correct(std::nextafter(at, 0.0), d)) return {false, "just below 0.1 d rejected"};
    if (is_correct(std::nextafter(at, 1e300), d)) return {false, "just above 0.1 d accepted"};
  }
  return {true, "0.1 d rejected, next double below accepted, for 5 diameters"};
}

// 9: serialization and parameterization round-trips
inline Outcome check_round_trips() {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(9009);
  double worst_rot = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Vec3 r = oracle::random_rotation_vector(rng, 0.0, std::numbers::pi);
    const Mat3 m = axis_angle_to_matrix(AxisAngle(r));
    worst_rot = std::max(worst_rot, detail::frobenius(axis_angle_to_matrix(matrix_to_axis_angle(m)), m));
  }
  if (!(worst_rot < 1e-9)) return {false, "rotation round-trip error " + detail::fmt("%.3g", worst_rot)};

  const auto grid = head::make_anchor_grid(160, 120, {8, 16, 32}, 2);
  std::uniform_int_distribution<int> ux(0, 160 * 64), uy(0, 120 * 64);
  long exact = 0, total = 0;
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const auto& lvl = grid.levels[l];
    head::FeatureMap off(lvl.height, lvl.width, 4, lvl.stride);
    std::vector<Vec2> truth;
    for (int i = 0; i < lvl.height; ++i) {
      for (int j = 0; j < lvl.width; ++j) {
        for (int a = 0; a < 2; ++a) {
          const Vec2 c(ux(rng) / 64.0, uy(rng) / 64.0);
          const Vec2 e = head::encode_center_offset(c, head::CellIndex{l, i, j}, grid);
          off.at(i, j, 2 * a) = e.x();
          off.at(i, j, 2 * a + 1) = e.y();
          truth.push_back(c);
        }
      }
    }
    std::vector<head::FeatureMap> maps(grid.levels.size());
    for (std::size_t m = 0; m < maps.size(); ++m) {
      maps[m] = m == l ? off : head::FeatureMap(grid.levels[m].height, grid.levels[m].width, 4, grid.levels[m].stride);
    }
    const auto decoded = head::decode_center(maps, grid)[l];
    for (std::size_t k = 0; k < truth.size(); ++k, ++total) exact += decoded[k] == truth[k];
  }
  if (exact != total) return {false, "center encode/decode exact for " + detail::count_of(exact, total)};

  const fs::path dir = fs::temp_directory_path() / ("posekit_acceptance_" + std::to_string(rng()));
  fs::create_directories(dir);
  ImageBuffer img(37, 23);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
  std::vector<Annotation> anns;
  for (int i = 0; i < 25; ++i) anns.push_back({"obj" + std::to_string(i % 4), oracle::random_pose(rng)});
  save_ppm((dir / "a.ppm").string(), img);
  save_ppm((dir / "b.ppm").string(), load_ppm((dir / "a.ppm").string()));
  save_annotations((dir / "a.txt").string(), anns);
  const auto back = load_annotations((dir / "a.txt").string());
  save_annotations((dir / "b.txt").string(), back);
  bool values_equal = back.size() == anns.size();
  for (std::size_t i = 0; values_equal && i < anns.size(); ++i) {
    values_equal = back[i].model_id == anns[i].model_id && back[i].pose.rotation.r == anns[i].pose.rotation.r &&
                   back[i].pose.translation == anns[i].pose.translation;
  }
  const bool ppm_ok = load_ppm((dir / "a.ppm").string()) == img &&
                      detail::slurp(dir / "a.ppm") == detail::slurp(dir / "b.ppm");
  const bool ann_ok = values_equal && detail::slurp(dir / "a.txt") == detail::slurp(dir / "b.txt");
  fs::remove_all(dir);
  const bool ok = ppm_ok && ann_ok;
  return {ok, "rotation max " + detail::fmt("%.3g", worst_rot) + ", centers exact " + detail::count_of(exact, total) +
                  ", PPM " + (ppm_ok ? "bit-exact" : "differs") + ", annotations " +
                  (ann_ok ? "bit-exact" : "differ")};
}

// 10: refinement module wiring and group normalization
inline Outcome check_head() {
  const int feat = 32, anchors = 2;
  const auto features = oracle::random_map(5, 6, feat, 101);
  const auto r_init = oracle::random_map(5, 6, 3 * anchors, 102);

  const auto cfg3 = head::scaling_config(3, 32);
  auto w3 = head::make_refinement_weights(feat, anchors, cfg3);
  head::init_uniform(w3, 103);
  head::HeadCounters counters;
  head::refine_rotation(features, r_init, w3, cfg3, &counters);
  const bool counts_ok = counters.module_applications == 2 && counters.conv_blocks == 6 && counters.output_layers == 2;

  bool identity_ok = true;
  for (int phi = 0; phi <= head::kMaxPhi; ++phi) {
    const auto cfg = head::scaling_config(phi, 32);
    const auto w = head::make_refinement_weights(feat, anchors, cfg);
    identity_ok = identity_ok && head::refine_rotation(features, r_init, w, cfg).values == r_init.values;
  }

  auto in = oracle::random_map(7, 7, 64, 104);
  for (std::size_t k = 0; k < in.values.size(); ++k) in.values[k] = 3.0 + 4.0 * in.values[k] * (1 + k % 5);
  const int groups = 4, per = 16;
  const auto out = head::group_norm(in, groups, std::vector<double>(64, 1.0), std::vector<double>(64, 0.0));
  double worst_mean = 0.0, worst_var = 0.0;
  for (int g = 0; g < groups; ++g) {
    double sum = 0.0, sq = 0.0;
    const double n = static_cast<double>(out.cells()) * per;
    for (std::size_t cell = 0; cell < out.cells(); ++cell)
      for (int c = g * per; c < (g + 1) * per; ++c) sum += out.values[cell * 64 + static_cast<std::size_t>(c)];
    const double mean = sum / n;
    for (std::size_t cell = 0; cell < out.cells(); ++cell)
      for (int c = g * per; c < (g + 1) * per; ++c) sq += std::pow(out.values[cell * 64 + static_cast<std::size_t>(c)] - mean, 2);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_var = std::max(worst_var, std::abs(sq / n - 1.0));
  }
  const bool norm_ok = worst_mean < 1e-9 && worst_var < 1e-4;
  return {counts_ok && identity_ok && norm_ok,
          "phi=3: " + std::to_string(counters.module_applications) + " applications x " +
              std::to_string(counters.conv_blocks / std::max(1, counters.module_applications)) + " blocks; zero weights " +
              (identity_ok ? "identity" : "NOT identity") + "; group mean " + detail::fmt("%.2g", worst_mean) +
              ", var dev " + detail::fmt("%.2g", worst_var)};
}

// 11: NMS against a brute-force reference
inline Outcome check_nms() {
  std::mt19937_64 rng(1111);
  std::uniform_int_distribution<int> count(0, 25);
  long mismatches = 0, sets = 500;
  for (long s = 0; s < sets; ++s) {
    const auto dets = oracle::random_detections(rng, count(rng));
    for (double thr : {0.3, 0.5, 0.7}) mismatches += head::nms_indices(dets, thr) != oracle::nms_reference(dets, thr);
  }
  return {mismatches == 0, std::to_string(sets) + " sets x 3 thresholds, " + std::to_string(mismatches) + " mismatches"};
}

inline std::vector<Criterion> acceptance_criteria() {
  return {
      {1, "scaling table", 1, check_scaling_table},
      {2, "loss equals ADD(-S)", 5, check_loss_equals_metric},
      {3, "gradient check", 30, check_gradients},
      {4, "augmentation reprojection", 30, check_augmentation_consistency},
      {5, "augmentation inverse", 5, check_augmentation_inverse},
      {6, "pose fitting trials", 300, check_fit_trials},
      {7, "symmetric twin", 1, check_symmetric_twin},
      {8, "correctness boundary", 1, check_correct_boundary},
      {9, "round-trips", 10, check_round_trips},
      {10, "refinement head", 10, check_head},
      {11, "nms vs brute force", 5, check_nms},
  };
}

/// Runs one criterion; an exception is a failure, and so is overrunning the limit.
inline CriterionResult run_criterion(const Criterion& c) {
  CriterionResult r{c.id, c.name, false, 0.0, c.limit_seconds, {}};
  const auto start = std::chrono::steady_clock::now();
  try {
    const Outcome o = c.run();
    r.passed = o.ok;
    r.detail = o.detail;
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.seconds > r.limit_seconds) {
    r.passed = false;
    r.detail += " [over time limit]";
  }
  return r;
}

inline void print_result(std::ostream& out, const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s %2d %-26s %8.3fs / %gs  ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds, r.limit_seconds);
  out << head << r.detail << '\n';
}

/// Runs the selected criteria (all when `ids` is empty); returns the failure count.
inline int run_acceptance(std::ostream& out, const std::vector<int>& ids = {}) {
  int failures = 0;
  for (const auto& c : acceptance_criteria()) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), c.id) == ids.end()) continue;
    const auto r = run_criterion(c);
    print_result(out, r);
    out.flush();
    failures += !r.passed;
  }
  return failures;
}

}  // namespace posekit::selftest
