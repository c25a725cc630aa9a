#pragma once

// ADD / ADD-S / ADD(-S) pose metrics and dataset-level accuracy reports.
//
// The metrics transform points with explicit rotation matrices, independently
// of the Rodrigues path used by the transformation loss; the two must agree to
// rounding error.

#include <posekit/frame.hpp>
#include <posekit/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace posekit {

using ModelLibrary = std::map<std::string, ObjectModel>;

struct PoseEstimate {
  std::string model_id;
  Pose pose;
  double score = 1.0;
};

namespace detail {

inline std::vector<Vec3> transform_by_matrix(const Pose& pose, std::span<const Vec3> points) {
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(rot * x + pose.translation);
  return out;
}

inline void require_metric_points(std::span<const Vec3> points) {
  if (points.empty()) throw std::invalid_argument("pose metric: empty point set");
}

}  // namespace detail

/// Average distance between corresponding model points under both poses (mm).
inline double add_metric(const Pose& gt, const Pose& pred, std::span<const Vec3> points) {
  detail::require_metric_points(points);
  const auto g = detail::transform_by_matrix(gt, points);
  const auto p = detail::transform_by_matrix(pred, points);
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sum += (p[i] - g[i]).norm();
  return sum / static_cast<double>(points.size());
}

/// Average distance from each estimated-pose point to the closest
/// ground-truth-pose point (mm).
inline double add_s_metric(const Pose& gt, const Pose& pred, std::span<const Vec3> points) {
  detail::require_metric_points(points);
  const auto g = detail::transform_by_matrix(gt, points);
  const auto p = detail::transform_by_matrix(pred, points);
  double sum = 0.0;
  for (const auto& q : p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : g) best = std::min(best, (q - h).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(points.size());
}

/// ADD-S for symmetric models, ADD otherwise.
inline double add_auto(const Pose& gt, const Pose& pred, const ObjectModel& model, std::span<const Vec3> points) {
  return model.symmetric ? add_s_metric(gt, pred, points) : add_metric(gt, pred, points);
}

inline constexpr double kCorrectFraction = 0.1;

/// True when the distance is strictly smaller than k times the diameter.
inline bool is_correct(double distance, double diameter, double k = kCorrectFraction) {
  if (!(diameter > 0.0)) throw std::invalid_argument("is_correct: diameter must be positive");
  return distance < k * diameter;
}

// ---------------------------------------------------------------------------
// Dataset evaluation

struct ObjectAccuracy {
  long correct = 0;
  long total = 0;
  bool symmetric = false;
  double accuracy() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
};

/// A frame where some ground-truth instances of a model had no prediction.
struct EvalIssue {
  std::size_t frame_index = 0;
  std::string model_id;
  long unmatched = 0;
};

struct EvalReport {
  std::map<std::string, ObjectAccuracy> per_object;
  std::vector<EvalIssue> issues;
  long unmatched_predictions = 0;

  /// Mean of the per-object accuracies (not pooled over instances).
  double average() const {
    if (per_object.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [id, acc] : per_object) sum += acc.accuracy();
    return sum / static_cast<double>(per_object.size());
  }
};

/// Scores predictions against ground truth with ADD(-S) at 10% of the
/// diameter. Within a frame, predictions are matched to ground-truth instances
/// of the same model greedily by lowest ADD(-S); unmatched ground truths count
/// as incorrect and are listed in the report's issues.
inline EvalReport evaluate(std::span<const AnnotatedFrame> frames, std::span<const std::vector<PoseEstimate>> predictions,
                           const ModelLibrary& models) {
  if (frames.size() != predictions.size()) {
    throw std::invalid_argument("evaluate: predictions are not aligned with frames");
  }
  EvalReport report;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::map<std::string, std::vector<const Annotation*>> gt_by_model;
    for (const auto& ann : frames[f].annotations) gt_by_model[ann.model_id].push_back(&ann);
    std::map<std::string, std::vector<const PoseEstimate*>> pred_by_model;
    for (const auto& est : predictions[f]) {
      if (!models.contains(est.model_id)) throw std::invalid_argument("evaluate: unknown model '" + est.model_id + "'");
      pred_by_model[est.model_id].push_back(&est);
    }

    for (const auto& [id, pred_list] : pred_by_model) {
      if (!gt_by_model.contains(id)) report.unmatched_predictions += static_cast<long>(pred_list.size());
    }

    for (const auto& [id, gts] : gt_by_model) {
      const auto model_it = models.find(id);
      if (model_it == models.end()) throw std::invalid_argument("evaluate: unknown model '" + id + "'");
      const ObjectModel& model = model_it->second;
      auto& acc = report.per_object[id];
      acc.symmetric = model.symmetric;
      acc.total += static_cast<long>(gts.size());

      const auto pit = pred_by_model.find(id);
      const std::vector<const PoseEstimate*> preds =
          pit == pred_by_model.end() ? std::vector<const PoseEstimate*>{} : pit->second;

      struct Pair {
        double distance;
        std::size_t gt, pred;
      };
      std::vector<Pair> pairs;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        for (std::size_t p = 0; p < preds.size(); ++p) {
          pairs.push_back({add_auto(gts[g]->pose, preds[p]->pose, model, model.points), g, p});
        }
      }
      std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.distance < b.distance; });
      std::vector<bool> gt_used(gts.size(), false);
      std::vector<bool> pred_used(preds.size(), false);
      long matched = 0;
      for (const auto& pr : pairs) {
        if (gt_used[pr.gt] || pred_used[pr.pred]) continue;
        gt_used[pr.gt] = true;
        pred_used[pr.pred] = true;
        ++matched;
        if (is_correct(pr.distance, model.diameter)) ++acc.correct;
      }
      const long unmatched = static_cast<long>(gts.size()) - matched;
      if (unmatched > 0) report.issues.push_back({f, id, unmatched});
      report.unmatched_predictions += static_cast<long>(preds.size()) - matched;
    }
  }
  return report;
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

/// Plain-text table (one row per object, symmetric objects marked with '*',
/// then the average) followed by a key=value block.
inline void write_report(std::ostream& out, const EvalReport& report) {
  std::size_t width = std::string("Average").size();
  for (const auto& [id, acc] : report.per_object) width = std::max(width, id.size() + (acc.symmetric ? 1 : 0));
  auto row = [&](const std::string& name, const std::string& value) {
    out << name << std::string(width - name.size() + 2, ' ') << value << '\n';
  };
  const std::string rule(width + 2 + 8, '-');
  row("Object", "ADD(-S)");
  out << rule << '\n';
  for (const auto& [id, acc] : report.per_object) row(id + (acc.symmetric ? "*" : ""), format_percent(acc.accuracy()));
  out << rule << '\n';
  row("Average", format_percent(report.average()));
  out << '\n';
  for (const auto& [id, acc] : report.per_object) {
    out << "object." << id << ".correct=" << acc.correct << '\n';
    out << "object." << id << ".total=" << acc.total << '\n';
    out << "object." << id << ".accuracy=" << format_percent(acc.accuracy()) << '\n';
  }
  out << "average=" << format_percent(report.average()) << '\n';
  out << "unmatched_predictions=" << report.unmatched_predictions << '\n';
  for (const auto& issue : report.issues) {
    out << "issue.frame" << issue.frame_index << '.' << issue.model_id << ".unmatched_ground_truth=" << issue.unmatched
        << '\n';
  }
}

}  // namespace posekit
