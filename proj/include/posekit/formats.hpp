#pragma once

// Line-oriented text formats: object models, annotations, predictions,
// dataset manifests and key/value config files. Numbers are written in the
// shortest form that parses back to the same double, so save(load(file)) is
// byte-identical for files produced here.

#include <posekit/frame.hpp>
#include <posekit/geometry.hpp>
#include <posekit/metrics.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace posekit {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what) {}
};

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line = 0) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw FormatError("invalid number '" + std::string(s) + "'", line);
  return v;
}

inline long parse_long(std::string_view s, std::size_t line = 0) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("invalid integer '" + std::string(s) + "'", line);
  }
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

namespace detail {

inline bool is_blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

inline std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

inline std::ofstream create_text(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

inline Pose parse_pose(const std::vector<std::string>& tok, std::size_t first, std::size_t line) {
  Pose p;
  p.rotation = AxisAngle(parse_double(tok[first], line), parse_double(tok[first + 1], line),
                         parse_double(tok[first + 2], line));
  p.translation = Vec3(parse_double(tok[first + 3], line), parse_double(tok[first + 4], line),
                       parse_double(tok[first + 5], line));
  return p;
}

inline void write_pose(std::ostream& out, const Pose& p) {
  out << format_double(p.rotation.r.x()) << ' ' << format_double(p.rotation.r.y()) << ' '
      << format_double(p.rotation.r.z()) << ' ' << format_double(p.translation.x()) << ' '
      << format_double(p.translation.y()) << ' ' << format_double(p.translation.z());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Object model: "model <id> symmetric=<0|1>" then one "x y z" per line (mm).

inline ObjectModel read_model(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  std::string id;
  bool symmetric = false;
  bool have_header = false;
  std::vector<Vec3> points;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (!have_header) {
      if (tok.size() != 3 || tok[0] != "model" || (tok[2] != "symmetric=0" && tok[2] != "symmetric=1")) {
        throw FormatError("expected 'model <id> symmetric=<0|1>'", n);
      }
      id = tok[1];
      symmetric = tok[2] == "symmetric=1";
      have_header = true;
      continue;
    }
    if (tok.size() != 3) throw FormatError("expected 'x y z'", n);
    points.emplace_back(parse_double(tok[0], n), parse_double(tok[1], n), parse_double(tok[2], n));
  }
  if (!have_header) throw FormatError("model file has no header", 0);
  if (points.empty()) throw FormatError("model '" + id + "' has no points", 0);
  return make_object_model(id, std::move(points), symmetric);
}

inline void write_model(std::ostream& out, const ObjectModel& model) {
  out << "model " << model.id << " symmetric=" << (model.symmetric ? 1 : 0) << '\n';
  for (const auto& p : model.points) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
}

inline ObjectModel load_model(const std::string& path) {
  auto in = detail::open_text(path);
  return read_model(in);
}

inline void save_model(const std::string& path, const ObjectModel& model) {
  auto out = detail::create_text(path);
  write_model(out, model);
}

// ---------------------------------------------------------------------------
// Annotations: "<model-id> rx ry rz tx ty tz" (axis-angle radians, mm).

inline std::vector<Annotation> read_annotations(std::istream& in) {
  std::vector<Annotation> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 7) throw FormatError("expected '<model-id> rx ry rz tx ty tz'", n);
    out.push_back({tok[0], detail::parse_pose(tok, 1, n)});
  }
  return out;
}

inline void write_annotations(std::ostream& out, const std::vector<Annotation>& anns) {
  for (const auto& a : anns) {
    out << a.model_id << ' ';
    detail::write_pose(out, a.pose);
    out << '\n';
  }
}

inline std::vector<Annotation> load_annotations(const std::string& path) {
  auto in = detail::open_text(path);
  return read_annotations(in);
}

inline void save_annotations(const std::string& path, const std::vector<Annotation>& anns) {
  auto out = detail::create_text(path);
  write_annotations(out, anns);
}

// ---------------------------------------------------------------------------
// Predictions: "<frame-index> <model-id> <score> rx ry rz tx ty tz".

inline std::vector<std::vector<PoseEstimate>> read_predictions(std::istream& in, std::size_t frame_count) {
  std::vector<std::vector<PoseEstimate>> out(frame_count);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok.size() != 9) throw FormatError("expected '<frame-index> <model-id> <score> rx ry rz tx ty tz'", n);
    const long frame = parse_long(tok[0], n);
    if (frame < 0 || static_cast<std::size_t>(frame) >= frame_count) {
      throw FormatError("frame index " + tok[0] + " out of range", n);
    }
    PoseEstimate est;
    est.model_id = tok[1];
    est.score = parse_double(tok[2], n);
    if (!(est.score >= 0.0 && est.score <= 1.0)) throw FormatError("score outside [0, 1]", n);
    est.pose = detail::parse_pose(tok, 3, n);
    out[static_cast<std::size_t>(frame)].push_back(std::move(est));
  }
  return out;
}

inline void write_predictions(std::ostream& out, const std::vector<std::vector<PoseEstimate>>& preds) {
  for (std::size_t f = 0; f < preds.size(); ++f) {
    for (const auto& est : preds[f]) {
      out << f << ' ' << est.model_id << ' ' << format_double(est.score) << ' ';
      detail::write_pose(out, est.pose);
      out << '\n';
    }
  }
}

inline std::vector<std::vector<PoseEstimate>> load_predictions(const std::string& path, std::size_t frame_count) {
  auto in = detail::open_text(path);
  return read_predictions(in, frame_count);
}

inline void save_predictions(const std::string& path, const std::vector<std::vector<PoseEstimate>>& preds) {
  auto out = detail::create_text(path);
  write_predictions(out, preds);
}

// ---------------------------------------------------------------------------
// Dataset manifest. Paths are relative to the manifest's directory.
//
//   intrinsics <fx> <fy> <px> <py>
//   model <id> <model-file>
//   frame <image.ppm> <annotations.txt>

struct ManifestFrame {
  std::string image;
  std::string annotations;
};

struct Manifest {
  CameraIntrinsics intrinsics;
  std::vector<std::pair<std::string, std::string>> models;  // id, path
  std::vector<ManifestFrame> frames;
};

inline Manifest read_manifest(std::istream& in) {
  Manifest m;
  bool have_intrinsics = false;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank_or_comment(line)) continue;
    const auto tok = split_ws(line);
    if (tok[0] == "intrinsics" && tok.size() == 5) {
      m.intrinsics = {parse_double(tok[1], n), parse_double(tok[2], n), parse_double(tok[3], n),
                      parse_double(tok[4], n)};
      validate(m.intrinsics);
      have_intrinsics = true;
    } else if (tok[0] == "model" && tok.size() == 3) {
      m.models.emplace_back(tok[1], tok[2]);
    } else if (tok[0] == "frame" && tok.size() == 3) {
      m.frames.push_back({tok[1], tok[2]});
    } else {
      throw FormatError("unrecognized manifest line '" + line + "'", n);
    }
  }
  if (!have_intrinsics) throw FormatError("manifest has no intrinsics line", 0);
  return m;
}

inline void write_manifest(std::ostream& out, const Manifest& m) {
  out << "intrinsics " << format_double(m.intrinsics.fx) << ' ' << format_double(m.intrinsics.fy) << ' '
      << format_double(m.intrinsics.px) << ' ' << format_double(m.intrinsics.py) << '\n';
  for (const auto& [id, path] : m.models) out << "model " << id << ' ' << path << '\n';
  for (const auto& f : m.frames) out << "frame " << f.image << ' ' << f.annotations << '\n';
}

/// A manifest with its models and frames loaded from disk.
struct Dataset {
  Manifest manifest;
  ModelLibrary models;
  std::vector<AnnotatedFrame> frames;
};

inline Dataset load_dataset(const std::string& manifest_path, bool load_images = true) {
  namespace fs = std::filesystem;
  auto in = detail::open_text(manifest_path);
  Dataset ds;
  ds.manifest = read_manifest(in);
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& [id, rel] : ds.manifest.models) {
    auto model = load_model((base / rel).string());
    if (model.id != id) throw std::runtime_error("model file '" + rel + "' declares id '" + model.id + "'");
    ds.models.emplace(id, std::move(model));
  }
  for (const auto& f : ds.manifest.frames) {
    AnnotatedFrame frame;
    frame.intrinsics = ds.manifest.intrinsics;
    if (load_images) frame.image = load_ppm((base / f.image).string());
    frame.annotations = load_annotations((base / f.annotations).string());
    ds.frames.push_back(std::move(frame));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Config: "key value" lines; keys may repeat, order is preserved.

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline ConfigEntries read_config(std::istream& in) {
  ConfigEntries out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::is_blank_or_comment(line)) continue;
    const auto start = line.find_first_not_of(" \t");
    const auto key_end = line.find_first_of(" \t", start);
    if (key_end == std::string::npos) throw FormatError("expected 'key value'", n);
    const auto value_start = line.find_first_not_of(" \t", key_end);
    auto value_end = line.find_last_not_of(" \t\r");
    if (value_start == std::string::npos) throw FormatError("expected 'key value'", n);
    out.emplace_back(line.substr(start, key_end - start), line.substr(value_start, value_end - value_start + 1));
  }
  return out;
}

}  // namespace posekit
