#pragma once

// Synthetic ground truth: procedural object models, randomly posed scenes
// rendered as point splats, cuboid overlays, and dataset export.

#include <posekit/formats.hpp>
#include <posekit/frame.hpp>
#include <posekit/geometry.hpp>
#include <posekit/image.hpp>
#include <posekit/metrics.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace posekit::synth {

enum class ShapeKind { box, cylinder, blob };

/// Size semantics per kind: box = full extents (x, y, z); cylinder =
/// (radius, height, unused), axis along z; blob = ellipsoid semi-axes.
struct ShapeSpec {
  std::string id = "object";
  ShapeKind kind = ShapeKind::box;
  Vec3 size = Vec3(100.0, 100.0, 100.0);
  int point_count = 1000;
  std::uint64_t seed = 1;
};

inline std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::box: return "box";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::blob: return "blob";
  }
  return "box";
}

inline ShapeKind parse_shape_kind(const std::string& s) {
  if (s == "box") return ShapeKind::box;
  if (s == "cylinder") return ShapeKind::cylinder;
  if (s == "blob") return ShapeKind::blob;
  throw std::invalid_argument("unknown shape kind '" + s + "' (expected box, cylinder or blob)");
}

namespace detail {

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    const Vec3 v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-9) return v / len;
  }
}

inline std::vector<Vec3> box_points(const ShapeSpec& s, std::mt19937_64& rng) {
  const Vec3 h = 0.5 * s.size;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(s.point_count));
  for (int c = 0; c < 8 && static_cast<int>(pts.size()) < s.point_count; ++c) {
    pts.emplace_back((c & 1) ? h.x() : -h.x(), (c & 2) ? h.y() : -h.y(), (c & 4) ? h.z() : -h.z());
  }
  // faces weighted by area: pairs normal to x, y, z
  const std::array<double, 3> area = {s.size.y() * s.size.z(), s.size.x() * s.size.z(), s.size.x() * s.size.y()};
  std::discrete_distribution<int> face_axis(area.begin(), area.end());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution side(0.5);
  while (static_cast<int>(pts.size()) < s.point_count) {
    const int axis = face_axis(rng);
    Vec3 p(u(rng) * h.x(), u(rng) * h.y(), u(rng) * h.z());
    p[axis] = side(rng) ? h[axis] : -h[axis];
    pts.push_back(p);
  }
  return pts;
}

// Rings of an even number of equally spaced points, so the point set maps
// onto itself under a half turn about z. The point count is rounded to a
// whole number of rings.
inline std::vector<Vec3> cylinder_points(const ShapeSpec& s, std::mt19937_64& rng) {
  const double radius = s.size.x();
  const double height = s.size.y();
  const int per_ring = 2 * std::max(1, static_cast<int>(std::lround(std::sqrt(s.point_count) / 2.0)));
  const int rings = std::max(3, s.point_count / per_ring);
  const double lateral = 2.0 * std::numbers::pi * radius * height;
  const double caps = 2.0 * std::numbers::pi * radius * radius;
  const int cap_rings = std::max(1, static_cast<int>(std::lround(0.5 * rings * caps / (lateral + caps))));
  const int lateral_rings = std::max(1, rings - 2 * cap_rings);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  auto ring = [&](double rho, double z) {
    const double phase = u(rng) * 2.0 * std::numbers::pi / per_ring;
    for (int k = 0; k < per_ring; ++k) {
      const double a = phase + 2.0 * std::numbers::pi * k / per_ring;
      pts.emplace_back(rho * std::cos(a), rho * std::sin(a), z);
    }
  };
  for (int r = 0; r < lateral_rings; ++r) {
    const double z = lateral_rings == 1 ? 0.0 : -0.5 * height + height * r / (lateral_rings - 1);
    ring(radius, z);
  }
  for (int r = 0; r < cap_rings; ++r) {
    const double rho = radius * std::sqrt((r + 0.25 + 0.5 * u(rng)) / cap_rings);
    ring(std::min(rho, radius), 0.5 * height);
    ring(std::min(rho, radius), -0.5 * height);
  }
  return pts;
}

inline std::vector<Vec3> blob_points(const ShapeSpec& s, std::mt19937_64& rng) {
  std::array<Vec3, 3> lobes;
  for (auto& l : lobes) l = random_unit_vector(rng);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(s.point_count));
  for (int i = 0; i < s.point_count; ++i) {
    const Vec3 d = random_unit_vector(rng);
    double rho = 1.0;
    for (std::size_t k = 0; k < lobes.size(); ++k) {
      const double c = d.dot(lobes[k]);
      rho += (0.35 - 0.1 * static_cast<double>(k)) * std::exp(-6.0 * (1.0 - c));
    }
    pts.push_back(s.size.cwiseProduct(d) * rho);
  }
  return pts;
}

}  // namespace detail

/// Deterministic point-cloud model. Cylinders are flagged symmetric.
inline ObjectModel make_model(const ShapeSpec& spec) {
  if (spec.point_count < 4) throw std::invalid_argument("make_model: at least 4 points are required");
  const bool cyl = spec.kind == ShapeKind::cylinder;
  const int used = cyl ? 2 : 3;
  for (int i = 0; i < used; ++i) {
    if (!(spec.size[i] > 0.0) || !std::isfinite(spec.size[i])) {
      throw std::invalid_argument("make_model: degenerate size for '" + spec.id + "'");
    }
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<Vec3> pts;
  switch (spec.kind) {
    case ShapeKind::box: pts = detail::box_points(spec, rng); break;
    case ShapeKind::cylinder: pts = detail::cylinder_points(spec, rng); break;
    case ShapeKind::blob: pts = detail::blob_points(spec, rng); break;
  }
  return make_object_model(spec.id, std::move(pts), cyl);
}

/// Rotation uniformly distributed over SO(3): uniform axis, angle with density
/// proportional to 1 - cos(angle) on [0, pi] (rejection sampled).
template <typename Rng>
AxisAngle sample_uniform_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis;
  do {
    axis = Vec3(n(rng), n(rng), n(rng));
  } while (axis.norm() < 1e-9);
  axis.normalize();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    const double theta = std::numbers::pi * u(rng);
    if (2.0 * u(rng) <= 1.0 - std::cos(theta)) return AxisAngle(theta * axis);
  }
}

// ---------------------------------------------------------------------------
// Scenes

struct SceneObject {
  ShapeSpec shape;
  double tz_min = 600.0;
  double tz_max = 1200.0;
};

struct SceneSpec {
  CameraIntrinsics intrinsics{600.0, 600.0, 319.5, 239.5};
  int width = 640;
  int height = 480;
  std::vector<SceneObject> objects;
  double noise_sigma = 0.0;  // additive pixel noise
  double margin_px = 40.0;   // object centers are kept this far inside the image
  Rgb background{40, 40, 48};
};

inline void validate(const SceneSpec& spec) {
  validate(spec.intrinsics);
  if (spec.width <= 0 || spec.height <= 0) throw std::invalid_argument("SceneSpec: bad image size");
  if (2.0 * spec.margin_px >= std::min(spec.width, spec.height)) {
    throw std::invalid_argument("SceneSpec: margin leaves no room for object centers");
  }
  for (const auto& o : spec.objects) {
    if (!(o.tz_min > 0.0) || !(o.tz_min <= o.tz_max)) {
      throw std::invalid_argument("SceneSpec: t_z range of '" + o.shape.id + "' must be positive and non-empty");
    }
  }
}

inline ModelLibrary build_models(const SceneSpec& spec) {
  ModelLibrary lib;
  for (const auto& o : spec.objects) {
    if (lib.contains(o.shape.id)) continue;
    lib.emplace(o.shape.id, make_model(o.shape));
  }
  return lib;
}

inline Rgb model_color(std::size_t index) {
  static constexpr std::array<Rgb, 6> palette = {
      Rgb{220, 80, 60}, Rgb{70, 160, 220}, Rgb{230, 190, 60}, Rgb{150, 90, 200}, Rgb{80, 200, 120}, Rgb{230, 120, 180}};
  return palette[index % palette.size()];
}

/// Point-splat rendering of posed models: 3x3 splats, z-buffered, shaded by
/// relative depth within each object.
inline ImageBuffer render_points(const SceneSpec& spec, const ModelLibrary& models,
                                 const std::vector<Annotation>& annotations) {
  ImageBuffer img(spec.width, spec.height, spec.background);
  std::vector<double> zbuf(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height),
                           std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < annotations.size(); ++a) {
    const auto& model = models.at(annotations[a].model_id);
    const Rgb base = model_color(a);
    const Mat3 rot = axis_angle_to_matrix(annotations[a].pose.rotation);
    const Vec3& t = annotations[a].pose.translation;
    const double half = 0.5 * std::max(model.diameter, 1e-9);
    for (const auto& x : model.points) {
      const Vec3 pc = rot * x + t;
      if (pc.z() <= 0.0) continue;
      const Vec2 uv = project(spec.intrinsics, pc);
      const double shade = std::clamp(0.75 - 0.35 * (pc.z() - t.z()) / half, 0.3, 1.0);
      const Rgb c{static_cast<std::uint8_t>(base.r * shade), static_cast<std::uint8_t>(base.g * shade),
                  static_cast<std::uint8_t>(base.b * shade)};
      const int u0 = static_cast<int>(std::lround(uv.x()));
      const int v0 = static_cast<int>(std::lround(uv.y()));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int u = u0 + dx;
          const int v = v0 + dy;
          if (!img.contains(u, v)) continue;
          const auto zi = static_cast<std::size_t>(v) * static_cast<std::size_t>(spec.width) + static_cast<std::size_t>(u);
          if (pc.z() < zbuf[zi]) {
            zbuf[zi] = pc.z();
            img.set(u, v, c);
          }
        }
      }
    }
  }
  return img;
}

/// Random frame: uniform rotations, t_z uniform in each object's range, the
/// projected center uniform inside the image margin.
template <typename Rng>
AnnotatedFrame sample_scene(const SceneSpec& spec, const ModelLibrary& models, Rng& rng) {
  validate(spec);
  AnnotatedFrame frame;
  frame.intrinsics = spec.intrinsics;
  const auto a = IntrinsicsVector::from(spec.intrinsics);
  std::uniform_real_distribution<double> cu(spec.margin_px, spec.width - 1 - spec.margin_px);
  std::uniform_real_distribution<double> cv(spec.margin_px, spec.height - 1 - spec.margin_px);
  for (const auto& o : spec.objects) {
    if (!models.contains(o.shape.id)) throw std::invalid_argument("sample_scene: no model for '" + o.shape.id + "'");
    Pose pose;
    pose.rotation = sample_uniform_rotation(rng);
    const double tz = std::uniform_real_distribution<double>(o.tz_min, o.tz_max)(rng);
    const double u = cu(rng);
    const double v = cv(rng);
    pose.translation = recover_translation(Vec2(u, v), tz, a);
    frame.annotations.push_back({o.shape.id, pose});
  }
  frame.image = render_points(spec, models, frame.annotations);
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& px : frame.image.data) {
      px = static_cast<std::uint8_t>(std::clamp(std::round(px + noise(rng)), 0.0, 255.0));
    }
  }
  return frame;
}

// ---------------------------------------------------------------------------
// Cuboid overlays

/// Corners of the model's axis-aligned bounding box; bit 0/1/2 of the index
/// selects max x/y/z.
inline std::array<Vec3, 8> cuboid_corners(const ObjectModel& model) {
  const auto [lo, hi] = bounding_box(model);
  std::array<Vec3, 8> c;
  for (int i = 0; i < 8; ++i) c[static_cast<std::size_t>(i)] = Vec3((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  return c;
}

inline constexpr std::array<std::pair<int, int>, 12> kCuboidEdges = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

/// Projected corners; std::nullopt for corners behind the camera.
inline std::array<std::optional<Vec2>, 8> project_cuboid(const Pose& pose, const ObjectModel& model,
                                                         const CameraIntrinsics& k) {
  std::array<std::optional<Vec2>, 8> out;
  const auto corners = cuboid_corners(model);
  for (std::size_t i = 0; i < 8; ++i) {
    const Vec3 pc = transform_point(pose, corners[i]);
    if (pc.z() > 0.0) out[i] = project(k, pc);
  }
  return out;
}

namespace detail {

// Liang-Barsky clip of segment a-b to [0, w-1] x [0, h-1].
inline bool clip_segment(Vec2& a, Vec2& b, double w, double h) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  const std::array<std::pair<double, double>, 4> pq = {
      {{-d.x(), a.x()}, {d.x(), w - 1 - a.x()}, {-d.y(), a.y()}, {d.y(), h - 1 - a.y()}}};
  for (const auto& [p, q] : pq) {
    if (p == 0.0) {
      if (q < 0.0) return false;
    } else {
      const double r = q / p;
      if (p < 0.0) t0 = std::max(t0, r);
      else t1 = std::min(t1, r);
      if (t0 > t1) return false;
    }
  }
  const Vec2 a0 = a;
  a = a0 + t0 * d;
  b = a0 + t1 * d;
  return true;
}

}  // namespace detail

inline void draw_line(ImageBuffer& img, Vec2 a, Vec2 b, Rgb color) {
  if (img.width == 0 || img.height == 0) return;
  if (!detail::clip_segment(a, b, img.width, img.height)) return;
  int x0 = static_cast<int>(std::lround(a.x())), y0 = static_cast<int>(std::lround(a.y()));
  const int x1 = static_cast<int>(std::lround(b.x())), y1 = static_cast<int>(std::lround(b.y()));
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (img.contains(x0, y0)) img.set(x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

/// Draws the 12 edges of the posed bounding cuboid. Edges with an endpoint
/// behind the camera are skipped.
inline ImageBuffer render_cuboid_overlay(const ImageBuffer& image, const Pose& pose, const ObjectModel& model,
                                         const CameraIntrinsics& k, Rgb color) {
  validate(k);
  ImageBuffer out = image;
  const auto pts = project_cuboid(pose, model, k);
  for (const auto& [i, j] : kCuboidEdges) {
    const auto& a = pts[static_cast<std::size_t>(i)];
    const auto& b = pts[static_cast<std::size_t>(j)];
    if (a && b) draw_line(out, *a, *b, color);
  }
  return out;
}

inline constexpr Rgb kGroundTruthColor{0, 255, 0};

inline Rgb prediction_color(std::size_t index) {
  static constexpr std::array<Rgb, 5> palette = {Rgb{255, 0, 0}, Rgb{0, 128, 255}, Rgb{255, 0, 255},
                                                  Rgb{255, 160, 0}, Rgb{0, 255, 255}};
  return palette[index % palette.size()];
}

// ---------------------------------------------------------------------------
// Config and dataset export

/// Parses a scene config. Keys: width, height, fx, fy, px, py, noise, margin,
/// frames, and repeated `object` entries of the form
///   object <id> kind=<box|cylinder|blob> size=<a>,<b>[,<c>] points=<n> seed=<s> tz=<min>,<max>
struct SceneConfig {
  SceneSpec scene;
  int frames = 10;
};

inline SceneConfig parse_scene_config(const ConfigEntries& entries) {
  SceneConfig cfg;
  auto numbers = [](const std::string& csv) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
      const auto next = csv.find(',', pos);
      v.push_back(parse_double(std::string_view(csv).substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return v;
  };
  for (const auto& [key, value] : entries) {
    if (key == "width") cfg.scene.width = static_cast<int>(parse_long(value));
    else if (key == "height") cfg.scene.height = static_cast<int>(parse_long(value));
    else if (key == "fx") cfg.scene.intrinsics.fx = parse_double(value);
    else if (key == "fy") cfg.scene.intrinsics.fy = parse_double(value);
    else if (key == "px") cfg.scene.intrinsics.px = parse_double(value);
    else if (key == "py") cfg.scene.intrinsics.py = parse_double(value);
    else if (key == "noise") cfg.scene.noise_sigma = parse_double(value);
    else if (key == "margin") cfg.scene.margin_px = parse_double(value);
    else if (key == "frames") cfg.frames = static_cast<int>(parse_long(value));
    else if (key == "object") {
      const auto tok = split_ws(value);
      if (tok.empty()) throw std::invalid_argument("scene config: object entry needs an id");
      SceneObject obj;
      obj.shape.id = tok[0];
      for (std::size_t i = 1; i < tok.size(); ++i) {
        const auto eq = tok[i].find('=');
        if (eq == std::string::npos) throw std::invalid_argument("scene config: expected key=value, got '" + tok[i] + "'");
        const std::string k = tok[i].substr(0, eq);
        const std::string v = tok[i].substr(eq + 1);
        if (k == "kind") obj.shape.kind = parse_shape_kind(v);
        else if (k == "size") {
          const auto s = numbers(v);
          if (s.size() < 2 || s.size() > 3) throw std::invalid_argument("scene config: size takes 2 or 3 values");
          obj.shape.size = Vec3(s[0], s[1], s.size() == 3 ? s[2] : 0.0);
        } else if (k == "points") obj.shape.point_count = static_cast<int>(parse_long(v));
        else if (k == "seed") obj.shape.seed = static_cast<std::uint64_t>(parse_long(v));
        else if (k == "tz") {
          const auto s = numbers(v);
          if (s.size() != 2) throw std::invalid_argument("scene config: tz takes min,max");
          obj.tz_min = s[0];
          obj.tz_max = s[1];
        } else {
          throw std::invalid_argument("scene config: unknown object attribute '" + k + "'");
        }
      }
      cfg.scene.objects.push_back(std::move(obj));
    } else {
      throw std::invalid_argument("scene config: unknown key '" + key + "'");
    }
  }
  if (cfg.frames < 0) throw std::invalid_argument("scene config: frames must be non-negative");
  validate(cfg.scene);
  return cfg;
}

/// Writes models/, frames/ and dataset.manifest under `dir`.
inline Manifest write_dataset(const std::string& dir, const SceneSpec& spec, int frames, std::uint64_t seed) {
  namespace fs = std::filesystem;
  validate(spec);
  const fs::path root(dir);
  fs::create_directories(root / "models");
  fs::create_directories(root / "frames");
  const ModelLibrary models = build_models(spec);
  Manifest manifest;
  manifest.intrinsics = spec.intrinsics;
  for (const auto& [id, model] : models) {
    const std::string rel = "models/" + id + ".txt";
    save_model((root / rel).string(), model);
    manifest.models.emplace_back(id, rel);
  }
  std::mt19937_64 rng(seed);
  for (int f = 0; f < frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d", f);
    const AnnotatedFrame frame = sample_scene(spec, models, rng);
    const std::string img_rel = std::string("frames/") + name + ".ppm";
    const std::string ann_rel = std::string("frames/") + name + ".txt";
    save_ppm((root / img_rel).string(), frame.image);
    save_annotations((root / ann_rel).string(), frame.annotations);
    manifest.frames.push_back({img_rel, ann_rel});
  }
  auto out = std::ofstream(root / "dataset.manifest");
  if (!out) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  write_manifest(out, manifest);
  return manifest;
}

}  // namespace posekit::synth
