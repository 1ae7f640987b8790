#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pointvig/networks/point_cloud.hpp"

namespace pointvig {

inline const std::vector<std::string> kShapeClasses{"sphere", "cube", "cylinder", "cone", "torus", "plane"};
inline const std::vector<std::string> kSceneClasses{"floor", "box", "cylinder", "sphere"};

/// Scale augmentation: every coordinate multiplied by one factor; colors
/// and labels untouched.
inline PointCloud scale_cloud(PointCloud c, double s) {
  for (auto& v : c.xyz) v *= s;
  return c;
}

inline double draw_scale(double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline PointCloud augment_scale(const PointCloud& c, double lo, double hi, std::uint64_t seed) {
  require(lo > 0 && lo <= hi, ErrorKind::validation, "augment_scale: need 0 < lo <= hi");
  return scale_cloud(c, draw_scale(lo, hi, seed));
}

namespace synth {

using Vec3 = std::array<double, 3>;
using Rand = std::mt19937_64;

inline double uni(Rand& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Uniform random rotation from a unit quaternion.
inline std::array<double, 9> random_rotation(Rand& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  double q[4];
  double n = 0;
  for (double& v : q) {
    v = g(rng);
    n += v * v;
  }
  n = std::sqrt(n);
  for (double& v : q) v /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

inline Vec3 sphere_point(Rand& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v{g(rng), g(rng), g(rng)};
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline Vec3 cube_point(Rand& rng, const Vec3& half) {
  const double area[3] = {half[1] * half[2], half[0] * half[2], half[0] * half[1]};
  const double pick = uni(rng, 0, area[0] + area[1] + area[2]);
  const int axis = pick < area[0] ? 0 : pick < area[0] + area[1] ? 1 : 2;
  Vec3 p{uni(rng, -half[0], half[0]), uni(rng, -half[1], half[1]), uni(rng, -half[2], half[2])};
  p[axis] = uni(rng) < 0.5 ? -half[axis] : half[axis];
  return p;
}

/// Closed cylinder along z with caps.
inline Vec3 cylinder_point(Rand& rng, double r, double h) {
  const double side = 2 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
  const double t = uni(rng, 0, 2 * std::numbers::pi);
  if (uni(rng, 0, side + 2 * cap) < side) return {r * std::cos(t), r * std::sin(t), uni(rng, -h / 2, h / 2)};
  const double rr = r * std::sqrt(uni(rng));
  return {rr * std::cos(t), rr * std::sin(t), uni(rng) < 0.5 ? -h / 2 : h / 2};
}

inline Vec3 cone_point(Rand& rng, double r, double h) {
  const double slant = std::sqrt(r * r + h * h);
  const double side = std::numbers::pi * r * slant, base = std::numbers::pi * r * r;
  const double t = uni(rng, 0, 2 * std::numbers::pi);
  if (uni(rng, 0, side + base) < side) {
    const double u = std::sqrt(uni(rng));  // area-uniform along the slant
    return {u * r * std::cos(t), u * r * std::sin(t), h / 2 - u * h};
  }
  const double rr = r * std::sqrt(uni(rng));
  return {rr * std::cos(t), rr * std::sin(t), -h / 2};
}

inline Vec3 torus_point(Rand& rng, double big, double small) {
  // Rejection on the tube angle keeps the samples area-uniform.
  for (;;) {
    const double u = uni(rng, 0, 2 * std::numbers::pi), v = uni(rng, 0, 2 * std::numbers::pi);
    if (uni(rng, 0, big + small) > big + small * std::cos(v)) continue;
    const double ring = big + small * std::cos(v);
    return {ring * std::cos(u), ring * std::sin(u), small * std::sin(v)};
  }
}

inline Vec3 plane_point(Rand& rng, double ax, double ay) { return {uni(rng, -ax, ax), uni(rng, -ay, ay), 0.0}; }

/// Centers on the bounding box and scales to the unit ball.
inline void normalize_unit_sphere(std::vector<double>& xyz) {
  const std::size_t n = xyz.size() / 3;
  for (int a = 0; a < 3; ++a) {
    double lo = xyz[a], hi = xyz[a];
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, xyz[i * 3 + a]);
      hi = std::max(hi, xyz[i * 3 + a]);
    }
    const double mid = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) xyz[i * 3 + a] -= mid;
  }
  double r = 0;
  for (std::size_t i = 0; i < n; ++i)
    r = std::max(r, std::sqrt(xyz[i * 3] * xyz[i * 3] + xyz[i * 3 + 1] * xyz[i * 3 + 1] + xyz[i * 3 + 2] * xyz[i * 3 + 2]));
  if (r > 0)
    for (auto& v : xyz) v /= r;
}

inline PointCloud make_shape(int cls, std::size_t n_points, Rand& rng) {
  PointCloud c;
  c.label = cls;
  const double a = uni(rng, 0.8, 1.2), b = uni(rng, 0.8, 1.2);
  const Vec3 half{uni(rng, 0.8, 1.2), uni(rng, 0.8, 1.2), uni(rng, 0.8, 1.2)};
  for (std::size_t i = 0; i < n_points; ++i) {
    Vec3 p;
    switch (cls) {
      case 0: p = sphere_point(rng); break;
      case 1: p = cube_point(rng, half); break;
      case 2: p = cylinder_point(rng, 0.5 * a, 1.4 * b); break;
      case 3: p = cone_point(rng, 0.6 * a, 1.3 * b); break;
      case 4: p = torus_point(rng, 0.7, 0.25 * a); break;
      default: p = plane_point(rng, a, b); break;
    }
    c.xyz.insert(c.xyz.end(), p.begin(), p.end());
  }
  const auto R = random_rotation(rng);
  for (std::size_t i = 0; i < n_points; ++i) {
    const Vec3 p{c.xyz[i * 3], c.xyz[i * 3 + 1], c.xyz[i * 3 + 2]};
    for (int r = 0; r < 3; ++r) c.xyz[i * 3 + r] = R[r * 3] * p[0] + R[r * 3 + 1] * p[1] + R[r * 3 + 2] * p[2];
  }
  const double s = uni(rng, 0.5, 2.0);
  for (auto& v : c.xyz) v *= s;
  normalize_unit_sphere(c.xyz);
  return c;
}

}  // namespace synth

/// `n_per_class` clouds of each of the six primitive classes, interleaved by
/// class. Pose, proportions and scale are drawn per sample.
inline std::vector<PointCloud> make_synthetic_shapes(std::size_t n_per_class, std::size_t n_points,
                                                     std::uint64_t seed) {
  require(n_points >= 64, ErrorKind::validation, "synthetic shapes need at least 64 points");
  synth::Rand rng(seed);
  std::vector<PointCloud> out;
  out.reserve(n_per_class * kShapeClasses.size());
  for (std::size_t i = 0; i < n_per_class; ++i)
    for (int c = 0; c < static_cast<int>(kShapeClasses.size()); ++c) out.push_back(synth::make_shape(c, n_points, rng));
  return out;
}

struct SceneConfig {
  std::size_t n_points = 2048;
  std::size_t min_objects = 2;
  std::size_t max_objects = 4;
  double floor_fraction = 0.35;  // share of points on the floor
  double color_noise = 0.04;
};

namespace synth {

struct Placed {
  int cls;
  double x, y, foot;  // footprint radius
  double a, b, h;     // shape parameters
  double yaw;
  Vec3 color;
};

inline Vec3 object_point(const Placed& o, Rand& rng) {
  Vec3 p;
  double lift = 0;
  // Faces resting on the floor are resampled; a scanner never sees them.
  if (o.cls == 1) {
    do p = cube_point(rng, {o.a, o.b, o.h});
    while (p[2] == -o.h);
    lift = o.h;
  } else if (o.cls == 2) {
    do p = cylinder_point(rng, o.a, o.b);
    while (p[2] == -o.b / 2);
    lift = o.b / 2;
  } else {
    p = sphere_point(rng);
    for (auto& v : p) v *= o.a;
    lift = o.a;
  }
  const double c = std::cos(o.yaw), s = std::sin(o.yaw);
  return {o.x + c * p[0] - s * p[1], o.y + s * p[0] + c * p[1], p[2] + lift};
}

inline double object_area(const Placed& o) {
  if (o.cls == 1) return 8 * (o.a * o.b + o.a * o.h + o.b * o.h);
  if (o.cls == 2) return 2 * std::numbers::pi * o.a * (o.a + o.b);
  return 4 * std::numbers::pi * o.a * o.a;
}

}  // namespace synth

/// Floor plane plus 2-4 boxes, cylinders and spheres resting on it, with
/// per-point class labels (floor, box, cylinder, sphere) and rgb. Object
/// colors are drawn independently of the class.
inline PointCloud make_scene(const SceneConfig& cfg, synth::Rand& rng) {
  using namespace synth;
  const double extent = uni(rng, 0.9, 1.1);
  const std::size_t count =
      cfg.min_objects + static_cast<std::size_t>(uni(rng, 0, 1) * static_cast<double>(cfg.max_objects - cfg.min_objects + 1));
  std::vector<Placed> objs;
  for (std::size_t tries = 0; objs.size() < std::min(count, cfg.max_objects) && tries < 500; ++tries) {
    Placed o;
    o.cls = 1 + static_cast<int>(uni(rng, 0, 3));
    if (o.cls > 3) o.cls = 3;
    o.yaw = uni(rng, 0, std::numbers::pi);
    // Each class keeps its own size regime: low wide boxes, tall thin
    // cylinders, mid-size spheres.
    if (o.cls == 1) {
      o.a = uni(rng, 0.15, 0.3);
      o.b = uni(rng, 0.15, 0.3);
      o.h = uni(rng, 0.06, 0.14);
      o.foot = std::hypot(o.a, o.b);
    } else if (o.cls == 2) {
      o.a = uni(rng, 0.07, 0.13);
      o.b = uni(rng, 0.5, 0.9);
      o.foot = o.a;
    } else {
      o.a = uni(rng, 0.16, 0.26);
      o.foot = o.a;
    }
    o.x = uni(rng, -extent + o.foot, extent - o.foot);
    o.y = uni(rng, -extent + o.foot, extent - o.foot);
    bool clear = true;
    for (const auto& p : objs) clear = clear && std::hypot(p.x - o.x, p.y - o.y) > o.foot + p.foot + 0.08;
    if (!clear) continue;
    for (auto& v : o.color) v = uni(rng, 0.15, 0.95);
    objs.push_back(o);
  }

  PointCloud c;
  const std::size_t n_floor = static_cast<std::size_t>(cfg.floor_fraction * static_cast<double>(cfg.n_points));
  std::normal_distribution<double> noise(0.0, cfg.color_noise);
  const Vec3 floor_color{uni(rng, 0.35, 0.65), uni(rng, 0.35, 0.65), uni(rng, 0.35, 0.65)};
  while (c.size() < n_floor) {
    const double x = uni(rng, -extent, extent), y = uni(rng, -extent, extent);
    bool under = false;
    for (const auto& o : objs) under = under || std::hypot(o.x - x, o.y - y) < 0.8 * o.foot;
    if (under) continue;
    c.xyz.insert(c.xyz.end(), {x, y, 0.0});
    for (double v : floor_color) c.rgb.push_back(std::clamp(v + noise(rng), 0.0, 1.0));
    c.point_labels.push_back(0);
  }
  double total_area = 0;
  for (const auto& o : objs) total_area += synth::object_area(o);
  const std::size_t rest = cfg.n_points - n_floor;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::size_t share = i + 1 == objs.size()
                                  ? rest - assigned
                                  : static_cast<std::size_t>(static_cast<double>(rest) * object_area(objs[i]) / total_area);
    assigned += share;
    for (std::size_t j = 0; j < share; ++j) {
      const auto p = object_point(objs[i], rng);
      c.xyz.insert(c.xyz.end(), p.begin(), p.end());
      for (double v : objs[i].color) c.rgb.push_back(std::clamp(v + noise(rng), 0.0, 1.0));
      c.point_labels.push_back(objs[i].cls);
    }
  }
  return c;
}

inline std::vector<PointCloud> make_synthetic_scenes(std::size_t n_scenes, const SceneConfig& cfg, std::uint64_t seed) {
  require(cfg.n_points >= 64, ErrorKind::validation, "synthetic scenes need at least 64 points");
  require(cfg.min_objects >= 1 && cfg.min_objects <= cfg.max_objects, ErrorKind::validation,
          "scene object count range is empty");
  synth::Rand rng(seed);
  std::vector<PointCloud> out;
  out.reserve(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) out.push_back(make_scene(cfg, rng));
  return out;
}

}  // namespace pointvig
