#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "classifier.hpp"
#include "error.hpp"
#include "frame_io.hpp"
#include "types.hpp"

namespace gpground {

enum class SceneKind { Flat, Sloped, RampThenFlat, FlatWithBoxes, SlopedWithBoxes, FlatThenWall };

inline std::string_view to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Flat: return "flat";
    case SceneKind::Sloped: return "sloped";
    case SceneKind::RampThenFlat: return "ramp_then_flat";
    case SceneKind::FlatWithBoxes: return "flat_with_boxes";
    case SceneKind::SlopedWithBoxes: return "sloped_with_boxes";
    case SceneKind::FlatThenWall: return "flat_then_wall";
  }
  return "flat";
}

inline SceneKind parse_scene_kind(std::string_view s) {
  for (auto k : {SceneKind::Flat, SceneKind::Sloped, SceneKind::RampThenFlat, SceneKind::FlatWithBoxes,
                 SceneKind::SlopedWithBoxes, SceneKind::FlatThenWall})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown scene kind '" + std::string(s) + "'");
}

/// Synthetic scene description. Terrain is radially symmetric about the
/// sensor so every wedge sees the same (r, z) profile:
///   flat*            z = 0
///   sloped*          z = grade * r
///   ramp_then_flat   z = grade * min(r, junction_radius)
///   flat_then_wall   z = 0 inside junction_radius, a vertical wall face of
///                    wall_height there, and a terrace at wall_height behind it.
struct SceneSpec {
  SceneKind kind = SceneKind::FlatWithBoxes;
  double grade = 0.2;
  double extent = 40.0;
  std::size_t point_count = 20000;
  double noise = 0.02;
  std::uint64_t rng_seed = 1;
  std::size_t num_rings = 64;
  double inner_radius = 3.0;
  std::size_t box_count = 8;
  double box_fraction = 0.2;  // share of points on obstacles (boxes or wall face)
  double box_min_height = 1.5;
  double box_max_height = 2.5;
  double junction_radius = 15.0;
  double wall_height = 1.0;

  bool has_obstacles() const noexcept {
    return kind == SceneKind::FlatWithBoxes || kind == SceneKind::SlopedWithBoxes ||
           kind == SceneKind::FlatThenWall;
  }

  void validate() const {
    if (!(grade >= 0.0)) throw Error(ErrorKind::InvalidArgument, "scene grade must be >= 0");
    if (point_count < 1) throw Error(ErrorKind::InvalidArgument, "scene point_count must be >= 1");
    if (!(noise >= 0.0)) throw Error(ErrorKind::InvalidArgument, "scene noise must be >= 0");
    if (!(inner_radius > 0.0) || !(extent > inner_radius))
      throw Error(ErrorKind::InvalidArgument, "scene needs 0 < inner_radius < extent");
    if (num_rings < 1) throw Error(ErrorKind::InvalidArgument, "scene needs at least one ring");
    if (!(box_fraction >= 0.0) || !(box_fraction < 1.0))
      throw Error(ErrorKind::InvalidArgument, "box_fraction must lie in [0, 1)");
    if (!(box_min_height > 0.0) || box_max_height < box_min_height)
      throw Error(ErrorKind::InvalidArgument, "box heights must satisfy 0 < min <= max");
    if (!(junction_radius > 0.0) || !(wall_height > 0.0))
      throw Error(ErrorKind::InvalidArgument, "junction_radius and wall_height must be > 0");
  }

  double surface(double r) const noexcept {
    switch (kind) {
      case SceneKind::Sloped:
      case SceneKind::SlopedWithBoxes: return grade * r;
      case SceneKind::RampThenFlat: return grade * std::min(r, junction_radius);
      case SceneKind::FlatThenWall: return r < junction_radius ? 0.0 : wall_height;
      default: return 0.0;
    }
  }

  double local_grade(double r) const noexcept {
    switch (kind) {
      case SceneKind::Sloped:
      case SceneKind::SlopedWithBoxes: return grade;
      case SceneKind::RampThenFlat: return r < junction_radius ? grade : 0.0;
      default: return 0.0;
    }
  }
};

/// Radius of ring k: geometric spacing from inner_radius to extent, which
/// mimics the range falloff of a spinning multi-beam sensor.
inline double ring_radius(const SceneSpec& spec, std::size_t k) {
  if (spec.num_rings == 1) return spec.inner_radius;
  const double t = static_cast<double>(k) / static_cast<double>(spec.num_rings - 1);
  return spec.inner_radius * std::pow(spec.extent / spec.inner_radius, t);
}

namespace synth_detail {

struct Box {
  double cx, cy;
  double half_len, half_wid;
  double yaw;
  double height;

  bool contains(double x, double y) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    const double u = (x - cx) * c + (y - cy) * s;
    const double v = -(x - cx) * s + (y - cy) * c;
    return std::abs(u) <= half_len && std::abs(v) <= half_wid;
  }

  struct Face {
    double x0, y0, x1, y1;
    double area;
  };

  /// Vertical faces whose outward normal points back at the sensor.
  std::vector<Face> visible_faces() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    auto corner = [&](double u, double v) {
      return std::pair{cx + u * c - v * s, cy + u * s + v * c};
    };
    const std::pair<double, double> k[4] = {corner(half_len, half_wid), corner(-half_len, half_wid),
                                            corner(-half_len, -half_wid), corner(half_len, -half_wid)};
    std::vector<Face> faces;
    for (int i = 0; i < 4; ++i) {
      const auto [x0, y0] = k[i];
      const auto [x1, y1] = k[(i + 1) % 4];
      const double mx = 0.5 * (x0 + x1), my = 0.5 * (y0 + y1);
      const double nx = mx - cx, ny = my - cy;  // outward
      if (nx * mx + ny * my < 0.0) faces.push_back({x0, y0, x1, y1, std::hypot(x1 - x0, y1 - y0) * height});
    }
    return faces;
  }
};

}  // namespace synth_detail

/// Generates a labeled synthetic frame: ground on concentric rings with
/// Gaussian vertical noise, plus dense vertical-face obstacle clusters.
/// Deterministic per rng_seed.
inline Frame generate_scene(const SceneSpec& spec) {
  using synth_detail::Box;
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double two_pi = 2.0 * std::numbers::pi;

  Frame frame;
  frame.source_id = "synthetic:" + std::string(to_string(spec.kind)) + ":" + std::to_string(spec.rng_seed);

  std::size_t obstacle_count = spec.has_obstacles()
                                   ? static_cast<std::size_t>(std::llround(spec.box_fraction * static_cast<double>(spec.point_count)))
                                   : 0;
  if (spec.kind == SceneKind::FlatWithBoxes || spec.kind == SceneKind::SlopedWithBoxes)
    if (spec.box_count == 0) obstacle_count = 0;
  obstacle_count = std::min(obstacle_count, spec.point_count - 1);
  const std::size_t ground_count = spec.point_count - obstacle_count;

  std::vector<Box> boxes;
  if (obstacle_count > 0 && spec.kind != SceneKind::FlatThenWall) {
    const double r_lo = std::min(spec.inner_radius + 3.0, 0.5 * spec.extent);
    const double r_hi = std::max(r_lo, 0.8 * spec.extent);
    for (std::size_t b = 0; b < spec.box_count; ++b) {
      const double rc = uniform(r_lo, r_hi);
      const double th = uniform(0.0, two_pi);
      boxes.push_back(Box{rc * std::cos(th), rc * std::sin(th), 0.5 * uniform(1.5, 4.5),
                          0.5 * uniform(1.2, 2.5), uniform(0.0, std::numbers::pi),
                          uniform(spec.box_min_height, spec.box_max_height)});
    }
  }
  auto inside_box = [&](double x, double y) {
    return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(x, y); });
  };

  frame.points.reserve(spec.point_count);
  const std::size_t rings = spec.num_rings;
  for (std::size_t k = 0; k < rings; ++k) {
    const std::size_t quota = ground_count / rings + (k < ground_count % rings ? 1 : 0);
    if (quota == 0) continue;
    const double rk = ring_radius(spec, k);
    const double phase = uniform(0.0, two_pi);
    for (std::size_t i = 0; i < quota; ++i) {
      double x = 0, y = 0, r = rk;
      for (int attempt = 0; attempt < 32; ++attempt) {
        const double th = attempt == 0
                              ? phase + two_pi * (static_cast<double>(i) + uniform(-0.3, 0.3)) / static_cast<double>(quota)
                              : uniform(0.0, two_pi);
        r = std::max(0.1, rk + 0.5 * spec.noise * gauss(rng));
        x = r * std::cos(th);
        y = r * std::sin(th);
        if (!inside_box(x, y)) break;
      }
      Point3 p;
      p.x = x;
      p.y = y;
      p.z = spec.surface(r) + spec.noise * gauss(rng);
      p.truth = Label::Ground;
      p.true_grade = spec.local_grade(r);
      frame.points.push_back(p);
    }
  }

  if (spec.kind == SceneKind::FlatThenWall) {
    for (std::size_t i = 0; i < obstacle_count; ++i) {
      const double th = uniform(0.0, two_pi);
      const double r = spec.junction_radius + uniform(0.0, 0.05);
      Point3 p;
      p.x = r * std::cos(th);
      p.y = r * std::sin(th);
      p.z = uniform(0.0, spec.wall_height);
      p.truth = Label::NonGround;
      frame.points.push_back(p);
    }
  } else if (!boxes.empty()) {
    std::vector<Box::Face> faces;
    std::vector<double> weights;
    std::vector<double> heights;
    for (const auto& b : boxes)
      for (const auto& f : b.visible_faces()) {
        faces.push_back(f);
        weights.push_back(f.area);
        heights.push_back(b.height);
      }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (std::size_t i = 0; i < obstacle_count; ++i) {
      const auto fi = pick(rng);
      const auto& f = faces[fi];
      const double u = unit(rng);
      Point3 p;
      p.x = f.x0 + u * (f.x1 - f.x0);
      p.y = f.y0 + u * (f.y1 - f.y0);
      p.z = spec.surface(radial_range(p.x, p.y)) + uniform(0.0, heights[fi]);
      p.truth = Label::NonGround;
      frame.points.push_back(p);
    }
  }
  return frame;
}

/// Region split of true ground points by terrain grade.
inline constexpr double kFlatGradeBelow = 0.05;
inline constexpr double kSlopedGradeFrom = 0.18;
inline constexpr double kHighGroundAbove = 0.3;

struct RegionCount {
  std::size_t total = 0;
  std::size_t hit = 0;

  double rate() const noexcept {
    return total ? 100.0 * static_cast<double>(hit) / static_cast<double>(total)
                 : std::numeric_limits<double>::quiet_NaN();
  }
};

struct Metrics {
  double sr_overall = 0.0;
  double sr_flat_region = 0.0;    // NaN when no flat ground with known grade
  double sr_sloped_region = 0.0;  // NaN when no sloped ground with known grade
  double sr_high_ground = 0.0;    // ground points above kHighGroundAbove
  double false_ground_rate = 0.0;
  RegionCount ground, flat, sloped, intermediate, unknown_grade, high;
  std::size_t non_ground = 0;
  std::size_t non_ground_as_ground = 0;
  StageTimings timings;
  double runtime_ms = 0.0;
};

/// Success rate = true ground labeled ground / true ground (percent);
/// false ground rate = non-ground labeled ground / true non-ground.
inline Metrics evaluate(const LabeledFrame& labeled) {
  const auto& pts = labeled.frame.points;
  if (labeled.predictions.size() != pts.size())
    throw Error(ErrorKind::LengthMismatch, "prediction count does not match frame size");
  if (!labeled.frame.has_truth()) throw Error(ErrorKind::MissingTruth, "frame carries no truth labels");

  Metrics m;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const bool said_ground = labeled.predictions[i] == Label::Ground;
    if (p.truth == Label::Ground) {
      const std::size_t hit = said_ground ? 1 : 0;
      m.ground.total++;
      m.ground.hit += hit;
      RegionCount* region = &m.unknown_grade;
      if (!std::isnan(p.true_grade)) {
        if (p.true_grade < kFlatGradeBelow)
          region = &m.flat;
        else if (p.true_grade >= kSlopedGradeFrom)
          region = &m.sloped;
        else
          region = &m.intermediate;
      }
      region->total++;
      region->hit += hit;
      if (p.z > kHighGroundAbove) {
        m.high.total++;
        m.high.hit += hit;
      }
    } else if (p.truth == Label::NonGround) {
      m.non_ground++;
      if (said_ground) m.non_ground_as_ground++;
    }
  }
  m.sr_overall = m.ground.total ? m.ground.rate() : std::numeric_limits<double>::quiet_NaN();
  m.sr_flat_region = m.flat.rate();
  m.sr_sloped_region = m.sloped.rate();
  m.sr_high_ground = m.high.rate();
  m.false_ground_rate = m.non_ground ? 100.0 * static_cast<double>(m.non_ground_as_ground) /
                                           static_cast<double>(m.non_ground)
                                     : 0.0;
  m.timings = labeled.timings;
  m.runtime_ms = labeled.timings.total_ms();
  return m;
}

/// Plot rows for one wedge: one row per candidate, then one row per query
/// radius spread evenly over the wedge's candidate span. Columns:
/// kind,r,z_candidate,mu,variance,is_critical,g,L
inline std::string plot_data(const LabeledFrame& labeled, std::size_t segment,
                             std::size_t query_count = 100) {
  if (!labeled.model) throw Error(ErrorKind::InvalidArgument, "labeled frame has no fitted model");
  const SegmentModel* sm = labeled.model->find(segment);
  if (!sm) throw Error(ErrorKind::UnknownSegment, "segment " + std::to_string(segment) + " has no model");
  const auto& theta = labeled.model->theta;

  const auto crit = sm->critical_points();
  std::string out = "kind,r,z_candidate,mu,variance,is_critical,g,L\n";
  auto row = [&](std::string_view kind, double r, std::optional<double> zc, const Prediction& p,
                 bool critical, double g, double L) {
    out += kind;
    out.push_back(',');
    io_detail::append_number(out, r);
    out.push_back(',');
    if (zc) io_detail::append_number(out, *zc);
    out.push_back(',');
    io_detail::append_number(out, p.mean);
    out.push_back(',');
    io_detail::append_number(out, p.variance);
    out += critical ? ",1," : ",0,";
    io_detail::append_number(out, g);
    out.push_back(',');
    io_detail::append_number(out, L);
    out.push_back('\n');
  };

  for (std::size_t i = 0; i < sm->candidates.size(); ++i) {
    const auto& c = sm->candidates[i];
    const bool critical = std::find(crit.begin(), crit.end(), i) != crit.end();
    row("candidate", c.r, c.z, sm->gp.predict(c.r, c.length_scale), critical, c.slope, c.length_scale);
  }
  const double lo = sm->candidates.front().r;
  const double hi = sm->candidates.back().r;
  for (std::size_t q = 0; q < query_count; ++q) {
    const double r = query_count == 1 ? lo
                                      : lo + (hi - lo) * static_cast<double>(q) / static_cast<double>(query_count - 1);
    const auto k = sm->line_for(r);
    const double L = theta.a * sm->line_scale[k];
    row("query", r, std::nullopt, sm->gp.predict(r, L), false, sm->lines[k].slope_g, L);
  }
  return out;
}

inline void emit_plot_data(const LabeledFrame& labeled, std::size_t segment, const std::string& path,
                           std::size_t query_count = 100) {
  io_detail::write_text(path, plot_data(labeled, segment, query_count));
}

}  // namespace gpground
