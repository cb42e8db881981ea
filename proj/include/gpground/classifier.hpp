#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "critical_lines.hpp"
#include "error.hpp"
#include "gp_core.hpp"
#include "hyperopt.hpp"
#include "parallel.hpp"
#include "polar_grid.hpp"
#include "types.hpp"

namespace gpground {

/// Ground iff  z - mu <= max(tau_abs, k_sigma * sd)  and  z >= mu - tau_below.
struct LabelRule {
  double tau_abs = 0.2;
  double k_sigma = 2.0;
  // Depth below the predicted ground still accepted as ground; NaN means
  // 2 * tau_abs, +inf disables the rejection band.
  double tau_below = std::numeric_limits<double>::quiet_NaN();

  double below() const noexcept { return std::isnan(tau_below) ? 2.0 * tau_abs : tau_below; }

  void validate() const {
    if (!(tau_abs > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau_abs must be > 0");
    if (!(k_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "k_sigma must be >= 0");
    if (!std::isnan(tau_below) && !(tau_below >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "tau_below must be >= 0");
  }

  Label apply(double z, double mean, double variance) const {
    const double h = z - mean;
    if (h < -below()) return Label::NonGround;
    return h <= std::max(tau_abs, k_sigma * std::sqrt(std::max(variance, 0.0))) ? Label::Ground
                                                                                : Label::NonGround;
  }
};

struct PipelineConfig {
  GridConfig grid;
  Thresholds thresholds;
  double lambda = 1.0;  // Deming error-variance ratio
  Hyperparams theta0{1.0, 1.0, 0.05};
  bool optimize = true;
  OptimizerSettings optimizer;
  GpOptions gp;
  LabelRule label;
  std::size_t threads = 1;

  void validate() const {
    grid.validate();
    thresholds.validate();
    theta0.validate();
    label.validate();
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be > 0");
    if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
  }
};

struct StageTimings {
  double grid_ms = 0.0;
  double lines_ms = 0.0;
  double opt_ms = 0.0;
  double gp_ms = 0.0;
  double classify_ms = 0.0;

  double total_ms() const noexcept { return grid_ms + lines_ms + opt_ms + gp_ms + classify_ms; }
};

/// Everything fitted for one nonempty angular wedge.
struct SegmentModel {
  std::size_t segment = 0;
  double bin_width = 0.0;
  std::vector<GroundCandidate> candidates;
  std::vector<LineSegment> lines;
  std::vector<double> line_scale;  // length-scale per unit gain for queries in each line segment
  SegmentGP gp;

  /// Index of the line segment whose radial span contains r, else the
  /// nearest span (earlier span on ties).
  std::size_t line_for(double r) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const auto& l = lines[k];
      const double d = r < l.r_begin ? l.r_begin - r : (r > l.r_end ? r - l.r_end : 0.0);
      if (d < best_d) {
        best_d = d;
        best = k;
        if (d == 0.0) break;
      }
    }
    return best;
  }

  double query_scale(double r) const { return line_scale[line_for(r)]; }

  std::vector<std::size_t> critical_points() const { return critical_indices(lines); }
};

struct FrameModel {
  PipelineConfig config;
  std::vector<SegmentModel> segments;  // nonempty wedges, ascending id
  std::vector<std::size_t> lookup;     // wedge id -> index into segments (nearest nonempty for empty wedges)
  std::vector<bool> has_model;         // wedge id -> fitted directly
  Hyperparams theta;
  OptReport opt;
  StageTimings timings;
  std::size_t clipped = 0;

  const SegmentModel* find(std::size_t wedge) const {
    if (wedge >= has_model.size() || !has_model[wedge]) return nullptr;
    return &segments[lookup[wedge]];
  }

  const SegmentModel& model_for(std::size_t wedge) const { return segments[lookup.at(wedge)]; }
};

struct LabeledFrame {
  Frame frame;
  std::vector<Label> predictions;
  std::shared_ptr<const FrameModel> model;
  StageTimings timings;
};

namespace classifier_detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("[") + stage + "] " + e.what());
  }
}

/// Nearest wedge with a model, by circular index distance (lower id on ties).
inline std::vector<std::size_t> nearest_lookup(const std::vector<bool>& has_model,
                                               const std::vector<std::size_t>& index_of) {
  const std::size_t M = has_model.size();
  std::vector<std::size_t> out(M, 0);
  for (std::size_t m = 0; m < M; ++m) {
    if (has_model[m]) {
      out[m] = index_of[m];
      continue;
    }
    for (std::size_t d = 1; d <= M / 2 + 1; ++d) {
      const std::size_t lo = (m + M - d % M) % M;
      const std::size_t hi = (m + d) % M;
      const bool lo_ok = has_model[lo], hi_ok = has_model[hi];
      if (lo_ok || hi_ok) {
        std::size_t pick = lo_ok && hi_ok ? std::min(lo, hi) : (lo_ok ? lo : hi);
        out[m] = index_of[pick];
        break;
      }
    }
  }
  return out;
}

}  // namespace classifier_detail

/// Fits the per-wedge ground models of one frame: grid, candidates,
/// critical-point line segments, slopes, length-scales, shared
/// hyperparameters and segment GPs. Deterministic for a given frame and
/// config, whatever the thread count. `warm_start` replaces theta0.
inline FrameModel fit_frame(const Frame& frame, const PipelineConfig& cfg,
                            std::optional<Hyperparams> warm_start = std::nullopt) {
  using namespace classifier_detail;
  cfg.validate();
  if (frame.empty()) throw Error(ErrorKind::InvalidArgument, "cannot fit an empty frame");

  FrameModel model;
  model.config = cfg;
  const Hyperparams theta0 = warm_start.value_or(cfg.theta0);
  theta0.validate();

  auto t0 = Clock::now();
  const PolarGrid grid = staged("grid", [&] { return build_grid(frame, cfg.grid); });
  auto candidates = staged("grid", [&] { return extract_ground_candidates(grid); });
  model.clipped = grid.clipped;
  model.timings.grid_ms = ms_since(t0);

  const std::size_t M = cfg.grid.num_segments;
  model.has_model.assign(M, false);
  std::vector<std::size_t> index_of(M, 0);
  for (std::size_t m = 0; m < M; ++m) {
    if (candidates[m].empty()) continue;
    index_of[m] = model.segments.size();
    model.has_model[m] = true;
    SegmentModel sm;
    sm.segment = m;
    sm.bin_width = grid.segments[m].bin_width;
    sm.candidates = std::move(candidates[m]);
    model.segments.push_back(std::move(sm));
  }
  model.lookup = nearest_lookup(model.has_model, index_of);

  t0 = Clock::now();
  staged("lines", [&] {
    parallel_for(model.segments.size(), cfg.threads, [&](std::size_t i) {
      auto& sm = model.segments[i];
      const Thresholds th = cfg.thresholds.resolved_for(sm.bin_width);
      sm.lines = extract_line_segments(sm.candidates, th, cfg.lambda);
      assign_slopes(sm.lines, sm.candidates, th.g_d);
      sm.line_scale.resize(sm.lines.size());
      for (std::size_t k = 0; k < sm.lines.size(); ++k)
        sm.line_scale[k] = length_scale_factor(sm.lines[k].slope_g, sm.lines[k].rho_bar, th.g_d);
    });
    return 0;
  });
  model.timings.lines_ms = ms_since(t0);

  t0 = Clock::now();
  std::vector<SegmentGP> gps(model.segments.size());
  staged("gp", [&] {
    parallel_for(model.segments.size(), cfg.threads, [&](std::size_t i) {
      auto& sm = model.segments[i];
      std::vector<double> r, z, scale;
      for (auto& c : sm.candidates) {
        const double d = length_scale_factor(c.slope, c.rho_bar, cfg.thresholds.g_d);
        c.length_scale = theta0.a * d;
        r.push_back(c.r);
        z.push_back(c.z);
        scale.push_back(d);
      }
      gps[i] = SegmentGP::build(sm.segment, std::move(r), std::move(z), std::move(scale), theta0, cfg.gp);
    });
    return 0;
  });
  model.timings.gp_ms = ms_since(t0);

  t0 = Clock::now();
  if (cfg.optimize) {
    OptimizerSettings settings = cfg.optimizer;
    settings.threads = cfg.threads;
    model.opt = staged("opt", [&] { return optimize(gps, theta0, settings); });
  } else {
    model.opt.theta = theta0;
    model.opt.converged = true;
    model.opt.initial_J = model.opt.final_J = staged("opt", [&] {
      return hyperopt_detail::sum_evidence(gps, cfg.threads);
    });
    model.opt.trace = {model.opt.initial_J};
  }
  model.theta = model.opt.theta;
  model.timings.opt_ms = ms_since(t0);

  for (std::size_t i = 0; i < model.segments.size(); ++i) {
    auto& sm = model.segments[i];
    sm.gp = std::move(gps[i]);
    for (std::size_t k = 0; k < sm.candidates.size(); ++k)
      sm.candidates[k].length_scale = sm.gp.length_scale_at(k);
  }
  return model;
}

/// Prediction at a raw point's range with the query length-scale rule:
/// the point inherits g and density of the line segment covering its range.
inline Prediction predict_at(const SegmentModel& sm, const Hyperparams& theta, double r) {
  return sm.gp.predict(r, theta.a * sm.query_scale(r));
}

/// Labels every point of `frame` against a fitted model. Points outside the
/// grid's clip radius are still labeled by their wedge's model.
inline LabeledFrame classify_frame(const Frame& frame, std::shared_ptr<const FrameModel> model) {
  using namespace classifier_detail;
  if (!model || model->segments.empty())
    throw Error(ErrorKind::InvalidArgument, "classify_frame needs a fitted model");
  const auto t0 = Clock::now();
  const auto& cfg = model->config;
  const auto& rule = cfg.label;
  const double a = model->theta.a;
  const std::size_t M = cfg.grid.num_segments;

  LabeledFrame out;
  out.predictions.assign(frame.size(), Label::NonGround);
  parallel_for(frame.size(), cfg.threads, [&](std::size_t i) {
    const auto& p = frame.points[i];
    const auto& sm = model->model_for(segment_index(p.x, p.y, M));
    const double r = radial_range(p.x, p.y);
    const double L_star = a * sm.query_scale(r);
    const double mu = sm.gp.predict_mean(r, L_star);
    const double h = p.z - mu;
    Label label = Label::NonGround;
    if (h >= -rule.below()) {
      if (h <= rule.tau_abs)
        label = Label::Ground;
      else if (rule.k_sigma > 0.0)
        label = rule.apply(p.z, mu, sm.gp.predict(r, L_star).variance);
    }
    out.predictions[i] = label;
  });
  out.timings = model->timings;
  out.timings.classify_ms = ms_since(t0);
  out.frame = frame;
  out.model = std::move(model);
  return out;
}

/// fit_frame followed by classify_frame.
inline LabeledFrame segment_frame(const Frame& frame, const PipelineConfig& cfg,
                                  std::optional<Hyperparams> warm_start = std::nullopt) {
  auto model = std::make_shared<const FrameModel>(fit_frame(frame, cfg, warm_start));
  return classify_frame(frame, std::move(model));
}

}  // namespace gpground
