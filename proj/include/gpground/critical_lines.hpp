#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "line_fit.hpp"
#include "polar_grid.hpp"

namespace gpground {

/// Lower clamp on candidate slopes so log(1/g) stays finite.
inline constexpr double kSlopeFloor = 1e-4;
/// Upper clamp: slopes at or above 45 degrees collapse to the minimal
/// length-scale.
inline constexpr double kSlopeCeiling = 1.0 - 1e-3;

struct Thresholds {
  double zeta_b = 0.30;     // steepest slope still compatible with ground
  double delta = 0.1;       // max perpendicular residual of a new candidate [m]
  double zeta_m = 0.0;      // max radial gap [m]; <= 0 means 3 x the wedge's bin width
  double rho_jump = 10.0;   // max density ratio between successive candidates
  double g_d = 0.05;        // slope below which length-scales stop growing
  std::size_t seed_size = 3;

  void validate() const {
    if (!(zeta_b > 0.0) || !(delta > 0.0) || !(rho_jump > 0.0) || !(g_d > 0.0) || seed_size < 1)
      throw Error(ErrorKind::InvalidArgument, "line thresholds must be strictly positive");
    if (!(g_d < 1.0)) throw Error(ErrorKind::InvalidArgument, "g_d must be < 1");
    if (rho_jump < 1.0) throw Error(ErrorKind::InvalidArgument, "rho_jump must be >= 1");
  }

  /// Copy with the automatic gap threshold resolved for one wedge.
  Thresholds resolved_for(double bin_width) const {
    Thresholds t = *this;
    if (!(t.zeta_m > 0.0)) {
      t.zeta_m = 3.0 * bin_width;
      if (!(t.zeta_m > 0.0)) t.zeta_m = std::numeric_limits<double>::infinity();
    }
    return t;
  }
};

enum CriticalReason : unsigned {
  kReasonSlope = 1u << 0,      // run would turn obstacle-steep
  kReasonResidual = 1u << 1,   // new candidate too far from the current line
  kReasonGap = 1u << 2,        // radial breakpoint
  kReasonDensity = 1u << 3,    // sharp change in vertical density
  kReasonAmbiguous = 1u << 4,  // extended fit has no defined orientation
};

struct CriticalCheck {
  bool critical = false;
  unsigned reasons = 0;

  bool has(CriticalReason r) const noexcept { return (reasons & r) != 0; }
};

inline std::string describe_reasons(unsigned reasons) {
  std::string s;
  auto add = [&](unsigned bit, const char* name) {
    if (reasons & bit) {
      if (!s.empty()) s += '+';
      s += name;
    }
  };
  add(kReasonSlope, "slope");
  add(kReasonResidual, "residual");
  add(kReasonGap, "gap");
  add(kReasonDensity, "density");
  add(kReasonAmbiguous, "ambiguous");
  return s;
}

/// Decides whether appending `new_pt` to the run fitted by `current` would
/// change the run's behaviour. `extended` is the fit with `new_pt` included,
/// or nullopt when that fit had no defined orientation.
inline CriticalCheck is_critical(const LineModel& current, const std::optional<LineModel>& extended,
                                 RZ new_pt, RZ prev_pt, double rho_new, double rho_prev,
                                 const Thresholds& th) {
  CriticalCheck out;
  if (!extended) {
    out.reasons |= kReasonAmbiguous;
  } else if (std::abs(extended->slope) > th.zeta_b && std::abs(current.slope) <= th.zeta_b) {
    out.reasons |= kReasonSlope;
  }
  if (point_line_distance(new_pt, current) > th.delta) out.reasons |= kReasonResidual;
  if (th.zeta_m > 0.0 && new_pt.r - prev_pt.r > th.zeta_m) out.reasons |= kReasonGap;
  if (rho_prev > 0.0 && rho_new > 0.0) {
    const double ratio = rho_new / rho_prev;
    if (ratio > th.rho_jump || ratio < 1.0 / th.rho_jump) out.reasons |= kReasonDensity;
  }
  out.critical = out.reasons != 0;
  return out;
}

/// Run of candidates [i_start, i_end] (inclusive) summarized by one line.
struct LineSegment {
  std::size_t segment = 0;
  std::size_t i_start = 0;
  std::size_t i_end = 0;
  LineModel line;
  bool starts_at_critical = false;
  bool ends_at_critical = false;
  bool degenerate = false;  // shorter than a seed; single-point runs carry a flat line
  bool ambiguous = false;   // no defined orientation; handled as obstacle-steep
  unsigned end_reasons = 0;
  double r_begin = 0.0;
  double r_end = 0.0;
  double rho_bar = 0.0;  // mean density of the member candidates
  double slope_g = std::numeric_limits<double>::quiet_NaN();  // set by assign_slopes

  std::size_t size() const noexcept { return i_end - i_start + 1; }
  bool contains(std::size_t i) const noexcept { return i >= i_start && i <= i_end; }
};

namespace lines_detail {

inline std::optional<LineModel> try_fit(const Moments& m, double lambda) {
  try {
    return deming_fit(m, lambda);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::AmbiguousOrientation) return std::nullopt;
    throw;
  }
}

inline LineModel flat_line(double z) {
  LineModel l;
  l.intercept = z;
  l.slope = 0.0;
  l.n_pts = 1;
  return l;
}

}  // namespace lines_detail

/// Splits one wedge's range-sorted candidates into line segments delimited
/// by critical points. Each run starts from scratch: a seed of `seed_size`
/// candidates is fitted, then candidates are appended while the extended fit
/// is not critical. `th.zeta_m` must already be resolved (see
/// Thresholds::resolved_for).
inline std::vector<LineSegment> extract_line_segments(std::span<const GroundCandidate> cands,
                                                      const Thresholds& th, double lambda) {
  th.validate();
  std::vector<LineSegment> out;
  const std::size_t n = cands.size();
  if (n == 0) return out;
  for (std::size_t i = 1; i < n; ++i)
    if (cands[i].r < cands[i - 1].r)
      throw Error(ErrorKind::InvalidArgument, "candidates must be sorted by range");

  auto pt = [&](std::size_t i) { return RZ{cands[i].r, cands[i].z}; };
  auto finish = [&](LineSegment& s) {
    s.segment = cands[s.i_start].segment;
    s.r_begin = cands[s.i_start].r;
    s.r_end = cands[s.i_end].r;
    double rho = 0.0;
    for (std::size_t i = s.i_start; i <= s.i_end; ++i) rho += cands[i].rho_bar;
    s.rho_bar = rho / static_cast<double>(s.size());
    out.push_back(s);
  };

  const std::size_t seed = std::max<std::size_t>(th.seed_size, 2);
  bool prev_critical = false;
  std::size_t start = 0;
  while (start < n) {
    LineSegment seg;
    seg.i_start = start;
    seg.starts_at_critical = prev_critical;
    std::size_t end = std::min(start + seed - 1, n - 1);
    seg.degenerate = (end - start + 1) < th.seed_size || start == end;

    if (start == end) {
      seg.i_end = end;
      seg.line = lines_detail::flat_line(cands[start].z);
      finish(seg);
      break;
    }

    Moments moments;
    for (std::size_t i = start; i <= end; ++i) moments.add(pt(i));
    auto current = lines_detail::try_fit(moments, lambda);
    if (!current) {
      // The caller treats an orientation-free run as critical.
      seg.i_end = end;
      seg.ambiguous = true;
      seg.line = lines_detail::flat_line(moments.mean_z());
      seg.ends_at_critical = end + 1 < n;
      seg.end_reasons = kReasonAmbiguous;
      prev_critical = seg.ends_at_critical;
      finish(seg);
      start = end + 1;
      continue;
    }

    bool closed = false;
    while (end + 1 < n) {
      Moments next = moments;
      next.add(pt(end + 1));
      const auto extended = lines_detail::try_fit(next, lambda);
      const auto check = is_critical(*current, extended, pt(end + 1), pt(end),
                                     cands[end + 1].rho_bar, cands[end].rho_bar, th);
      if (check.critical) {
        closed = true;
        seg.end_reasons = check.reasons;
        break;
      }
      moments = next;
      current = extended;
      ++end;
    }
    seg.i_end = end;
    seg.line = *current;
    seg.ends_at_critical = closed;
    prev_critical = closed;
    finish(seg);
    start = end + 1;
  }
  return out;
}

/// Sets every candidate's slope g from its line segment: |beta| clamped to
/// [kSlopeFloor, kSlopeCeiling]. Single-point runs inherit the previous
/// run's g (g_d for the first run); orientation-free runs are steep.
inline void assign_slopes(std::span<LineSegment> segments, std::span<GroundCandidate> cands,
                          double g_d) {
  double previous = g_d;
  std::size_t covered = 0;
  for (auto& s : segments) {
    if (s.i_end >= cands.size() || s.i_start > s.i_end)
      throw Error(ErrorKind::InvalidArgument, "line segment outside the candidate list");
    double g = 0.0;
    if (s.ambiguous)
      g = kSlopeCeiling;
    else if (s.size() == 1)
      g = previous;
    else
      g = std::clamp(std::abs(s.line.slope), kSlopeFloor, kSlopeCeiling);
    g = std::clamp(g, kSlopeFloor, kSlopeCeiling);
    s.slope_g = g;
    for (std::size_t i = s.i_start; i <= s.i_end; ++i) cands[i].slope = g;
    covered += s.size();
    previous = g;
  }
  if (covered != cands.size())
    throw Error(ErrorKind::InvalidArgument, "line segments do not tile the candidate list");
}

/// Indices of candidates that close a run at a critical point.
inline std::vector<std::size_t> critical_indices(std::span<const LineSegment> segments) {
  std::vector<std::size_t> idx;
  for (const auto& s : segments)
    if (s.ends_at_critical) idx.push_back(s.i_end);
  return idx;
}

}  // namespace gpground
