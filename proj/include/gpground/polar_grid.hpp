#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace gpground {

struct GridConfig {
  std::size_t num_segments = 180;   // M, angular wedges
  std::size_t num_bins = 160;       // N, radial bins per wedge
  std::size_t vertical_slices = 10; // j, slices used for the density statistic
  std::optional<double> r_min;      // optional clip radius (inclusive)
  std::optional<double> r_max = 80.0;

  void validate() const {
    if (num_segments < 1 || num_bins < 1 || vertical_slices < 1)
      throw Error(ErrorKind::InvalidArgument, "grid counts must all be >= 1");
    if (r_min && r_max && *r_min > *r_max)
      throw Error(ErrorKind::InvalidArgument, "grid r_min exceeds r_max");
  }
};

/// Height span below which a bin counts as vertically degenerate.
inline constexpr double kDensityHeightFloor = 0.01;
/// Radial width used in place of a zero-width bin.
inline constexpr double kDensityWidthFloor = 0.01;

struct Bin {
  std::size_t segment = 0;
  std::size_t bin = 0;
  double r_lo = 0.0;
  double r_hi = 0.0;
  std::vector<RZ> points;
  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  double rho_bar = 0.0;

  bool empty() const noexcept { return points.empty(); }
  double width() const noexcept { return r_hi - r_lo; }
};

struct SegmentBins {
  double r_lo = 0.0;       // radial extent of the wedge's (unclipped) points
  double r_hi = 0.0;
  double bin_width = 0.0;
  std::vector<Bin> bins;   // always num_bins entries, empty ones included

  bool empty() const noexcept {
    return std::all_of(bins.begin(), bins.end(), [](const Bin& b) { return b.empty(); });
  }
};

struct PolarGrid {
  GridConfig config;
  std::vector<SegmentBins> segments;
  std::size_t clipped = 0;

  std::size_t stored_points() const noexcept {
    std::size_t n = 0;
    for (const auto& s : segments)
      for (const auto& b : s.bins) n += b.points.size();
    return n;
  }
};

struct GroundCandidate {
  double r = 0.0;
  double z = 0.0;
  std::size_t segment = 0;
  std::size_t bin = 0;
  double rho_bar = 0.0;
  double slope = std::numeric_limits<double>::quiet_NaN();         // g, set by assign_slopes
  double length_scale = std::numeric_limits<double>::quiet_NaN();  // L, set from hyperparameters
};

inline double radial_range(double x, double y) { return std::hypot(x, y); }

/// Angular wedge of (x, y): floor(atan2 mapped to [0, 2pi) / (2pi / M)).
inline std::size_t segment_index(double x, double y, std::size_t num_segments) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double angle = std::atan2(y, x);
  if (angle < 0.0) angle += two_pi;
  auto idx = static_cast<std::size_t>(std::floor(angle / (two_pi / static_cast<double>(num_segments))));
  return std::min(idx, num_segments - 1);
}

/// Vertical density: the bin's [z_min, z_max] is cut into `slices`
/// equal slices, each slice's count is divided by its (r, z)-plane area and
/// the slice densities are averaged. Spans thinner than
/// `kDensityHeightFloor` use the floor as the span.
inline double vertical_density(const Bin& bin, std::size_t slices) {
  if (bin.empty())
    throw Error(ErrorKind::Domain, "vertical density is undefined for an empty bin");
  if (slices < 1) throw Error(ErrorKind::InvalidArgument, "vertical slice count must be >= 1");

  const double width = std::max(bin.width(), kDensityWidthFloor);
  const double span = bin.z_max - bin.z_min;
  const auto count = static_cast<double>(bin.points.size());
  if (span < kDensityHeightFloor) return count / (kDensityHeightFloor * width);

  const double slice_h = span / static_cast<double>(slices);
  std::vector<std::size_t> counts(slices, 0);
  for (const auto& p : bin.points) {
    auto k = static_cast<std::size_t>(std::floor((p.z - bin.z_min) / slice_h));
    ++counts[std::min(k, slices - 1)];
  }
  const double slice_area = slice_h * width;
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c) / slice_area;
  return sum / static_cast<double>(slices);
}

/// Builds the polar grid. Each wedge sizes its own N equal-width bins over
/// the radial extent of its own points; intervals are [lo, hi) with the
/// last bin closed.
inline PolarGrid build_grid(const Frame& frame, const GridConfig& cfg) {
  cfg.validate();
  if (frame.empty()) throw Error(ErrorKind::InvalidArgument, "cannot grid an empty frame");

  const std::size_t M = cfg.num_segments;
  const std::size_t N = cfg.num_bins;

  struct Mapped {
    std::size_t segment;
    double r;
    double z;
  };
  std::vector<Mapped> mapped;
  mapped.reserve(frame.size());

  PolarGrid grid;
  grid.config = cfg;
  grid.segments.resize(M);
  std::vector<double> seg_lo(M, std::numeric_limits<double>::infinity());
  std::vector<double> seg_hi(M, -std::numeric_limits<double>::infinity());

  for (const auto& p : frame.points) {
    const double r = radial_range(p.x, p.y);
    if ((cfg.r_min && r < *cfg.r_min) || (cfg.r_max && r > *cfg.r_max)) {
      ++grid.clipped;
      continue;
    }
    const auto m = segment_index(p.x, p.y, M);
    mapped.push_back({m, r, p.z});
    seg_lo[m] = std::min(seg_lo[m], r);
    seg_hi[m] = std::max(seg_hi[m], r);
  }
  if (mapped.empty())
    throw Error(ErrorKind::EmptyGrid, "every point was clipped by the grid radius limits");

  for (std::size_t m = 0; m < M; ++m) {
    auto& seg = grid.segments[m];
    seg.bins.resize(N);
    const bool populated = seg_lo[m] <= seg_hi[m];
    seg.r_lo = populated ? seg_lo[m] : 0.0;
    seg.r_hi = populated ? seg_hi[m] : 0.0;
    seg.bin_width = (seg.r_hi - seg.r_lo) / static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n) {
      auto& b = seg.bins[n];
      b.segment = m;
      b.bin = n;
      b.r_lo = seg.r_lo + static_cast<double>(n) * seg.bin_width;
      b.r_hi = (n + 1 == N) ? seg.r_hi : seg.r_lo + static_cast<double>(n + 1) * seg.bin_width;
    }
  }

  auto bin_of = [&](const SegmentBins& seg, double r) -> std::size_t {
    if (seg.bin_width <= 0.0) return 0;
    auto n = static_cast<std::size_t>(
        std::clamp(std::floor((r - seg.r_lo) / seg.bin_width), 0.0, static_cast<double>(N - 1)));
    // Settle floating-point disagreements with the stored boundaries.
    while (n > 0 && r < seg.bins[n].r_lo) --n;
    while (n + 1 < N && r >= seg.bins[n + 1].r_lo) ++n;
    return n;
  };

  std::vector<std::size_t> bin_index(mapped.size());
  std::vector<std::size_t> counts(M * N, 0);
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    bin_index[i] = bin_of(grid.segments[mapped[i].segment], mapped[i].r);
    ++counts[mapped[i].segment * N + bin_index[i]];
  }
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n < N; ++n)
      grid.segments[m].bins[n].points.reserve(counts[m * N + n]);

  for (std::size_t i = 0; i < mapped.size(); ++i) {
    auto& b = grid.segments[mapped[i].segment].bins[bin_index[i]];
    b.points.push_back({mapped[i].r, mapped[i].z});
    b.z_min = std::min(b.z_min, mapped[i].z);
    b.z_max = std::max(b.z_max, mapped[i].z);
  }

  for (auto& seg : grid.segments)
    for (auto& b : seg.bins)
      if (!b.empty()) b.rho_bar = vertical_density(b, cfg.vertical_slices);
  return grid;
}

/// Lowest point of one bin; ties go to the smaller range, then to the
/// earlier point.
inline RZ lowest_point(const Bin& bin) {
  if (bin.empty()) throw Error(ErrorKind::Domain, "empty bin has no lowest point");
  RZ best = bin.points.front();
  for (const auto& p : bin.points)
    if (p.z < best.z || (p.z == best.z && p.r < best.r)) best = p;
  return best;
}

/// One candidate per nonempty bin, per wedge, sorted by range.
inline std::vector<std::vector<GroundCandidate>> extract_ground_candidates(const PolarGrid& grid) {
  std::vector<std::vector<GroundCandidate>> out(grid.segments.size());
  for (std::size_t m = 0; m < grid.segments.size(); ++m) {
    auto& list = out[m];
    for (const auto& b : grid.segments[m].bins) {
      if (b.empty()) continue;
      const auto low = lowest_point(b);
      GroundCandidate c;
      c.r = low.r;
      c.z = low.z;
      c.segment = b.segment;
      c.bin = b.bin;
      c.rho_bar = b.rho_bar;
      list.push_back(c);
    }
    // Bins are ordered by range already; this keeps the contract explicit.
    std::stable_sort(list.begin(), list.end(),
                     [](const GroundCandidate& a, const GroundCandidate& b) { return a.r < b.r; });
  }
  return out;
}

}  // namespace gpground
