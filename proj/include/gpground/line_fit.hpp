#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "error.hpp"
#include "types.hpp"

namespace gpground {

/// Fitted line z = intercept + slope * r. `lambda` is the error-variance
/// ratio var(e_z) / var(e_r) the fit assumed; `sigma2` is the recovered
/// range-error variance (diagnostic only).
struct LineModel {
  double intercept = 0.0;
  double slope = 0.0;
  double lambda = 1.0;
  double sigma2 = 0.0;
  std::size_t n_pts = 0;

  double at(double r) const noexcept { return intercept + slope * r; }
};

/// Running centered second moments (Welford). Adding points one at a time
/// gives the same fit as a batch pass over the same points.
class Moments {
 public:
  void add(RZ p) noexcept {
    ++n_;
    const double n = static_cast<double>(n_);
    const double dr = p.r - mean_r_;
    const double dz = p.z - mean_z_;
    mean_r_ += dr / n;
    mean_z_ += dz / n;
    m_rr_ += dr * (p.r - mean_r_);
    m_zz_ += dz * (p.z - mean_z_);
    m_rz_ += dr * (p.z - mean_z_);
  }

  std::size_t count() const noexcept { return n_; }
  double mean_r() const noexcept { return mean_r_; }
  double mean_z() const noexcept { return mean_z_; }
  double s_rr() const noexcept { return n_ ? m_rr_ / static_cast<double>(n_) : 0.0; }
  double s_zz() const noexcept { return n_ ? m_zz_ / static_cast<double>(n_) : 0.0; }
  double s_rz() const noexcept { return n_ ? m_rz_ / static_cast<double>(n_) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_r_ = 0.0;
  double mean_z_ = 0.0;
  double m_rr_ = 0.0;
  double m_zz_ = 0.0;
  double m_rz_ = 0.0;
};

/// Maximum-likelihood Deming fit from accumulated moments. Throws
/// AmbiguousOrientation when the cross moment vanishes and the z spread is
/// not smaller than lambda times the r spread (vertical or isotropic cloud).
inline LineModel deming_fit(const Moments& m, double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "Deming lambda must be > 0");
  if (m.count() < 2) throw Error(ErrorKind::InsufficientData, "Deming fit needs at least 2 points");

  const double srr = m.s_rr();
  const double szz = m.s_zz();
  double srz = m.s_rz();
  const double scale = srr + szz;
  if (scale <= 0.0)
    throw Error(ErrorKind::AmbiguousOrientation, "all points coincide; line orientation undefined");
  if (std::abs(srz) <= 1e-12 * scale) srz = 0.0;

  const double d = szz - lambda * srr;
  const double root = std::sqrt(d * d + 4.0 * lambda * srz * srz);
  double slope = 0.0;
  if (d <= 0.0) {
    // Rationalized positive root; stable when d is large and negative.
    const double denom = root - d;
    if (denom <= 0.0)
      throw Error(ErrorKind::AmbiguousOrientation, "isotropic point cloud; line orientation undefined");
    slope = 2.0 * lambda * srz / denom;
  } else {
    if (srz == 0.0)
      throw Error(ErrorKind::AmbiguousOrientation, "vertical point cloud; slope undefined");
    slope = (d + root) / (2.0 * srz);
  }

  LineModel line;
  line.slope = slope;
  line.intercept = m.mean_z() - slope * m.mean_r();
  line.lambda = lambda;
  line.n_pts = m.count();
  // E[(z - a - b r)^2] = sigma^2 (lambda + b^2) under the error model.
  const double resid = szz - 2.0 * slope * srz + slope * slope * srr;
  line.sigma2 = std::max(0.0, resid / (lambda + slope * slope));
  return line;
}

inline LineModel deming_fit(std::span<const RZ> pts, double lambda = 1.0) {
  Moments m;
  for (const auto& p : pts) m.add(p);
  return deming_fit(m, lambda);
}

/// Perpendicular distance from p to the line (not the vertical residual).
inline double point_line_distance(RZ p, const LineModel& line) {
  return std::abs(p.z - line.intercept - line.slope * p.r) / std::sqrt(1.0 + line.slope * line.slope);
}

}  // namespace gpground
