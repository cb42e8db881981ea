#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "error.hpp"
#include "polar_grid.hpp"

namespace gpground {

/// Frame-wide hyperparameters shared by every segment GP.
struct Hyperparams {
  double sigma_f = 1.0;   // signal std [m]
  double a = 1.0;         // length-scale gain [m]
  double sigma_n = 0.05;  // noise std [m]

  void validate() const {
    if (!(sigma_f > 0.0) || !(a > 0.0) || !(sigma_n > 0.0) || !std::isfinite(sigma_f) ||
        !std::isfinite(a) || !std::isfinite(sigma_n))
      throw Error(ErrorKind::InvalidArgument, "hyperparameters must be finite and > 0");
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Length-scale per unit gain, d such that L = a * d:
///   d = log(1/g) / rho   when g >= g_d
///   d = log(1/g_d)       otherwise (the density term is absent in this branch).
inline double length_scale_factor(double g, double rho, double g_d) {
  if (!(g > 0.0) || !(g < 1.0))
    throw Error(ErrorKind::Domain, "slope g must lie in (0, 1), got " + std::to_string(g));
  if (!(rho > 0.0))
    throw Error(ErrorKind::Domain, "density must be > 0, got " + std::to_string(rho));
  if (!(g_d > 0.0) || !(g_d < 1.0)) throw Error(ErrorKind::Domain, "g_d must lie in (0, 1)");
  if (g >= g_d) return std::log(1.0 / g) / rho;
  return std::log(1.0 / g_d);
}

inline double length_scale(double g, double rho, const Hyperparams& hp, double g_d) {
  return hp.a * length_scale_factor(g, rho, g_d);
}

/// Non-stationary covariance with per-point length-scales:
///   sf^2 (Li^2)^(1/4) (Lj^2)^(1/4) ((Li^2 + Lj^2)/2)^(-1/2) exp(-(ri - rj)^2 / (Li^2 + Lj^2))
inline double kernel(double r_i, double r_j, double L_i, double L_j, double sigma_f) {
  const double s = L_i * L_i + L_j * L_j;
  const double prefactor = std::sqrt(2.0 * L_i * L_j / s);
  const double dr = r_i - r_j;
  return sigma_f * sigma_f * prefactor * std::exp(-dr * dr / s);
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct GpOptions {
  bool demean = false;  // subtract the mean target before fitting
};

/// d log p(z) / d log(theta) for one segment.
struct EvidenceGradient {
  double log_sigma_f = 0.0;
  double log_a = 0.0;
  double log_sigma_n = 0.0;
};

/// Per-segment GP: inputs r, targets z, length-scales L = a * scale, the
/// matrix A = K + sigma_n^2 I (+ jitter) and its Cholesky factor.
/// Immutable once built; rebuild() produces a new model under other
/// hyperparameters.
class SegmentGP {
 public:
  static constexpr double kJitterStart = 1e-8;  // times sigma_f^2
  static constexpr int kJitterEscalations = 3;  // each x10

  SegmentGP() = default;

  static SegmentGP build(std::size_t segment, std::vector<double> r, std::vector<double> z,
                         std::vector<double> scale, const Hyperparams& hp, GpOptions opts = {}) {
    if (r.empty()) throw Error(ErrorKind::InsufficientData, "segment GP needs at least one input");
    if (r.size() != z.size() || r.size() != scale.size())
      throw Error(ErrorKind::LengthMismatch, "segment GP input/target/scale sizes differ");
    if (!(hp.sigma_f > 0.0) || !(hp.a > 0.0) || !(hp.sigma_n >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "segment GP needs sigma_f, a > 0 and sigma_n >= 0");
    for (double s : scale)
      if (!(s > 0.0) || !std::isfinite(s))
        throw Error(ErrorKind::Domain, "length-scales must be finite and > 0");

    SegmentGP gp;
    gp.segment_ = segment;
    gp.hp_ = hp;
    gp.opts_ = opts;
    gp.r_ = std::move(r);
    gp.z_ = std::move(z);
    gp.scale_ = std::move(scale);
    gp.factorize();
    return gp;
  }

  SegmentGP rebuild(const Hyperparams& hp) const {
    return build(segment_, r_, z_, scale_, hp, opts_);
  }

  std::size_t segment() const noexcept { return segment_; }
  std::size_t size() const noexcept { return r_.size(); }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const GpOptions& options() const noexcept { return opts_; }
  std::span<const double> inputs() const noexcept { return r_; }
  std::span<const double> targets() const noexcept { return z_; }
  std::span<const double> scales() const noexcept { return scale_; }
  double length_scale_at(std::size_t i) const { return hp_.a * scale_.at(i); }
  double offset() const noexcept { return offset_; }
  double jitter() const noexcept { return jitter_; }
  const Eigen::MatrixXd& matrix() const noexcept { return A_; }
  Eigen::MatrixXd cholesky_factor() const { return llt_.matrixL(); }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }

  std::vector<double> length_scales() const {
    std::vector<double> L(scale_.size());
    for (std::size_t i = 0; i < L.size(); ++i) L[i] = hp_.a * scale_[i];
    return L;
  }

  double predict_mean(double r_star, double L_star) const {
    double mu = 0.0;
    for (std::size_t i = 0; i < r_.size(); ++i)
      mu += kernel(r_star, r_[i], L_star, hp_.a * scale_[i], hp_.sigma_f) * alpha_[static_cast<Eigen::Index>(i)];
    return mu + offset_;
  }

  Prediction predict(double r_star, double L_star) const {
    const auto n = static_cast<Eigen::Index>(r_.size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i)
      k[i] = kernel(r_star, r_[static_cast<std::size_t>(i)], L_star,
                    hp_.a * scale_[static_cast<std::size_t>(i)], hp_.sigma_f);
    Prediction p;
    p.mean = k.dot(alpha_) + offset_;
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    const double prior = kernel(r_star, r_star, L_star, L_star, hp_.sigma_f);
    p.variance = std::max(0.0, prior - v.squaredNorm());
    return p;
  }

  /// -1/2 z^T A^-1 z - 1/2 log|A| - n/2 log(2 pi), from the stored factor.
  double log_evidence() const {
    const auto n = static_cast<double>(r_.size());
    const Eigen::VectorXd y = centered_targets();
    const double data_fit = y.dot(alpha_);
    const double log_det = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    return -0.5 * data_fit - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
  }

  /// Analytic gradient of log_evidence in log-hyperparameter space:
  ///   1/2 alpha^T (dA) alpha - 1/2 tr(A^-1 dA).
  EvidenceGradient evidence_gradient() const {
    const auto n = static_cast<Eigen::Index>(r_.size());
    Eigen::MatrixXd Linv = Eigen::MatrixXd::Identity(n, n);
    llt_.matrixL().solveInPlace(Linv);
    Eigen::MatrixXd Ainv(n, n);
    Ainv.setZero();
    Ainv.selfadjointView<Eigen::Lower>().rankUpdate(Linv.transpose());
    EvidenceGradient g;
    const double sf2 = hp_.sigma_f * hp_.sigma_f;
    double dsf = 0.0, da = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double Li = hp_.a * scale_[static_cast<std::size_t>(i)];
      dsf += (alpha_[i] * alpha_[i] - Ainv(i, i)) * 2.0 * sf2;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double Lj = hp_.a * scale_[static_cast<std::size_t>(j)];
        const double s = Li * Li + Lj * Lj;
        const double dr = r_[static_cast<std::size_t>(i)] - r_[static_cast<std::size_t>(j)];
        const double k = A_(i, j);
        // dK/dlog(sigma_f) = 2K; scaling every L by a leaves the prefactor
        // unchanged, so dK/dlog(a) = K * 2 dr^2 / s.
        const double w = 2.0 * (alpha_[i] * alpha_[j] - Ainv(i, j));
        dsf += w * 2.0 * k;
        da += w * k * 2.0 * dr * dr / s;
      }
    }
    // Jitter is proportional to sigma_f^2 and moves with it.
    const double alpha_sq = alpha_.squaredNorm();
    const double trace = Ainv.trace();
    dsf += 2.0 * jitter_ * (alpha_sq - trace);
    g.log_sigma_f = 0.5 * dsf;
    g.log_a = 0.5 * da;
    const double sn2 = hp_.sigma_n * hp_.sigma_n;
    g.log_sigma_n = 0.5 * 2.0 * sn2 * (alpha_sq - trace);
    return g;
  }

 private:
  Eigen::VectorXd centered_targets() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(z_.size()));
    for (std::size_t i = 0; i < z_.size(); ++i) y[static_cast<Eigen::Index>(i)] = z_[i] - offset_;
    return y;
  }

  void factorize() {
    const auto n = static_cast<Eigen::Index>(r_.size());
    offset_ = 0.0;
    if (opts_.demean) {
      for (double v : z_) offset_ += v;
      offset_ /= static_cast<double>(z_.size());
    }
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double Li = hp_.a * scale_[static_cast<std::size_t>(i)];
      K(i, i) = hp_.sigma_f * hp_.sigma_f;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double Lj = hp_.a * scale_[static_cast<std::size_t>(j)];
        const double k = kernel(r_[static_cast<std::size_t>(i)], r_[static_cast<std::size_t>(j)], Li, Lj, hp_.sigma_f);
        K(i, j) = k;
        K(j, i) = k;
      }
    }
    const double noise = hp_.sigma_n * hp_.sigma_n;
    jitter_ = 0.0;
    double next_jitter = kJitterStart * hp_.sigma_f * hp_.sigma_f;
    for (int attempt = 0; attempt <= kJitterEscalations + 1; ++attempt) {
      A_ = K;
      A_.diagonal().array() += noise + jitter_;
      llt_.compute(A_);
      if (llt_.info() == Eigen::Success) {
        alpha_ = llt_.solve(centered_targets());
        return;
      }
      jitter_ = next_jitter;
      next_jitter *= 10.0;
    }
    throw Error(ErrorKind::IllConditioned,
                "covariance of segment " + std::to_string(segment_) +
                    " is not positive definite after jitter escalation");
  }

  std::size_t segment_ = 0;
  Hyperparams hp_;
  GpOptions opts_;
  std::vector<double> r_;
  std::vector<double> z_;
  std::vector<double> scale_;
  double offset_ = 0.0;
  double jitter_ = 0.0;
  Eigen::MatrixXd A_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// Builds a segment GP from candidates whose `length_scale` is already set
/// under `hp`.
inline SegmentGP build_segment_gp(std::span<const GroundCandidate> cands, const Hyperparams& hp,
                                  GpOptions opts = {}) {
  if (cands.empty()) throw Error(ErrorKind::InsufficientData, "segment GP needs at least one candidate");
  std::vector<double> r, z, scale;
  r.reserve(cands.size());
  z.reserve(cands.size());
  scale.reserve(cands.size());
  for (const auto& c : cands) {
    if (!(c.length_scale > 0.0))
      throw Error(ErrorKind::Domain, "candidate length-scale not assigned");
    r.push_back(c.r);
    z.push_back(c.z);
    scale.push_back(c.length_scale / hp.a);
  }
  return SegmentGP::build(cands.front().segment, std::move(r), std::move(z), std::move(scale), hp, opts);
}

}  // namespace gpground
