#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "gp_core.hpp"
#include "parallel.hpp"

namespace gpground {

/// Independent log-normal prior on each hyperparameter. Disabled by default,
/// in which case the optimizer maximizes the marginal likelihood alone.
struct LogNormalPrior {
  bool enabled = false;
  Hyperparams median{1.0, 1.0, 0.05};
  double log_sd = 2.0;

  double log_density(const Hyperparams& hp) const {
    if (!enabled) return 0.0;
    const double u[3] = {std::log(hp.sigma_f / median.sigma_f), std::log(hp.a / median.a),
                         std::log(hp.sigma_n / median.sigma_n)};
    double s = 0.0;
    for (double v : u) s += -0.5 * (v / log_sd) * (v / log_sd);
    return s;
  }

  std::array<double, 3> gradient(const Hyperparams& hp) const {
    if (!enabled) return {0.0, 0.0, 0.0};
    const double v = log_sd * log_sd;
    return {-std::log(hp.sigma_f / median.sigma_f) / v, -std::log(hp.a / median.a) / v,
            -std::log(hp.sigma_n / median.sigma_n) / v};
  }
};

struct OptimizerSettings {
  std::size_t max_iters = 10;
  double tol = 1e-3;           // stop when an accepted step gains less than this
  double initial_step = 0.5;   // step length in log-parameter units
  double max_step = 2.0;
  double min_step = 1e-12;
  LogNormalPrior prior;
  std::size_t threads = 1;
};

struct OptReport {
  double initial_J = 0.0;
  double final_J = 0.0;
  std::size_t iterations = 0;  // accepted steps
  Hyperparams theta;
  bool converged = false;
  std::vector<double> trace;   // objective after each accepted step, starting with initial_J
};

struct FrameGradient {
  double J = 0.0;
  double log_sigma_f = 0.0;
  double log_a = 0.0;
  double log_sigma_n = 0.0;

  double norm() const { return std::sqrt(log_sigma_f * log_sigma_f + log_a * log_a + log_sigma_n * log_sigma_n); }
};

namespace hyperopt_detail {

inline std::vector<SegmentGP> rebuild_all(std::span<const SegmentGP> gps, const Hyperparams& theta,
                                          std::size_t threads) {
  std::vector<SegmentGP> out(gps.size());
  parallel_for(gps.size(), threads, [&](std::size_t i) { out[i] = gps[i].rebuild(theta); });
  return out;
}

inline double sum_evidence(std::span<const SegmentGP> gps, std::size_t threads) {
  std::vector<double> parts(gps.size());
  parallel_for(gps.size(), threads, [&](std::size_t i) { parts[i] = gps[i].log_evidence(); });
  double J = 0.0;
  for (double p : parts) J += p;
  return J;
}

inline FrameGradient sum_gradient(std::span<const SegmentGP> gps, std::size_t threads) {
  std::vector<EvidenceGradient> parts(gps.size());
  std::vector<double> ev(gps.size());
  parallel_for(gps.size(), threads, [&](std::size_t i) {
    parts[i] = gps[i].evidence_gradient();
    ev[i] = gps[i].log_evidence();
  });
  FrameGradient g;
  for (std::size_t i = 0; i < gps.size(); ++i) {
    g.J += ev[i];
    g.log_sigma_f += parts[i].log_sigma_f;
    g.log_a += parts[i].log_a;
    g.log_sigma_n += parts[i].log_sigma_n;
  }
  return g;
}

}  // namespace hyperopt_detail

/// Whole-frame objective: sum of segment log evidences, every segment
/// rebuilt under the shared theta.
inline double whole_frame_objective(std::span<const SegmentGP> gps, const Hyperparams& theta,
                                    std::size_t threads = 1) {
  const auto rebuilt = hyperopt_detail::rebuild_all(gps, theta, threads);
  return hyperopt_detail::sum_evidence(rebuilt, threads);
}

/// Objective and its analytic gradient with respect to log(theta).
inline FrameGradient objective_gradient(std::span<const SegmentGP> gps, const Hyperparams& theta,
                                        std::size_t threads = 1) {
  const auto rebuilt = hyperopt_detail::rebuild_all(gps, theta, threads);
  return hyperopt_detail::sum_gradient(rebuilt, threads);
}

/// Gradient ascent on log(theta) along the normalized gradient with
/// backtracking (halving) step control. On return every GP in `gps` has been
/// rebuilt under the final theta.
inline OptReport optimize(std::vector<SegmentGP>& gps, const Hyperparams& theta0,
                          const OptimizerSettings& settings = {}) {
  theta0.validate();
  const std::size_t threads = settings.threads;
  auto to_theta = [](const std::array<double, 3>& x) {
    return Hyperparams{std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
  };
  auto objective = [&](const std::vector<SegmentGP>& built, const Hyperparams& hp) {
    return hyperopt_detail::sum_evidence(built, threads) + settings.prior.log_density(hp);
  };
  auto gradient = [&](const std::vector<SegmentGP>& built, const Hyperparams& hp) {
    auto g = hyperopt_detail::sum_gradient(built, threads);
    const auto pg = settings.prior.gradient(hp);
    g.J += settings.prior.log_density(hp);
    g.log_sigma_f += pg[0];
    g.log_a += pg[1];
    g.log_sigma_n += pg[2];
    return g;
  };

  std::array<double, 3> x{std::log(theta0.sigma_f), std::log(theta0.a), std::log(theta0.sigma_n)};
  std::vector<SegmentGP> built;
  try {
    built = hyperopt_detail::rebuild_all(gps, theta0, threads);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("optimizer initialization failed: ") + e.what());
  }
  double J = objective(built, theta0);
  if (!std::isfinite(J))
    throw Error(ErrorKind::Domain, "optimizer initialization failed: objective is not finite at theta0");

  OptReport report;
  report.initial_J = J;
  report.trace.push_back(J);
  auto grad = gradient(built, theta0);
  double step = settings.initial_step;

  for (std::size_t it = 0; it < settings.max_iters; ++it) {
    const double gn = grad.norm();
    if (!(gn >= settings.tol)) {
      report.converged = true;
      break;
    }
    const std::array<double, 3> dir{grad.log_sigma_f / gn, grad.log_a / gn, grad.log_sigma_n / gn};

    bool accepted = false;
    std::array<double, 3> x_new{};
    std::vector<SegmentGP> trial;
    double J_new = -std::numeric_limits<double>::infinity();
    while (step >= settings.min_step) {
      for (int k = 0; k < 3; ++k) x_new[k] = x[k] + step * dir[k];
      try {
        trial = hyperopt_detail::rebuild_all(gps, to_theta(x_new), threads);
        J_new = objective(trial, to_theta(x_new));
      } catch (const Error&) {
        J_new = -std::numeric_limits<double>::infinity();  // unusable theta: shrink
      }
      if (std::isfinite(J_new) && J_new > J) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      report.converged = true;
      break;
    }

    const double gain = J_new - J;
    const auto grad_new = gradient(built = std::move(trial), to_theta(x_new));
    // Next trial length from the Barzilai-Borwein curvature estimate along
    // the last step; doubling when the objective is not locally concave.
    const std::array<double, 3> sx{x_new[0] - x[0], x_new[1] - x[1], x_new[2] - x[2]};
    const std::array<double, 3> sy{grad_new.log_sigma_f - grad.log_sigma_f, grad_new.log_a - grad.log_a,
                                   grad_new.log_sigma_n - grad.log_sigma_n};
    const double ss = sx[0] * sx[0] + sx[1] * sx[1] + sx[2] * sx[2];
    const double sy_dot = sx[0] * sy[0] + sx[1] * sy[1] + sx[2] * sy[2];
    if (sy_dot < 0.0)
      step = std::clamp(ss / -sy_dot * grad_new.norm(), settings.min_step, settings.max_step);
    else
      step = std::min(step * 2.0, settings.max_step);
    x = x_new;
    J = J_new;
    grad = grad_new;
    report.trace.push_back(J);
    ++report.iterations;
    if (gain < settings.tol) {
      report.converged = true;
      break;
    }
  }

  report.final_J = J;
  report.theta = to_theta(x);
  if (report.iterations == 0) report.theta = theta0;
  gps = std::move(built);
  return report;
}

}  // namespace gpground
