#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They share no code with the library beyond plain data types.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Line {
  double intercept;
  double slope;
};

inline double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Bisection on the sign of a central difference. Resolves a smooth minimum to
// well below what comparing function values can.
inline double slope_sign_min(const std::function<double(double)>& f, double lo, double hi, double h) {
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double m = 0.5 * (lo + hi);
    if (m == lo || m == hi) break;
    if (f(m + h) - f(m - h) > 0.0)
      hi = m;
    else
      lo = m;
  }
  return 0.5 * (lo + hi);
}

// Negative errors-in-variables log-likelihood, profiled over sigma^2, with
// the latent true ranges xi_i eliminated exactly (each enters a 1-D quadratic):
//   Q(alpha, beta) = sum_i min_xi [ (r_i - xi)^2 / w_r + (z_i - alpha - beta xi)^2 / w_z ]
// With w_r = 1 and w_z = lambda this is the balanced model whose error
// variances are sigma^2 and lambda sigma^2.
inline double eiv_cost(const std::vector<std::pair<double, double>>& pts, double alpha, double beta,
                       double w_r, double w_z) {
  double q = 0.0;
  for (const auto& [r, z] : pts) {
    const double xi = (r / w_r + beta * (z - alpha) / w_z) / (1.0 / w_r + beta * beta / w_z);
    q += (r - xi) * (r - xi) / w_r + (z - alpha - beta * xi) * (z - alpha - beta * xi) / w_z;
  }
  return q;
}

// Brute-force minimizer of eiv_cost: a dense scan over the line angle
// (every orientation, vertical excluded), golden-section refinement of the
// angle, and an inner golden-section search over the intercept.
inline Line brute_force_line(const std::vector<std::pair<double, double>>& pts, double w_r, double w_z) {
  double zmin = pts.front().second, zmax = zmin, rmax = 0.0;
  for (const auto& [r, z] : pts) {
    zmin = std::min(zmin, z);
    zmax = std::max(zmax, z);
    rmax = std::max(rmax, std::abs(r));
  }
  auto best_alpha = [&](double beta) {
    const double reach = std::abs(beta) * rmax + 1.0;
    auto f = [&](double a) { return eiv_cost(pts, a, beta, w_r, w_z); };
    const double a0 = golden_min(f, zmin - reach, zmax + reach, 120);
    return slope_sign_min(f, a0 - 1e-3 * reach, a0 + 1e-3 * reach, 1e-7 * reach);
  };
  auto cost_at = [&](double theta) {
    const double beta = std::tan(theta);
    return eiv_cost(pts, best_alpha(beta), beta, w_r, w_z);
  };

  const int grid = 720;
  const double half = std::numbers::pi / 2.0;
  int best = 1;
  double best_cost = cost_at(-half + half * 2.0 * 1 / grid);
  for (int k = 2; k < grid; ++k) {
    const double c = cost_at(-half + half * 2.0 * k / grid);
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  const double step = 2.0 * half / grid;
  const double lo = -half + step * (best - 1);
  const double hi = -half + step * (best + 1);
  const double theta0 = golden_min(cost_at, std::max(lo, -half + 1e-9), std::min(hi, half - 1e-9));
  // Golden section stalls near sqrt(eps) on a flat minimum; near-vertical lines
  // turn that into visible slope error, so finish on the sign of the derivative.
  const double theta = slope_sign_min(cost_at, std::max(theta0 - 1e-4, -half + 1e-9),
                                      std::min(theta0 + 1e-4, half - 1e-9), 1e-5);
  const double beta = std::tan(theta);
  return {best_alpha(beta), beta};
}

// Dense kernel exactly as written: sf^2 (Li^2)^(1/4) (Lj^2)^(1/4) ((Li^2+Lj^2)/2)^(-1/2) exp(-d^2/(Li^2+Lj^2)).
inline double kernel(double ri, double rj, double Li, double Lj, double sf) {
  const double li2 = Li * Li, lj2 = Lj * Lj;
  return sf * sf * std::pow(li2, 0.25) * std::pow(lj2, 0.25) * std::pow((li2 + lj2) / 2.0, -0.5) *
         std::exp(-(ri - rj) * (ri - rj) / (li2 + lj2));
}

inline Eigen::MatrixXd kernel_matrix(const std::vector<double>& r, const std::vector<double>& L, double sf) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      K(i, j) = kernel(r[static_cast<std::size_t>(i)], r[static_cast<std::size_t>(j)], L[static_cast<std::size_t>(i)],
                       L[static_cast<std::size_t>(j)], sf);
  return K;
}

// log N(z; 0, K + sn^2 I) through an explicit inverse and determinant.
inline double dense_log_evidence(const std::vector<double>& r, const std::vector<double>& z,
                                 const std::vector<double>& L, double sf, double sn) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd A = kernel_matrix(r, L, sf);
  A.diagonal().array() += sn * sn;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = z[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd Ainv = A.inverse();
  return -0.5 * y.dot(Ainv * y) - 0.5 * std::log(A.determinant()) -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// Central difference of f at x with step h.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
