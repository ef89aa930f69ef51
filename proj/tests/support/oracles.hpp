#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they are used to check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Central finite difference gradient.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double max_rel_err(const Eigen::VectorXd& got,
                          const Eigen::VectorXd& want) {
  double m = 0.0;
  for (int i = 0; i < got.size(); ++i)
    m = std::max(m, std::abs(got[i] - want[i]) /
                        std::max(1.0, std::abs(want[i])));
  return m;
}

// Adaptive Simpson quadrature.
inline double simpson_once(const std::function<double(double)>& f, double a,
                           double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f,
                                   double a, double b, double fa, double fm,
                                   double fb, double whole, double tol,
                                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_once(f, a, m, fa, flm, fm);
  const double right = simpson_once(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10, int depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = simpson_once(f, a, b, fa, fm, fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Textbook recursive Cox-de Boor, straight from the definition.
inline double deboor_basis(const std::vector<double>& knots, int m, int deg,
                           double x) {
  if (deg == 0) {
    // right-closed at the final knot so the domain endpoint is covered
    const bool last =
        knots[m + 1] >= knots.back() && x == knots.back();
    return (x >= knots[m] && (x < knots[m + 1] || last)) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  const double dl = knots[m + deg] - knots[m];
  if (dl > 0.0)
    left = (x - knots[m]) / dl * deboor_basis(knots, m, deg - 1, x);
  const double dr = knots[m + deg + 1] - knots[m + 1];
  if (dr > 0.0)
    right = (knots[m + deg + 1] - x) / dr *
            deboor_basis(knots, m + 1, deg - 1, x);
  return left + right;
}

// Integral over one quarter-pi piece of the last-angle density, whose
// kernel behaves like dist^(M1-1) at one endpoint. log_density_edge takes
// the local distance from the singular edge; the algebraic substitution
// dist = w^(1/M1) makes the integrand bounded, after which plain adaptive
// Simpson applies. The width factor is the Jacobian of theta in the local
// coordinate.
inline double integrate_beta_piece(
    const std::function<double(double)>& log_density_edge, double width,
    double m1, double tol = 1e-10) {
  const auto g = [&](double w) {
    const double dist = std::pow(w, 1.0 / m1);
    const double log_jac =
        std::log(width / m1) + (1.0 / m1 - 1.0) * std::log(w);
    const double lp = log_density_edge(dist);
    if (!std::isfinite(lp)) return 0.0;
    return std::exp(lp + log_jac);
  };
  return integrate(g, 1e-15, 1.0 - 1e-15, tol, 48);
}

struct MonteCarlo {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

inline MonteCarlo mc_summary(const std::vector<double>& xs) {
  MonteCarlo m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / (n - 1.0) / n);
  return m;
}

// Standard error via batch means, for autocorrelated chains.
inline MonteCarlo mc_summary_batched(const std::vector<double>& xs,
                                     int n_batches = 30) {
  MonteCarlo m;
  const int n = static_cast<int>(xs.size());
  const int bs = n / n_batches;
  std::vector<double> batch(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    for (int i = 0; i < bs; ++i) batch[b] += xs[b * bs + i];
    batch[b] /= bs;
  }
  const MonteCarlo bm = mc_summary(batch);
  for (int i = 0; i < n_batches * bs; ++i) m.mean += xs[i];
  m.mean /= (n_batches * bs);
  m.se = bm.se;
  return m;
}

// Two-sided Kolmogorov-Smirnov p-value (asymptotic series).
inline double ks_pvalue(double d, int n) {
  const double t = (std::sqrt(static_cast<double>(n)) + 0.12 +
                    0.11 / std::sqrt(static_cast<double>(n))) *
                   d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k)
    sum += 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * t * t);
  return std::clamp(sum, 0.0, 1.0);
}

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace oracle
