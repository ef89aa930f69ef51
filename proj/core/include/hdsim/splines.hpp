#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hdsim {

// Clamped B-spline basis of `num_basis` functions on [lo, hi].
// Boundary knots are repeated degree+1 times, interior knots are uniform,
// so the basis is a partition of unity and, on a domain symmetric about 0,
// satisfies B_m(-x) = B_{K+1-m}(x).
struct SplineBasis {
  int degree = 3;
  int num_basis = 0;          // K
  double lo = 0.0, hi = 1.0;
  std::vector<double> knots;  // size K + degree + 1, nondecreasing

  int span_count() const { return num_basis - degree; }
};

SplineBasis make_basis(int num_basis, int degree, double lo, double hi);

// Cox-de Boor evaluation; returns all K values (at most degree+1 nonzero).
Eigen::VectorXd eval_basis(const SplineBasis& basis, double x);
Eigen::VectorXd eval_basis_deriv(const SplineBasis& basis, double x);

// Dense evaluation into caller-provided storage: values and derivatives of
// the degree+1 active functions, plus the index of the first active one.
// This is the hot path used by likelihood and gradient sweeps.
struct BasisWindow {
  int first = 0;                       // index of first active basis fn
  double value[8];                     // active values (degree+1 entries)
  double deriv[8];                     // active derivatives
};
BasisWindow eval_basis_window(const SplineBasis& basis, double x);

// Tensor-product surface coefficients with reflection ties that make the
// surface an even function of each argument: lambda(m,m') is shared across
// m <-> K+1-m and m' <-> K'+1-m'. With `tie_first_axis_full`, the whole
// first axis is tied as well, which makes the surface constant in its first
// argument (used by the no-SNP model variant).
class SurfaceCoefficients {
 public:
  SurfaceCoefficients() = default;
  SurfaceCoefficients(int K_u, int K_v, bool tie_first_axis_full = false);

  int rows() const { return K_u_; }
  int cols() const { return K_v_; }
  int free_count() const { return static_cast<int>(groups_.size()); }
  bool first_axis_collapsed() const { return tie_first_axis_full_; }

  const Eigen::MatrixXd& grid() const { return grid_; }

  // Free-parameter vector (one entry per tie group, in group order).
  Eigen::VectorXd free_values() const;
  void set_free_values(const Eigen::VectorXd& v);
  void set_constant(double c);

  // Members (row, col) of tie group g.
  const std::vector<std::pair<int, int>>& group(int g) const {
    return groups_[g];
  }

  // Group-summed tensor basis product: sum over group members of
  // B_m(u) * B_{m'}(v). These are the design columns for conjugate draws.
  double group_basis_product(int g, const Eigen::VectorXd& bu,
                             const Eigen::VectorXd& bv) const;

 private:
  int K_u_ = 0, K_v_ = 0;
  bool tie_first_axis_full_ = false;
  Eigen::MatrixXd grid_;
  std::vector<std::vector<std::pair<int, int>>> groups_;
};

struct SurfaceEval {
  double value = 0.0;
  double du = 0.0;
  double dv = 0.0;
};

SurfaceEval eval_surface(const SurfaceCoefficients& coeffs,
                         const SplineBasis& bu, const SplineBasis& bv,
                         double u, double v);

// Monotone time-warp F(t) on [0,1] with F(0)=0, F(1)=1. Spline coefficients
// are the normalized cumulative sums of the latent increments delta.
struct MonotoneTimeFn {
  Eigen::VectorXd deltas;  // K'-1 entries, each in (0,1)

  Eigen::VectorXd lambdas() const;  // K' nondecreasing coefficients, 0..1
};

struct TimeFnEval {
  double value = 0.0;
  Eigen::VectorXd grad_deltas;
};

double eval_timefn_value(const MonotoneTimeFn& tf, const SplineBasis& basis,
                         double t);
TimeFnEval eval_timefn(const MonotoneTimeFn& tf, const SplineBasis& basis,
                       double t);

// Jacobian d lambda_{c} / d delta_i for coefficients c = 1..K'-1 (row c-1);
// lambda_0 is pinned at 0 and the last row is identically zero because the
// final coefficient is pinned at 1.
Eigen::MatrixXd timefn_lambda_jacobian(const MonotoneTimeFn& tf);

}  // namespace hdsim
