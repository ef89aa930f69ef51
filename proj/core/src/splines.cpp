#include "hdsim/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hdsim {

SplineBasis make_basis(int num_basis, int degree, double lo, double hi) {
  if (degree < 1 || degree > 7)
    throw std::invalid_argument("make_basis: degree must be in [1,7]");
  if (num_basis < degree + 1)
    throw std::invalid_argument("make_basis: need at least degree+1 basis functions");
  if (!(lo < hi)) throw std::invalid_argument("make_basis: lo must be < hi");

  SplineBasis b;
  b.degree = degree;
  b.num_basis = num_basis;
  b.lo = lo;
  b.hi = hi;
  b.knots.resize(num_basis + degree + 1);
  const int spans = num_basis - degree;  // interior intervals
  for (int i = 0; i <= degree; ++i) {
    b.knots[i] = lo;
    b.knots[num_basis + i] = hi;
  }
  for (int i = 1; i < spans; ++i)
    b.knots[degree + i] = lo + (hi - lo) * static_cast<double>(i) / spans;
  return b;
}

namespace {

int find_span(const SplineBasis& b, double x) {
  // span index s such that knots[s] <= x < knots[s+1], with x = hi mapped
  // to the last nonempty span.
  if (x >= b.hi) return b.num_basis - 1;
  const auto it = std::upper_bound(b.knots.begin() + b.degree,
                                   b.knots.begin() + b.num_basis + 1, x);
  return static_cast<int>(it - b.knots.begin()) - 1;
}

void check_domain(const SplineBasis& b, double x) {
  if (!(x >= b.lo && x <= b.hi))
    throw std::domain_error("eval_basis: x outside the basis domain");
}

// de Boor triangle for the degree+1 nonzero values at x in span s.
void nonzero_values(const SplineBasis& b, int s, double x, double* N) {
  const int d = b.degree;
  double left[8], right[8];
  N[0] = 1.0;
  for (int j = 1; j <= d; ++j) {
    left[j] = x - b.knots[s + 1 - j];
    right[j] = b.knots[s + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    N[j] = saved;
  }
}

}  // namespace

Eigen::VectorXd eval_basis(const SplineBasis& basis, double x) {
  check_domain(basis, x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.num_basis);
  const int s = find_span(basis, x);
  double N[8];
  nonzero_values(basis, s, x, N);
  for (int r = 0; r <= basis.degree; ++r) out[s - basis.degree + r] = N[r];
  return out;
}

Eigen::VectorXd eval_basis_deriv(const SplineBasis& basis, double x) {
  check_domain(basis, x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.num_basis);
  const BasisWindow w = eval_basis_window(basis, x);
  for (int r = 0; r <= basis.degree; ++r) out[w.first + r] = w.deriv[r];
  return out;
}

BasisWindow eval_basis_window(const SplineBasis& basis, double x) {
  check_domain(basis, x);
  const int d = basis.degree;
  const int s = find_span(basis, x);
  BasisWindow w;
  w.first = s - d;
  nonzero_values(basis, s, x, w.value);

  // Degree-lowering formula: B'_{m,d} = d * (B_{m,d-1}/(t_{m+d}-t_m)
  //                                        - B_{m+1,d-1}/(t_{m+d+1}-t_{m+1})).
  double lower[8];
  {
    // values of the d nonzero degree-(d-1) functions at x, starting at s-d+1
    double N[8];
    N[0] = 1.0;
    double left[8], right[8];
    for (int j = 1; j <= d - 1; ++j) {
      left[j] = x - basis.knots[s + 1 - j];
      right[j] = basis.knots[s + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double tmp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      N[j] = saved;
    }
    for (int r = 0; r < d; ++r) lower[r] = N[r];
  }

  for (int r = 0; r <= d; ++r) {
    const int m = s - d + r;  // global index of this basis function
    double term = 0.0;
    if (r > 0) {
      const double den = basis.knots[m + d] - basis.knots[m];
      if (den > 0.0) term += lower[r - 1] / den;
    }
    if (r < d) {
      const double den = basis.knots[m + d + 1] - basis.knots[m + 1];
      if (den > 0.0) term -= lower[r] / den;
    }
    w.deriv[r] = d * term;
  }
  return w;
}

SurfaceCoefficients::SurfaceCoefficients(int K_u, int K_v,
                                         bool tie_first_axis_full)
    : K_u_(K_u), K_v_(K_v), tie_first_axis_full_(tie_first_axis_full) {
  grid_ = Eigen::MatrixXd::Zero(K_u, K_v);
  const int cu = tie_first_axis_full ? 1 : (K_u + 1) / 2;
  const int cv = (K_v + 1) / 2;
  groups_.reserve(static_cast<std::size_t>(cu) * cv);
  for (int f = 0; f < cu; ++f) {
    for (int g = 0; g < cv; ++g) {
      std::vector<std::pair<int, int>> members;
      const int g_ref = K_v_ - 1 - g;
      for (int m = 0; m < K_u_; ++m) {
        if (!tie_first_axis_full_ && m != f && m != K_u_ - 1 - f) continue;
        members.emplace_back(m, g);
        if (g_ref != g) members.emplace_back(m, g_ref);
      }
      groups_.push_back(std::move(members));
    }
  }
}

Eigen::VectorXd SurfaceCoefficients::free_values() const {
  Eigen::VectorXd v(free_count());
  for (int g = 0; g < free_count(); ++g) {
    const auto& [m, mp] = groups_[g].front();
    v[g] = grid_(m, mp);
  }
  return v;
}

void SurfaceCoefficients::set_free_values(const Eigen::VectorXd& v) {
  if (v.size() != free_count())
    throw std::invalid_argument("set_free_values: wrong length");
  for (int g = 0; g < free_count(); ++g)
    for (const auto& [m, mp] : groups_[g]) grid_(m, mp) = v[g];
}

void SurfaceCoefficients::set_constant(double c) {
  grid_.setConstant(c);
}

double SurfaceCoefficients::group_basis_product(
    int g, const Eigen::VectorXd& bu, const Eigen::VectorXd& bv) const {
  double s = 0.0;
  for (const auto& [m, mp] : groups_[g]) s += bu[m] * bv[mp];
  return s;
}

SurfaceEval eval_surface(const SurfaceCoefficients& coeffs,
                         const SplineBasis& bu, const SplineBasis& bv,
                         double u, double v) {
  if (coeffs.rows() != bu.num_basis || coeffs.cols() != bv.num_basis)
    throw std::invalid_argument("eval_surface: coefficient/basis size mismatch");
  const BasisWindow wu = eval_basis_window(bu, u);
  const BasisWindow wv = eval_basis_window(bv, v);
  SurfaceEval out;
  for (int r = 0; r <= bu.degree; ++r) {
    const int m = wu.first + r;
    double row_val = 0.0, row_dv = 0.0;
    for (int c = 0; c <= bv.degree; ++c) {
      const double lam = coeffs.grid()(m, wv.first + c);
      row_val += lam * wv.value[c];
      row_dv += lam * wv.deriv[c];
    }
    out.value += wu.value[r] * row_val;
    out.du += wu.deriv[r] * row_val;
    out.dv += wu.value[r] * row_dv;
  }
  return out;
}

Eigen::VectorXd MonotoneTimeFn::lambdas() const {
  const int Kp = static_cast<int>(deltas.size()) + 1;
  Eigen::VectorXd lam(Kp);
  lam[0] = 0.0;
  double run = 0.0;
  for (int i = 0; i + 1 < Kp; ++i) {
    run += deltas[i];
    lam[i + 1] = run;
  }
  const double total = run;
  for (int i = 1; i < Kp; ++i) lam[i] /= total;
  return lam;
}

namespace {
void check_deltas(const MonotoneTimeFn& tf) {
  for (int i = 0; i < tf.deltas.size(); ++i)
    if (!(tf.deltas[i] > 0.0 && tf.deltas[i] < 1.0))
      throw std::runtime_error("MonotoneTimeFn: delta outside (0,1)");
}
}  // namespace

double eval_timefn_value(const MonotoneTimeFn& tf, const SplineBasis& basis,
                         double t) {
  check_deltas(tf);
  if (basis.num_basis != tf.deltas.size() + 1)
    throw std::invalid_argument("eval_timefn: basis size must be K' = #deltas + 1");
  const BasisWindow w = eval_basis_window(basis, t);
  const Eigen::VectorXd lam = tf.lambdas();
  double v = 0.0;
  for (int r = 0; r <= basis.degree; ++r) v += lam[w.first + r] * w.value[r];
  return v;
}

Eigen::MatrixXd timefn_lambda_jacobian(const MonotoneTimeFn& tf) {
  const int n = static_cast<int>(tf.deltas.size());
  Eigen::VectorXd prefix(n);
  double run = 0.0;
  for (int i = 0; i < n; ++i) {
    run += tf.deltas[i];
    prefix[i] = run;
  }
  const double S = run;
  Eigen::MatrixXd J(n, n);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < n; ++i)
      J(r, i) = ((i <= r ? S : 0.0) - prefix[r]) / (S * S);
  return J;
}

TimeFnEval eval_timefn(const MonotoneTimeFn& tf, const SplineBasis& basis,
                       double t) {
  check_deltas(tf);
  if (basis.num_basis != tf.deltas.size() + 1)
    throw std::invalid_argument("eval_timefn: basis size must be K' = #deltas + 1");
  const int n = static_cast<int>(tf.deltas.size());  // K' - 1
  const BasisWindow w = eval_basis_window(basis, t);

  Eigen::VectorXd prefix(n);  // prefix[l] = sum_{i<=l} delta_i (1-based l)
  double run = 0.0;
  for (int i = 0; i < n; ++i) {
    run += tf.deltas[i];
    prefix[i] = run;
  }
  const double S = run;

  TimeFnEval out;
  out.grad_deltas = Eigen::VectorXd::Zero(n);
  // value = sum_l lambda_{l+1} B_{l+1}(t), lambda_{l+1} = prefix_l / S.
  // d lambda_{l+1} / d delta_i = (1{i<=l} * S - prefix_l) / S^2.
  // Accumulate over the active window only.
  double value = 0.0;
  for (int r = 0; r <= basis.degree; ++r) {
    const int idx = w.first + r;  // 0-based coefficient index
    if (idx == 0) continue;       // lambda_1 = 0 contributes nothing
    const int l = idx - 1;        // 0-based: lambda_{idx+1-based} uses prefix[l]
    const double Bl = w.value[r];
    value += (prefix[l] / S) * Bl;
    for (int i = 0; i < n; ++i) {
      const double ind = (i <= l) ? S : 0.0;
      out.grad_deltas[i] += Bl * (ind - prefix[l]) / (S * S);
    }
  }
  out.value = value;
  return out;
}

}  // namespace hdsim
