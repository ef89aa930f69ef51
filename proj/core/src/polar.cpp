#include "hdsim/polar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kUnderflowGuard = 1e-300;
}  // namespace

double angle_sin(double a) {
  if (a == 0.0 || a == kPi || a == 2.0 * kPi) return 0.0;
  return std::sin(a);
}

double angle_cos(double a) {
  if (a == 0.5 * kPi || a == 1.5 * kPi) return 0.0;
  return std::cos(a);
}

bool polar_in_bounds(const PolarAngles& theta) {
  const int m = static_cast<int>(theta.angles.size());
  for (int s = 0; s < m; ++s) {
    const double hi = (s == m - 1) ? 2.0 * kPi : kPi;
    if (!(theta.angles[s] >= 0.0 && theta.angles[s] <= hi)) return false;
  }
  return true;
}

Eigen::VectorXd polar_to_unit(const PolarAngles& theta) {
  if (!polar_in_bounds(theta))
    throw std::invalid_argument("polar_to_unit: angle out of bounds");
  const int m = static_cast<int>(theta.angles.size());
  Eigen::VectorXd beta(m + 1);
  double sin_prod = 1.0;
  for (int s = 0; s < m; ++s) {
    beta[s] = sin_prod * angle_cos(theta.angles[s]);
    sin_prod *= angle_sin(theta.angles[s]);
  }
  beta[m] = sin_prod;
  return beta;
}

PolarAngles unit_to_polar(const Eigen::VectorXd& beta) {
  const int d = static_cast<int>(beta.size());
  if (d < 2) throw std::invalid_argument("unit_to_polar: need dimension >= 2");
  if (std::abs(beta.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("unit_to_polar: input is not a unit vector");

  PolarAngles theta;
  theta.angles.resize(d - 1);
  // tail[s] = sqrt(sum_{l >= s} beta_l^2), accumulated backwards for accuracy
  Eigen::VectorXd tail(d);
  double acc = 0.0;
  for (int s = d - 1; s >= 0; --s) {
    acc += beta[s] * beta[s];
    tail[s] = std::sqrt(acc);
  }
  for (int s = 0; s < d - 2; ++s) {
    if (tail[s] == 0.0) {
      for (int r = s; r < d - 1; ++r) theta.angles[r] = 0.5 * kPi;
      return theta;
    }
    double c = beta[s] / tail[s];
    c = std::clamp(c, -1.0, 1.0);
    theta.angles[s] = (c == 0.0) ? 0.5 * kPi : std::acos(c);
  }
  if (tail[d - 2] == 0.0) {
    theta.angles[d - 2] = 0.5 * kPi;
    return theta;
  }
  double last = std::atan2(beta[d - 1], beta[d - 2]);
  if (beta[d - 1] == 0.0) {
    last = (beta[d - 2] > 0.0) ? 0.0 : kPi;
  } else if (beta[d - 2] == 0.0) {
    last = (beta[d - 1] > 0.0) ? 0.5 * kPi : 1.5 * kPi;
  } else if (last < 0.0) {
    last += 2.0 * kPi;
  }
  theta.angles[d - 2] = last;
  return theta;
}

Eigen::VectorXd grad_projection(const PolarAngles& theta,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int m = static_cast<int>(theta.angles.size());
  if (x.size() != m + 1)
    throw std::invalid_argument("grad_projection: dimension mismatch");

  // suffix[r] = sum_{s>r} x_s c_s prod_{r<l<s} sin(theta_l), with c_s the
  // cosine factor of coordinate s (1 for the final coordinate). Backward
  // recursion: suffix[m-1] = x_m, suffix[r] = x_{r+1} cos(theta_{r+1})
  //                                           + sin(theta_{r+1}) suffix[r+1].
  Eigen::VectorXd suffix(m);
  suffix[m - 1] = x[m];
  for (int r = m - 2; r >= 0; --r)
    suffix[r] =
        x[r + 1] * angle_cos(theta.angles[r + 1]) +
        angle_sin(theta.angles[r + 1]) * suffix[r + 1];

  Eigen::VectorXd grad(m);
  double prefix = 1.0;  // prod_{l<r} sin(theta_l)
  for (int r = 0; r < m; ++r) {
    if (std::abs(prefix) < kUnderflowGuard) {
      for (int q = r; q < m; ++q) grad[q] = 0.0;
      break;
    }
    grad[r] = prefix * (-x[r] * angle_sin(theta.angles[r]) +
                        angle_cos(theta.angles[r]) * suffix[r]);
    prefix *= angle_sin(theta.angles[r]);
  }
  return grad;
}

}  // namespace hdsim
