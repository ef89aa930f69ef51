#pragma once

#include <Eigen/Dense>

namespace hdsim {

// Polar-angle representation of a unit vector in R^d: d-1 angles, the first
// d-2 in [0,pi] and the last in [0,2pi]. An interior angle at pi/2 zeroes
// the matching coordinate, so sparsity in the unit vector corresponds to
// angles sitting at pi/2.
struct PolarAngles {
  Eigen::VectorXd angles;

  int dim() const { return static_cast<int>(angles.size()) + 1; }
};

bool polar_in_bounds(const PolarAngles& theta);

// theta -> unit vector: beta_s = prod_{l<s} sin(theta_l) * cos(theta_s),
// beta_d = prod_{l<d} sin(theta_l). Exact zeros at the spike locations
// (angles equal to the floating-point multiples of pi/2).
Eigen::VectorXd polar_to_unit(const PolarAngles& theta);

// Inverse map; when a tail sine-product vanishes the remaining angles are
// set to pi/2 (the canonical sparse representative).
PolarAngles unit_to_polar(const Eigen::VectorXd& beta);

// Gradient of x . polar_to_unit(theta) with respect to the angles, in O(d)
// via prefix sine-products and a suffix recursion. Prefix underflow below
// 1e-300 zeroes the remaining entries.
Eigen::VectorXd grad_projection(const PolarAngles& theta,
                                const Eigen::Ref<const Eigen::VectorXd>& x);

// sin/cos snapped to exact zeros at the representable multiples of pi/2;
// these are the spike locations so sparse angle vectors produce exact
// zero coordinates.
double angle_sin(double a);
double angle_cos(double a);

}  // namespace hdsim
