#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hdsim/polar.hpp"
#include "hdsim/rng.hpp"
#include "oracles.hpp"

using namespace hdsim;

namespace {
constexpr double kPi = std::numbers::pi;

PolarAngles make_angles(std::initializer_list<double> xs) {
  PolarAngles t;
  t.angles.resize(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) t.angles[i++] = x;
  return t;
}

Eigen::VectorXd random_unit(int d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v / v.norm();
}
}  // namespace

TEST_CASE("polar_to_unit closed-form cases") {
  const Eigen::VectorXd e3 = polar_to_unit(make_angles({kPi / 2, kPi / 2}));
  CHECK(e3[0] == 0.0);
  CHECK(e3[1] == 0.0);
  CHECK(e3[2] == doctest::Approx(1.0));

  const Eigen::VectorXd e1 = polar_to_unit(make_angles({0.0, 0.3}));
  CHECK(e1[0] == doctest::Approx(1.0));
  CHECK(e1[1] == 0.0);
  CHECK(e1[2] == 0.0);

  const Eigen::VectorXd b = polar_to_unit(make_angles({kPi / 3, kPi / 4}));
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(std::sqrt(3.0) / 2.0 * std::sqrt(2.0) / 2.0));
  CHECK(b[2] == doctest::Approx(std::sqrt(3.0) / 2.0 * std::sqrt(2.0) / 2.0));

  CHECK_THROWS_AS(polar_to_unit(make_angles({-0.1, 0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(polar_to_unit(make_angles({0.1, 2.1 * kPi})),
                  std::invalid_argument);
}

TEST_CASE("polar_to_unit lands on the sphere for random in-bounds angles") {
  Rng rng(17);
  for (int d : {2, 5, 50, 500}) {
    for (int rep = 0; rep < 200; ++rep) {
      PolarAngles t;
      t.angles.resize(d - 1);
      for (int s = 0; s < d - 2; ++s) t.angles[s] = rng.uniform(0.0, kPi);
      t.angles[d - 2] = rng.uniform(0.0, 2.0 * kPi);
      CHECK(std::abs(polar_to_unit(t).norm() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sparsity correspondence is exact") {
  Rng rng(31);
  const int d = 12;
  PolarAngles t;
  t.angles.resize(d - 1);
  for (int s = 0; s < d - 2; ++s) t.angles[s] = rng.uniform(0.0, kPi);
  t.angles[d - 2] = rng.uniform(0.0, 2.0 * kPi);

  for (int s = 0; s < d - 2; ++s) {
    PolarAngles u = t;
    u.angles[s] = 0.5 * kPi;
    CHECK(polar_to_unit(u)[s] == 0.0);
  }
  for (double last : {0.0, kPi, 2.0 * kPi}) {
    PolarAngles u = t;
    u.angles[d - 2] = last;
    CHECK(polar_to_unit(u)[d - 1] == 0.0);
  }
  for (double last : {0.5 * kPi, 1.5 * kPi}) {
    PolarAngles u = t;
    u.angles[d - 2] = last;
    CHECK(polar_to_unit(u)[d - 2] == 0.0);
  }
}

TEST_CASE("unit_to_polar canonical cases") {
  Eigen::VectorXd z(3);
  z << 0, 0, 1;
  const PolarAngles a = unit_to_polar(z);
  CHECK(a.angles[0] == doctest::Approx(0.5 * kPi));
  CHECK(a.angles[1] == doctest::Approx(0.5 * kPi));

  Eigen::VectorXd e1(3);
  e1 << 1, 0, 0;
  const PolarAngles b = unit_to_polar(e1);
  CHECK(b.angles[0] == doctest::Approx(0.0));
  CHECK(b.angles[1] == doctest::Approx(0.5 * kPi));

  Eigen::VectorXd bad(3);
  bad << 1, 1, 0;
  CHECK_THROWS_AS(unit_to_polar(bad), std::invalid_argument);
}

TEST_CASE("round trip over random unit vectors up to d=500") {
  Rng rng(101);
  for (int d : {5, 50, 500}) {
    for (int rep = 0; rep < 1000 / (d > 50 ? 10 : 1); ++rep) {
      const Eigen::VectorXd beta = random_unit(d, rng);
      const Eigen::VectorXd back = polar_to_unit(unit_to_polar(beta));
      CHECK((back - beta).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("round trip through sparse vectors uses the spiked representative") {
  Rng rng(7);
  const int d = 20;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  beta[3] = rng.normal();
  beta[7] = rng.normal();
  beta /= beta.norm();
  const PolarAngles t = unit_to_polar(beta);
  // all angles past the last nonzero coordinate sit at the spike
  for (int s = 8; s < d - 1; ++s) CHECK(t.angles[s] == 0.5 * kPi);
  const Eigen::VectorXd back = polar_to_unit(t);
  CHECK((back - beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grad_projection closed form in 2d") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const double th = rng.uniform(0.0, 2.0 * kPi);
    PolarAngles t = make_angles({th});
    Eigen::VectorXd x(2);
    x << 1, 0;
    const Eigen::VectorXd g = grad_projection(t, x);
    CHECK(g[0] == doctest::Approx(-std::sin(th)).epsilon(1e-12));
  }
}

TEST_CASE("grad_projection matches finite differences at d=200") {
  Rng rng(13);
  const int d = 200;
  for (int rep = 0; rep < 20; ++rep) {
    PolarAngles t;
    t.angles.resize(d - 1);
    for (int s = 0; s < d - 2; ++s) t.angles[s] = rng.uniform(0.2, kPi - 0.2);
    t.angles[d - 2] = rng.uniform(0.2, 2.0 * kPi - 0.2);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();

    const Eigen::VectorXd g = grad_projection(t, x);
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& a) {
          PolarAngles u;
          u.angles = a;
          return x.dot(polar_to_unit(u));
        },
        t.angles);
    CHECK(oracle::max_rel_err(g, fd) < 1e-5);
  }
}

TEST_CASE("grad_projection edge cases") {
  PolarAngles t = make_angles({0.7, 1.1, 4.0});
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(grad_projection(t, zero).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd x(3);
  x << 1, 2, 3;
  CHECK_THROWS_AS(grad_projection(t, x), std::invalid_argument);

  // degenerate prefix: sin(0) = 0 kills all later entries
  PolarAngles deg = make_angles({0.0, 1.1, 4.0});
  Eigen::VectorXd x4(4);
  x4 << 1, 2, 3, 4;
  const Eigen::VectorXd g = grad_projection(deg, x4);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
}
