#include <doctest.h>

#include <cmath>

#include "hdsim/rng.hpp"
#include "hdsim/splines.hpp"
#include "oracles.hpp"

using namespace hdsim;

TEST_CASE("make_basis produces clamped uniform knots") {
  const SplineBasis bezier = make_basis(4, 3, 0.0, 1.0);
  REQUIRE(bezier.knots.size() == 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(bezier.knots[i] == 0.0);
    CHECK(bezier.knots[4 + i] == 1.0);
  }

  const SplineBasis b8 = make_basis(8, 3, -1.0, 1.0);
  REQUIRE(b8.knots.size() == 12);
  CHECK(b8.knots[4] == doctest::Approx(-0.6));
  CHECK(b8.knots[5] == doctest::Approx(-0.2));
  CHECK(b8.knots[6] == doctest::Approx(0.2));
  CHECK(b8.knots[7] == doctest::Approx(0.6));

  CHECK_THROWS_AS(make_basis(3, 3, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_basis(8, 3, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("eval_basis matches Bernstein values on the Bezier case") {
  const SplineBasis b = make_basis(4, 3, 0.0, 1.0);
  const Eigen::VectorXd at0 = eval_basis(b, 0.0);
  CHECK(at0[0] == doctest::Approx(1.0));
  CHECK(at0.tail(3).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  const Eigen::VectorXd mid = eval_basis(b, 0.5);
  CHECK(mid[0] == doctest::Approx(0.125));
  CHECK(mid[1] == doctest::Approx(0.375));
  CHECK(mid[2] == doctest::Approx(0.375));
  CHECK(mid[3] == doctest::Approx(0.125));

  CHECK_THROWS_AS(eval_basis(b, -0.1), std::domain_error);
  CHECK_THROWS_AS(eval_basis(b, 1.1), std::domain_error);
}

TEST_CASE("eval_basis agrees with the recursive de Boor definition") {
  const SplineBasis b = make_basis(8, 3, -1.0, 1.0);
  const Eigen::VectorXd got = eval_basis(b, 0.3);
  CHECK(std::abs(got.sum() - 1.0) < 1e-12);
  for (int m = 0; m < 8; ++m)
    CHECK(got[m] == doctest::Approx(oracle::deboor_basis(b.knots, m, 3, 0.3))
                        .epsilon(1e-12));
}

TEST_CASE("partition of unity over random points") {
  Rng rng(42);
  const SplineBasis b = make_basis(11, 3, -1.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double x = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd v = eval_basis(b, x);
    CHECK(std::abs(v.sum() - 1.0) < 1e-12);
    CHECK(v.minCoeff() >= 0.0);
    CHECK(v.maxCoeff() <= 1.0);
    int nonzero = 0;
    for (int m = 0; m < v.size(); ++m) nonzero += v[m] != 0.0;
    CHECK(nonzero <= 4);
  }
}

TEST_CASE("basis derivative: endpoint values, zero sum, finite differences") {
  const SplineBasis bez = make_basis(4, 3, 0.0, 1.0);
  const Eigen::VectorXd d0 = eval_basis_deriv(bez, 0.0);
  CHECK(d0[0] == doctest::Approx(-3.0));
  CHECK(d0[1] == doctest::Approx(3.0));
  CHECK(d0[2] == doctest::Approx(0.0));
  CHECK(d0[3] == doctest::Approx(0.0));

  Rng rng(7);
  const SplineBasis b = make_basis(8, 3, -1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double x = rng.uniform(-0.99, 0.99);
    const Eigen::VectorXd d = eval_basis_deriv(b, x);
    CHECK(std::abs(d.sum()) < 1e-10);
    const double h = 1e-6;
    const Eigen::VectorXd fd =
        (eval_basis(b, x + h) - eval_basis(b, x - h)) / (2.0 * h);
    CHECK(oracle::max_rel_err(d, fd) < 1e-5);
  }
}

TEST_CASE("constant surface evaluates to the constant") {
  const SplineBasis b = make_basis(8, 3, -1.0, 1.0);
  SurfaceCoefficients c(8, 8);
  c.set_constant(3.25);
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const double u = rng.uniform(-1.0, 1.0);
    const double v = rng.uniform(-1.0, 1.0);
    const SurfaceEval e = eval_surface(c, b, b, u, v);
    CHECK(e.value == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(std::abs(e.du) < 1e-9);
    CHECK(std::abs(e.dv) < 1e-9);
  }
}

TEST_CASE("tied coefficients make the surface even in both arguments") {
  Rng rng(11);
  for (int K : {7, 8}) {
    const SplineBasis b = make_basis(K, 3, -1.0, 1.0);
    SurfaceCoefficients c(K, K);
    Eigen::VectorXd free(c.free_count());
    for (int g = 0; g < free.size(); ++g) free[g] = rng.normal();
    c.set_free_values(free);
    for (int k = 0; k < 200; ++k) {
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      const double base = eval_surface(c, b, b, u, v).value;
      CHECK(eval_surface(c, b, b, -u, v).value ==
            doctest::Approx(base).epsilon(1e-10));
      CHECK(eval_surface(c, b, b, u, -v).value ==
            doctest::Approx(base).epsilon(1e-10));
    }
  }
}

TEST_CASE("free count and tie structure") {
  SurfaceCoefficients c8(8, 8);
  CHECK(c8.free_count() == 16);  // ceil(8/2)^2
  SurfaceCoefficients c7(7, 7);
  CHECK(c7.free_count() == 16);  // ceil(7/2)^2
  SurfaceCoefficients collapsed(8, 8, true);
  CHECK(collapsed.free_count() == 4);

  Rng rng(5);
  Eigen::VectorXd free(c8.free_count());
  for (int g = 0; g < free.size(); ++g) free[g] = rng.normal();
  c8.set_free_values(free);
  const auto& grid = c8.grid();
  for (int m = 0; m < 8; ++m)
    for (int mp = 0; mp < 8; ++mp) {
      CHECK(grid(m, mp) == grid(7 - m, mp));
      CHECK(grid(m, mp) == grid(m, 7 - mp));
    }
  const Eigen::VectorXd back = c8.free_values();
  CHECK((back - free).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("surface partials match finite differences") {
  Rng rng(19);
  const SplineBasis b = make_basis(8, 3, -1.0, 1.0);
  SurfaceCoefficients c(8, 8);
  Eigen::VectorXd free(c.free_count());
  for (int g = 0; g < free.size(); ++g) free[g] = rng.normal();
  c.set_free_values(free);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const double u = rng.uniform(-0.99, 0.99);
    const double v = rng.uniform(-0.99, 0.99);
    const SurfaceEval e = eval_surface(c, b, b, u, v);
    const double du_fd = (eval_surface(c, b, b, u + h, v).value -
                          eval_surface(c, b, b, u - h, v).value) /
                         (2.0 * h);
    const double dv_fd = (eval_surface(c, b, b, u, v + h).value -
                          eval_surface(c, b, b, u, v - h).value) /
                         (2.0 * h);
    CHECK(oracle::rel_err(e.du, du_fd) < 1e-5);
    CHECK(oracle::rel_err(e.dv, dv_fd) < 1e-5);
  }
}

TEST_CASE("time warp endpoints, equal increments, monotonicity") {
  const SplineBasis b = make_basis(4, 3, 0.0, 1.0);
  MonotoneTimeFn tf;
  tf.deltas = Eigen::VectorXd::Constant(3, 0.5);
  const Eigen::VectorXd lam = tf.lambdas();
  CHECK(lam[0] == 0.0);
  CHECK(lam[1] == doctest::Approx(1.0 / 3.0));
  CHECK(lam[2] == doctest::Approx(2.0 / 3.0));
  CHECK(lam[3] == 1.0);
  CHECK(eval_timefn_value(tf, b, 0.0) == doctest::Approx(0.0));
  CHECK(eval_timefn_value(tf, b, 1.0) == doctest::Approx(1.0));

  Rng rng(23);
  const SplineBasis b8 = make_basis(8, 3, 0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    MonotoneTimeFn f;
    f.deltas.resize(7);
    for (int i = 0; i < 7; ++i) f.deltas[i] = rng.uniform();
    double t1 = rng.uniform(), t2 = rng.uniform();
    if (t1 > t2) std::swap(t1, t2);
    CHECK(eval_timefn_value(f, b8, t1) <=
          eval_timefn_value(f, b8, t2) + 1e-12);
    const double v = eval_timefn_value(f, b8, rng.uniform());
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }

  MonotoneTimeFn bad;
  bad.deltas = Eigen::VectorXd::Constant(3, 1.5);
  CHECK_THROWS_AS(eval_timefn_value(bad, b, 0.5), std::runtime_error);
}

TEST_CASE("time warp gradient matches finite differences") {
  Rng rng(29);
  const SplineBasis b = make_basis(8, 3, 0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    MonotoneTimeFn f;
    f.deltas.resize(7);
    for (int i = 0; i < 7; ++i) f.deltas[i] = rng.uniform(0.05, 0.95);
    const double t = rng.uniform();
    const TimeFnEval e = eval_timefn(f, b, t);
    CHECK(e.value == doctest::Approx(eval_timefn_value(f, b, t)));
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& d) {
          MonotoneTimeFn g;
          g.deltas = d;
          return eval_timefn_value(g, b, t);
        },
        f.deltas);
    CHECK(oracle::max_rel_err(e.grad_deltas, fd) < 1e-5);
  }
}
