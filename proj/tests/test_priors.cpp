#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hdsim/priors.hpp"
#include "oracles.hpp"

using namespace hdsim;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("spike normalizer agrees with the closed-form beta integral") {
  // independent route: integral of u^M2 (1-u)^M1 over (0,1) is
  // B(M2+1, M1+1), so the normalizer is pi * B(M2+1, M1+1)
  for (auto [m1, m2] : {std::pair{0.1, 10.0}, {0.5, 2.0}, {0.9, 40.0}}) {
    const SpikeSlabConfig cfg = make_spike_slab(m1, m2, 0.1);
    const double closed = std::log(kPi) + std::lgamma(m2 + 1.0) +
                          std::lgamma(m1 + 1.0) -
                          std::lgamma(m1 + m2 + 2.0);
    CHECK(cfg.spike_log_norm == doctest::Approx(closed).epsilon(1e-10));
  }
  CHECK_THROWS_AS(make_spike_slab(1.2, 10.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_spike_slab(0.1, 0.5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_spike_slab(0.1, 10.0, 0.0), std::invalid_argument);
}

TEST_CASE("spike density integrates to one and is symmetric about pi/2") {
  const SpikeSlabConfig cfg = make_spike_slab(0.1, 10.0, 0.1);
  const double integral = oracle::integrate(
      [&](double t) {
        const double lp = log_spike_density(t, cfg);
        return std::isfinite(lp) ? std::exp(lp) : 0.0;
      },
      1e-12, kPi - 1e-12, 1e-9);
  CHECK(std::abs(integral - 1.0) < 1e-6);

  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const double t = rng.uniform(0.01, kPi - 0.01);
    CHECK(log_spike_density(t, cfg) ==
          doctest::Approx(log_spike_density(kPi - t, cfg)).epsilon(1e-12));
  }

  CHECK(log_spike_density(0.0, cfg) ==
        -std::numeric_limits<double>::infinity());
  CHECK(log_spike_density(kPi, cfg) ==
        -std::numeric_limits<double>::infinity());
  CHECK(log_spike_density(0.5 * kPi, cfg) ==
        -std::numeric_limits<double>::infinity());

  // mass concentrates toward pi/2: density rises over (0, mode)
  CHECK(log_spike_density(0.25 * kPi, cfg) <
        log_spike_density(0.45 * kPi, cfg));
}

TEST_CASE("last-angle density integrates to one with spikes at pi/2 grid") {
  const SpikeSlabConfig cfg = make_spike_slab(0.1, 10.0, 0.1);
  double integral = 0.0;
  for (int piece = 0; piece < 8; ++piece) {
    // even pieces are Be(M1, M2): singular at the left edge
    const bool from_right = piece % 2 == 1;
    integral += oracle::integrate_beta_piece(
        [&](double dist) {
          return log_last_angle_density_edge(piece, from_right, dist, cfg);
        },
        kPi / 4.0, cfg.M1, 1e-10);
  }
  CHECK(std::abs(integral - 1.0) < 1e-6);

  // high density adjacent to every multiple of pi/2, low at the pi/4 grid
  const double eps = 1e-3;
  for (double spike : {0.0, 0.5 * kPi, kPi, 1.5 * kPi, 2.0 * kPi}) {
    const double side = spike == 0.0 ? spike + eps : spike - eps;
    CHECK(log_last_angle_density(side, cfg) >
          log_last_angle_density(spike + (spike == 2.0 * kPi ? -1.0 : 1.0) *
                                             kPi / 8.0,
                                 cfg));
  }

  // the piece pattern repeats with period pi
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const double t = rng.uniform(1e-3, kPi - 1e-3);
    CHECK(log_last_angle_density(t, cfg) ==
          doctest::Approx(log_last_angle_density(t + kPi, cfg))
              .epsilon(1e-12));
  }
}

TEST_CASE("sample_spike matches the spike density (Monte Carlo cdf check)") {
  const SpikeSlabConfig cfg = make_spike_slab(0.1, 10.0, 0.1);
  Rng rng(1234);
  const int n = 20000;
  // empirical probability of the interval (0.4pi, 0.6pi) vs quadrature
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const double t = sample_spike(cfg, AngleKind::interior, rng);
    if (t > 0.4 * kPi && t < 0.6 * kPi) ++hits;
  }
  const double want = oracle::integrate(
      [&](double t) { return std::exp(log_spike_density(t, cfg)); },
      0.4 * kPi, 0.6 * kPi, 1e-9);
  const double got = static_cast<double>(hits) / n;
  const double se = std::sqrt(want * (1.0 - want) / n);
  CHECK(std::abs(got - want) < 4.0 * se);
}

TEST_CASE("log_angle_prior values and gradients") {
  const SpikeSlabConfig cfg = make_spike_slab(0.1, 10.0, 0.3);
  const int m = 11;  // 10 interior + last

  SUBCASE("all slab is the uniform constant") {
    PolarAngles theta;
    theta.angles = Eigen::VectorXd::Constant(m, 1.0);
    InclusionIndicators g;
    g.gamma.assign(m, 1);
    const AnglePriorEval e = log_angle_prior(theta, g, cfg);
    CHECK(e.value ==
          doctest::Approx(-10.0 * std::log(kPi) - std::log(2.0 * kPi)));
    CHECK(e.grad.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("gradient matches finite differences away from kinks") {
    Rng rng(77);
    for (int rep = 0; rep < 100; ++rep) {
      PolarAngles theta;
      theta.angles.resize(m);
      for (int r = 0; r < m - 1; ++r)
        theta.angles[r] = rng.uniform(0.05, kPi - 0.05);
      // keep clear of the pi/4-grid kinks of the last angle
      const int piece = static_cast<int>(rng.uniform_index(8));
      theta.angles[m - 1] = (piece + rng.uniform(0.15, 0.85)) * kPi / 4.0;
      InclusionIndicators g;
      g.gamma.resize(m);
      for (int r = 0; r < m; ++r) g.gamma[r] = rng.bernoulli(0.5) ? 1 : 0;

      const AnglePriorEval e = log_angle_prior(theta, g, cfg);
      const Eigen::VectorXd fd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& a) {
            PolarAngles u;
            u.angles = a;
            return log_angle_prior(u, g, cfg).value;
          },
          theta.angles);
      CHECK(oracle::max_rel_err(e.grad, fd) < 1e-5);
    }
  }

  SUBCASE("exactly at the spike kink the value and gradient stay finite") {
    PolarAngles theta;
    theta.angles = Eigen::VectorXd::Constant(m, 0.5 * kPi);
    InclusionIndicators g;
    g.gamma.assign(m, 0);
    const AnglePriorEval e = log_angle_prior(theta, g, cfg);
    CHECK(std::isfinite(e.value));
    CHECK(e.grad.allFinite());
  }
}

TEST_CASE("gibbs_indicator conditional probabilities") {
  const SpikeSlabConfig cfg = make_spike_slab(0.1, 10.0, 0.3);

  // literal spike density vanishes at pi/2, so inclusion is certain there
  CHECK(indicator_slab_probability(0.5 * kPi, cfg, AngleKind::interior) ==
        1.0);

  // q -> 0 forces exclusion
  const SpikeSlabConfig tiny = make_spike_slab(0.1, 10.0, 1e-12);
  CHECK(indicator_slab_probability(1.2, tiny, AngleKind::interior) < 1e-6);

  // Monte Carlo frequency vs the analytic probability
  Rng rng(56);
  const double t = 1.25;
  const double want =
      indicator_slab_probability(t, cfg, AngleKind::interior);
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i)
    ones += gibbs_indicator(t, cfg, AngleKind::interior, rng) ? 1 : 0;
  const double got = static_cast<double>(ones) / n;
  const double se = std::sqrt(want * (1.0 - want) / n);
  CHECK(std::abs(got - want) < 3.0 * se);
}

TEST_CASE("indicator Gibbs is exchangeable with the mixture density") {
  // q * slab + (1-q) * spike must integrate to 1
  const SpikeSlabConfig cfg = make_spike_slab(0.2, 5.0, 0.35);
  const double integral = oracle::integrate(
      [&](double t) {
        const double spike = std::exp(log_spike_density(t, cfg));
        return cfg.q / kPi + (1.0 - cfg.q) * spike;
      },
      1e-12, kPi - 1e-12, 1e-9);
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("log_coeff_prior closed form") {
  SurfaceCoefficients c(8, 8);
  const int f = c.free_count();
  CHECK(log_coeff_prior(c, 2.0) ==
        doctest::Approx(-0.5 * f * std::log(2.0 * kPi * 4.0)));

  Rng rng(2);
  Eigen::VectorXd free(f);
  for (int g = 0; g < f; ++g) free[g] = rng.normal(0.0, 3.0);
  c.set_free_values(free);
  double want = 0.0;
  const double a = 1.7;
  for (int g = 0; g < f; ++g)
    want += -0.5 * std::log(2.0 * kPi * a * a) -
            free[g] * free[g] / (2.0 * a * a);
  CHECK(log_coeff_prior(c, a) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(log_coeff_prior(c, 0.0), std::invalid_argument);
}

TEST_CASE("dp_update behaviors") {
  SUBCASE("zero effects favor the smallest-variance component") {
    Rng rng(3);
    DPMixtureState st = DPMixtureState::make(3, 50, rng);
    st.stick_weights << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    st.component_scales << 1e-6, 1.0, 100.0;
    const Eigen::VectorXd effects = Eigen::VectorXd::Zero(50);
    dp_update(effects, st, rng);
    int small = 0;
    for (int c : st.assignments) small += (c == 0);
    CHECK(small == 50);
  }

  SUBCASE("H=1 collapses to a single inverse-gamma update") {
    Rng rng(4);
    DPMixtureState st = DPMixtureState::make(1, 20, rng);
    Eigen::VectorXd effects(20);
    for (int i = 0; i < 20; ++i) effects[i] = rng.normal(0.0, 2.0);
    dp_update(effects, st, rng);
    CHECK(st.stick_weights[0] == doctest::Approx(1.0));
    for (int c : st.assignments) CHECK(c == 0);
    CHECK(st.component_scales[0] > 0.0);
  }

  SUBCASE("empty effects is a no-op") {
    Rng rng(5);
    DPMixtureState st = DPMixtureState::make(4, 0, rng);
    const DPMixtureState before = st;
    dp_update(Eigen::VectorXd(), st, rng);
    CHECK((st.stick_weights - before.stick_weights).cwiseAbs().maxCoeff() ==
          0.0);
  }

  SUBCASE("prior reproduction: one joint-update round trip keeps moments") {
    // draw (state, effects) from the joint prior, apply the Gibbs kernel,
    // and check the first stick's prior mean E v_1 = 1/(1+concentration)
    Rng rng(6);
    const int reps = 4000, n_subj = 8;
    std::vector<double> first_weight(reps), first_scale_inv(reps);
    for (int r = 0; r < reps; ++r) {
      DPMixtureState st = DPMixtureState::make(5, n_subj, rng);
      Eigen::VectorXd effects(n_subj);
      for (int i = 0; i < n_subj; ++i)
        effects[i] = rng.normal(
            0.0, std::sqrt(st.component_scales[st.assignments[i]]));
      dp_update(effects, st, rng);
      first_weight[r] = st.stick_weights[0];
      first_scale_inv[r] = 1.0 / st.component_scales[0];
    }
    const auto w = oracle::mc_summary(first_weight);
    CHECK(std::abs(w.mean - 0.5) < 3.0 * w.se);  // E Beta(1,1) = 1/2
    const auto s = oracle::mc_summary(first_scale_inv);
    CHECK(std::abs(s.mean - 4.0) < 3.0 * s.se);  // E Gamma(2, rate .5) = 4
  }
}

TEST_CASE("theory-guided hyperparameters") {
  const SpikeSlabConfig cfg = SpikeSlabConfig::theory_guided(0.1, 100, 400);
  CHECK(cfg.M2 ==
        doctest::Approx(std::sqrt(100.0 * 400.0) * std::log(400.0)));
  CHECK(cfg.q == doctest::Approx(1.0 / 400.0));
}
