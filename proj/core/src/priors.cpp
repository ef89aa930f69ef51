#include "hdsim/priors.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKinkNudge = 1e-12;

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}
}  // namespace

SpikeSlabConfig make_spike_slab(double M1, double M2, double q) {
  if (!(M1 < 1.0 && M2 >= 1.0))
    throw std::invalid_argument("spike-slab requires M1 < 1 <= M2");
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("slab probability must lie in (0,1)");
  SpikeSlabConfig cfg;
  cfg.M1 = M1;
  cfg.M2 = M2;
  cfg.q = q;
  // Normalizer of the literal kernel (min(t,pi-t)/(pi/2))^M2 (1-...)^M1 over
  // (0,pi). By symmetry this is pi * int_0^1 u^M2 (1-u)^M1 du; the exponents
  // are M2 and M1 themselves, not M2-1/M1-1, so the printed beta constant
  // does not apply and the integral is computed numerically once.
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double I = integrator.integrate(
      [&](double u) { return std::pow(u, M2) * std::pow(1.0 - u, M1); }, 0.0,
      1.0);
  cfg.spike_log_norm = std::log(kPi * I);
  return cfg;
}

SpikeSlabConfig SpikeSlabConfig::theory_guided(double M1, int n, int p) {
  const double M2 = std::sqrt(static_cast<double>(n) * p) * std::log(p);
  const double q = 1.0 / p;
  return make_spike_slab(M1, M2, q);
}

double log_spike_density(double theta_r, const SpikeSlabConfig& cfg) {
  if (!(theta_r > 0.0 && theta_r < kPi)) return -kInf;
  const double u = std::min(theta_r, kPi - theta_r) / (0.5 * kPi);
  if (u <= 0.0 || u >= 1.0) return -kInf;
  return cfg.M2 * std::log(u) + cfg.M1 * std::log1p(-u) - cfg.spike_log_norm;
}

double log_last_angle_density_edge(int piece, bool from_right, double dist,
                                   const SpikeSlabConfig& cfg) {
  if (piece < 0 || piece > 7 || !(dist >= 0.0 && dist <= 1.0)) return -kInf;
  const double width = 0.25 * kPi;
  const bool even = (piece % 2 == 0);
  double a = even ? cfg.M1 : cfg.M2;
  double b = even ? cfg.M2 : cfg.M1;
  if (from_right) std::swap(a, b);
  // only the hosting piece contributes; mixture weight 1/8, scaled to width
  return (a - 1.0) * std::log(dist) + (b - 1.0) * std::log1p(-dist) -
         log_beta_fn(a, b) - std::log(8.0) - std::log(width);
}

double log_last_angle_density(double theta_last, const SpikeSlabConfig& cfg) {
  if (!(theta_last >= 0.0 && theta_last <= 2.0 * kPi)) return -kInf;
  const double width = 0.25 * kPi;
  int piece = static_cast<int>(theta_last / width);
  if (piece > 7) piece = 7;
  const double x = theta_last / width - piece;
  if (x <= 0.5)
    return log_last_angle_density_edge(piece, false, x, cfg);
  return log_last_angle_density_edge(piece, true,
                                     (piece + 1) - theta_last / width, cfg);
}

double sample_spike(const SpikeSlabConfig& cfg, AngleKind kind, Rng& rng) {
  if (kind == AngleKind::interior) {
    const double u = rng.beta(cfg.M2 + 1.0, cfg.M1 + 1.0);
    const double t = u * 0.5 * kPi;
    return rng.bernoulli(0.5) ? kPi - t : t;
  }
  const int piece = static_cast<int>(rng.uniform_index(8));
  const bool even = (piece % 2 == 0);
  const double x =
      even ? rng.beta(cfg.M1, cfg.M2) : rng.beta(cfg.M2, cfg.M1);
  return (piece + x) * 0.25 * kPi;
}

namespace {

// Nudges an angle off an exact kink of its spike density so value and
// gradient stay finite; the one-sided derivative then comes from the side
// of the nudged value.
double nudge_interior(double t) {
  if (t == 0.5 * kPi) return t + kKinkNudge;
  return t;
}

double nudge_last(double t) {
  const double width = 0.25 * kPi;
  for (int j = 0; j <= 8; ++j) {
    if (t == j * width) return (j == 8) ? t - kKinkNudge : t + kKinkNudge;
  }
  return t;
}

}  // namespace

AnglePriorEval log_angle_prior(const PolarAngles& theta,
                               const InclusionIndicators& gamma,
                               const SpikeSlabConfig& cfg) {
  const int m = static_cast<int>(theta.angles.size());
  if (static_cast<int>(gamma.gamma.size()) != m)
    throw std::invalid_argument("log_angle_prior: indicator length mismatch");
  AnglePriorEval out;
  out.grad = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < m; ++r) {
    const bool last = (r == m - 1);
    if (gamma.gamma[r]) {
      out.value += last ? -std::log(2.0 * kPi) : -std::log(kPi);
      continue;
    }
    if (!last) {
      const double t = nudge_interior(theta.angles[r]);
      out.value += log_spike_density(t, cfg);
      const double u = std::min(t, kPi - t) / (0.5 * kPi);
      const double du_dt = (t < 0.5 * kPi ? 1.0 : -1.0) / (0.5 * kPi);
      out.grad[r] = (cfg.M2 / u - cfg.M1 / (1.0 - u)) * du_dt;
    } else {
      const double t = nudge_last(theta.angles[r]);
      out.value += log_last_angle_density(t, cfg);
      const double width = 0.25 * kPi;
      int piece = static_cast<int>(t / width);
      if (piece > 7) piece = 7;
      const double x = t / width - piece;
      const bool even = (piece % 2 == 0);
      const double a = even ? cfg.M1 : cfg.M2;
      const double b = even ? cfg.M2 : cfg.M1;
      out.grad[r] = ((a - 1.0) / x - (b - 1.0) / (1.0 - x)) / width;
    }
  }
  return out;
}

double indicator_slab_probability(double theta_r, const SpikeSlabConfig& cfg,
                                  AngleKind kind) {
  const double log_slab =
      kind == AngleKind::interior ? -std::log(kPi) : -std::log(2.0 * kPi);
  const double log_spike = kind == AngleKind::interior
                               ? log_spike_density(theta_r, cfg)
                               : log_last_angle_density(theta_r, cfg);
  if (log_spike == -kInf) return 1.0;
  if (log_spike == kInf) return 0.0;
  const double log_odds = std::log(cfg.q) + log_slab -
                          (std::log1p(-cfg.q) + log_spike);
  return 1.0 / (1.0 + std::exp(-log_odds));
}

bool gibbs_indicator(double theta_r, const SpikeSlabConfig& cfg,
                     AngleKind kind, Rng& rng) {
  return rng.bernoulli(indicator_slab_probability(theta_r, cfg, kind));
}

double log_coeff_prior(const SurfaceCoefficients& coeffs, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("log_coeff_prior: a must be > 0");
  const Eigen::VectorXd v = coeffs.free_values();
  const double n = static_cast<double>(v.size());
  return -0.5 * n * std::log(2.0 * kPi * a * a) -
         v.squaredNorm() / (2.0 * a * a);
}

DPMixtureState DPMixtureState::make(int truncation, int num_subjects,
                                    Rng& rng) {
  if (truncation < 1)
    throw std::invalid_argument("DPMixtureState: truncation must be >= 1");
  DPMixtureState st;
  st.truncation = truncation;
  st.stick_weights.resize(truncation);
  st.component_scales.resize(truncation);
  double remaining = 1.0;
  for (int h = 0; h < truncation; ++h) {
    const double v =
        (h + 1 == truncation) ? 1.0 : rng.beta(1.0, st.concentration);
    st.stick_weights[h] = v * remaining;
    remaining *= (1.0 - v);
    st.component_scales[h] = rng.inverse_gamma(st.base_shape, st.base_rate);
  }
  st.assignments.resize(num_subjects);
  std::vector<double> w(st.stick_weights.data(),
                        st.stick_weights.data() + truncation);
  for (int i = 0; i < num_subjects; ++i)
    st.assignments[i] = static_cast<int>(rng.categorical(w));
  return st;
}

void dp_update(const Eigen::VectorXd& effects, DPMixtureState& state,
               Rng& rng) {
  const int n = static_cast<int>(effects.size());
  if (n == 0) return;
  const int H = state.truncation;
  if (static_cast<int>(state.assignments.size()) != n)
    state.assignments.assign(n, 0);

  // (1) component assignments
  std::vector<double> logw(H);
  for (int h = 0; h < H; ++h)
    logw[h] = std::log(std::max(state.stick_weights[h], 1e-300)) -
              0.5 * std::log(2.0 * kPi * state.component_scales[h]);
  std::vector<double> probs(H);
  for (int i = 0; i < n; ++i) {
    double mx = -kInf;
    for (int h = 0; h < H; ++h) {
      probs[h] =
          logw[h] - effects[i] * effects[i] / (2.0 * state.component_scales[h]);
      mx = std::max(mx, probs[h]);
    }
    for (int h = 0; h < H; ++h) probs[h] = std::exp(probs[h] - mx);
    state.assignments[i] = static_cast<int>(rng.categorical(probs));
  }

  // (2) sticks from their beta conditionals
  std::vector<int> counts(H, 0);
  for (int i = 0; i < n; ++i) counts[state.assignments[i]]++;
  std::vector<int> tail(H, 0);  // subjects assigned beyond component h
  for (int h = H - 2; h >= 0; --h) tail[h] = tail[h + 1] + counts[h + 1];
  double remaining = 1.0;
  for (int h = 0; h < H; ++h) {
    const double v = (h + 1 == H)
                         ? 1.0
                         : rng.beta(1.0 + counts[h],
                                    state.concentration + tail[h]);
    state.stick_weights[h] = v * remaining;
    remaining *= (1.0 - v);
  }

  // (3) scales from their inverse-gamma conditionals
  for (int h = 0; h < H; ++h) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i)
      if (state.assignments[i] == h) ss += effects[i] * effects[i];
    state.component_scales[h] = rng.inverse_gamma(
        state.base_shape + 0.5 * counts[h], state.base_rate + 0.5 * ss);
  }
}

}  // namespace hdsim
