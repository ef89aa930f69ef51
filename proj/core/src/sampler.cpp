#include "hdsim/sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double reflect(double position, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("reflect: hi must exceed lo");
  const double w = hi - lo;
  double m = std::fmod(position - lo, 2.0 * w);
  if (m < 0.0) m += 2.0 * w;
  return (m <= w) ? lo + m : hi - (m - w);
}

namespace {

// Folded position plus the parity of wall crossings (odd parity means the
// momentum sign flips).
std::pair<double, bool> fold_with_parity(double x, double lo, double hi) {
  const double w = hi - lo;
  const double k = std::floor((x - lo) / w);
  const double folded = reflect(x, lo, hi);
  const bool odd = std::fmod(std::fmod(k, 2.0) + 2.0, 2.0) >= 1.0;
  return {folded, odd};
}

}  // namespace

LeapfrogResult leapfrog_reflective(const Eigen::VectorXd& q0,
                                   const Eigen::VectorXd& p0,
                                   const GradFn& grad, const Bounds& bounds,
                                   double step, int n_steps) {
  LeapfrogResult out;
  out.q = q0;
  out.p = p0;
  auto g = grad(out.q);
  if (!g || !g->allFinite()) return out;
  out.p += 0.5 * step * (*g);
  for (int l = 0; l < n_steps; ++l) {
    out.q += step * out.p;
    for (int c = 0; c < out.q.size(); ++c) {
      const auto [folded, flip] =
          fold_with_parity(out.q[c], bounds.lo[c], bounds.hi[c]);
      out.q[c] = folded;
      if (flip) out.p[c] = -out.p[c];
    }
    g = grad(out.q);
    if (!g || !g->allFinite()) return out;
    out.p += (l + 1 == n_steps ? 0.5 : 1.0) * step * (*g);
  }
  out.ok = true;
  return out;
}

namespace {

// Free-space leapfrog matching the description "candidates are reflected
// back if they cross the boundaries": the integrator never folds positions,
// gradients are taken at the reflected image (with the fold parity applied
// by the chain rule), and only the final candidate is folded into range.
LeapfrogResult leapfrog_endpoint_fold(const Eigen::VectorXd& q0,
                                      const Eigen::VectorXd& p0,
                                      const GradFn& grad, const Bounds& bounds,
                                      double step, int n_steps) {
  LeapfrogResult out;
  out.q = q0;
  out.p = p0;
  const auto grad_ext = [&](const Eigen::VectorXd& q)
      -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd folded(q.size());
    Eigen::VectorXd sign(q.size());
    for (int c = 0; c < q.size(); ++c) {
      const auto [f, odd] = fold_with_parity(q[c], bounds.lo[c], bounds.hi[c]);
      folded[c] = f;
      sign[c] = odd ? -1.0 : 1.0;
    }
    auto g = grad(folded);
    if (!g) return std::nullopt;
    return (g->array() * sign.array()).matrix().eval();
  };
  auto g = grad_ext(out.q);
  if (!g || !g->allFinite()) return out;
  out.p += 0.5 * step * (*g);
  for (int l = 0; l < n_steps; ++l) {
    out.q += step * out.p;
    g = grad_ext(out.q);
    if (!g || !g->allFinite()) return out;
    out.p += (l + 1 == n_steps ? 0.5 : 1.0) * step * (*g);
  }
  for (int c = 0; c < out.q.size(); ++c)
    out.q[c] = reflect(out.q[c], bounds.lo[c], bounds.hi[c]);
  out.ok = true;
  return out;
}

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& mass) {
  if (mass.size() == 0) return 0.5 * p.squaredNorm();
  return 0.5 * (p.array().square() / mass.array()).sum();
}

}  // namespace

HmcUpdate hmc_step(const Eigen::VectorXd& q0,
                   const std::function<double(const Eigen::VectorXd&)>& logp,
                   const GradFn& grad, const Bounds& bounds,
                   const HMCConfig& cfg, ReflectionMode mode, Rng& rng) {
  HmcUpdate out;
  out.q = q0;
  const int d = static_cast<int>(q0.size());
  Eigen::VectorXd p(d);
  for (int c = 0; c < d; ++c) {
    const double m = cfg.mass.size() ? cfg.mass[c] : 1.0;
    p[c] = rng.normal(0.0, std::sqrt(m));
  }
  const double h0 = -logp(q0) + kinetic(p, cfg.mass);
  const LeapfrogResult lf =
      mode == ReflectionMode::leapfrog
          ? leapfrog_reflective(q0, p, grad, bounds, cfg.step_size,
                                cfg.leapfrog_steps)
          : leapfrog_endpoint_fold(q0, p, grad, bounds, cfg.step_size,
                                   cfg.leapfrog_steps);
  if (!lf.ok) return out;
  const double h1 = -logp(lf.q) + kinetic(lf.p, cfg.mass);
  if (!std::isfinite(h1)) return out;
  if (std::log(rng.uniform()) < h0 - h1) {
    out.q = lf.q;
    out.accepted = true;
  }
  return out;
}

namespace {

Bounds angle_bounds(int count) {
  Bounds b;
  b.lo = Eigen::VectorXd::Zero(count);
  b.hi = Eigen::VectorXd::Constant(count, kPi);
  b.hi[count - 1] = 2.0 * kPi;
  return b;
}

Bounds unit_bounds(int count) {
  Bounds b;
  b.lo = Eigen::VectorXd::Zero(count);
  b.hi = Eigen::VectorXd::Ones(count);
  return b;
}

}  // namespace

bool hmc_block_update(const Model& model, ModelState& state, BlockId block,
                      int alpha_index, const HMCConfig& cfg,
                      ReflectionMode mode, Rng& rng) {
  ModelState work = state;

  Eigen::VectorXd q0;
  Bounds bounds;
  switch (block) {
    case BlockId::theta:
      q0 = state.theta.angles;
      bounds = angle_bounds(static_cast<int>(q0.size()));
      break;
    case BlockId::alpha:
      q0 = state.alpha[alpha_index].angles;
      bounds = angle_bounds(static_cast<int>(q0.size()));
      break;
    case BlockId::deltas:
      q0 = state.timefn.deltas;
      bounds = unit_bounds(static_cast<int>(q0.size()));
      break;
  }

  const auto put = [&](const Eigen::VectorXd& q) {
    switch (block) {
      case BlockId::theta: work.theta.angles = q; break;
      case BlockId::alpha: work.alpha[alpha_index].angles = q; break;
      case BlockId::deltas: work.timefn.deltas = q; break;
    }
  };
  const auto logp = [&](const Eigen::VectorXd& q) {
    put(q);
    return model.log_posterior(work);
  };
  const GradFn grad = [&](const Eigen::VectorXd& q)
      -> std::optional<Eigen::VectorXd> {
    put(q);
    const GradBlocks g = model.grad_blocks(work, block == BlockId::theta,
                                           block == BlockId::alpha,
                                           block == BlockId::deltas);
    Eigen::VectorXd out;
    switch (block) {
      case BlockId::theta: out = g.theta; break;
      case BlockId::alpha: out = g.alpha[alpha_index]; break;
      case BlockId::deltas: out = g.deltas; break;
    }
    if (!out.allFinite()) return std::nullopt;
    return out;
  };

  const HmcUpdate up = hmc_step(q0, logp, grad, bounds, cfg, mode, rng);
  if (up.accepted) {
    put(up.q);
    state = std::move(work);
  }
  return up.accepted;
}

SweepDiagnostics sweep(const Model& model, ModelState& state,
                       const ChainConfig& cfg, Rng& rng) {
  SweepDiagnostics d;
  model.gibbs_surfaces(state, rng);
  model.gibbs_sigma2(state, rng);
  if (model.has_snp_block())
    d.accept_theta = hmc_block_update(model, state, BlockId::theta, 0,
                                      cfg.hmc_theta, cfg.reflection, rng);
  int alpha_accepts = 0;
  for (int b = 0; b < model.alpha_block_count(); ++b)
    alpha_accepts += hmc_block_update(model, state, BlockId::alpha, b,
                                      cfg.hmc_alpha, cfg.reflection, rng)
                         ? 1
                         : 0;
  d.accept_alpha_rate =
      static_cast<double>(alpha_accepts) / model.alpha_block_count();
  d.accept_deltas = hmc_block_update(model, state, BlockId::deltas, 0,
                                     cfg.hmc_delta, cfg.reflection, rng);
  model.gibbs_indicators(state, rng);
  if (model.has_random_effects()) model.gibbs_random_effects(state, rng);
  d.log_posterior = model.log_posterior(state);
  d.model_size = state.gamma.model_size();
  return d;
}

void Adapter::DualAvg::observe(double accept_prob, double target) {
  // dual averaging toward the target acceptance rate
  constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  count += 1;
  h_sum += target - accept_prob;
  log_step = mu - std::sqrt(static_cast<double>(count)) / gamma * h_sum /
                      (count + t0);
  const double eta = std::pow(static_cast<double>(count), -kappa);
  log_step_avg = eta * log_step + (1.0 - eta) * log_step_avg;
}

Adapter::Adapter(const ChainConfig& cfg, double base_q)
    : size_lo_(cfg.adapt_size_lo),
      size_hi_(cfg.adapt_size_hi),
      adapt_q_(cfg.adapt_q),
      base_q_(base_q) {
  theta_.mu = std::log(cfg.hmc_theta.step_size);
  theta_.log_step = theta_.mu;
  theta_.log_step_avg = theta_.mu;
  alpha_.mu = std::log(cfg.hmc_alpha.step_size);
  alpha_.log_step = alpha_.mu;
  alpha_.log_step_avg = alpha_.mu;
  delta_.mu = std::log(cfg.hmc_delta.step_size);
  delta_.log_step = delta_.mu;
  delta_.log_step_avg = delta_.mu;
}

void Adapter::observe(const SweepDiagnostics& d, int /*iteration*/) {
  theta_.observe(d.accept_theta ? 1.0 : 0.0, 0.7);
  alpha_.observe(d.accept_alpha_rate, 0.7);
  delta_.observe(d.accept_deltas ? 1.0 : 0.0, 0.7);
  if (!size_seeded_) {
    size_running_ = d.model_size;
    size_seeded_ = true;
  } else {
    size_running_ = 0.9 * size_running_ + 0.1 * d.model_size;
  }
  if (adapt_q_) {
    if (size_running_ > size_hi_) q_scale_ /= 1.05;
    if (size_running_ < size_lo_) q_scale_ *= 1.05;
  }
}

void Adapter::apply(ChainConfig& cfg, double& slab_q) const {
  cfg.hmc_theta.step_size = theta_.current();
  cfg.hmc_alpha.step_size = alpha_.current();
  cfg.hmc_delta.step_size = delta_.current();
  slab_q = std::clamp(base_q_ * q_scale_, 1e-8, 0.5);
}

void Adapter::freeze(ChainConfig& cfg, double& slab_q) const {
  cfg.hmc_theta.step_size = theta_.averaged();
  cfg.hmc_alpha.step_size = alpha_.averaged();
  cfg.hmc_delta.step_size = delta_.averaged();
  slab_q = std::clamp(base_q_ * q_scale_, 1e-8, 0.5);
}

Eigen::VectorXd Chain::inclusion_frequencies() const {
  if (post_burn_iterations == 0) return inclusion_counts;
  return inclusion_counts / static_cast<double>(post_burn_iterations);
}

Eigen::VectorXd Chain::beta_posterior_mean() const {
  if (post_burn_iterations == 0) return beta_mean_accum;
  return beta_mean_accum / static_cast<double>(post_burn_iterations);
}

Chain run_chain(Model& model, const ChainConfig& cfg) {
  if (!(cfg.burn_in < cfg.iterations))
    throw std::invalid_argument("run_chain: burn_in must be < iterations");
  if (cfg.thin < 1) throw std::invalid_argument("run_chain: thin must be >= 1");
  if (cfg.adapt_size_lo > cfg.adapt_size_hi)
    throw std::invalid_argument("run_chain: bad model-size window");

  Rng rng(cfg.seed);
  ModelState state = model.initial_state(rng);
  const double lp0 = model.log_posterior(state);
  if (!std::isfinite(lp0)) {
    std::ostringstream oss;
    oss << "run_chain: non-finite log-posterior at initialization"
        << " (sigma2=" << state.sigma2
        << ", log_likelihood=" << model.log_likelihood(state) << ")";
    throw std::runtime_error(oss.str());
  }

  Chain chain;
  chain.config = cfg;
  chain.model_config = model.config();
  chain.xdim = model.data().xdim();
  chain.zdim = model.data().zdim();
  chain.num_regions = model.data().num_regions;
  const int n_angles = model.has_snp_block() ? model.data().xdim() - 1 : 0;
  chain.inclusion_counts = Eigen::VectorXd::Zero(n_angles);
  chain.beta_mean_accum =
      Eigen::VectorXd::Zero(model.has_snp_block() ? model.data().xdim() : 0);

  ChainConfig live = cfg;
  Adapter adapter(cfg, model.config().spike.q);
  double q_live = model.config().spike.q;

  double acc_theta = 0.0, acc_alpha = 0.0, acc_delta = 0.0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const SweepDiagnostics d = sweep(model, state, live, rng);
    chain.log_posterior_trace.push_back(d.log_posterior);

    if (iter < cfg.burn_in) {
      adapter.observe(d, iter);
      if (iter + 1 == cfg.burn_in) {
        adapter.freeze(live, q_live);
      } else {
        adapter.apply(live, q_live);
      }
      model.set_slab_probability(q_live);
    } else {
      chain.post_burn_iterations += 1;
      if (model.has_snp_block()) {
        for (int r = 0; r < n_angles; ++r)
          chain.inclusion_counts[r] += state.gamma.gamma[r];
        chain.beta_mean_accum += polar_to_unit(state.theta);
      }
      acc_theta += d.accept_theta ? 1.0 : 0.0;
      acc_alpha += d.accept_alpha_rate;
      acc_delta += d.accept_deltas ? 1.0 : 0.0;
      if ((iter - cfg.burn_in) % cfg.thin == 0)
        chain.draws.push_back({state, d, iter});
    }
  }

  const double denom = std::max(1, chain.post_burn_iterations);
  chain.accept_rate_theta = acc_theta / denom;
  chain.accept_rate_alpha = acc_alpha / denom;
  chain.accept_rate_deltas = acc_delta / denom;
  chain.final_q = q_live;
  chain.config.hmc_theta.step_size = live.hmc_theta.step_size;
  chain.config.hmc_alpha.step_size = live.hmc_alpha.step_size;
  chain.config.hmc_delta.step_size = live.hmc_delta.step_size;
  return chain;
}

}  // namespace hdsim
