#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdsim/model.hpp"
#include "hdsim/rng.hpp"

namespace hdsim {

struct HMCConfig {
  double step_size = 0.01;
  int leapfrog_steps = 20;
  double target_accept = 0.7;
  Eigen::VectorXd mass;  // per-coordinate; empty = identity
};

// How bounded supports are handled inside a trajectory: reflect within the
// leapfrog (momentum negated at each wall hit), or integrate freely and
// fold only the final candidate back into range, which is what the paper's
// description of the Metropolis adjustment amounts to.
enum class ReflectionMode { leapfrog, endpoint_fold };

struct ChainConfig {
  int iterations = 4000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 0;
  int adapt_size_lo = 20;  // desired model-size window for q tuning
  int adapt_size_hi = 30;
  bool adapt_q = true;
  ReflectionMode reflection = ReflectionMode::leapfrog;
  HMCConfig hmc_theta;
  HMCConfig hmc_alpha;
  HMCConfig hmc_delta;
};

// Folds a scalar into [lo,hi] by repeated reflection at both walls.
double reflect(double position, double lo, double hi);

struct Bounds {
  Eigen::VectorXd lo, hi;
};

using GradFn = std::function<std::optional<Eigen::VectorXd>(
    const Eigen::VectorXd&)>;  // gradient of the log-target; nullopt = abort

struct LeapfrogResult {
  Eigen::VectorXd q, p;
  bool ok = false;
};

// Leapfrog with in-trajectory wall reflection: after each position update a
// coordinate crossing a wall is folded back and its momentum negated. The
// map is volume-preserving and reversible under momentum flip.
LeapfrogResult leapfrog_reflective(const Eigen::VectorXd& q0,
                                   const Eigen::VectorXd& p0,
                                   const GradFn& grad, const Bounds& bounds,
                                   double step, int n_steps);

// Generic bounded-HMC update of an arbitrary target; used by tests and the
// calibration suite as well as the model sweep.
struct HmcUpdate {
  Eigen::VectorXd q;
  bool accepted = false;
};
HmcUpdate hmc_step(const Eigen::VectorXd& q0,
                   const std::function<double(const Eigen::VectorXd&)>& logp,
                   const GradFn& grad, const Bounds& bounds,
                   const HMCConfig& cfg, ReflectionMode mode, Rng& rng);

enum class BlockId { theta, alpha, deltas };

// One model-block HMC update in place; returns acceptance.
bool hmc_block_update(const Model& model, ModelState& state, BlockId block,
                      int alpha_index, const HMCConfig& cfg,
                      ReflectionMode mode, Rng& rng);

// Per-iteration scalar diagnostics.
struct SweepDiagnostics {
  double log_posterior = 0.0;
  bool accept_theta = false;
  double accept_alpha_rate = 0.0;
  bool accept_deltas = false;
  int model_size = 0;
};

SweepDiagnostics sweep(const Model& model, ModelState& state,
                       const ChainConfig& cfg, Rng& rng);

// Dual-averaging step-size adaptation plus multiplicative tuning of the
// slab probability toward the desired model size. Active only during
// burn-in; run_chain freezes everything afterwards.
class Adapter {
 public:
  Adapter(const ChainConfig& cfg, double base_q);

  void observe(const SweepDiagnostics& d, int iteration);
  void apply(ChainConfig& cfg, double& slab_q) const;
  void freeze(ChainConfig& cfg, double& slab_q) const;

 private:
  struct DualAvg {
    double mu = 0.0, log_step = 0.0, log_step_avg = 0.0;
    double h_sum = 0.0;
    int count = 0;
    void observe(double accept_prob, double target);
    double current() const { return std::exp(log_step); }
    double averaged() const { return std::exp(log_step_avg); }
  };
  DualAvg theta_, alpha_, delta_;
  int size_lo_, size_hi_;
  bool adapt_q_;
  double q_scale_ = 1.0;
  double base_q_ = 0.0;
  double size_running_ = 0.0;
  bool size_seeded_ = false;
};

struct StoredDraw {
  ModelState state;
  SweepDiagnostics diag;
  int iteration = 0;
};

struct Chain {
  ChainConfig config;
  ModelConfig model_config;
  int xdim = 0, zdim = 0, num_regions = 0;
  std::vector<StoredDraw> draws;                 // thinned, post burn-in
  std::vector<double> log_posterior_trace;       // every iteration
  Eigen::VectorXd inclusion_counts;              // per angle, post burn-in
  Eigen::VectorXd beta_mean_accum;               // sum of beta draws
  int post_burn_iterations = 0;
  double accept_rate_theta = 0.0;
  double accept_rate_alpha = 0.0;
  double accept_rate_deltas = 0.0;
  double final_q = 0.0;

  Eigen::VectorXd inclusion_frequencies() const;
  Eigen::VectorXd beta_posterior_mean() const;
};

// Runs burn-in with adaptation then sampling with frozen tuning. The model
// is non-const because the slab probability q is tuned during burn-in.
Chain run_chain(Model& model, const ChainConfig& cfg);

}  // namespace hdsim
