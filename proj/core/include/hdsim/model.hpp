#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "hdsim/dataset.hpp"
#include "hdsim/polar.hpp"
#include "hdsim/priors.hpp"
#include "hdsim/rng.hpp"
#include "hdsim/splines.hpp"

namespace hdsim {

enum class VariantKind { base, random_effect_regionwise, no_snp };

struct ModelConfig {
  VariantKind kind = VariantKind::base;
  int K = 8;        // tensor-surface basis size per axis
  int Kprime = 8;   // time-warp basis size
  int degree = 3;
  double a = 10.0;  // sd of the surface-coefficient prior
  double d1 = 1.0;  // gamma prior on the precision
  double d2 = 1.0;
  SpikeSlabConfig spike = make_spike_slab(0.1, 10.0, 0.05);
  int dp_truncation = 20;
};

// Every sampled unknown of the model. Which blocks are active depends on
// the variant: `theta`/`gamma` exist unless no_snp, `alpha` has one entry
// for the base variant and one per region otherwise, `tau`/`offset`/`dp`
// exist for the random-effect variants.
struct ModelState {
  PolarAngles theta;
  InclusionIndicators gamma;
  std::vector<PolarAngles> alpha;
  std::vector<std::array<SurfaceCoefficients, 2>> surfaces;  // [region][role]
  MonotoneTimeFn timefn;
  double sigma2 = 1.0;
  double offset = 0.0;
  Eigen::VectorXd tau;
  DPMixtureState dp;
};

struct GradBlocks {
  Eigen::VectorXd theta;
  std::vector<Eigen::VectorXd> alpha;
  Eigen::VectorXd deltas;
};

// Joint posterior machinery for one dataset/variant pair: likelihood,
// gradients, conjugate conditionals, and the empirical regression-function
// distance. Pure evaluation methods are const and safe to call from
// several threads; the Gibbs methods mutate the passed state and use the
// caller's RNG.
class Model {
 public:
  Model(Dataset data, ModelConfig cfg);

  const Dataset& data() const { return data_; }
  const ModelConfig& config() const { return cfg_; }
  const SplineBasis& basis_uv() const { return basis_uv_; }
  const SplineBasis& basis_t() const { return basis_t_; }
  bool has_snp_block() const { return cfg_.kind != VariantKind::no_snp; }
  bool has_random_effects() const { return cfg_.kind != VariantKind::base; }
  int alpha_block_count() const;

  ModelState initial_state(Rng& rng) const;

  // u_i = X_i . beta(theta) clamped to [-1,1]; empty for no_snp.
  Eigen::VectorXd projections_u(const ModelState& s) const;
  // v(i, block) = Z_i . eta(alpha_block); one column per alpha block.
  Eigen::MatrixXd projections_v(const ModelState& s) const;

  // Tuned during burn-in; leaves M1, M2 and the cached normalizer alone.
  void set_slab_probability(double q) { cfg_.spike.q = q; }

  double fitted_mean(const ModelState& s, int subject, int region,
                     double t_scaled) const;
  double log_likelihood(const ModelState& s) const;
  double log_posterior(const ModelState& s) const;
  GradBlocks grad_blocks(const ModelState& s) const;
  // Selective variant used by the per-block HMC updates.
  GradBlocks grad_blocks(const ModelState& s, bool need_theta,
                         bool need_alpha, bool need_deltas) const;

  void gibbs_surfaces(ModelState& s, Rng& rng) const;
  void gibbs_sigma2(ModelState& s, Rng& rng) const;
  void gibbs_random_effects(ModelState& s, Rng& rng) const;
  void gibbs_indicators(ModelState& s, Rng& rng) const;

  // Exact conditional of the joint free coefficient vector (intercept then
  // slope) for one region; gibbs_surfaces draws from this.
  struct SurfaceConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  SurfaceConditional surface_conditional(const ModelState& s,
                                         int region) const;

  // Exact normal conditional (mean, variance) of one subject effect.
  std::pair<double, double> random_effect_conditional(const ModelState& s,
                                                      int subject) const;

  double empirical_distance(const ModelState& a, const ModelState& b) const;

  // Residual sum of squares and per-observation fitted values.
  Eigen::VectorXd fitted_all(const ModelState& s) const;
  double rss(const ModelState& s) const;

  // Chunked deterministic reduction helper: partial sums over observation
  // chunks of the given size, then summed in chunk order.
  double rss_chunked(const ModelState& s, int chunk) const;

  int observation_count() const { return static_cast<int>(data_.obs.size()); }

 private:
  Dataset data_;
  ModelConfig cfg_;
  SplineBasis basis_uv_;  // on [-1,1], K functions
  SplineBasis basis_t_;   // on [0,1], K' functions
  Eigen::MatrixXd Xt_, Zt_;  // column-per-subject views for gradient loops
  std::vector<std::vector<int>> obs_by_subject_;
  std::vector<std::vector<int>> obs_by_region_;

  int region_of_alpha_block(int block) const;
  void check_state(const ModelState& s) const;
  void region_normal_equations(const ModelState& s, int region,
                               Eigen::MatrixXd& A, Eigen::VectorXd& b) const;
};

}  // namespace hdsim
