#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hdsim/dataset.hpp"
#include "hdsim/model.hpp"
#include "hdsim/rng.hpp"
#include "hdsim/sampler.hpp"

namespace hdsim {

enum class Scenario { nonlinear, linear };

struct SimTruth {
  Eigen::VectorXd beta0;        // sparse unit vector
  std::vector<int> support;     // I0
  Eigen::VectorXd eta0;         // unit vector
  double sigma0 = 1.0;
  Scenario scenario = Scenario::nonlinear;
  Eigen::VectorXd gamma1, gamma2;  // per region, linear scenario only
};

struct SimData {
  Dataset data;
  SimTruth truth;
};

// Simulation generators: binary X with row-specific Bernoulli rates,
// standard-normal Z, 5% sparse beta0 from a two-normal mixture, fixed eta0,
// all rows and directions normalized. The nonlinear scenario uses cubic /
// exponential region surfaces with a t^2 time warp; the linear scenario is
// the shared-coefficient linear trend model.
SimData gen_nonlinear(int n, int p, int J, int T, std::uint64_t seed);
SimData gen_linear(int n, int p, int J, int T, std::uint64_t seed);

enum class SplitMode {
  by_subject,   // subjects split in half; test subjects unseen in training
  stratified,   // observations split within each (subject, region) stratum
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<int> train_subjects;  // original subject ids (by_subject mode)
  std::vector<int> test_subjects;
};

Split split_half(const Dataset& data, SplitMode mode, std::uint64_t seed);

double prediction_error(const Eigen::VectorXd& predictions,
                        const std::vector<Observation>& test);

// Largest canonical correlation between two column blocks, via singular
// values of the whitened cross-covariance; rank deficiency is handled by
// pseudo-inverse whitening and zero-variance columns are dropped.
double max_canonical_correlation(const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& B);

// Bayesian linear baseline of the shared-coefficient trend model with a
// horseshoe prior on the high-dimensional block: (1-t) X'beta + (1-t) Z'eta
// + gamma_{1,j} - t gamma_{2,j}. Local/global scales move by
// slice-within-Gibbs, coefficients by their conjugate normal.
struct HorseshoeConfig {
  int iterations = 1500;
  int burn_in = 500;
  std::uint64_t seed = 0;
};

struct HorseshoeFit {
  Eigen::VectorXd beta_mean;
  Eigen::VectorXd eta_mean;
  Eigen::VectorXd gamma1_mean, gamma2_mean;
  double sigma2_mean = 0.0;
  // posterior draws of beta kept for interval summaries
  Eigen::MatrixXd beta_draws;  // draws x p (thinned)
};

HorseshoeFit fit_horseshoe_linear(const Dataset& train,
                                  const HorseshoeConfig& cfg);

Eigen::VectorXd predict_horseshoe(const HorseshoeFit& fit,
                                  const Dataset& test);

// Conjugate-Gibbs fit of the region-wise linear longitudinal model with a
// subject random intercept: per-region intercept/slope coefficient blocks
// over the engineered covariate design, diffuse normal priors.
struct LinearLongitudinalConfig {
  int iterations = 1500;
  int burn_in = 500;
  std::uint64_t seed = 0;
  double prior_variance = 1e6;
  std::vector<std::pair<int, int>> interactions;  // extra Z column products
  bool random_effect = true;
};

struct LinearLongitudinalFit {
  Eigen::MatrixXd coef0_mean;  // regions x design cols (intercept block)
  Eigen::MatrixXd coef1_mean;  // regions x design cols (slope block)
  Eigen::VectorXd tau_mean;    // per training subject
  double sigma2_mean = 0.0;
  double tau_variance_mean = 0.0;
  std::vector<std::pair<int, int>> interactions;
};

LinearLongitudinalFit fit_linear_longitudinal(
    const Dataset& train, const LinearLongitudinalConfig& cfg);

Eigen::VectorXd predict_linear_longitudinal(const LinearLongitudinalFit& fit,
                                            const Dataset& test);

struct EvalRow {
  std::string method;
  int n = 0, p = 0;
  double mse = 0.0;
  double canonical_correlation = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;                    // aggregated means
  std::vector<std::vector<EvalRow>> replicate_rows;
  std::vector<int> failed_replications;
};

struct BenchmarkConfig {
  Scenario scenario = Scenario::nonlinear;
  int n = 200, p = 500;
  int J = 13, T = 5;
  int replications = 5;
  std::uint64_t seed = 0;
  int iterations = 1500;
  int burn_in = 500;
  std::optional<int> basis_k;  // default: schedule 8/11/14 by sample size
  int threads = 1;
};

int basis_size_for_sample(int n);

EvalReport run_benchmark(const BenchmarkConfig& cfg);

void write_report(const EvalReport& report, const std::string& path);

// Posterior-mean predictions for every observation of `data` under the
// stored draws of a fitted chain. Random-effect chains require every test
// subject to be part of the training subject set (stratified split).
Eigen::VectorXd predict_posterior_mean(const Chain& chain,
                                       const Dataset& data);

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hdsim
