#include "hdsim/experiments.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "hdsim/selection.hpp"

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 g(seq);
  return g();
}

namespace {

struct CovariatePipeline {
  Eigen::MatrixXd X, Z;
  Eigen::VectorXd beta0, eta0;
  std::vector<int> support;
};

// Shared first stage of both generators, so a common seed yields the same
// X, Z, beta0 and eta0 for the two scenarios.
CovariatePipeline gen_covariates(int n, int p, Rng& rng) {
  CovariatePipeline cp;
  cp.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    const double rate = rng.uniform();
    for (int s = 0; s < p; ++s) cp.X(i, s) = rng.bernoulli(rate) ? 1.0 : 0.0;
  }
  const int k = 5;
  cp.Z.resize(n, k);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < k; ++s) cp.Z(i, s) = rng.normal();

  const int s0 = p / 20;  // 5% support
  std::vector<int> idx(p);
  for (int s = 0; s < p; ++s) idx[s] = s;
  for (int s = 0; s < s0; ++s) {
    const std::size_t pick = s + rng.uniform_index(p - s);
    std::swap(idx[s], idx[pick]);
  }
  cp.support.assign(idx.begin(), idx.begin() + s0);
  std::sort(cp.support.begin(), cp.support.end());

  cp.beta0 = Eigen::VectorXd::Zero(p);
  for (int s : cp.support)
    cp.beta0[s] = rng.bernoulli(0.5) ? rng.normal(2.0, 1.0)
                                     : rng.normal(-1.0, 1.0);
  cp.eta0.resize(k);
  cp.eta0 << 1.0, -2.0, 4.3, 10.0, -8.0;

  normalize_rows(cp.X);
  normalize_rows(cp.Z);
  cp.beta0 /= cp.beta0.norm();
  cp.eta0 /= cp.eta0.norm();
  return cp;
}

std::vector<double> time_grid(int T) {
  std::vector<double> t(T);
  for (int k = 0; k < T; ++k)
    t[k] = T == 1 ? 0.0 : static_cast<double>(k) / (T - 1);
  return t;
}

}  // namespace

SimData gen_nonlinear(int n, int p, int J, int T, std::uint64_t seed) {
  if (n % 2 != 0) throw std::invalid_argument("gen_nonlinear: n must be even");
  if (p < 40) throw std::invalid_argument("gen_nonlinear: p must be >= 40");
  Rng rng(seed);
  CovariatePipeline cp = gen_covariates(n, p, rng);

  SimData out;
  out.truth.beta0 = cp.beta0;
  out.truth.eta0 = cp.eta0;
  out.truth.support = cp.support;
  out.truth.scenario = Scenario::nonlinear;
  out.data.X = cp.X;
  out.data.Z = cp.Z;
  out.data.num_regions = J;

  const Eigen::VectorXd u = cp.X * cp.beta0;
  const Eigen::VectorXd v = cp.Z * cp.eta0;
  const auto ts = time_grid(T);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= J; ++j) {
      const double w = static_cast<double>(j) / J;
      const double a0 = 2.0 * std::pow(w * u[i], 3.0) +
                        2.0 * std::pow((1.0 - w) * v[i], 3.0);
      const double a1 =
          2.0 * std::exp(w * v[i]) + 2.0 * std::exp((1.0 - w) * u[i]);
      for (double t : ts) {
        Observation o;
        o.subject = i;
        o.region = j - 1;
        o.time_raw = 36.0 * t;
        o.t = t;
        o.y = a0 - a1 * t * t + rng.normal(0.0, out.truth.sigma0);
        out.data.obs.push_back(o);
      }
    }
  }
  return out;
}

SimData gen_linear(int n, int p, int J, int T, std::uint64_t seed) {
  if (n % 2 != 0) throw std::invalid_argument("gen_linear: n must be even");
  if (p < 40) throw std::invalid_argument("gen_linear: p must be >= 40");
  Rng rng(seed);
  CovariatePipeline cp = gen_covariates(n, p, rng);

  SimData out;
  out.truth.beta0 = cp.beta0;
  out.truth.eta0 = cp.eta0;
  out.truth.support = cp.support;
  out.truth.scenario = Scenario::linear;
  out.truth.gamma1.resize(J);
  out.truth.gamma2.resize(J);
  for (int j = 0; j < J; ++j) out.truth.gamma1[j] = rng.normal();
  for (int j = 0; j < J; ++j) out.truth.gamma2[j] = rng.normal();
  out.data.X = cp.X;
  out.data.Z = cp.Z;
  out.data.num_regions = J;

  const Eigen::VectorXd u = cp.X * cp.beta0;
  const Eigen::VectorXd v = cp.Z * cp.eta0;
  const auto ts = time_grid(T);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      const double lin = u[i] + v[i];
      for (double t : ts) {
        Observation o;
        o.subject = i;
        o.region = j;
        o.time_raw = 36.0 * t;
        o.t = t;
        o.y = lin + out.truth.gamma1[j] -
              (lin + out.truth.gamma2[j]) * t +
              rng.normal(0.0, out.truth.sigma0);
        out.data.obs.push_back(o);
      }
    }
  }
  return out;
}

Split split_half(const Dataset& data, SplitMode mode, std::uint64_t seed) {
  Rng rng(seed);
  Split out;
  if (mode == SplitMode::by_subject) {
    const int n = data.num_subjects();
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const std::size_t pick = rng.uniform_index(i + 1);
      std::swap(order[i], order[pick]);
    }
    const int half = n / 2;
    out.train_subjects.assign(order.begin(), order.begin() + half);
    out.test_subjects.assign(order.begin() + half, order.end());
    std::sort(out.train_subjects.begin(), out.train_subjects.end());
    std::sort(out.test_subjects.begin(), out.test_subjects.end());

    const auto build = [&](const std::vector<int>& subjects) {
      Dataset d;
      std::vector<int> remap(n, -1);
      for (int r = 0; r < static_cast<int>(subjects.size()); ++r)
        remap[subjects[r]] = r;
      if (data.X.size()) {
        d.X.resize(subjects.size(), data.X.cols());
        for (std::size_t r = 0; r < subjects.size(); ++r)
          d.X.row(r) = data.X.row(subjects[r]);
      }
      d.Z.resize(subjects.size(), data.Z.cols());
      for (std::size_t r = 0; r < subjects.size(); ++r)
        d.Z.row(r) = data.Z.row(subjects[r]);
      d.num_regions = data.num_regions;
      for (const auto& o : data.obs) {
        if (remap[o.subject] < 0) continue;
        Observation c = o;
        c.subject = remap[o.subject];
        d.obs.push_back(c);
      }
      return d;
    };
    out.train = build(out.train_subjects);
    out.test = build(out.test_subjects);
    return out;
  }

  // stratified: split observations within each (subject, region) stratum
  out.train.X = data.X;
  out.train.Z = data.Z;
  out.train.num_regions = data.num_regions;
  out.test = out.train;
  std::map<std::pair<int, int>, std::vector<int>> strata;
  for (int k = 0; k < static_cast<int>(data.obs.size()); ++k)
    strata[{data.obs[k].subject, data.obs[k].region}].push_back(k);
  for (auto& [key, rows] : strata) {
    for (int i = static_cast<int>(rows.size()) - 1; i > 0; --i) {
      const std::size_t pick = rng.uniform_index(i + 1);
      std::swap(rows[i], rows[pick]);
    }
    const int m = static_cast<int>(rows.size());
    const int to_train = (m + 1) / 2;  // singleton goes to train
    for (int r = 0; r < m; ++r) {
      if (r < to_train)
        out.train.obs.push_back(data.obs[rows[r]]);
      else
        out.test.obs.push_back(data.obs[rows[r]]);
    }
  }
  const auto by_index = [](const Observation& a, const Observation& b) {
    if (a.subject != b.subject) return a.subject < b.subject;
    if (a.region != b.region) return a.region < b.region;
    return a.t < b.t;
  };
  std::sort(out.train.obs.begin(), out.train.obs.end(), by_index);
  std::sort(out.test.obs.begin(), out.test.obs.end(), by_index);
  return out;
}

double prediction_error(const Eigen::VectorXd& predictions,
                        const std::vector<Observation>& test) {
  if (test.empty()) throw std::invalid_argument("prediction_error: empty test");
  if (predictions.size() != static_cast<Eigen::Index>(test.size()))
    throw std::invalid_argument("prediction_error: size mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < test.size(); ++k) {
    const double e = test[k].y - predictions[k];
    acc += e * e;
  }
  return acc / static_cast<double>(test.size());
}

namespace {

// Orthonormal column basis of the centered block, dropping zero-variance
// columns and directions below a relative rank tolerance.
Eigen::MatrixXd whitened_basis(const Eigen::MatrixXd& block) {
  Eigen::MatrixXd c = block;
  std::vector<int> keep;
  for (int j = 0; j < c.cols(); ++j) {
    c.col(j).array() -= c.col(j).mean();
    if (c.col(j).norm() > 1e-12)
      keep.push_back(j);
    else
      std::cerr << "max_canonical_correlation: dropping zero-variance column "
                << j << "\n";
  }
  Eigen::MatrixXd kept(c.rows(), keep.size());
  for (std::size_t j = 0; j < keep.size(); ++j) kept.col(j) = c.col(keep[j]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(kept, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int j = 0; j < sv.size(); ++j)
    if (sv[j] > 1e-9 * sv[0]) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace

double max_canonical_correlation(const Eigen::MatrixXd& A,
                                 const Eigen::MatrixXd& B) {
  if (A.cols() == 0 || B.cols() == 0)
    throw std::invalid_argument("max_canonical_correlation: empty block");
  if (A.rows() != B.rows())
    throw std::invalid_argument("max_canonical_correlation: row mismatch");
  const Eigen::MatrixXd ua = whitened_basis(A);
  const Eigen::MatrixXd ub = whitened_basis(B);
  if (ua.cols() == 0 || ub.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ua.transpose() * ub);
  return std::clamp(svd.singularValues()[0], 0.0, 1.0);
}

namespace {

// Truncated-exponential draw on (0, bound) for the horseshoe slice step.
double trunc_exp(double rate, double bound, Rng& rng) {
  if (rate * bound < 1e-12) {
    // nearly flat: fall back to the 1/(1+x) slice kernel's own inverse cdf
    return rng.uniform() * bound;
  }
  const double u = rng.uniform();
  const double z = -std::expm1(-rate * bound);  // 1 - exp(-rate*bound)
  return -std::log1p(-u * z) / rate;
}

// Truncated Gamma(shape, rate) on (0, bound) via the inverse regularized
// incomplete gamma function.
double trunc_gamma(double shape, double rate, double bound, Rng& rng) {
  const double cap = boost::math::gamma_p(shape, rate * bound);
  if (cap <= 0.0 || !std::isfinite(cap)) return 0.5 * bound;
  const double u = rng.uniform() * cap;
  const double x = boost::math::gamma_p_inv(shape, std::min(u, 1.0 - 1e-16));
  return std::min(x / rate, bound);
}

}  // namespace

HorseshoeFit fit_horseshoe_linear(const Dataset& train,
                                  const HorseshoeConfig& cfg) {
  train.validate(false);
  const int n_obs = static_cast<int>(train.obs.size());
  const int p = train.xdim();
  const int k = train.zdim();
  const int J = train.num_regions;
  const int d = p + k + 2 * J;

  // design: (1-t) X | (1-t) Z | region intercept | -t region slope
  Eigen::MatrixXd phi(n_obs, d);
  Eigen::VectorXd y(n_obs);
  for (int r = 0; r < n_obs; ++r) {
    const auto& o = train.obs[r];
    const double w = 1.0 - o.t;
    phi.row(r).head(p) = w * train.X.row(o.subject);
    phi.row(r).segment(p, k) = w * train.Z.row(o.subject);
    phi.row(r).segment(p + k, J).setZero();
    phi(r, p + k + o.region) = 1.0;
    phi.row(r).segment(p + k + J, J).setZero();
    phi(r, p + k + J + o.region) = -o.t;
    y[r] = o.y;
  }
  const Eigen::MatrixXd phi_t_phi = phi.transpose() * phi;
  const Eigen::VectorXd phi_t_y = phi.transpose() * y;

  Rng rng(cfg.seed);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd local2 = Eigen::VectorXd::Ones(p);  // lambda_s^2
  double global2 = 1.0;                               // tau^2
  double sigma2 = 1.0;
  const double diffuse_var = 1e4;
  const double ig_shape = 1.0, ig_rate = 1.0;

  HorseshoeFit fit;
  fit.beta_mean = Eigen::VectorXd::Zero(p);
  fit.eta_mean = Eigen::VectorXd::Zero(k);
  fit.gamma1_mean = Eigen::VectorXd::Zero(J);
  fit.gamma2_mean = Eigen::VectorXd::Zero(J);
  const int post = cfg.iterations - cfg.burn_in;
  const int thin = std::max(1, post / 200);
  fit.beta_draws.resize((post + thin - 1) / thin, p);
  int stored = 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // coefficients jointly
    Eigen::MatrixXd A = phi_t_phi / sigma2;
    for (int s = 0; s < p; ++s)
      A(s, s) += 1.0 / (sigma2 * local2[s] * global2);
    for (int s = p; s < d; ++s) A(s, s) += 1.0 / diffuse_var;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
      Eigen::MatrixXd Aj = A;
      Aj.diagonal().array() += 1e-8;
      llt.compute(Aj);
    }
    const Eigen::VectorXd mu = llt.solve(phi_t_y / sigma2);
    Eigen::VectorXd z(d);
    for (int s = 0; s < d; ++s) z[s] = rng.normal();
    w = mu + llt.matrixU().solve(z);

    // sigma^2 (beta block is sigma^2-scaled)
    const double rss = (y - phi * w).squaredNorm();
    double quad = 0.0;
    for (int s = 0; s < p; ++s) quad += w[s] * w[s] / (local2[s] * global2);
    sigma2 = rng.inverse_gamma(ig_shape + 0.5 * (n_obs + p),
                               ig_rate + 0.5 * (rss + quad));

    // local scales by slice-within-Gibbs
    for (int s = 0; s < p; ++s) {
      const double eta_old = 1.0 / local2[s];
      const double u = rng.uniform() / (1.0 + eta_old);
      const double bound = (1.0 - u) / u;
      const double rate = w[s] * w[s] / (2.0 * global2 * sigma2);
      const double eta_new = trunc_exp(rate, bound, rng);
      local2[s] = 1.0 / std::max(eta_new, 1e-300);
    }
    // global scale
    {
      const double xi_old = 1.0 / global2;
      const double u = rng.uniform() / (1.0 + xi_old);
      const double bound = (1.0 - u) / u;
      double s_acc = 0.0;
      for (int s = 0; s < p; ++s)
        s_acc += w[s] * w[s] / (2.0 * local2[s] * sigma2);
      const double xi_new =
          trunc_gamma(0.5 * (p + 1.0), std::max(s_acc, 1e-300), bound, rng);
      global2 = 1.0 / std::max(xi_new, 1e-300);
    }

    if (iter >= cfg.burn_in) {
      fit.beta_mean += w.head(p);
      fit.eta_mean += w.segment(p, k);
      fit.gamma1_mean += w.segment(p + k, J);
      fit.gamma2_mean += w.segment(p + k + J, J);
      fit.sigma2_mean += sigma2;
      if ((iter - cfg.burn_in) % thin == 0 && stored < fit.beta_draws.rows())
        fit.beta_draws.row(stored++) = w.head(p).transpose();
    }
  }
  fit.beta_mean /= post;
  fit.eta_mean /= post;
  fit.gamma1_mean /= post;
  fit.gamma2_mean /= post;
  fit.sigma2_mean /= post;
  fit.beta_draws.conservativeResize(stored, p);
  return fit;
}

Eigen::VectorXd predict_horseshoe(const HorseshoeFit& fit,
                                  const Dataset& test) {
  Eigen::VectorXd pred(test.obs.size());
  for (std::size_t r = 0; r < test.obs.size(); ++r) {
    const auto& o = test.obs[r];
    const double lin = test.X.row(o.subject).dot(fit.beta_mean) +
                       test.Z.row(o.subject).dot(fit.eta_mean);
    pred[r] = (1.0 - o.t) * lin + fit.gamma1_mean[o.region] -
              o.t * fit.gamma2_mean[o.region];
  }
  return pred;
}

namespace {

Eigen::MatrixXd longitudinal_design(const Dataset& data,
                                    const std::vector<std::pair<int, int>>&
                                        interactions) {
  const int n = data.num_subjects();
  const int k = data.zdim();
  const int d = 1 + k + static_cast<int>(interactions.size());
  Eigen::MatrixXd W(n, d);
  W.col(0).setOnes();
  W.middleCols(1, k) = data.Z;
  for (std::size_t c = 0; c < interactions.size(); ++c)
    W.col(1 + k + c) = data.Z.col(interactions[c].first).cwiseProduct(
        data.Z.col(interactions[c].second));
  return W;
}

}  // namespace

LinearLongitudinalFit fit_linear_longitudinal(
    const Dataset& train, const LinearLongitudinalConfig& cfg) {
  train.validate(false);
  const int n = train.num_subjects();
  const int J = train.num_regions;
  const Eigen::MatrixXd W = longitudinal_design(train, cfg.interactions);
  const int d = static_cast<int>(W.cols());

  std::vector<std::vector<int>> obs_by_region(J);
  for (int k = 0; k < static_cast<int>(train.obs.size()); ++k)
    obs_by_region[train.obs[k].region].push_back(k);
  std::vector<std::vector<int>> obs_by_subject(n);
  for (int k = 0; k < static_cast<int>(train.obs.size()); ++k)
    obs_by_subject[train.obs[k].subject].push_back(k);

  Rng rng(cfg.seed);
  Eigen::MatrixXd coef0 = Eigen::MatrixXd::Zero(J, d);
  Eigen::MatrixXd coef1 = Eigen::MatrixXd::Zero(J, d);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(n);
  double sigma2 = 1.0, tau_var = cfg.random_effect ? 1.0 : 0.0;

  LinearLongitudinalFit fit;
  fit.coef0_mean = Eigen::MatrixXd::Zero(J, d);
  fit.coef1_mean = Eigen::MatrixXd::Zero(J, d);
  fit.tau_mean = Eigen::VectorXd::Zero(n);
  fit.interactions = cfg.interactions;
  const int post = cfg.iterations - cfg.burn_in;

  Eigen::VectorXd row(2 * d);
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // region-wise coefficient blocks
    for (int j = 0; j < J; ++j) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * d);
      for (int k : obs_by_region[j]) {
        const auto& o = train.obs[k];
        row.head(d) = W.row(o.subject);
        row.tail(d) = -o.t * W.row(o.subject);
        const double resid = o.y - tau[o.subject];
        A.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0 / sigma2);
        b += row * (resid / sigma2);
      }
      A = A.selfadjointView<Eigen::Lower>();
      A.diagonal().array() += 1.0 / cfg.prior_variance;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      double jitter = 1e-10;
      while (llt.info() != Eigen::Success) {
        std::cerr << "fit_linear_longitudinal: ridge jitter " << jitter
                  << " for region " << j << "\n";
        A.diagonal().array() += jitter;
        jitter *= 10.0;
        llt.compute(A);
        if (jitter > 1.0)
          throw std::runtime_error("fit_linear_longitudinal: singular design");
      }
      const Eigen::VectorXd mu = llt.solve(b);
      Eigen::VectorXd z(2 * d);
      for (int c = 0; c < 2 * d; ++c) z[c] = rng.normal();
      const Eigen::VectorXd draw = mu + llt.matrixU().solve(z);
      coef0.row(j) = draw.head(d).transpose();
      coef1.row(j) = draw.tail(d).transpose();
    }

    // subject random intercepts
    if (cfg.random_effect) {
      for (int i = 0; i < n; ++i) {
        double rs = 0.0;
        for (int k : obs_by_subject[i]) {
          const auto& o = train.obs[k];
          const double fitted = W.row(i).dot(coef0.row(o.region)) -
                                o.t * W.row(i).dot(coef1.row(o.region));
          rs += o.y - fitted;
        }
        const double prec =
            obs_by_subject[i].size() / sigma2 + 1.0 / std::max(tau_var, 1e-12);
        tau[i] = rng.normal((rs / sigma2) / prec, std::sqrt(1.0 / prec));
      }
      // recenter into the region intercepts
      const double mt = tau.mean();
      tau.array() -= mt;
      coef0.col(0).array() += mt;
      tau_var = rng.inverse_gamma(2.0 + 0.5 * n,
                                  0.5 + 0.5 * tau.squaredNorm());
    }

    // sigma^2
    double rss = 0.0;
    for (const auto& o : train.obs) {
      const double fitted = W.row(o.subject).dot(coef0.row(o.region)) -
                            o.t * W.row(o.subject).dot(coef1.row(o.region)) +
                            tau[o.subject];
      rss += (o.y - fitted) * (o.y - fitted);
    }
    sigma2 = rng.inverse_gamma(1.0 + 0.5 * train.obs.size(),
                               1.0 + 0.5 * rss);

    if (iter >= cfg.burn_in) {
      fit.coef0_mean += coef0;
      fit.coef1_mean += coef1;
      fit.tau_mean += tau;
      fit.sigma2_mean += sigma2;
      fit.tau_variance_mean += tau_var;
    }
  }
  fit.coef0_mean /= post;
  fit.coef1_mean /= post;
  fit.tau_mean /= post;
  fit.sigma2_mean /= post;
  fit.tau_variance_mean /= post;
  return fit;
}

Eigen::VectorXd predict_linear_longitudinal(const LinearLongitudinalFit& fit,
                                            const Dataset& test) {
  const Eigen::MatrixXd W = longitudinal_design(test, fit.interactions);
  Eigen::VectorXd pred(test.obs.size());
  for (std::size_t r = 0; r < test.obs.size(); ++r) {
    const auto& o = test.obs[r];
    double v = W.row(o.subject).dot(fit.coef0_mean.row(o.region)) -
               o.t * W.row(o.subject).dot(fit.coef1_mean.row(o.region));
    if (o.subject < fit.tau_mean.size()) v += fit.tau_mean[o.subject];
    pred[r] = v;
  }
  return pred;
}

int basis_size_for_sample(int n) {
  if (n < 350) return 8;
  if (n < 750) return 11;
  return 14;
}

Eigen::VectorXd predict_posterior_mean(const Chain& chain,
                                       const Dataset& data) {
  if (chain.draws.empty())
    throw std::invalid_argument("predict_posterior_mean: chain has no draws");
  if (chain.model_config.kind != VariantKind::base) {
    const auto& tau = chain.draws.front().state.tau;
    for (const auto& o : data.obs)
      if (o.subject >= tau.size())
        throw std::invalid_argument(
            "predict_posterior_mean: test subject " +
            std::to_string(o.subject) +
            " carries a random effect but was not in the training set; use "
            "the stratified subject-region split so every test subject is "
            "trained on");
  }
  Model model(data, chain.model_config);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(data.obs.size());
  for (const auto& d : chain.draws) acc += model.fitted_all(d.state);
  return acc / static_cast<double>(chain.draws.size());
}

namespace {

struct ReplicateOutcome {
  std::vector<EvalRow> rows;
  bool failed = false;
};

ReplicateOutcome run_replicate(const BenchmarkConfig& cfg, int rep) {
  ReplicateOutcome out;
  const std::uint64_t gen_seed = sub_seed(cfg.seed, 4 * rep);
  const std::uint64_t split_seed = sub_seed(cfg.seed, 4 * rep + 1);
  const std::uint64_t sim_seed = sub_seed(cfg.seed, 4 * rep + 2);
  const std::uint64_t hs_seed = sub_seed(cfg.seed, 4 * rep + 3);

  const SimData sim = cfg.scenario == Scenario::nonlinear
                          ? gen_nonlinear(cfg.n, cfg.p, cfg.J, cfg.T, gen_seed)
                          : gen_linear(cfg.n, cfg.p, cfg.J, cfg.T, gen_seed);
  const Split split = split_half(sim.data, SplitMode::by_subject, split_seed);
  const int k_sel = static_cast<int>(sim.truth.support.size());

  // single-index fit
  ModelConfig mc;
  mc.kind = VariantKind::base;
  mc.K = cfg.basis_k.value_or(basis_size_for_sample(cfg.n));
  mc.Kprime = mc.K;
  mc.spike = make_spike_slab(0.1, 10.0,
                             std::min(0.5, static_cast<double>(k_sel) / cfg.p));
  ChainConfig cc;
  cc.iterations = cfg.iterations;
  cc.burn_in = cfg.burn_in;
  cc.thin = std::max(1, (cfg.iterations - cfg.burn_in) / 200);
  cc.seed = sim_seed;
  cc.adapt_size_lo = 20;
  cc.adapt_size_hi = 30;

  Model model(split.train, mc);
  Chain chain = run_chain(model, cc);
  const Eigen::VectorXd sim_pred = predict_posterior_mean(chain, split.test);
  const double sim_mse = prediction_error(sim_pred, split.test.obs);

  const std::vector<int> sim_sel = top_k_variables(chain, k_sel);
  Eigen::MatrixXd x_hat(sim.data.X.rows(), sim_sel.size());
  for (std::size_t c = 0; c < sim_sel.size(); ++c)
    x_hat.col(c) = sim.data.X.col(sim_sel[c]);

  // map training selection back through full X columns for the truth block
  Eigen::MatrixXd x_true(sim.data.X.rows(), sim.truth.support.size());
  for (std::size_t c = 0; c < sim.truth.support.size(); ++c)
    x_true.col(c) = sim.data.X.col(sim.truth.support[c]);
  const double sim_cca = max_canonical_correlation(x_hat, x_true);

  // horseshoe baseline
  HorseshoeConfig hc;
  hc.iterations = cfg.iterations;
  hc.burn_in = cfg.burn_in;
  hc.seed = hs_seed;
  const HorseshoeFit hs = fit_horseshoe_linear(split.train, hc);
  const double hs_mse =
      prediction_error(predict_horseshoe(hs, split.test), split.test.obs);

  std::vector<int> hs_sel(cfg.p);
  for (int s = 0; s < cfg.p; ++s) hs_sel[s] = s;
  std::sort(hs_sel.begin(), hs_sel.end(), [&](int a, int b) {
    return std::abs(hs.beta_mean[a]) > std::abs(hs.beta_mean[b]);
  });
  hs_sel.resize(k_sel);
  Eigen::MatrixXd x_hs(sim.data.X.rows(), hs_sel.size());
  for (std::size_t c = 0; c < hs_sel.size(); ++c)
    x_hs.col(c) = sim.data.X.col(hs_sel[c]);
  const double hs_cca = max_canonical_correlation(x_hs, x_true);

  out.rows.push_back({"sim", cfg.n, cfg.p, sim_mse, sim_cca});
  out.rows.push_back({"horseshoe", cfg.n, cfg.p, hs_mse, hs_cca});
  return out;
}

}  // namespace

EvalReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.replications < 1)
    throw std::invalid_argument("run_benchmark: replications must be >= 1");
  EvalReport report;
  report.replicate_rows.resize(cfg.replications);
  std::vector<ReplicateOutcome> outcomes(cfg.replications);

  const int threads = std::max(1, cfg.threads);
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.replications) return;
      try {
        outcomes[rep] = run_replicate(cfg, rep);
      } catch (const std::exception& e) {
        std::cerr << "benchmark replication " << rep << " failed: " << e.what()
                  << "\n";
        outcomes[rep].failed = true;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<std::string, EvalRow> agg;
  std::map<std::string, int> counts;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    if (outcomes[rep].failed) {
      report.failed_replications.push_back(rep);
      continue;
    }
    report.replicate_rows[rep] = outcomes[rep].rows;
    for (const auto& row : outcomes[rep].rows) {
      auto& a = agg[row.method];
      a.method = row.method;
      a.n = row.n;
      a.p = row.p;
      a.mse += row.mse;
      a.canonical_correlation += row.canonical_correlation;
      counts[row.method] += 1;
    }
  }
  for (auto& [name, row] : agg) {
    row.mse /= counts[name];
    row.canonical_correlation /= counts[name];
    report.rows.push_back(row);
  }
  return report;
}

void write_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(6);
  out << "n,p,method,mse,max_canonical_correlation\n";
  for (const auto& row : report.rows)
    out << row.n << ',' << row.p << ',' << row.method << ',' << row.mse << ','
        << row.canonical_correlation << '\n';
}

}  // namespace hdsim
