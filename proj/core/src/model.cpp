#include "hdsim/model.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

PolarAngles spiked_angles(int count) {
  PolarAngles a;
  a.angles = Eigen::VectorXd::Constant(count, 0.5 * kPi);
  return a;
}
}  // namespace

Model::Model(Dataset data, ModelConfig cfg)
    : data_(std::move(data)), cfg_(cfg) {
  data_.validate(/*require_subject_observations=*/false);
  if (cfg_.kind == VariantKind::no_snp) {
    if (data_.X.size() > 0)
      throw std::invalid_argument("no_snp variant forbids an X block");
  } else {
    if (data_.X.rows() == 0)
      throw std::invalid_argument("variant requires an X block");
    if (data_.X.cols() < 2)
      throw std::invalid_argument("X needs at least 2 columns");
  }
  if (data_.Z.cols() < 2)
    throw std::invalid_argument("Z needs at least 2 columns");
  basis_uv_ = make_basis(cfg_.K, cfg_.degree, -1.0, 1.0);
  basis_t_ = make_basis(cfg_.Kprime, cfg_.degree, 0.0, 1.0);
  Xt_ = data_.X.transpose();
  Zt_ = data_.Z.transpose();

  obs_by_subject_.assign(data_.num_subjects(), {});
  obs_by_region_.assign(data_.num_regions, {});
  for (int k = 0; k < static_cast<int>(data_.obs.size()); ++k) {
    obs_by_subject_[data_.obs[k].subject].push_back(k);
    obs_by_region_[data_.obs[k].region].push_back(k);
  }
}

int Model::alpha_block_count() const {
  return cfg_.kind == VariantKind::base ? 1 : data_.num_regions;
}

int Model::region_of_alpha_block(int block) const {
  return cfg_.kind == VariantKind::base ? 0 : block;
}

ModelState Model::initial_state(Rng& rng) const {
  ModelState s;
  if (has_snp_block()) {
    s.theta = spiked_angles(data_.xdim() - 1);
    s.gamma.gamma.assign(data_.xdim() - 1, 0);
  }
  for (int b = 0; b < alpha_block_count(); ++b)
    s.alpha.push_back(spiked_angles(data_.zdim() - 1));
  const bool collapse_u = (cfg_.kind == VariantKind::no_snp);
  s.surfaces.resize(data_.num_regions);
  for (int j = 0; j < data_.num_regions; ++j)
    for (int role = 0; role < 2; ++role)
      s.surfaces[j][role] = SurfaceCoefficients(cfg_.K, cfg_.K, collapse_u);
  s.timefn.deltas = Eigen::VectorXd::Constant(cfg_.Kprime - 1, 0.5);

  double mean = 0.0, ss = 0.0;
  for (const auto& o : data_.obs) mean += o.y;
  mean /= static_cast<double>(data_.obs.size());
  for (const auto& o : data_.obs) ss += (o.y - mean) * (o.y - mean);
  s.sigma2 = ss / static_cast<double>(data_.obs.size());
  if (!(s.sigma2 > 0.0)) s.sigma2 = 1.0;

  if (has_random_effects()) {
    s.tau = Eigen::VectorXd::Zero(data_.num_subjects());
    s.dp = DPMixtureState::make(cfg_.dp_truncation, data_.num_subjects(), rng);
  }
  return s;
}

void Model::check_state(const ModelState& s) const {
  if (has_snp_block()) {
    if (s.theta.angles.size() != data_.xdim() - 1)
      throw std::invalid_argument("state: theta dimension mismatch");
    if (static_cast<int>(s.gamma.gamma.size()) != data_.xdim() - 1)
      throw std::invalid_argument("state: gamma dimension mismatch");
  }
  if (static_cast<int>(s.alpha.size()) != alpha_block_count())
    throw std::invalid_argument("state: alpha block count mismatch");
  if (static_cast<int>(s.surfaces.size()) != data_.num_regions)
    throw std::invalid_argument("state: surface count mismatch");
  if (!(s.sigma2 > 0.0))
    throw std::invalid_argument("state: sigma2 must be positive");
}

Eigen::VectorXd Model::projections_u(const ModelState& s) const {
  if (!has_snp_block()) return Eigen::VectorXd();
  Eigen::VectorXd beta = polar_to_unit(s.theta);
  Eigen::VectorXd u = data_.X * beta;
  for (int i = 0; i < u.size(); ++i) u[i] = clamp_unit(u[i]);
  return u;
}

Eigen::MatrixXd Model::projections_v(const ModelState& s) const {
  const int blocks = alpha_block_count();
  Eigen::MatrixXd v(data_.num_subjects(), blocks);
  for (int b = 0; b < blocks; ++b) {
    Eigen::VectorXd eta = polar_to_unit(s.alpha[b]);
    v.col(b) = data_.Z * eta;
  }
  for (int i = 0; i < v.rows(); ++i)
    for (int b = 0; b < blocks; ++b) v(i, b) = clamp_unit(v(i, b));
  return v;
}

double Model::fitted_mean(const ModelState& s, int subject, int region,
                          double t_scaled) const {
  check_state(s);
  double u = 0.0;
  if (has_snp_block())
    u = clamp_unit(data_.X.row(subject).dot(polar_to_unit(s.theta)));
  const int block = cfg_.kind == VariantKind::base ? 0 : region;
  const double v =
      clamp_unit(data_.Z.row(subject).dot(polar_to_unit(s.alpha[block])));
  const double f0 = eval_timefn_value(s.timefn, basis_t_, t_scaled);
  const SurfaceEval e0 = eval_surface(s.surfaces[region][0], basis_uv_,
                                      basis_uv_, u, v);
  const SurfaceEval e1 = eval_surface(s.surfaces[region][1], basis_uv_,
                                      basis_uv_, u, v);
  double f = e0.value - e1.value * f0;
  if (has_random_effects()) f += s.offset + s.tau[subject];
  return f;
}

Eigen::VectorXd Model::fitted_all(const ModelState& s) const {
  check_state(s);
  const Eigen::VectorXd u = projections_u(s);
  const Eigen::MatrixXd v = projections_v(s);
  const bool re = has_random_effects();
  Eigen::VectorXd fit(data_.obs.size());
  for (std::size_t k = 0; k < data_.obs.size(); ++k) {
    const auto& o = data_.obs[k];
    const double ui = has_snp_block() ? u[o.subject] : 0.0;
    const int block = cfg_.kind == VariantKind::base ? 0 : o.region;
    const double vi = v(o.subject, block);
    const double f0 = eval_timefn_value(s.timefn, basis_t_, o.t);
    const SurfaceEval e0 =
        eval_surface(s.surfaces[o.region][0], basis_uv_, basis_uv_, ui, vi);
    const SurfaceEval e1 =
        eval_surface(s.surfaces[o.region][1], basis_uv_, basis_uv_, ui, vi);
    double f = e0.value - e1.value * f0;
    if (re) f += s.offset + s.tau[o.subject];
    fit[k] = f;
  }
  return fit;
}

double Model::rss_chunked(const ModelState& s, int chunk) const {
  const Eigen::VectorXd fit = fitted_all(s);
  const int n = static_cast<int>(fit.size());
  double total = 0.0;
  for (int start = 0; start < n; start += chunk) {
    const int end = std::min(start + chunk, n);
    double part = 0.0;
    for (int k = start; k < end; ++k) {
      const double e = data_.obs[k].y - fit[k];
      part += e * e;
    }
    total += part;
  }
  return total;
}

double Model::rss(const ModelState& s) const { return rss_chunked(s, 4096); }

double Model::log_likelihood(const ModelState& s) const {
  const double N = static_cast<double>(data_.obs.size());
  return -0.5 * N * std::log(2.0 * kPi * s.sigma2) -
         rss(s) / (2.0 * s.sigma2);
}

double Model::log_posterior(const ModelState& s) const {
  check_state(s);
  for (int i = 0; i < s.timefn.deltas.size(); ++i)
    if (!(s.timefn.deltas[i] > 0.0 && s.timefn.deltas[i] < 1.0)) return -kInf;

  double lp = log_likelihood(s);

  if (has_snp_block())
    lp += log_angle_prior(s.theta, s.gamma, cfg_.spike).value;

  // uniform priors on the low-dimensional angles
  const int k = data_.zdim();
  lp += alpha_block_count() *
        (-(k - 2) * std::log(kPi) - std::log(2.0 * kPi));

  for (const auto& region : s.surfaces)
    for (const auto& surf : region) lp += log_coeff_prior(surf, cfg_.a);

  // gamma-prior kernel on the precision (density in the precision scale)
  lp += -(cfg_.d1 - 1.0) * std::log(s.sigma2) - cfg_.d2 / s.sigma2;

  if (has_random_effects()) {
    for (int i = 0; i < s.tau.size(); ++i) {
      const double sc = s.dp.component_scales[s.dp.assignments[i]];
      lp += -0.5 * std::log(2.0 * kPi * sc) - s.tau[i] * s.tau[i] / (2.0 * sc);
    }
  }
  return lp;
}

GradBlocks Model::grad_blocks(const ModelState& s) const {
  return grad_blocks(s, true, true, true);
}

GradBlocks Model::grad_blocks(const ModelState& s, bool need_theta,
                              bool need_alpha, bool need_deltas) const {
  check_state(s);
  const Eigen::VectorXd u = projections_u(s);
  const Eigen::MatrixXd v = projections_v(s);
  const int n = data_.num_subjects();
  const int blocks = alpha_block_count();
  const bool re = has_random_effects();
  const double inv_s2 = 1.0 / s.sigma2;
  const int ndelta = cfg_.Kprime - 1;

  Eigen::VectorXd w_theta = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd w_alpha = Eigen::MatrixXd::Zero(n, blocks);
  Eigen::VectorXd cw = Eigen::VectorXd::Zero(ndelta);
  const Eigen::VectorXd lam = s.timefn.lambdas();

  for (const auto& o : data_.obs) {
    const double ui = has_snp_block() ? u[o.subject] : 0.0;
    const int block = cfg_.kind == VariantKind::base ? 0 : o.region;
    const double vi = v(o.subject, block);
    const SurfaceEval e0 =
        eval_surface(s.surfaces[o.region][0], basis_uv_, basis_uv_, ui, vi);
    const SurfaceEval e1 =
        eval_surface(s.surfaces[o.region][1], basis_uv_, basis_uv_, ui, vi);
    const BasisWindow wt = eval_basis_window(basis_t_, o.t);
    double f0 = 0.0;
    for (int r = 0; r <= basis_t_.degree; ++r)
      f0 += lam[wt.first + r] * wt.value[r];

    double f = e0.value - e1.value * f0;
    if (re) f += s.offset + s.tau[o.subject];
    const double w = (o.y - f) * inv_s2;

    if (has_snp_block())
      w_theta[o.subject] += w * (e0.du - e1.du * f0);
    w_alpha(o.subject, block) += w * (e0.dv - e1.dv * f0);

    // time-warp block: dF/d lambda_c = -a1 * B_c(t)
    for (int r = 0; r <= basis_t_.degree; ++r) {
      const int c = wt.first + r;
      if (c >= 1) cw[c - 1] += w * (-e1.value) * wt.value[r];
    }
  }

  GradBlocks g;
  if (has_snp_block() && need_theta) {
    g.theta = Eigen::VectorXd::Zero(data_.xdim() - 1);
    for (int i = 0; i < n; ++i) {
      if (w_theta[i] == 0.0) continue;
      g.theta += w_theta[i] * grad_projection(s.theta, Xt_.col(i));
    }
    g.theta += log_angle_prior(s.theta, s.gamma, cfg_.spike).grad;
  }
  if (need_alpha) {
    g.alpha.resize(blocks);
    for (int b = 0; b < blocks; ++b) {
      g.alpha[b] = Eigen::VectorXd::Zero(data_.zdim() - 1);
      for (int i = 0; i < n; ++i) {
        if (w_alpha(i, b) == 0.0) continue;
        g.alpha[b] += w_alpha(i, b) * grad_projection(s.alpha[b], Zt_.col(i));
      }
    }
  }
  if (need_deltas)
    g.deltas = timefn_lambda_jacobian(s.timefn).transpose() * cw;
  return g;
}

void Model::region_normal_equations(const ModelState& s, int region,
                                    Eigen::MatrixXd& A,
                                    Eigen::VectorXd& b) const {
  const Eigen::VectorXd u = projections_u(s);
  const Eigen::MatrixXd v = projections_v(s);
  const bool re = has_random_effects();
  const double inv_s2 = 1.0 / s.sigma2;

  const auto& s0 = s.surfaces[region][0];
  const int nf = s0.free_count();
  const int ncol = 2 * nf;
  A = Eigen::MatrixXd::Zero(ncol, ncol);
  b = Eigen::VectorXd::Zero(ncol);
  Eigen::VectorXd row(ncol);
  const int block = cfg_.kind == VariantKind::base ? 0 : region;
  for (int k : obs_by_region_[region]) {
    const auto& o = data_.obs[k];
    const Eigen::VectorXd bu =
        eval_basis(basis_uv_, has_snp_block() ? u[o.subject] : 0.0);
    const Eigen::VectorXd bv = eval_basis(basis_uv_, v(o.subject, block));
    const double f0 = eval_timefn_value(s.timefn, basis_t_, o.t);
    for (int g = 0; g < nf; ++g) {
      const double G = s0.group_basis_product(g, bu, bv);
      row[g] = G;
      row[nf + g] = -f0 * G;
    }
    double y = o.y;
    if (re) y -= s.offset + s.tau[o.subject];
    A.selfadjointView<Eigen::Lower>().rankUpdate(row, inv_s2);
    b += row * (y * inv_s2);
  }
  A = A.selfadjointView<Eigen::Lower>();
  A.diagonal().array() += 1.0 / (cfg_.a * cfg_.a);
}

namespace {
Eigen::LLT<Eigen::MatrixXd> llt_with_jitter(Eigen::MatrixXd& A,
                                            const char* who, int region) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  double jitter = 1e-10;
  while (llt.info() != Eigen::Success) {
    std::cerr << who << ": adding ridge jitter " << jitter << " to region "
              << region << " normal equations\n";
    A.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(A);
    if (jitter > 1.0)
      throw std::runtime_error(std::string(who) +
                               ": normal equations singular");
  }
  return llt;
}
}  // namespace

Model::SurfaceConditional Model::surface_conditional(const ModelState& s,
                                                     int region) const {
  check_state(s);
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  region_normal_equations(s, region, A, b);
  const auto llt = llt_with_jitter(A, "surface_conditional", region);
  SurfaceConditional out;
  out.mean = llt.solve(b);
  out.covariance =
      llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  return out;
}

void Model::gibbs_surfaces(ModelState& s, Rng& rng) const {
  check_state(s);
  for (int j = 0; j < data_.num_regions; ++j) {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    region_normal_equations(s, j, A, b);
    const auto llt = llt_with_jitter(A, "gibbs_surfaces", j);
    const Eigen::VectorXd mu = llt.solve(b);
    const int ncol = static_cast<int>(A.rows());
    Eigen::VectorXd z(ncol);
    for (int c = 0; c < ncol; ++c) z[c] = rng.normal();
    const Eigen::VectorXd draw = mu + llt.matrixU().solve(z);
    const int nf = ncol / 2;
    s.surfaces[j][0].set_free_values(draw.head(nf));
    s.surfaces[j][1].set_free_values(draw.tail(nf));
  }
}

void Model::gibbs_sigma2(ModelState& s, Rng& rng) const {
  check_state(s);
  const double N = static_cast<double>(data_.obs.size());
  const double r = rss(s);
  const double precision = rng.gamma(cfg_.d1 + 0.5 * N,
                                     1.0 / (cfg_.d2 + 0.5 * r));
  s.sigma2 = 1.0 / precision;
}

void Model::gibbs_random_effects(ModelState& s, Rng& rng) const {
  if (!has_random_effects())
    throw std::logic_error("gibbs_random_effects: variant has no tau block");
  check_state(s);
  const int n = data_.num_subjects();

  // residuals with the subject effect removed
  Eigen::VectorXd fit = fitted_all(s);
  const double inv_s2 = 1.0 / s.sigma2;
  Eigen::VectorXd resid_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < data_.obs.size(); ++k) {
    const auto& o = data_.obs[k];
    resid_sum[o.subject] += o.y - (fit[k] - s.tau[o.subject]);
    counts[o.subject] += 1.0;
  }
  for (int i = 0; i < n; ++i) {
    const double scale = s.dp.component_scales[s.dp.assignments[i]];
    const double prec = counts[i] * inv_s2 + 1.0 / scale;
    const double mean = (resid_sum[i] * inv_s2) / prec;
    s.tau[i] = rng.normal(mean, std::sqrt(1.0 / prec));
  }
  dp_update(s.tau, s.dp, rng);

  const double mean_tau = s.tau.mean();
  s.tau.array() -= mean_tau;
  s.offset += mean_tau;
}

void Model::gibbs_indicators(ModelState& s, Rng& rng) const {
  if (!has_snp_block()) return;
  const int m = static_cast<int>(s.theta.angles.size());
  for (int r = 0; r < m; ++r) {
    const AngleKind kind =
        (r == m - 1) ? AngleKind::last : AngleKind::interior;
    s.gamma.gamma[r] =
        gibbs_indicator(s.theta.angles[r], cfg_.spike, kind, rng) ? 1 : 0;
  }
}

double Model::empirical_distance(const ModelState& a,
                                 const ModelState& b) const {
  check_state(a);
  check_state(b);
  const Eigen::VectorXd ua = projections_u(a), ub = projections_u(b);
  const Eigen::MatrixXd va = projections_v(a), vb = projections_v(b);
  double acc = 0.0;
  for (const auto& o : data_.obs) {
    const int block = cfg_.kind == VariantKind::base ? 0 : o.region;
    const double uai = has_snp_block() ? ua[o.subject] : 0.0;
    const double ubi = has_snp_block() ? ub[o.subject] : 0.0;
    const double fa =
        eval_surface(a.surfaces[o.region][0], basis_uv_, basis_uv_, uai,
                     va(o.subject, block))
            .value -
        eval_surface(a.surfaces[o.region][1], basis_uv_, basis_uv_, uai,
                     va(o.subject, block))
                .value *
            eval_timefn_value(a.timefn, basis_t_, o.t);
    const double fb =
        eval_surface(b.surfaces[o.region][0], basis_uv_, basis_uv_, ubi,
                     vb(o.subject, block))
            .value -
        eval_surface(b.surfaces[o.region][1], basis_uv_, basis_uv_, ubi,
                     vb(o.subject, block))
                .value *
            eval_timefn_value(b.timefn, basis_t_, o.t);
    const double d = fa - fb;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(data_.obs.size()));
}

}  // namespace hdsim
