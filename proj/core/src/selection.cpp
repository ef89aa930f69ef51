#include "hdsim/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hdsim {

namespace {
constexpr double kPi = std::numbers::pi;

Eigen::VectorXd random_direction(int dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

// Coarse candidate set for the time-warp increments: linear (Greville),
// equal, convex and concave ramps.
std::vector<Eigen::VectorXd> delta_candidates(int Kprime, int degree) {
  const SplineBasis bt = make_basis(Kprime, degree, 0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  const int n = Kprime - 1;

  Eigen::VectorXd greville(Kprime);
  for (int m = 0; m < Kprime; ++m) {
    double s = 0.0;
    for (int l = 1; l <= degree; ++l) s += bt.knots[m + l];
    greville[m] = s / degree;
  }
  Eigen::VectorXd lin(n);
  for (int i = 0; i < n; ++i) lin[i] = greville[i + 1] - greville[i];
  lin /= lin.maxCoeff() * 1.25;  // scale into (0,1)
  out.push_back(lin);

  out.push_back(Eigen::VectorXd::Constant(n, 0.5));

  Eigen::VectorXd up(n), down(n);
  for (int i = 0; i < n; ++i) {
    up[i] = static_cast<double>(i + 1) / (n + 1);
    down[i] = static_cast<double>(n - i) / (n + 1);
  }
  out.push_back(up);
  out.push_back(down);
  return out;
}

struct LsFit {
  double max_loglik = -std::numeric_limits<double>::infinity();
  int surface_params = 0;
};

// Maximum conditional likelihood of the base model given directions and
// time warp: per-region least squares over the tied surface coefficients,
// then the closed-form sigma^2 maximizer.
LsFit fit_given_directions(const Dataset& data, int K, int degree,
                           const MonotoneTimeFn& tf, const SplineBasis& bt,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                           const std::vector<std::vector<int>>& obs_by_region) {
  const SplineBasis buv = make_basis(K, degree, -1.0, 1.0);
  const SurfaceCoefficients proto(K, K);
  const int nf = proto.free_count();
  const int ncol = 2 * nf;
  const int n = data.num_subjects();

  Eigen::MatrixXd bu(K, n);
  Eigen::MatrixXd bv(K, n);
  for (int i = 0; i < n; ++i) {
    bu.col(i) = eval_basis(buv, u[i]);
    bv.col(i) = eval_basis(buv, v[i]);
  }

  double rss = 0.0;
  double nobs = 0.0;
  for (const auto& rows : obs_by_region) {
    const int m = static_cast<int>(rows.size());
    Eigen::MatrixXd phi(m, ncol);
    Eigen::VectorXd y(m);
    for (int r = 0; r < m; ++r) {
      const auto& o = data.obs[rows[r]];
      const double f0 = eval_timefn_value(tf, bt, o.t);
      for (int g = 0; g < nf; ++g) {
        const double G =
            proto.group_basis_product(g, bu.col(o.subject), bv.col(o.subject));
        phi(r, g) = G;
        phi(r, nf + g) = -f0 * G;
      }
      y[r] = o.y;
    }
    const Eigen::MatrixXd A = phi.transpose() * phi;
    const Eigen::VectorXd b = phi.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    Eigen::VectorXd w = ldlt.solve(b);
    rss += (y - phi * w).squaredNorm();
    nobs += m;
  }
  LsFit fit;
  const double sigma2 = std::max(rss / nobs, 1e-300);
  fit.max_loglik = -0.5 * nobs * (std::log(2.0 * kPi * sigma2) + 1.0);
  fit.surface_params =
      static_cast<int>(obs_by_region.size()) * 2 * nf;
  return fit;
}

BicTable run_grid(const Dataset& data, const std::vector<int>& grid,
                  int n_draws, const ModelConfig& cfg, bool vary_Kprime,
                  Rng& rng) {
  if (grid.empty()) throw std::invalid_argument("BIC grid is empty");
  if (n_draws < 1) throw std::invalid_argument("BIC needs n_draws >= 1");
  for (int g : grid)
    if (g < cfg.degree + 1)
      throw std::invalid_argument("BIC grid value below degree+1");

  std::vector<std::vector<int>> obs_by_region(data.num_regions);
  for (int k = 0; k < static_cast<int>(data.obs.size()); ++k)
    obs_by_region[data.obs[k].region].push_back(k);
  const int n_obs = static_cast<int>(data.obs.size());

  // shared direction draws across grid points
  std::vector<Eigen::VectorXd> betas, etas;
  for (int d = 0; d < n_draws; ++d) {
    betas.push_back(random_direction(data.xdim(), rng));
    etas.push_back(random_direction(data.zdim(), rng));
  }

  BicTable table;
  double best = std::numeric_limits<double>::infinity();
  for (int gval : grid) {
    const int K = vary_Kprime ? cfg.K : gval;
    const int Kp = vary_Kprime ? gval : cfg.Kprime;
    const SplineBasis bt = make_basis(Kp, cfg.degree, 0.0, 1.0);
    const auto cands = delta_candidates(Kp, cfg.degree);
    double avg = 0.0;
    for (int d = 0; d < n_draws; ++d) {
      const Eigen::VectorXd u =
          (data.X * betas[d]).cwiseMax(-1.0).cwiseMin(1.0);
      const Eigen::VectorXd v =
          (data.Z * etas[d]).cwiseMax(-1.0).cwiseMin(1.0);

      // coarse time-warp optimum: prescreen candidates on the first region
      int best_cand = 0;
      if (cands.size() > 1) {
        double best_ll = -std::numeric_limits<double>::infinity();
        const std::vector<std::vector<int>> first = {obs_by_region.front()};
        for (std::size_t c = 0; c < cands.size(); ++c) {
          MonotoneTimeFn tf{cands[c]};
          const LsFit f = fit_given_directions(data, K, cfg.degree, tf, bt, u,
                                               v, first);
          if (f.max_loglik > best_ll) {
            best_ll = f.max_loglik;
            best_cand = static_cast<int>(c);
          }
        }
      }

      MonotoneTimeFn tf{cands[best_cand]};
      const LsFit f = fit_given_directions(data, K, cfg.degree, tf, bt, u, v,
                                           obs_by_region);
      int params = f.surface_params + 1;  // + sigma^2
      if (vary_Kprime) params += Kp - 1;  // deltas jointly selected
      const double bic = -2.0 * f.max_loglik + params * std::log(n_obs);
      table.records.push_back({gval, d, bic, params, n_obs});
      avg += bic;
    }
    avg /= n_draws;
    table.averaged.emplace_back(gval, avg);
    if (avg < best) {
      best = avg;
      table.selected = gval;
    }
  }
  return table;
}

}  // namespace

BicTable select_K_bic(const Dataset& data, const std::vector<int>& grid,
                      int n_draws, const ModelConfig& base_cfg, Rng& rng) {
  return run_grid(data, grid, n_draws, base_cfg, false, rng);
}

BicTable select_Kprime_bic(const Dataset& data, const std::vector<int>& grid,
                           int n_draws, const ModelConfig& base_cfg,
                           Rng& rng) {
  return run_grid(data, grid, n_draws, base_cfg, true, rng);
}

BasisSizes select_basis_sizes(const Dataset& data,
                              const std::vector<int>& grid, int n_draws,
                              const ModelConfig& base_cfg, Rng& rng) {
  BasisSizes out;
  ModelConfig cfg = base_cfg;
  cfg.Kprime = grid[grid.size() / 2];
  out.table_K = select_K_bic(data, grid, n_draws, cfg, rng);
  out.K = out.table_K.selected;
  cfg.K = out.K;
  out.table_Kprime = select_Kprime_bic(data, grid, n_draws, cfg, rng);
  out.Kprime = out.table_Kprime.selected;
  return out;
}

void write_bic_table(const BicTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(12);
  out << "K,mean_bic,selected\n";
  for (const auto& [K, bic] : table.averaged)
    out << K << ',' << bic << ',' << (K == table.selected ? 1 : 0) << '\n';
}

namespace {

// Per-covariate inclusion frequencies; the last angle governs the final two
// coordinates of the unit vector.
Eigen::VectorXd covariate_frequencies(const Chain& chain) {
  const Eigen::VectorXd freq = chain.inclusion_frequencies();
  const int p = chain.xdim;
  Eigen::VectorXd out(p);
  for (int s = 0; s < p - 2; ++s) out[s] = freq[s];
  out[p - 2] = freq[p - 2];
  out[p - 1] = freq[p - 2];
  return out;
}

}  // namespace

std::vector<int> select_variables(const Chain& chain, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("select_variables: threshold must be in (0,1)");
  if (chain.post_burn_iterations == 0)
    throw std::invalid_argument("select_variables: empty chain");
  if (chain.xdim < 2)
    throw std::invalid_argument("select_variables: chain has no SNP block");
  const Eigen::VectorXd freq = covariate_frequencies(chain);
  std::vector<int> out;
  for (int s = 0; s < freq.size(); ++s)
    if (freq[s] > threshold) out.push_back(s);
  return out;
}

std::vector<int> top_k_variables(const Chain& chain, int k) {
  if (chain.post_burn_iterations == 0)
    throw std::invalid_argument("top_k_variables: empty chain");
  const int p = chain.xdim;
  if (k > p) throw std::invalid_argument("top_k_variables: k exceeds p");
  const Eigen::VectorXd freq = covariate_frequencies(chain);
  const Eigen::VectorXd bmean = chain.beta_posterior_mean();
  std::vector<int> idx(p);
  for (int s = 0; s < p; ++s) idx[s] = s;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (freq[a] != freq[b]) return freq[a] > freq[b];
    const double ma = std::abs(bmean[a]), mb = std::abs(bmean[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  idx.resize(k);
  return idx;
}

}  // namespace hdsim
