#pragma once

#include <string>
#include <vector>

#include "hdsim/model.hpp"
#include "hdsim/sampler.hpp"

namespace hdsim {

struct BicRecord {
  int K = 0;
  int replicate = 0;
  double bic = 0.0;
  int param_count = 0;
  int n_obs = 0;
};

struct BicTable {
  std::vector<BicRecord> records;        // one per (K, replicate)
  std::vector<std::pair<int, double>> averaged;  // per K
  int selected = 0;
};

// BIC over a grid of basis sizes: for each K and each of n_draws random
// unit directions (beta, eta), the conditionally-linear model (surfaces and
// sigma^2 given the fixed directions, time warp at a coarse optimum) is
// maximized in closed form; BIC values are averaged over the draws and the
// argmin K returned.
BicTable select_K_bic(const Dataset& data, const std::vector<int>& grid,
                      int n_draws, const ModelConfig& base_cfg, Rng& rng);

// Same procedure over the time-warp basis size with K held fixed; the
// delta count enters the BIC parameter total here.
BicTable select_Kprime_bic(const Dataset& data, const std::vector<int>& grid,
                           int n_draws, const ModelConfig& base_cfg, Rng& rng);

// Nested pass: picks K with K' fixed at the grid midpoint, then K' with the
// chosen K held fixed.
struct BasisSizes {
  int K = 0;
  int Kprime = 0;
  BicTable table_K;
  BicTable table_Kprime;
};
BasisSizes select_basis_sizes(const Dataset& data,
                              const std::vector<int>& grid, int n_draws,
                              const ModelConfig& base_cfg, Rng& rng);

void write_bic_table(const BicTable& table, const std::string& path);

// Angle indices with inclusion frequency strictly above the threshold,
// mapped to covariate coordinates (the last angle covers the final two
// coordinates of the unit vector).
std::vector<int> select_variables(const Chain& chain, double threshold);

// The k covariate indices with the highest inclusion frequencies; ties are
// broken by larger posterior-mean |beta|, then by lower index.
std::vector<int> top_k_variables(const Chain& chain, int k);

}  // namespace hdsim
