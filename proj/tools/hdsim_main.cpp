// Command-line front end: data simulation, model fitting, basis-size
// selection, benchmark tables, and posterior prediction.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "hdsim/chain_io.hpp"
#include "hdsim/experiments.hpp"
#include "hdsim/model.hpp"
#include "hdsim/sampler.hpp"
#include "hdsim/selection.hpp"

using json = nlohmann::json;

namespace {

int env_threads() {
  const char* v = std::getenv("HDSIM_THREADS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

struct CommonModelArgs {
  std::string variant = "base";
  double m1 = 0.1, m2 = 10.0, slab_q = 0.05;
  int basis_k = 8, basis_kprime = 8;
  double a = 10.0, d1 = 1.0, d2 = 1.0;
  int dp_truncation = 20;
  bool theory_hyper = false;
};

struct FitArgs {
  std::string x_file, z_file, obs_file;
  std::string out = "chain.bin";
  std::string summary = "summary.json";
  int regions = 0;
  int iterations = 4000, burn_in = 1000, thin = 1;
  std::uint64_t seed = 0;
  double step_size = 0.01;
  int leapfrog = 20;
  std::string mode = "leapfrog-reflection";
  int size_lo = 20, size_hi = 30;
  bool no_adapt_q = false;
  int chains = 1;
  CommonModelArgs model;
};

void add_model_flags(CLI::App* cmd, CommonModelArgs& m) {
  cmd->add_option("--variant", m.variant, "base|random_effect|no_snp")
      ->check(CLI::IsMember({"base", "random_effect", "no_snp"}));
  cmd->add_option("--m1", m.m1, "spike shape M1 (< 1)");
  cmd->add_option("--m2", m.m2, "spike shape M2 (>= 1)");
  cmd->add_option("--slab-q", m.slab_q, "slab probability q");
  cmd->add_option("--basis-k", m.basis_k, "surface basis size K");
  cmd->add_option("--basis-kprime", m.basis_kprime, "time basis size K'");
  cmd->add_option("--coeff-sd", m.a, "surface coefficient prior sd");
  cmd->add_option("--d1", m.d1, "gamma prior shape on the precision");
  cmd->add_option("--d2", m.d2, "gamma prior rate on the precision");
  cmd->add_option("--dp-truncation", m.dp_truncation,
                  "stick-breaking truncation");
  cmd->add_flag("--theory-hyper", m.theory_hyper,
                "set M2=sqrt(np)log p and q=1/p from the data dimensions");
}

hdsim::VariantKind parse_variant(const std::string& v) {
  if (v == "base") return hdsim::VariantKind::base;
  if (v == "random_effect")
    return hdsim::VariantKind::random_effect_regionwise;
  return hdsim::VariantKind::no_snp;
}

hdsim::ModelConfig build_model_config(const CommonModelArgs& m, int n, int p) {
  hdsim::ModelConfig cfg;
  cfg.kind = parse_variant(m.variant);
  cfg.K = m.basis_k;
  cfg.Kprime = m.basis_kprime;
  cfg.a = m.a;
  cfg.d1 = m.d1;
  cfg.d2 = m.d2;
  cfg.dp_truncation = m.dp_truncation;
  if (m.theory_hyper && p > 0)
    cfg.spike = hdsim::SpikeSlabConfig::theory_guided(m.m1, n, p);
  else
    cfg.spike = hdsim::make_spike_slab(m.m1, m.m2, m.slab_q);
  return cfg;
}

hdsim::Dataset load_dataset(const std::string& x_file,
                            const std::string& z_file,
                            const std::string& obs_file, int regions) {
  hdsim::Dataset data;
  if (!x_file.empty()) data.X = hdsim::read_matrix_csv(x_file);
  data.Z = hdsim::read_matrix_csv(z_file);
  data.obs = hdsim::read_observations(obs_file);
  int max_region = -1;
  for (const auto& o : data.obs) max_region = std::max(max_region, o.region);
  data.num_regions = regions > 0 ? regions : max_region + 1;
  data.validate();
  return data;
}

int cmd_simulate(const std::string& scenario, int n, int p, int J, int T,
                 std::uint64_t seed, const std::string& prefix) {
  const hdsim::SimData sim =
      scenario == "nonlinear" ? hdsim::gen_nonlinear(n, p, J, T, seed)
                              : hdsim::gen_linear(n, p, J, T, seed);
  hdsim::write_matrix_csv(prefix + "_X.csv", sim.data.X, "x");
  hdsim::write_matrix_csv(prefix + "_Z.csv", sim.data.Z, "z");
  hdsim::write_observations(prefix + "_obs.csv", sim.data.obs);

  json truth;
  truth["scenario"] = scenario;
  truth["sigma0"] = sim.truth.sigma0;
  truth["support"] = sim.truth.support;
  truth["beta0"] = std::vector<double>(
      sim.truth.beta0.data(), sim.truth.beta0.data() + sim.truth.beta0.size());
  truth["eta0"] = std::vector<double>(
      sim.truth.eta0.data(), sim.truth.eta0.data() + sim.truth.eta0.size());
  if (sim.truth.scenario == hdsim::Scenario::linear) {
    truth["gamma1"] = std::vector<double>(
        sim.truth.gamma1.data(),
        sim.truth.gamma1.data() + sim.truth.gamma1.size());
    truth["gamma2"] = std::vector<double>(
        sim.truth.gamma2.data(),
        sim.truth.gamma2.data() + sim.truth.gamma2.size());
  }
  std::ofstream out(prefix + "_truth.json");
  if (!out) throw std::runtime_error("cannot write " + prefix + "_truth.json");
  out << truth.dump(2) << '\n';
  std::cout << "wrote " << prefix << "_{X,Z,obs}.csv and " << prefix
            << "_truth.json\n";
  return 0;
}

void write_summary(const hdsim::Chain& chain, const std::string& path) {
  json s;
  s["iterations"] = chain.config.iterations;
  s["burn_in"] = chain.config.burn_in;
  s["seed"] = chain.config.seed;
  s["accept_rate_theta"] = chain.accept_rate_theta;
  s["accept_rate_alpha"] = chain.accept_rate_alpha;
  s["accept_rate_deltas"] = chain.accept_rate_deltas;
  s["final_q"] = chain.final_q;
  s["log_posterior_trace"] = chain.log_posterior_trace;
  if (chain.xdim > 0) {
    const Eigen::VectorXd freq = chain.inclusion_frequencies();
    const Eigen::VectorXd bmean = chain.beta_posterior_mean();
    s["inclusion_frequencies"] =
        std::vector<double>(freq.data(), freq.data() + freq.size());
    s["beta_posterior_mean"] =
        std::vector<double>(bmean.data(), bmean.data() + bmean.size());
    double msize = 0.0;
    for (const auto& d : chain.draws) msize += d.diag.model_size;
    s["mean_model_size"] =
        chain.draws.empty() ? 0.0 : msize / chain.draws.size();
  }
  double sigma2 = 0.0;
  for (const auto& d : chain.draws) sigma2 += d.state.sigma2;
  s["sigma2_posterior_mean"] =
      chain.draws.empty() ? 0.0 : sigma2 / chain.draws.size();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << s.dump(2) << '\n';
}

int cmd_fit(const FitArgs& args) {
  const hdsim::Dataset data =
      load_dataset(args.x_file, args.z_file, args.obs_file, args.regions);
  hdsim::ModelConfig mc = build_model_config(
      args.model, data.num_subjects(), data.xdim());

  hdsim::ChainConfig cc;
  cc.iterations = args.iterations;
  cc.burn_in = args.burn_in;
  cc.thin = args.thin;
  cc.seed = args.seed;
  cc.adapt_size_lo = args.size_lo;
  cc.adapt_size_hi = args.size_hi;
  cc.adapt_q = !args.no_adapt_q;
  cc.reflection = args.mode == "paper-reflection"
                      ? hdsim::ReflectionMode::endpoint_fold
                      : hdsim::ReflectionMode::leapfrog;
  cc.hmc_theta.step_size = args.step_size;
  cc.hmc_theta.leapfrog_steps = args.leapfrog;
  cc.hmc_alpha.step_size = args.step_size;
  cc.hmc_alpha.leapfrog_steps = args.leapfrog;
  cc.hmc_delta.step_size = args.step_size;
  cc.hmc_delta.leapfrog_steps = args.leapfrog;

  const auto suffixed = [](const std::string& path, int c) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return path + "_c" + std::to_string(c);
    return path.substr(0, dot) + "_c" + std::to_string(c) + path.substr(dot);
  };

  if (args.chains == 1) {
    hdsim::Model model(data, mc);
    const hdsim::Chain chain = hdsim::run_chain(model, cc);
    hdsim::save_chain(chain, args.out);
    write_summary(chain, args.summary);
    std::cout << "chain written to " << args.out << ", summary to "
              << args.summary << "\n";
    return 0;
  }
  std::vector<std::thread> pool;
  std::vector<std::string> errors(args.chains);
  for (int c = 0; c < args.chains; ++c) {
    pool.emplace_back([&, c]() {
      try {
        hdsim::Model model(data, mc);
        hdsim::ChainConfig cfg = cc;
        cfg.seed = hdsim::sub_seed(args.seed, c);
        const hdsim::Chain chain = hdsim::run_chain(model, cfg);
        hdsim::save_chain(chain, suffixed(args.out, c));
        write_summary(chain, suffixed(args.summary, c));
      } catch (const std::exception& e) {
        errors[c] = e.what();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (int c = 0; c < args.chains; ++c)
    if (!errors[c].empty())
      throw std::runtime_error("chain " + std::to_string(c) + ": " +
                               errors[c]);
  std::cout << args.chains << " chains written with suffixes _c0.."
            << "_c" << args.chains - 1 << "\n";
  return 0;
}

int cmd_select_k(const std::string& x_file, const std::string& z_file,
                 const std::string& obs_file, int regions, int grid_min,
                 int grid_max, int draws, std::uint64_t seed,
                 const std::string& out, bool joint,
                 const CommonModelArgs& margs) {
  const hdsim::Dataset data = load_dataset(x_file, z_file, obs_file, regions);
  hdsim::ModelConfig mc =
      build_model_config(margs, data.num_subjects(), data.xdim());
  std::vector<int> grid;
  for (int k = grid_min; k <= grid_max; ++k) grid.push_back(k);
  hdsim::Rng rng(seed);
  if (joint) {
    const hdsim::BasisSizes sizes =
        hdsim::select_basis_sizes(data, grid, draws, mc, rng);
    hdsim::write_bic_table(sizes.table_K, out);
    hdsim::write_bic_table(sizes.table_Kprime, out + ".kprime");
    std::cout << "selected K=" << sizes.K << " K'=" << sizes.Kprime << "\n";
  } else {
    const hdsim::BicTable table =
        hdsim::select_K_bic(data, grid, draws, mc, rng);
    hdsim::write_bic_table(table, out);
    std::cout << "selected K=" << table.selected << "\n";
  }
  return 0;
}

int cmd_benchmark(const std::string& scenario, int n, int p, int J, int T,
                  int replications, std::uint64_t seed, int iterations,
                  int burn_in, int basis_k, const std::string& out) {
  hdsim::BenchmarkConfig cfg;
  cfg.scenario = scenario == "nonlinear" ? hdsim::Scenario::nonlinear
                                         : hdsim::Scenario::linear;
  cfg.n = n;
  cfg.p = p;
  cfg.J = J;
  cfg.T = T;
  cfg.replications = replications;
  cfg.seed = seed;
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  if (basis_k > 0) cfg.basis_k = basis_k;
  cfg.threads = env_threads();

  const hdsim::EvalReport report = hdsim::run_benchmark(cfg);
  hdsim::write_report(report, out);
  std::cout << "scenario=" << scenario << " n=" << n << " p=" << p
            << " replications=" << replications << "\n";
  for (const auto& row : report.rows)
    std::cout << "  " << row.method << ": test MSE " << row.mse
              << ", max canonical correlation " << row.canonical_correlation
              << "\n";
  if (!report.failed_replications.empty()) {
    std::cout << "  failed replications:";
    for (int r : report.failed_replications) std::cout << ' ' << r;
    std::cout << "\n";
  }
  std::cout << "table written to " << out << "\n";
  return 0;
}

int cmd_predict(const std::string& chain_path, const std::string& x_file,
                const std::string& z_file, const std::string& obs_file,
                int regions, const std::string& out) {
  const hdsim::Chain chain = hdsim::load_chain(chain_path);
  hdsim::Dataset data;
  if (!x_file.empty()) data.X = hdsim::read_matrix_csv(x_file);
  data.Z = hdsim::read_matrix_csv(z_file);
  data.obs = hdsim::read_observations(obs_file);
  data.num_regions = regions > 0 ? regions : chain.num_regions;
  int max_region = -1;
  for (const auto& o : data.obs) max_region = std::max(max_region, o.region);
  if (max_region >= chain.num_regions)
    throw std::runtime_error(
        "test data has region " + std::to_string(max_region) +
        " but the chain was fit on " + std::to_string(chain.num_regions) +
        " regions");
  data.validate(false);

  const Eigen::VectorXd pred = hdsim::predict_posterior_mean(chain, data);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write " + out);
  f.precision(17);
  f << "subject_id,region_id,time_scaled,prediction\n";
  for (std::size_t k = 0; k < data.obs.size(); ++k)
    f << data.obs[k].subject << ',' << data.obs[k].region << ','
      << data.obs[k].t << ',' << pred[k] << '\n';
  std::cout << "prediction error "
            << hdsim::prediction_error(pred, data.obs) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-dimensional single-index longitudinal regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (flags take precedence)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate simulation data files");
  std::string sim_scenario = "nonlinear";
  int sim_n = 100, sim_p = 400, sim_J = 13, sim_T = 5;
  std::uint64_t sim_seed = 0;
  std::string sim_prefix = "sim";
  sim->add_option("--scenario", sim_scenario)
      ->check(CLI::IsMember({"nonlinear", "linear"}));
  sim->add_option("--n", sim_n, "subjects (even)");
  sim->add_option("--p", sim_p, "high-dimensional covariate count");
  sim->add_option("--regions", sim_J);
  sim->add_option("--times", sim_T);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out-prefix", sim_prefix);

  // fit
  auto* fit = app.add_subcommand("fit", "Run the MCMC sampler");
  FitArgs fa;
  fit->add_option("--x-file", fa.x_file, "high-dimensional covariate csv");
  fit->add_option("--z-file", fa.z_file)->required();
  fit->add_option("--obs-file", fa.obs_file)->required();
  fit->add_option("--regions", fa.regions, "region count (default: inferred)");
  fit->add_option("--out", fa.out);
  fit->add_option("--summary", fa.summary);
  fit->add_option("--iterations", fa.iterations);
  fit->add_option("--burn-in", fa.burn_in);
  fit->add_option("--thin", fa.thin);
  fit->add_option("--seed", fa.seed);
  fit->add_option("--step-size", fa.step_size);
  fit->add_option("--leapfrog", fa.leapfrog);
  fit->add_option("--mode", fa.mode)
      ->check(CLI::IsMember({"paper-reflection", "leapfrog-reflection"}));
  fit->add_option("--size-lo", fa.size_lo, "model-size window low");
  fit->add_option("--size-hi", fa.size_hi, "model-size window high");
  fit->add_flag("--no-adapt-q", fa.no_adapt_q);
  fit->add_option("--chains", fa.chains, "independent chains run concurrently");
  add_model_flags(fit, fa.model);

  // select-k
  auto* selk = app.add_subcommand("select-k", "BIC basis-size selection");
  std::string sk_x, sk_z, sk_obs, sk_out = "bic.csv";
  int sk_regions = 0, sk_min = 7, sk_max = 20, sk_draws = 10;
  std::uint64_t sk_seed = 0;
  bool sk_joint = false;
  CommonModelArgs sk_model;
  selk->add_option("--x-file", sk_x)->required();
  selk->add_option("--z-file", sk_z)->required();
  selk->add_option("--obs-file", sk_obs)->required();
  selk->add_option("--regions", sk_regions);
  selk->add_option("--grid-min", sk_min);
  selk->add_option("--grid-max", sk_max);
  selk->add_option("--draws", sk_draws, "random direction draws per K");
  selk->add_option("--seed", sk_seed);
  selk->add_option("--out", sk_out);
  selk->add_flag("--joint", sk_joint, "also select K' by a nested pass");
  add_model_flags(selk, sk_model);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Simulation comparison table");
  std::string b_scenario = "nonlinear", b_out = "benchmark.csv";
  int b_n = 100, b_p = 400, b_J = 13, b_T = 5, b_reps = 2;
  int b_iters = 1500, b_burn = 500, b_basis_k = 0;
  std::uint64_t b_seed = 0;
  bench->add_option("--scenario", b_scenario)
      ->check(CLI::IsMember({"nonlinear", "linear"}));
  bench->add_option("--n", b_n);
  bench->add_option("--p", b_p);
  bench->add_option("--regions", b_J);
  bench->add_option("--times", b_T);
  bench->add_option("--replications", b_reps)
      ->check(CLI::PositiveNumber);
  bench->add_option("--seed", b_seed);
  bench->add_option("--iterations", b_iters);
  bench->add_option("--burn-in", b_burn);
  bench->add_option("--basis-k", b_basis_k,
                    "override the per-sample-size basis schedule");
  bench->add_option("--out", b_out);

  // predict
  auto* pred = app.add_subcommand("predict", "Posterior-mean prediction");
  std::string p_chain, p_x, p_z, p_obs, p_out = "predictions.csv";
  int p_regions = 0;
  pred->add_option("--chain", p_chain)->required();
  pred->add_option("--x-file", p_x);
  pred->add_option("--z-file", p_z)->required();
  pred->add_option("--obs-file", p_obs)->required();
  pred->add_option("--regions", p_regions);
  pred->add_option("--out", p_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_scenario, sim_n, sim_p, sim_J, sim_T, sim_seed,
                          sim_prefix);
    if (fit->parsed()) {
      if (fa.model.variant == "no_snp" && !fa.x_file.empty()) {
        std::cerr << "fit: --variant=no_snp does not take --x-file\n";
        return 2;
      }
      if (fa.model.variant != "no_snp" && fa.x_file.empty()) {
        std::cerr << "fit: --x-file is required unless --variant=no_snp\n";
        return 2;
      }
      return cmd_fit(fa);
    }
    if (selk->parsed())
      return cmd_select_k(sk_x, sk_z, sk_obs, sk_regions, sk_min, sk_max,
                          sk_draws, sk_seed, sk_out, sk_joint, sk_model);
    if (bench->parsed())
      return cmd_benchmark(b_scenario, b_n, b_p, b_J, b_T, b_reps, b_seed,
                           b_iters, b_burn, b_basis_k, b_out);
    if (pred->parsed())
      return cmd_predict(p_chain, p_x, p_z, p_obs, p_regions, p_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
