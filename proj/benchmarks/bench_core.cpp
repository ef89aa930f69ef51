#include <benchmark/benchmark.h>

#include "hdsim/experiments.hpp"
#include "hdsim/model.hpp"
#include "hdsim/polar.hpp"
#include "hdsim/sampler.hpp"
#include "hdsim/splines.hpp"

namespace {

using namespace hdsim;

void BM_EvalBasis(benchmark::State& state) {
  const SplineBasis b = make_basis(static_cast<int>(state.range(0)), 3, -1, 1);
  double x = -1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_basis_window(b, x));
    x += 0.001;
    if (x > 1.0) x = -1.0;
  }
}
BENCHMARK(BM_EvalBasis)->Arg(8)->Arg(14)->Arg(20);

void BM_PolarToUnit(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  PolarAngles theta;
  theta.angles = Eigen::VectorXd::Constant(d - 1, 1.3);
  for (auto _ : state) benchmark::DoNotOptimize(polar_to_unit(theta));
}
BENCHMARK(BM_PolarToUnit)->Arg(100)->Arg(1000)->Arg(10000);

void BM_GradProjection(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  PolarAngles theta;
  theta.angles = Eigen::VectorXd::Constant(d - 1, 1.3);
  Rng rng(7);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(grad_projection(theta, x));
}
BENCHMARK(BM_GradProjection)->Arg(100)->Arg(1000)->Arg(10000);

struct SweepFixture {
  SimData sim;
  Model model;
  ModelState state;
  ChainConfig cfg;
  Rng rng{11};

  static ModelConfig model_config() {
    ModelConfig mc;
    mc.K = 8;
    mc.Kprime = 8;
    return mc;
  }

  SweepFixture()
      : sim(gen_nonlinear(40, 120, 4, 5, 3)),
        model(sim.data, model_config()),
        state(model.initial_state(rng)) {
    cfg.hmc_theta.leapfrog_steps = 10;
    cfg.hmc_alpha.leapfrog_steps = 10;
    cfg.hmc_delta.leapfrog_steps = 10;
  }
};

void BM_LogPosterior(benchmark::State& state) {
  SweepFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.log_posterior(f.state));
}
BENCHMARK(BM_LogPosterior);

void BM_GradBlocks(benchmark::State& state) {
  SweepFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.grad_blocks(f.state));
}
BENCHMARK(BM_GradBlocks);

void BM_Sweep(benchmark::State& state) {
  SweepFixture f;
  for (auto _ : state)
    benchmark::DoNotOptimize(sweep(f.model, f.state, f.cfg, f.rng));
}
BENCHMARK(BM_Sweep);

}  // namespace

BENCHMARK_MAIN();
