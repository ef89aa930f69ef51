#include "hdsim/chain_io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hdsim {

namespace {

constexpr char kMagic[8] = {'H', 'D', 'S', 'I', 'M', 'C', 'H', 'N'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(double) * v.size());
  }
  void bytes(const std::vector<uint8_t>& v) {
    u64(v.size());
    raw(v.data(), v.size());
  }
  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i32(x);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("chain file truncated");
  }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }
  Eigen::VectorXd vec() {
    const auto n = u64();
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    raw(v.data(), sizeof(double) * n);
    return v;
  }
  std::vector<uint8_t> bytes() {
    const auto n = u64();
    std::vector<uint8_t> v(n);
    if (n) raw(v.data(), n);
    return v;
  }
  std::vector<int> ints() {
    const auto n = u64();
    std::vector<int> v(n);
    for (auto& x : v) x = i32();
    return v;
  }

 private:
  std::istream& in_;
};

void write_state(Writer& w, const ModelState& s) {
  w.vec(s.theta.angles);
  w.bytes(s.gamma.gamma);
  w.u64(s.alpha.size());
  for (const auto& a : s.alpha) w.vec(a.angles);
  w.u64(s.surfaces.size());
  for (const auto& region : s.surfaces)
    for (const auto& surf : region) w.vec(surf.free_values());
  w.vec(s.timefn.deltas);
  w.f64(s.sigma2);
  w.f64(s.offset);
  w.vec(s.tau);
  w.i32(s.dp.truncation);
  w.f64(s.dp.concentration);
  w.f64(s.dp.base_shape);
  w.f64(s.dp.base_rate);
  w.vec(s.dp.stick_weights);
  w.vec(s.dp.component_scales);
  w.ints(s.dp.assignments);
}

ModelState read_state(Reader& r, const Chain& chain) {
  ModelState s;
  s.theta.angles = r.vec();
  s.gamma.gamma = r.bytes();
  const auto nalpha = r.u64();
  s.alpha.resize(nalpha);
  for (auto& a : s.alpha) a.angles = r.vec();
  const auto nregion = r.u64();
  s.surfaces.resize(nregion);
  const bool collapse = chain.model_config.kind == VariantKind::no_snp;
  for (auto& region : s.surfaces)
    for (auto& surf : region) {
      surf = SurfaceCoefficients(chain.model_config.K, chain.model_config.K,
                                 collapse);
      surf.set_free_values(r.vec());
    }
  s.timefn.deltas = r.vec();
  s.sigma2 = r.f64();
  s.offset = r.f64();
  s.tau = r.vec();
  s.dp.truncation = r.i32();
  s.dp.concentration = r.f64();
  s.dp.base_shape = r.f64();
  s.dp.base_rate = r.f64();
  s.dp.stick_weights = r.vec();
  s.dp.component_scales = r.vec();
  s.dp.assignments = r.ints();
  return s;
}

int variant_code(VariantKind k) { return static_cast<int>(k); }
VariantKind variant_from_code(int c) {
  switch (c) {
    case 0: return VariantKind::base;
    case 1: return VariantKind::random_effect_regionwise;
    case 2: return VariantKind::no_snp;
  }
  throw std::runtime_error("chain file: unknown variant code");
}

const char* variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::base: return "base";
    case VariantKind::random_effect_regionwise:
      return "random_effect_regionwise";
    case VariantKind::no_snp: return "no_snp";
  }
  return "?";
}

}  // namespace

void save_chain(const Chain& chain, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  Writer w(out);
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);

  w.i32(variant_code(chain.model_config.kind));
  w.i32(chain.xdim);
  w.i32(chain.zdim);
  w.i32(chain.num_regions);
  w.i32(chain.model_config.K);
  w.i32(chain.model_config.Kprime);
  w.i32(chain.model_config.degree);
  w.f64(chain.model_config.a);
  w.f64(chain.model_config.d1);
  w.f64(chain.model_config.d2);
  w.f64(chain.model_config.spike.M1);
  w.f64(chain.model_config.spike.M2);
  w.f64(chain.model_config.spike.q);
  w.f64(chain.model_config.spike.spike_log_norm);
  w.i32(chain.model_config.dp_truncation);

  w.i32(chain.config.iterations);
  w.i32(chain.config.burn_in);
  w.i32(chain.config.thin);
  w.u64(chain.config.seed);
  w.i32(chain.config.adapt_size_lo);
  w.i32(chain.config.adapt_size_hi);
  w.i32(chain.config.adapt_q ? 1 : 0);
  w.i32(chain.config.reflection == ReflectionMode::leapfrog ? 0 : 1);
  w.f64(chain.config.hmc_theta.step_size);
  w.i32(chain.config.hmc_theta.leapfrog_steps);
  w.f64(chain.config.hmc_alpha.step_size);
  w.i32(chain.config.hmc_alpha.leapfrog_steps);
  w.f64(chain.config.hmc_delta.step_size);
  w.i32(chain.config.hmc_delta.leapfrog_steps);

  w.i32(chain.post_burn_iterations);
  w.f64(chain.accept_rate_theta);
  w.f64(chain.accept_rate_alpha);
  w.f64(chain.accept_rate_deltas);
  w.f64(chain.final_q);

  w.u64(chain.log_posterior_trace.size());
  w.raw(chain.log_posterior_trace.data(),
        sizeof(double) * chain.log_posterior_trace.size());
  w.vec(chain.inclusion_counts);
  w.vec(chain.beta_mean_accum);

  w.u64(chain.draws.size());
  for (const auto& d : chain.draws) {
    std::ostringstream rec;
    Writer rw(rec);
    rw.i32(d.iteration);
    rw.f64(d.diag.log_posterior);
    rw.i32(d.diag.accept_theta ? 1 : 0);
    rw.f64(d.diag.accept_alpha_rate);
    rw.i32(d.diag.accept_deltas ? 1 : 0);
    rw.i32(d.diag.model_size);
    write_state(rw, d.state);
    const std::string blob = rec.str();
    w.u64(blob.size());
    w.raw(blob.data(), blob.size());
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);

  nlohmann::json meta;
  meta["format_version"] = kVersion;
  meta["variant"] = variant_name(chain.model_config.kind);
  meta["xdim"] = chain.xdim;
  meta["zdim"] = chain.zdim;
  meta["num_regions"] = chain.num_regions;
  meta["K"] = chain.model_config.K;
  meta["Kprime"] = chain.model_config.Kprime;
  meta["iterations"] = chain.config.iterations;
  meta["burn_in"] = chain.config.burn_in;
  meta["thin"] = chain.config.thin;
  meta["seed"] = chain.config.seed;
  meta["stored_draws"] = chain.draws.size();
  meta["post_burn_iterations"] = chain.post_burn_iterations;
  meta["accept_rate_theta"] = chain.accept_rate_theta;
  meta["accept_rate_alpha"] = chain.accept_rate_alpha;
  meta["accept_rate_deltas"] = chain.accept_rate_deltas;
  meta["final_q"] = chain.final_q;
  std::ofstream side(path + ".meta.json");
  if (!side) throw std::runtime_error("cannot write " + path + ".meta.json");
  side << meta.dump(2) << '\n';
}

Chain load_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Reader r(in);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error(path + " is not a chain file");
  const auto version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("unsupported chain file version");

  Chain chain;
  chain.model_config.kind = variant_from_code(r.i32());
  chain.xdim = r.i32();
  chain.zdim = r.i32();
  chain.num_regions = r.i32();
  chain.model_config.K = r.i32();
  chain.model_config.Kprime = r.i32();
  chain.model_config.degree = r.i32();
  chain.model_config.a = r.f64();
  chain.model_config.d1 = r.f64();
  chain.model_config.d2 = r.f64();
  chain.model_config.spike.M1 = r.f64();
  chain.model_config.spike.M2 = r.f64();
  chain.model_config.spike.q = r.f64();
  chain.model_config.spike.spike_log_norm = r.f64();
  chain.model_config.dp_truncation = r.i32();

  chain.config.iterations = r.i32();
  chain.config.burn_in = r.i32();
  chain.config.thin = r.i32();
  chain.config.seed = r.u64();
  chain.config.adapt_size_lo = r.i32();
  chain.config.adapt_size_hi = r.i32();
  chain.config.adapt_q = r.i32() != 0;
  chain.config.reflection =
      r.i32() == 0 ? ReflectionMode::leapfrog : ReflectionMode::endpoint_fold;
  chain.config.hmc_theta.step_size = r.f64();
  chain.config.hmc_theta.leapfrog_steps = r.i32();
  chain.config.hmc_alpha.step_size = r.f64();
  chain.config.hmc_alpha.leapfrog_steps = r.i32();
  chain.config.hmc_delta.step_size = r.f64();
  chain.config.hmc_delta.leapfrog_steps = r.i32();

  chain.post_burn_iterations = r.i32();
  chain.accept_rate_theta = r.f64();
  chain.accept_rate_alpha = r.f64();
  chain.accept_rate_deltas = r.f64();
  chain.final_q = r.f64();

  const auto ntrace = r.u64();
  chain.log_posterior_trace.resize(ntrace);
  if (ntrace)
    r.raw(chain.log_posterior_trace.data(), sizeof(double) * ntrace);
  chain.inclusion_counts = r.vec();
  chain.beta_mean_accum = r.vec();

  const auto ndraws = r.u64();
  chain.draws.reserve(ndraws);
  for (std::uint64_t k = 0; k < ndraws; ++k) {
    const auto len = r.u64();
    (void)len;
    StoredDraw d;
    d.iteration = r.i32();
    d.diag.log_posterior = r.f64();
    d.diag.accept_theta = r.i32() != 0;
    d.diag.accept_alpha_rate = r.f64();
    d.diag.accept_deltas = r.i32() != 0;
    d.diag.model_size = r.i32();
    d.state = read_state(r, chain);
    chain.draws.push_back(std::move(d));
  }
  return chain;
}

}  // namespace hdsim
