#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace hdsim {

// Self-contained sampler on top of mt19937_64. Distribution algorithms are
// written out here (not taken from <random>) so that a chain is reproducible
// byte-for-byte from its seed regardless of standard-library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Derives an independent stream, e.g. one per replication or chain.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{seed & 0xffffffffu, seed >> 32, stream & 0xffffffffu,
                      stream >> 32};
    std::mt19937_64 g(seq);
    return Rng(g());
  }

  std::uint64_t raw() { return gen_(); }

  // Uniform on (0,1); never returns an exact endpoint.
  double uniform() {
    const double u = (gen_() >> 11) * 0x1.0p-53;
    return u == 0.0 ? 0x1.0p-54 : u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia polar method, no cached spare.
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Marsaglia-Tsang; shape boost for shape < 1.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0)
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v * scale;
    }
  }

  double inverse_gamma(double shape, double rate) {
    return 1.0 / gamma(shape, 1.0 / rate);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  // Categorical draw from unnormalized non-negative weights.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0))
      throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t h = 0; h + 1 < weights.size(); ++h) {
      u -= weights[h];
      if (u <= 0.0) return h;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace hdsim
