#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hdsim/polar.hpp"
#include "hdsim/rng.hpp"
#include "hdsim/splines.hpp"

namespace hdsim {

// Spike-and-slab prior on polar angles. Interior angles get a spike
// proportional to (min(t,pi-t)/(pi/2))^M2 (1 - min(t,pi-t)/(pi/2))^M1,
// which concentrates near pi/2 but is exactly zero at pi/2 itself; the
// last angle gets an eight-piece mixture of rescaled betas with spikes at
// every multiple of pi/2. Slabs are uniform.
struct SpikeSlabConfig {
  double M1 = 0.1;
  double M2 = 10.0;
  double q = 0.05;             // slab probability
  double spike_log_norm = 0.0; // log integral of the unnormalized spike

  // Theory-guided setting: M2 = sqrt(n p) log p, q = 1/p, M1 kept fixed.
  static SpikeSlabConfig theory_guided(double M1, int n, int p);
};

SpikeSlabConfig make_spike_slab(double M1, double M2, double q);

enum class AngleKind { interior, last };

// Normalized spike log-density for an interior angle on (0, pi).
// Returns -inf at 0, pi/2 and pi where the literal kernel vanishes.
double log_spike_density(double theta_r, const SpikeSlabConfig& cfg);

// Normalized spike log-density for the last angle on [0, 2pi]: the
// (1/8)-weighted sum of eight shifted/scaled beta densities with shapes
// alternating (M1,M2),(M2,M1) on consecutive quarter-pi intervals.
double log_last_angle_density(double theta_last, const SpikeSlabConfig& cfg);

// Piece-local evaluation at distance `dist` (in units of the quarter-pi
// piece width) from the chosen edge of a piece. Recovering the local
// coordinate from theta loses the mass the Be(M1,.) spike keeps within one
// ulp of a piece boundary; quadrature checks need this form.
double log_last_angle_density_edge(int piece, bool from_right, double dist,
                                   const SpikeSlabConfig& cfg);

// Draw from the spike distribution (used by prior-simulation tests).
double sample_spike(const SpikeSlabConfig& cfg, AngleKind kind, Rng& rng);

struct InclusionIndicators {
  std::vector<uint8_t> gamma;  // 1 = slab, 0 = spike

  int model_size() const {
    int s = 0;
    for (auto g : gamma) s += g;
    return s;
  }
};

struct AnglePriorEval {
  double value = 0.0;
  Eigen::VectorXd grad;
};

// Log prior of the full angle vector given indicators, with gradient.
// Angles exactly at a spike kink are evaluated one-sidedly after a +1e-12
// nudge so that a spike-centered state has a finite log-density.
AnglePriorEval log_angle_prior(const PolarAngles& theta,
                               const InclusionIndicators& gamma,
                               const SpikeSlabConfig& cfg);

// Exact conditional draw of one indicator from the two-component mixture.
bool gibbs_indicator(double theta_r, const SpikeSlabConfig& cfg,
                     AngleKind kind, Rng& rng);
double indicator_slab_probability(double theta_r, const SpikeSlabConfig& cfg,
                                  AngleKind kind);

// Independent N(0, a^2) prior over the free (untied) surface coefficients.
double log_coeff_prior(const SurfaceCoefficients& coeffs, double a);

// Truncated stick-breaking state for the Dirichlet-process scale mixture of
// centered normals on the subject random effects.
struct DPMixtureState {
  int truncation = 20;
  double concentration = 1.0;
  double base_shape = 2.0;  // inverse-gamma base measure on the scales
  double base_rate = 0.5;
  Eigen::VectorXd stick_weights;     // H, sums to 1
  Eigen::VectorXd component_scales;  // H variances
  std::vector<int> assignments;      // per subject

  static DPMixtureState make(int truncation, int num_subjects, Rng& rng);
};

// One blocked-Gibbs sweep: assignments, sticks, scales.
void dp_update(const Eigen::VectorXd& effects, DPMixtureState& state,
               Rng& rng);

}  // namespace hdsim
