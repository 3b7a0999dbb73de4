#pragma once

#include <cstdint>
#include <vector>

#include "qpkr/model.hpp"
#include "qpkr/scaling.hpp"

// Reference dynamics and synthetic data used to validate the quantum engine
// and the scaling analysis against known answers.

namespace qpkr::baselines {

// One iteration of the kicked map in reduced momentum units:
//   ptilde' = ptilde + (kick_amp / kbar) sin(x)
//   x'      = x + kbar * ptilde'
// Kick first, then free flight, matching the split-step propagator. No angle
// wrapping here so the map stays differentiable (callers wrap if they care).
void standard_map_step(double& x, double& ptilde, double kick_amp,
                       double kbar);

struct ClassicalOptions {
  std::size_t n_trajectories = 100000;
  int threads = 0;           // 0 = hardware default
  bool phase_average = true; // random phi2, phi3 per trajectory
  std::uint64_t seed = 1;
  std::vector<long> record_at;  // empty = every kick up to n_kicks
};

struct ClassicalResult {
  std::vector<long> times;
  std::vector<double> p2;      // <(ptilde_t - ptilde_0)^2> over trajectories
  std::vector<double> p2_err;  // standard error of that mean
};

// Monte Carlo of the classical modulated kicked map. Initial conditions
// mirror the quantum launch: ptilde_0 uniform in [0, 1) (the quasimomentum
// offset of a single lattice site), x_0 uniform in [0, 2pi). Per-trajectory
// draws come from rng::Stream(seed, trajectory_index) in the order
// ptilde_0, x_0, then phi2, phi3 when phase averaging, so results are
// independent of the worker count.
ClassicalResult classical_diffusion(const model::ParameterSet& ps, double K,
                                    double eps, const ClassicalOptions& opts);

// Families of synthetic finite-time scaling surfaces. Both share the exact
// one-parameter structure ln Lambda = g(zeta), zeta = sign * xi^(-1/s) t^(1/(3s))
// with s the shape exponent, so a collapse must recover xi(q) up to gauge.
enum class SynthFamily {
  // g linear in zeta: representable exactly by the collapse spline, giving
  // zero-residual targets for exactness tests.
  ZetaLinear,
  // Smooth softplus crossover between the localized 2z + c and diffusive
  // -z + c asymptotes with a common plateau at z -> +inf.
  Softplus,
};

struct SynthOptions {
  double alpha = 0.05;
  double q_c = 6.67;
  double nu = 1.58;
  double beta = 0.01;        // residual 1/xi offset at the transition
  double ln_lambda_c = 0.0;  // plateau height
  double shape_exponent = 1.6;
  SynthFamily family = SynthFamily::Softplus;
  double zeta_slope = 1.0;  // ZetaLinear only
  double width = 1.0;       // Softplus crossover width
  double noise = 0.0;       // sigma of ln Lambda; also reported as the error
  std::uint64_t seed = 1;
  std::vector<double> q_values;  // empty = 32 points spanning q_c +- 25%
  std::vector<long> t_values;    // empty = log grid, 32/decade over [10, 1000]
};

// xi(q) = 1 / (alpha |q - q_c|^nu + beta); q < q_c is the localized side.
double synth_ln_xi(const SynthOptions& opts, double q);

std::vector<scaling::LambdaSeries> synth_scaling_data(const SynthOptions& opts);

}  // namespace qpkr::baselines
