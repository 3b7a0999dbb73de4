#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "qpkr/model.hpp"

namespace qpkr::engine {

// Kick counts at which observables are recorded: every kick through 10,
// then about twenty per decade, always ending at n_kicks. Strictly
// increasing, duplicates removed.
std::vector<long> default_record_times(long n_kicks);

struct Moments {
  double norm2 = 0.0;  // total probability; 1 up to roundoff
  double m1 = 0.0;     // <m>, lattice units
  double m2 = 0.0;     // <m^2>, the momentum spread of this realization
  double pi0 = 0.0;    // probability left in the launch state m = 0
  double edge = 0.0;   // probability at |m| >= 0.9 M, the overflow guard
};

// One quasimomentum realization: a plane wave evolved through the kick
// sequence on a momentum lattice of N = next power of two >= 4M bins. The
// pair of FFTs and the phase tables live here, so a worker constructs one
// Evolver and reuses it for every realization it is handed.
class Evolver {
 public:
  Evolver(const model::ParameterSet& ps, int m_lattice);
  ~Evolver();
  Evolver(const Evolver&) = delete;
  Evolver& operator=(const Evolver&) = delete;

  int m_lattice() const;
  int grid_size() const;

  // Back to the plane wave at m = 0 with quasimomentum beta in [0, 1).
  void reset(double beta);
  // Modulation phases for the kick schedule of this realization.
  void set_phases(double phi2, double phi3);

  // One period: kick phase exp(-i K_n cos x / kbar) in position space,
  // free flight exp(-i kbar (m + beta)^2 / 2) in momentum space. The first
  // kick after reset carries modulation index n = 0 (it fires at t = 0+),
  // and K_n follows the modulation schedule at the fixed control point
  // (K, eps).
  void step(double K, double eps);

  Moments moments() const;
  long kicks_done() const;
  // Amplitudes of the N momentum bins in FFT frequency order
  // (m = 0, 1, ..., N/2 - 1, -N/2, ..., -1).
  const std::complex<double>* amplitudes() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RealizationTrace {
  std::vector<long> times;
  std::vector<double> m1, m2, pi0;
};

// Evolve a single realization and record moments at the given kick counts
// (strictly increasing, >= 1). Bypasses the ensemble machinery; intended
// for tests and cross-checks.
RealizationTrace run_realization(const model::ParameterSet& ps, double K,
                                 double eps, double beta, double phi2,
                                 double phi3,
                                 const std::vector<long>& record_at,
                                 int m_lattice);

struct EnsembleOptions {
  int m_lattice = 1024;       // resolve |m| <= M; grid is 4M bins
  int n_realizations = 1024;
  int threads = 0;            // 0: one worker per hardware thread
  bool phase_average = true;  // draw phi2, phi3 per realization
  double edge_tolerance = 1e-8;
  std::uint64_t seed = 1;
};

struct EnsembleResult {
  std::vector<long> times;
  std::vector<double> p2;       // ensemble mean of <m^2>
  std::vector<double> p2_err;   // standard error of that mean
  std::vector<double> pi0;      // ensemble mean return probability
  std::vector<double> pi0_err;
  std::vector<double> m1;       // ensemble mean of <m>; zero by parity
  std::vector<double> m1_err;
  int n_realizations = 0;
  int m_lattice = 0;
  int grid_size = 0;
};

// Ensemble average at a fixed control point. Realization r draws its
// quasimomentum (and, when phase_average is on, its modulation phases)
// from a random stream keyed by (seed, r), and results are reduced in
// realization order, so the output is byte-identical for any thread
// count. Throws GridOverflowError if any realization populates the lattice
// edge beyond edge_tolerance at a recording time.
EnsembleResult run_ensemble(const model::ParameterSet& ps, double K,
                            double eps, const std::vector<long>& record_at,
                            const EnsembleOptions& opts);

}  // namespace qpkr::engine
