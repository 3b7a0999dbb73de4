#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpkr/scaling.hpp"

namespace qpkr::crit {

struct CrossingEstimate {
  double q_c0 = 0.0;
  bool fallback = false;  // no crossing found; classify-boundary midpoint used
  int n_crossings = 0;
};

// Initial guess for the critical point. Lambda is time-independent exactly
// at criticality, so Lambda(q, t1) and Lambda(q, t2) cross there: for every
// well-separated time pair (t2 >= 2 t1) shared by all series, interpolate
// both in q, collect the sign-change locations, and take the median. With
// no crossing at all, falls back to the midpoint between the deepest
// adjacent localized/diffusive pair (flagged).
CrossingEstimate crossing_estimate(
    const std::vector<scaling::LambdaSeries>& all);

struct XiPoint {
  double q = 0.0;
  double ln_xi = 0.0;
  double sigma_ln_xi = 0.0;
};

std::vector<XiPoint> xi_points(const scaling::ScalingResult& sr);

struct BootstrapResult {
  std::vector<double> nu_samples;  // converged replicas, in replica order
  std::vector<double> q_c_samples;
  double nu_lo = 0.0, nu_hi = 0.0;      // central 68% interval
  double q_c_lo = 0.0, q_c_hi = 0.0;
  // Replica spread of ln xi per series, in the baseline collapse's series
  // order (sorted by control value). This is the error model for the
  // critical fit: it captures how data noise moves the whole collapse,
  // which the per-series curvature errors understate badly (they assume
  // every other shift is held fixed). Empty when fewer than two replicas
  // survive the collapse stage.
  std::vector<double> ln_xi_sigma;
  int n_requested = 0;
  int n_dropped = 0;
  bool small_sample_warning = false;  // fewer than 100 replicas requested
};

struct CriticalFit {
  double alpha = 0.0;        // amplitude of 1/xi = alpha |q - q_c|^nu + beta
  double q_c = 0.0;
  double nu = 0.0;
  double beta_cutoff = 0.0;  // additive cutoff, >= 0 by construction
  double alpha_err = 0.0;
  double q_c_err = 0.0;
  double nu_err = 0.0;
  double beta_err = 0.0;
  double chi2 = 0.0;
  double chi2_per_dof = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  int n_used = 0;
  bool converged = false;
  BootstrapResult bootstrap;  // filled by crit::bootstrap when run
};

struct FitOptions {
  int max_iter = 400;
  double window_frac0 = 0.3;  // pass 1: points within 30% of the q_c guess
  double window_frac = 0.2;   // pass 2: within 20% of the pass-1 q_c
};

// Weighted nonlinear least squares of 1/xi(q) = alpha |q - q_c|^nu + beta.
// Residuals are on 1/xi, weighted by errors propagated from ln xi. The
// kink at q_c makes single-start descent fragile, so five jittered starts
// around (q_c0, nu = 1.5) race and the best chi2 wins; the window is then
// recentered on the fitted q_c and the fit repeated once. Positivity is
// built into the parametrization (ln alpha, ln nu, beta = u^2).
CriticalFit fit_critical(const std::vector<XiPoint>& xi, double q_c0,
                         const FitOptions& opts = {});

struct BootstrapOptions {
  int n_replicas = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  double max_drop_fraction = 0.1;
};

// Parametric bootstrap of the whole analysis, in two stages. Stage one:
// replica r perturbs every ln Lambda point by a normal draw with its
// standard error (stream keyed by (seed, r)) and reruns the collapse
// warm-started from the baseline shifts; the replica spread of each ln xi
// becomes ln_xi_sigma, the error model for all critical fits. Stage two:
// every surviving replica's xi curve is fitted with those shared errors,
// anchored at q_c0, giving the nu and q_c sample intervals. Replicas that
// fail either stage are dropped and counted; more than max_drop_fraction
// dropped is an error.
BootstrapResult bootstrap(const std::vector<scaling::LambdaSeries>& series,
                          const scaling::ScalingResult& baseline,
                          double q_c0,
                          const scaling::CollapseOptions& copts,
                          const FitOptions& fopts = {},
                          const BootstrapOptions& bopts = {});

// Full error-aware critical fit: runs the bootstrap above, fits the
// baseline xi curve weighted by the bootstrap ln_xi_sigma (falling back to
// the collapse curvature errors when those are unavailable), and returns
// the fit with the bootstrap attached.
CriticalFit fit_critical_bootstrap(
    const std::vector<scaling::LambdaSeries>& series,
    const scaling::ScalingResult& baseline, double q_c0,
    const scaling::CollapseOptions& copts, const FitOptions& fopts = {},
    const BootstrapOptions& bopts = {});

struct UniversalityEntry {
  std::string label;
  double q_c = 0.0;
  double nu = 0.0;
  double nu_err = 0.0;
};

struct UniversalityReport {
  std::vector<UniversalityEntry> entries;
  std::vector<double> deviation_sigma;  // |nu - mean| in units of the entry sigma
  std::vector<bool> flagged;            // deviation beyond 2 sigma
  double nu_mean = 0.0;
  double nu_err = 0.0;
};

// Inverse-variance weighted mean of nu. The reported error is the larger of
// the weighted-mean error and the reliability-weighted dispersion of the
// entries, so scatter beyond the quoted errors is never understated.
UniversalityReport universality_report(
    const std::vector<UniversalityEntry>& entries);

}  // namespace qpkr::crit
