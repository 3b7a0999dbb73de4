#pragma once

#include <string>
#include <vector>

#include "qpkr/engine.hpp"
#include "qpkr/errors.hpp"

namespace qpkr::scaling {

// Lambda(t) = <p~^2> t^(-2/3) for one control point, inside the analysis
// window. `lambda` holds the values; `lambda_err` holds the standard error
// of ln Lambda (first-order propagation from the ensemble errors).
struct LambdaSeries {
  double control_value = 0.0;
  std::vector<long> times;
  std::vector<double> lambda;
  std::vector<double> lambda_err;
  std::string source = "p2";  // "p2" or "pi0" (Lambda = pi0^-2 t^(-2/3))
};

enum class Source { P2, Pi0 };

// Extract the window [t_min, t_max] and form Lambda with propagated errors.
// Pi0-based Lambda uses the probability-conservation proxy pi0^(-2).
LambdaSeries lambda_series(const engine::EnsembleResult& ens,
                           double control_value, long t_min, long t_max,
                           Source source = Source::P2);

enum class Branch { Localized, Diffusive, CriticalAmbiguous };

std::string to_string(Branch b);

struct BranchClassification {
  double slope = 0.0;      // d ln Lambda / d ln t, weighted straight line
  double slope_err = 0.0;
  Branch branch = Branch::CriticalAmbiguous;
};

// Localized decays (slope near -2/3), diffusive grows (near +1/3);
// |slope| < 2 sigma is reported as critical-ambiguous.
BranchClassification classify_branch(const LambdaSeries& s);

struct CollapseOptions {
  // The scaling curve is a single global polynomial (Chebyshev form) in the
  // signed variable zeta = sign(branch) * exp(-z / shape_exponent) with
  // z = ln xi - (1/3) ln t. Both branches share the curve: zeta = 0 is the
  // common critical plateau, and because one analytic function covers both
  // signs, the slope and curvature measured on either side constrain the
  // other side through the unsampled region around zeta = 0. (A knot-based
  // smoother can bend freely inside that gap, which leaves the relative
  // normalization of the two branches nearly undetermined and lets noise
  // bias every diffusive xi coherently.) The exponent only shapes the zeta
  // layout; any positive value can represent the same curves.
  double shape_exponent = 1.6;
  int max_sweeps = 200;
  double tol = 1e-8;  // stop when the chi2 drop falls below tol * max(chi2, 1)
  double err_floor = 1e-4;  // minimum sigma of ln Lambda entering the weights
  int basis_dim = 0;       // polynomial coefficient count (degree + 1); 0: 6
  int warmup_sweeps = 10;  // alternation sweeps before the joint minimization
  // Warm start, aligned with the input series order; empty = pairwise
  // overlap-shift initialization chained from the gauge reference.
  std::vector<double> init_ln_xi;
};

struct SeriesScale {
  double control_value = 0.0;
  double ln_xi = 0.0;        // gauge: ln xi(gauge_ref) = 0
  double sigma_ln_xi = 0.0;  // from the local chi2 curvature
  Branch assigned = Branch::Localized;    // branch used in the collapse
  Branch classified = Branch::Localized;  // raw classify_branch label
  double slope = 0.0;
  double slope_err = 0.0;
};

struct FSample {
  double z = 0.0;
  double ln_lambda = 0.0;
  Branch branch = Branch::Localized;
};

struct ScalingResult {
  std::vector<SeriesScale> series;  // sorted by control_value
  double gauge_ref = 0.0;           // control value with xi = 1 exactly
  std::vector<FSample> f_samples;   // data points in collapse coordinates, by z
  double ln_lambda_c = 0.0;         // fitted curve at the branch point
  double chi2 = 0.0;
  long n_points = 0;
  int dof = 0;
  double chi2_per_dof = 0.0;
  double residual_rms = 0.0;  // unweighted rms of ln Lambda residuals
  int sweeps = 0;
  bool converged = false;
  double shape_exponent = 0.0;
  double zeta_lo = 0.0;        // Chebyshev domain in zeta
  double zeta_hi = 0.0;
  std::vector<double> coeffs;  // Chebyshev coefficients
};

// The fitted scaling curve ln Lambda = F_branch(z).
double evaluate_f(const ScalingResult& sr, double z, Branch branch);

// Warmup alternation (fit the curve with the shifts {ln xi} frozen, then
// each ln xi by 1-D minimization with the curve frozen), followed by a
// joint damped least-squares pass over curve coefficients and shifts, to
// relative chi2 change below tol. The one exact flat direction (a common
// shift of every ln xi against a rescaling of the curve argument) is
// removed at the end by pinning ln xi(gauge_ref) = 0. Throws CollapseError
// after max_sweeps without convergence, ConfigError when fewer than 4
// distinct control values or only one branch is present.
ScalingResult collapse(const std::vector<LambdaSeries>& all, double gauge_ref,
                       const CollapseOptions& opts = {});

// Same, with the gauge reference at the deepest localized series (smallest
// fitted slope significance is broken toward the steepest decay).
ScalingResult collapse(const std::vector<LambdaSeries>& all,
                       const CollapseOptions& opts = {});

// Non-convergence diagnostic carrying the last iterate.
struct CollapseError : ConvergenceError {
  CollapseError(const std::string& what, ScalingResult last_iterate)
      : ConvergenceError(what), last(std::move(last_iterate)) {}
  ScalingResult last;
};

}  // namespace qpkr::scaling
