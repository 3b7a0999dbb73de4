#include "qpkr/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qpkr/numerics.hpp"

namespace qpkr::scaling {

LambdaSeries lambda_series(const engine::EnsembleResult& ens,
                           double control_value, long t_min, long t_max,
                           Source source) {
  if (t_min > t_max || t_min < 1)
    throw ConfigError("lambda series: bad window");
  LambdaSeries out;
  out.control_value = control_value;
  out.source = source == Source::P2 ? "p2" : "pi0";
  for (std::size_t i = 0; i < ens.times.size(); ++i) {
    const long t = ens.times[i];
    if (t < t_min || t > t_max) continue;
    const double t23 = std::pow(static_cast<double>(t), -2.0 / 3.0);
    if (source == Source::P2) {
      const double p2 = ens.p2[i];
      if (p2 <= 0.0)
        throw DegenerateDataError("lambda series: <m^2> not positive at t=" +
                                  std::to_string(t));
      out.times.push_back(t);
      out.lambda.push_back(p2 * t23);
      out.lambda_err.push_back(ens.p2_err[i] / p2);
    } else {
      const double pi0 = ens.pi0[i];
      if (pi0 <= 0.0)
        throw DegenerateDataError("lambda series: pi0 not positive at t=" +
                                  std::to_string(t));
      out.times.push_back(t);
      out.lambda.push_back(t23 / (pi0 * pi0));
      out.lambda_err.push_back(2.0 * ens.pi0_err[i] / pi0);
    }
  }
  if (out.times.empty())
    throw ConfigError("lambda series: window contains no recorded times");
  return out;
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::Localized: return "localized";
    case Branch::Diffusive: return "diffusive";
    case Branch::CriticalAmbiguous: return "critical-ambiguous";
  }
  return "localized";
}

BranchClassification classify_branch(const LambdaSeries& s) {
  if (s.times.size() < 3)
    throw ConfigError("classify_branch: need at least 3 points");
  std::vector<double> x(s.times.size()), y(s.times.size()), w(s.times.size());
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    x[i] = std::log(static_cast<double>(s.times[i]));
    y[i] = std::log(s.lambda[i]);
    const double sigma = std::max(s.lambda_err[i], 1e-8);
    w[i] = 1.0 / (sigma * sigma);
  }
  const auto fit = num::weighted_linear_fit(x, y, w);
  BranchClassification out;
  out.slope = fit.slope;
  out.slope_err = fit.slope_err;
  if (std::fabs(fit.slope) < 2.0 * fit.slope_err)
    out.branch = Branch::CriticalAmbiguous;
  else
    out.branch = fit.slope < 0.0 ? Branch::Localized : Branch::Diffusive;
  return out;
}

namespace {

// One series prepared for the collapse: ln Lambda against l = (1/3) ln t,
// with floored weights and a branch sign (-1 localized, +1 diffusive).
struct Prepared {
  double q = 0.0;
  double sign = -1.0;
  Branch assigned = Branch::Localized;
  BranchClassification cls;
  std::vector<double> l;  // (1/3) ln t
  std::vector<double> y;  // ln Lambda
  std::vector<double> w;  // 1 / max(sigma, floor)^2
};

double sign_of(Branch b) { return b == Branch::Diffusive ? 1.0 : -1.0; }

// Least-squares shift between two curves sampled on overlapping l-ranges:
// the delta that best aligns curve b onto curve a when b is translated by
// delta along z. Used only to initialize the alternating minimizer.
double pair_shift(const Prepared& a, const Prepared& b) {
  // a is the reference (ln xi = 0): its samples sit at z = -l, a decreasing
  // sequence. Piecewise-linear interpolation in z, clamped at the ends.
  auto interp_a = [&](double z) {
    const std::size_t n = a.l.size();
    if (z <= -a.l[n - 1]) return a.y[n - 1];
    if (z >= -a.l[0]) return a.y[0];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double z0 = -a.l[i], z1 = -a.l[i + 1];
      if (z <= z0 && z >= z1) {
        const double f = (z - z0) / (z1 - z0);
        return a.y[i] * (1.0 - f) + a.y[i + 1] * f;
      }
    }
    return a.y.back();
  };
  const double alo = -a.l.back(), ahi = -a.l.front();
  auto mismatch = [&](double delta) {
    double c = 0.0;
    int overlap = 0;
    double outside = 0.0;
    for (std::size_t j = 0; j < b.l.size(); ++j) {
      const double z = delta - b.l[j];
      if (z < alo || z > ahi) {
        outside += std::min(std::fabs(z - alo), std::fabs(z - ahi));
        continue;
      }
      const double r = b.y[j] - interp_a(z);
      c += r * r;
      ++overlap;
    }
    if (overlap < 2) return 1e9 * (1.0 + outside * outside);
    return c / overlap;
  };
  return num::line_minimize(mismatch, 0.0, 0.4, 1e-9);
}

}  // namespace

double evaluate_f(const ScalingResult& sr, double z, Branch branch) {
  const num::ChebyshevBasis basis(sr.zeta_lo, sr.zeta_hi, sr.coeffs.size());
  const double zeta = sign_of(branch) * std::exp(-z / sr.shape_exponent);
  return basis.value(sr.coeffs, zeta);
}

ScalingResult collapse(const std::vector<LambdaSeries>& all,
                       const CollapseOptions& opts) {
  if (all.empty()) throw ConfigError("collapse: no series");
  // Gauge at the steepest-decaying series: deepest into the localized side.
  double best_q = all.front().control_value;
  double best_slope = std::numeric_limits<double>::infinity();
  for (const auto& s : all) {
    const auto c = classify_branch(s);
    if (c.slope < best_slope) {
      best_slope = c.slope;
      best_q = s.control_value;
    }
  }
  return collapse(all, best_q, opts);
}

ScalingResult collapse(const std::vector<LambdaSeries>& all, double gauge_ref,
                       const CollapseOptions& opts) {
  if (!opts.init_ln_xi.empty() && opts.init_ln_xi.size() != all.size())
    throw ConfigError("collapse: init_ln_xi size mismatch");

  // Sort series by control value, carrying any warm start along.
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return all[i].control_value < all[j].control_value;
  });

  const std::size_t n_series = all.size();
  {
    std::vector<double> qs;
    for (const auto& s : all) qs.push_back(s.control_value);
    std::sort(qs.begin(), qs.end());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    if (qs.size() < 4)
      throw ConfigError("collapse: need >= 4 distinct control values");
  }

  std::vector<Prepared> prep(n_series);
  long n_points = 0;
  for (std::size_t k = 0; k < n_series; ++k) {
    const LambdaSeries& s = all[order[k]];
    if (s.times.size() != s.lambda.size() ||
        s.times.size() != s.lambda_err.size())
      throw ConfigError("collapse: ragged series");
    Prepared& p = prep[k];
    p.q = s.control_value;
    p.cls = classify_branch(s);
    p.assigned = p.cls.branch;
    p.l.resize(s.times.size());
    p.y.resize(s.times.size());
    p.w.resize(s.times.size());
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      if (!(s.lambda[j] > 0.0))
        throw DegenerateDataError("collapse: non-positive Lambda");
      p.l[j] = std::log(static_cast<double>(s.times[j])) / 3.0;
      p.y[j] = std::log(s.lambda[j]);
      const double sigma = std::max(s.lambda_err[j], opts.err_floor);
      p.w[j] = 1.0 / (sigma * sigma);
    }
    n_points += static_cast<long>(s.times.size());
  }

  // Ambiguous series adopt the branch of the nearest decisive neighbor.
  for (std::size_t k = 0; k < n_series; ++k) {
    if (prep[k].assigned != Branch::CriticalAmbiguous) continue;
    double best_d = std::numeric_limits<double>::infinity();
    Branch pick = Branch::CriticalAmbiguous;
    for (std::size_t j = 0; j < n_series; ++j) {
      if (prep[j].cls.branch == Branch::CriticalAmbiguous) continue;
      const double d = std::fabs(prep[j].q - prep[k].q);
      if (d < best_d) {
        best_d = d;
        pick = prep[j].cls.branch;
      }
    }
    if (pick == Branch::CriticalAmbiguous)
      throw ConfigError("collapse: every series is critical-ambiguous");
    prep[k].assigned = pick;
  }
  for (auto& p : prep) p.sign = sign_of(p.assigned);
  {
    bool has_loc = false, has_diff = false;
    for (const auto& p : prep) {
      has_loc = has_loc || p.assigned == Branch::Localized;
      has_diff = has_diff || p.assigned == Branch::Diffusive;
    }
    if (!has_loc || !has_diff)
      throw ConfigError("collapse: series cover only one branch");
  }

  // Locate the gauge series.
  std::size_t gauge_idx = n_series;
  {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n_series; ++k) {
      const double d = std::fabs(prep[k].q - gauge_ref);
      if (d < best) {
        best = d;
        gauge_idx = k;
      }
    }
    const double scale = std::max(1.0, std::fabs(gauge_ref));
    if (gauge_idx == n_series || best > 1e-9 * scale)
      throw ConfigError("collapse: gauge reference matches no series");
  }

  const double nu_t = opts.shape_exponent;
  if (!(nu_t > 0.0)) throw ConfigError("collapse: shape_exponent must be > 0");

  // Starting shifts: warm start if given, else chained pairwise alignment.
  std::vector<double> lnxi(n_series, 0.0);
  if (!opts.init_ln_xi.empty()) {
    for (std::size_t k = 0; k < n_series; ++k)
      lnxi[k] = opts.init_ln_xi[order[k]];
  } else {
    lnxi[gauge_idx] = 0.0;
    for (std::size_t k = gauge_idx + 1; k < n_series; ++k)
      lnxi[k] = lnxi[k - 1] + pair_shift(prep[k - 1], prep[k]);
    for (std::size_t k = gauge_idx; k-- > 0;)
      lnxi[k] = lnxi[k + 1] + pair_shift(prep[k + 1], prep[k]);
  }

  int basis_dim = opts.basis_dim;
  if (basis_dim <= 0) basis_dim = 6;
  if (basis_dim < 2) throw ConfigError("collapse: basis_dim must be >= 2");
  const auto dim = static_cast<std::size_t>(basis_dim);

  auto zeta_of = [&](const Prepared& p, double ln_xi, std::size_t j) {
    return p.sign * std::exp(-(ln_xi - p.l[j]) / nu_t);
  };

  std::vector<double> zeta(static_cast<std::size_t>(n_points));
  std::vector<double> yy(static_cast<std::size_t>(n_points));
  std::vector<double> ww(static_cast<std::size_t>(n_points));
  {
    std::size_t idx = 0;
    for (const auto& p : prep)
      for (std::size_t j = 0; j < p.l.size(); ++j) {
        yy[idx] = p.y[j];
        ww[idx] = p.w[j];
        ++idx;
      }
  }

  double zeta_lo = 0.0, zeta_hi = 0.0;
  std::vector<double> coeffs;
  bool converged = false;
  int sweeps_done = 0;

  auto fill_zeta = [&]() {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < n_series; ++k)
      for (std::size_t j = 0; j < prep[k].l.size(); ++j)
        zeta[idx++] = zeta_of(prep[k], lnxi[k], j);
    const auto [mn, mx] = std::minmax_element(zeta.begin(), zeta.end());
    zeta_lo = *mn;
    zeta_hi = *mx;
  };

  auto series_chi2 = [&](const num::ChebyshevBasis& basis,
                         const std::vector<double>& c, std::size_t k,
                         double ln_xi) {
    const Prepared& p = prep[k];
    double acc = 0.0;
    for (std::size_t j = 0; j < p.l.size(); ++j) {
      const double r = p.y[j] - basis.value(c, zeta_of(p, ln_xi, j));
      acc += p.w[j] * r * r;
    }
    return acc;
  };

  // Phase 1: block alternation (refit the curve, shift each series by a
  // line search) with the Chebyshev domain tracking the current zeta range.
  // This is slow near the optimum but dependable far from it. The domain
  // only conditions the representation -- every interval spans the same
  // polynomial space -- so re-fitting it each sweep costs nothing.
  const int warmup = std::max(1, std::min(opts.warmup_sweeps,
                                          opts.max_sweeps - 2));
  for (int sweep = 1; sweep <= warmup; ++sweep) {
    sweeps_done = sweep;
    fill_zeta();
    num::ChebyshevBasis basis(zeta_lo, zeta_hi, dim);
    coeffs = num::fit_basis(basis, zeta, yy, ww);
    for (std::size_t k = 0; k < n_series; ++k) {
      auto f = [&](double x) { return series_chi2(basis, coeffs, k, x); };
      lnxi[k] = num::line_minimize(f, lnxi[k], 0.3, 1e-12);
    }
  }

  // Phase 2: with the domain frozen, minimize over curve coefficients and
  // shifts jointly. Alternation creeps once the blocks couple strongly; a
  // damped Newton step does not. The gauge series' shift stays out of the
  // parameter vector, which removes the one exact flat direction (a common
  // shift of every ln xi absorbed by rescaling the curve argument).
  {
    fill_zeta();
    const num::ChebyshevBasis basis(zeta_lo, zeta_hi, dim);
    const std::size_t n_free = n_series - 1;
    const std::size_t n_theta = dim + n_free;

    // Index of series k's shift inside theta, skipping the gauge series.
    auto slot = [&](std::size_t k) { return dim + k - (k > gauge_idx ? 1 : 0); };

    std::vector<double> sw(static_cast<std::size_t>(n_points));
    std::vector<std::size_t> series_of(static_cast<std::size_t>(n_points));
    {
      std::size_t idx = 0;
      for (std::size_t k = 0; k < n_series; ++k)
        for (std::size_t j = 0; j < prep[k].l.size(); ++j) {
          sw[idx] = std::sqrt(prep[k].w[j]);
          series_of[idx] = k;
          ++idx;
        }
    }

    auto unpack = [&](const std::vector<double>& th, std::vector<double>& c,
                      std::vector<double>& lx) {
      c.assign(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(dim));
      lx = lnxi;
      for (std::size_t k = 0; k < n_series; ++k)
        if (k != gauge_idx) lx[k] = th[slot(k)];
    };

    std::vector<double> c_tmp, lx_tmp, z_tmp(zeta.size());
    auto fill_z = [&](const std::vector<double>& lx) {
      std::size_t idx = 0;
      for (std::size_t k = 0; k < n_series; ++k)
        for (std::size_t j = 0; j < prep[k].l.size(); ++j)
          z_tmp[idx++] = zeta_of(prep[k], lx[k], j);
    };
    auto residuals = [&](const std::vector<double>& th,
                         std::vector<double>& r) {
      unpack(th, c_tmp, lx_tmp);
      fill_z(lx_tmp);
      for (std::size_t i = 0; i < z_tmp.size(); ++i)
        r[i] = sw[i] * (basis.value(c_tmp, z_tmp[i]) - yy[i]);
    };
    auto jacobian = [&](const std::vector<double>& th, std::vector<double>& J) {
      unpack(th, c_tmp, lx_tmp);
      fill_z(lx_tmp);
      std::vector<double> row(dim);
      for (std::size_t i = 0; i < z_tmp.size(); ++i) {
        double* out_row = &J[i * n_theta];
        std::fill(out_row, out_row + n_theta, 0.0);
        basis.eval(z_tmp[i], row.data());
        for (std::size_t a = 0; a < dim; ++a) out_row[a] = sw[i] * row[a];
        const std::size_t k = series_of[i];
        if (k != gauge_idx)
          out_row[slot(k)] = sw[i] * basis.deriv(c_tmp, z_tmp[i]) *
                             (-z_tmp[i] / nu_t);
      }
    };

    coeffs = num::fit_basis(basis, zeta, yy, ww);
    std::vector<double> theta0(n_theta);
    for (std::size_t a = 0; a < dim; ++a) theta0[a] = coeffs[a];
    for (std::size_t k = 0; k < n_series; ++k)
      if (k != gauge_idx) theta0[slot(k)] = lnxi[k];

    num::LevMarOptions lopts;
    lopts.max_iter = std::max(2, opts.max_sweeps - warmup);
    lopts.ftol = opts.tol;
    const num::LevMarResult lm = num::levenberg_marquardt(
        residuals, jacobian, theta0, static_cast<int>(n_points), lopts);
    if (!std::isfinite(lm.chi2))
      throw DegenerateDataError("collapse: objective became non-finite");
    unpack(lm.theta, coeffs, lnxi);
    converged = lm.converged;
    sweeps_done = warmup + lm.iterations;
  }

  // Remove the flat direction exactly: shift every ln xi so the gauge series
  // sits at 0, and absorb the shift into the curve by rescaling its argument
  // -- which for the Chebyshev form just rescales the domain, leaving the
  // coefficients untouched.
  {
    const double delta = lnxi[gauge_idx];
    const double c = std::exp(delta / nu_t);
    for (auto& v : lnxi) v -= delta;
    lnxi[gauge_idx] = 0.0;
    zeta_lo *= c;
    zeta_hi *= c;
  }

  num::ChebyshevBasis basis(zeta_lo, zeta_hi, dim);
  ScalingResult out;
  out.gauge_ref = prep[gauge_idx].q;
  out.shape_exponent = nu_t;
  out.zeta_lo = zeta_lo;
  out.zeta_hi = zeta_hi;
  out.coeffs = coeffs;
  out.sweeps = sweeps_done;
  out.converged = converged;
  out.n_points = n_points;
  out.ln_lambda_c = basis.value(coeffs, 0.0);

  double c2 = 0.0, rss = 0.0;
  for (std::size_t k = 0; k < n_series; ++k) {
    const Prepared& p = prep[k];
    for (std::size_t j = 0; j < p.l.size(); ++j) {
      const double g = basis.value(coeffs, zeta_of(p, lnxi[k], j));
      const double r = p.y[j] - g;
      c2 += p.w[j] * r * r;
      rss += r * r;
      out.f_samples.push_back({lnxi[k] - p.l[j], p.y[j], p.assigned});
    }
  }
  std::sort(out.f_samples.begin(), out.f_samples.end(),
            [](const FSample& a, const FSample& b) { return a.z < b.z; });
  out.chi2 = c2;
  out.residual_rms = std::sqrt(rss / static_cast<double>(n_points));
  const int n_params =
      static_cast<int>(n_series) + static_cast<int>(coeffs.size()) - 1;
  out.dof = static_cast<int>(n_points) - n_params;
  out.chi2_per_dof = c2 / static_cast<double>(std::max(out.dof, 1));

  // Per-series uncertainty from the local chi2 curvature (delta chi2 = 1).
  out.series.resize(n_series);
  for (std::size_t k = 0; k < n_series; ++k) {
    SeriesScale& ss = out.series[k];
    ss.control_value = prep[k].q;
    ss.ln_xi = lnxi[k];
    ss.assigned = prep[k].assigned;
    ss.classified = prep[k].cls.branch;
    ss.slope = prep[k].cls.slope;
    ss.slope_err = prep[k].cls.slope_err;
    double sigma = std::numeric_limits<double>::infinity();
    const double f0 = series_chi2(basis, coeffs, k, lnxi[k]);
    for (double h : {0.05, 0.2, 0.5}) {
      const double fp = series_chi2(basis, coeffs, k, lnxi[k] + h);
      const double fm = series_chi2(basis, coeffs, k, lnxi[k] - h);
      const double curv = (fp - 2.0 * f0 + fm) / (h * h);
      if (curv > 0.0) {
        sigma = std::sqrt(2.0 / curv);
        break;
      }
    }
    ss.sigma_ln_xi = sigma;
  }

  if (!converged)
    throw CollapseError("collapse: no convergence after " +
                            std::to_string(opts.max_sweeps) + " sweeps",
                        out);
  return out;
}

}  // namespace qpkr::scaling
