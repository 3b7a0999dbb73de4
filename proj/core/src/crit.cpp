#include "qpkr/crit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "qpkr/numerics.hpp"
#include "qpkr/rng.hpp"

namespace qpkr::crit {

CrossingEstimate crossing_estimate(
    const std::vector<scaling::LambdaSeries>& all) {
  if (all.size() < 2) throw ConfigError("crossing estimate: need >= 2 series");

  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return all[a].control_value < all[b].control_value;
  });

  // Times common to every series.
  std::set<long> common(all[0].times.begin(), all[0].times.end());
  for (const auto& s : all) {
    std::set<long> here(s.times.begin(), s.times.end());
    std::set<long> inter;
    std::set_intersection(common.begin(), common.end(), here.begin(),
                          here.end(), std::inserter(inter, inter.begin()));
    common.swap(inter);
  }
  const std::vector<long> times(common.begin(), common.end());

  auto lambda_at = [&](const scaling::LambdaSeries& s, long t) {
    for (std::size_t j = 0; j < s.times.size(); ++j)
      if (s.times[j] == t) return s.lambda[j];
    return 0.0;
  };

  std::vector<double> crossings;
  for (std::size_t i1 = 0; i1 < times.size(); ++i1)
    for (std::size_t i2 = i1 + 1; i2 < times.size(); ++i2) {
      if (times[i2] < 2 * times[i1]) continue;
      // d(q) = Lambda(q, t1) - Lambda(q, t2) changes sign at the crossing.
      double prev_q = 0.0, prev_d = 0.0;
      bool have_prev = false;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& s = all[order[k]];
        const double d =
            lambda_at(s, times[i1]) - lambda_at(s, times[i2]);
        if (have_prev && d != prev_d &&
            ((prev_d < 0.0 && d >= 0.0) || (prev_d > 0.0 && d <= 0.0))) {
          crossings.push_back(prev_q + (s.control_value - prev_q) * prev_d /
                                           (prev_d - d));
        }
        prev_q = s.control_value;
        prev_d = d;
        have_prev = true;
      }
    }

  CrossingEstimate out;
  if (!crossings.empty()) {
    out.q_c0 = num::quantile(crossings, 0.5);
    out.n_crossings = static_cast<int>(crossings.size());
    return out;
  }

  // Fallback: midpoint between the last localized and the first diffusive
  // series along the control axis.
  out.fallback = true;
  double last_loc = std::numeric_limits<double>::quiet_NaN();
  double first_diff = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = all[order[k]];
    const auto c = scaling::classify_branch(s);
    if (c.branch == scaling::Branch::Localized) last_loc = s.control_value;
    if (c.branch == scaling::Branch::Diffusive && std::isnan(first_diff))
      first_diff = s.control_value;
  }
  if (!std::isnan(last_loc) && !std::isnan(first_diff))
    out.q_c0 = 0.5 * (last_loc + first_diff);
  else if (!std::isnan(last_loc))
    out.q_c0 = last_loc;  // everything localized: transition beyond the range
  else if (!std::isnan(first_diff))
    out.q_c0 = first_diff;
  else
    out.q_c0 = 0.5 * (all[order.front()].control_value +
                      all[order.back()].control_value);
  return out;
}

std::vector<XiPoint> xi_points(const scaling::ScalingResult& sr) {
  std::vector<XiPoint> out;
  out.reserve(sr.series.size());
  for (const auto& s : sr.series)
    out.push_back({s.control_value, s.ln_xi, s.sigma_ln_xi});
  return out;
}

namespace {

struct FitData {
  std::vector<double> q, y, sigma;  // y = 1/xi with its propagated error
};

FitData window_data(const std::vector<XiPoint>& xi, double lo, double hi) {
  FitData d;
  for (const auto& p : xi) {
    if (p.q < lo || p.q > hi) continue;
    const double y = std::exp(-p.ln_xi);
    double s = y * p.sigma_ln_xi;
    if (!std::isfinite(s)) continue;  // infinite uncertainty: no information
    d.q.push_back(p.q);
    d.y.push_back(y);
    d.sigma.push_back(s);
  }
  // Zero errors happen on synthetic/exact inputs; floor relative to the
  // data scale so weights stay finite.
  double ymax = 0.0;
  for (double y : d.y) ymax = std::max(ymax, std::fabs(y));
  for (double& s : d.sigma) s = std::max(s, 1e-12 * std::max(ymax, 1e-300));
  return d;
}

// Model f(q) = alpha |q - q_c|^nu + u^2 with theta = (ln alpha, q_c, ln nu, u).
struct Theta {
  double ln_alpha, q_c, ln_nu, u;
};

double model_f(const Theta& th, double q) {
  const double ad = std::fabs(q - th.q_c);
  return std::exp(th.ln_alpha) * std::pow(ad, std::exp(th.ln_nu)) +
         th.u * th.u;
}

struct PassResult {
  num::LevMarResult lm;
  bool ok = false;
};

PassResult run_pass(const FitData& d, const Theta& start, int max_iter) {
  const int m = static_cast<int>(d.q.size());
  auto unpack = [](const std::vector<double>& v) {
    return Theta{v[0], v[1], v[2], v[3]};
  };
  auto residuals = [&](const std::vector<double>& v, std::vector<double>& r) {
    const Theta th = unpack(v);
    for (int i = 0; i < m; ++i)
      r[static_cast<std::size_t>(i)] =
          (model_f(th, d.q[static_cast<std::size_t>(i)]) -
           d.y[static_cast<std::size_t>(i)]) /
          d.sigma[static_cast<std::size_t>(i)];
  };
  auto jacobian = [&](const std::vector<double>& v, std::vector<double>& J) {
    const Theta th = unpack(v);
    const double alpha = std::exp(th.ln_alpha);
    const double nu = std::exp(th.ln_nu);
    for (int i = 0; i < m; ++i) {
      const double dq = d.q[static_cast<std::size_t>(i)] - th.q_c;
      const double ad = std::fabs(dq);
      const double s = d.sigma[static_cast<std::size_t>(i)];
      double pow_nu = 0.0, pow_nu1 = 0.0, logad = 0.0;
      if (ad > 0.0) {
        pow_nu = std::pow(ad, nu);
        pow_nu1 = std::pow(ad, nu - 1.0);
        logad = std::log(ad);
      }
      const double sgn = dq > 0.0 ? 1.0 : (dq < 0.0 ? -1.0 : 0.0);
      double* row = &J[static_cast<std::size_t>(i) * 4];
      row[0] = alpha * pow_nu / s;
      row[1] = -alpha * nu * pow_nu1 * sgn / s;
      row[2] = ad > 0.0 ? alpha * nu * pow_nu * logad / s : 0.0;
      row[3] = 2.0 * th.u / s;
    }
  };
  num::LevMarOptions lopts;
  lopts.max_iter = max_iter;
  PassResult out;
  out.lm = num::levenberg_marquardt(
      residuals, jacobian, {start.ln_alpha, start.q_c, start.ln_nu, start.u},
      m, lopts);
  out.ok = out.lm.converged && std::isfinite(out.lm.chi2);
  return out;
}

Theta initial_theta(const FitData& d, double q_c0, double nu0) {
  double ymin = std::numeric_limits<double>::infinity();
  for (double y : d.y) ymin = std::min(ymin, y);
  ymin = std::max(ymin, 0.0);
  const double beta0 = 0.5 * ymin;
  std::vector<double> amp;
  for (std::size_t i = 0; i < d.q.size(); ++i) {
    const double ad = std::fabs(d.q[i] - q_c0);
    if (ad <= 0.0) continue;
    const double num = d.y[i] - beta0;
    if (num <= 0.0) continue;
    amp.push_back(num / std::pow(ad, nu0));
  }
  const double alpha0 = amp.empty() ? 1.0 : num::quantile(amp, 0.5);
  return Theta{std::log(std::max(alpha0, 1e-12)), q_c0, std::log(nu0),
               std::sqrt(beta0)};
}

CriticalFit finish(const FitData& d, const num::LevMarResult& lm, double lo,
                   double hi) {
  CriticalFit fit;
  const Theta th{lm.theta[0], lm.theta[1], lm.theta[2], lm.theta[3]};
  fit.alpha = std::exp(th.ln_alpha);
  fit.q_c = th.q_c;
  fit.nu = std::exp(th.ln_nu);
  fit.beta_cutoff = th.u * th.u;
  fit.chi2 = lm.chi2;
  fit.n_used = static_cast<int>(d.q.size());
  const int dof = fit.n_used - 4;
  fit.chi2_per_dof = dof > 0 ? lm.chi2 / dof : 0.0;
  fit.window_lo = lo;
  fit.window_hi = hi;
  fit.converged = lm.converged;
  const auto var = [&](int k) {
    const double v = lm.covariance[static_cast<std::size_t>(k) * 4 +
                                   static_cast<std::size_t>(k)];
    return v > 0.0 ? v : 0.0;
  };
  fit.alpha_err = fit.alpha * std::sqrt(var(0));
  fit.q_c_err = std::sqrt(var(1));
  fit.nu_err = fit.nu * std::sqrt(var(2));
  fit.beta_err = 2.0 * std::fabs(th.u) * std::sqrt(var(3));
  return fit;
}

}  // namespace

CriticalFit fit_critical(const std::vector<XiPoint>& xi, double q_c0,
                         const FitOptions& opts) {
  if (xi.size() < 6)
    throw ConfigError("fit_critical: need at least 6 xi points");
  if (!(std::isfinite(q_c0)))
    throw ConfigError("fit_critical: bad initial critical point");

  std::vector<double> qs;
  for (const auto& p : xi) qs.push_back(p.q);
  std::sort(qs.begin(), qs.end());

  // Window that keeps at least 6 points: widen symmetrically if the
  // fractional window around the guess is too exclusive.
  auto make_window = [&](double center, double frac, double& lo, double& hi) {
    const double half = frac * std::fabs(center);
    lo = center - half;
    hi = center + half;
    int inside = 0;
    for (double q : qs)
      if (q >= lo && q <= hi) ++inside;
    if (inside >= 6) return;
    std::vector<double> dist;
    for (double q : qs) dist.push_back(std::fabs(q - center));
    std::sort(dist.begin(), dist.end());
    const double need = dist[std::min<std::size_t>(5, dist.size() - 1)];
    lo = std::min(lo, center - need);
    hi = std::max(hi, center + need);
  };

  double lo, hi;
  make_window(q_c0, opts.window_frac0, lo, hi);
  FitData d = window_data(xi, lo, hi);
  if (d.q.size() < 6)
    throw ConfigError("fit_critical: fewer than 6 usable points in window");

  // The |q - q_c|^nu kink defeats single-start descent often enough that a
  // small jittered multi-start is the cheapest insurance.
  const double jit = 0.02 * std::fabs(q_c0);
  const Theta starts[5] = {
      initial_theta(d, q_c0, 1.5),
      initial_theta(d, q_c0 - jit, 1.3),
      initial_theta(d, q_c0 + jit, 1.8),
      initial_theta(d, q_c0 - jit, 1.8),
      initial_theta(d, q_c0 + jit, 1.3),
  };
  PassResult best;
  double best_chi2 = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const PassResult r = run_pass(d, s, opts.max_iter);
    if (r.ok && r.lm.chi2 < best_chi2) {
      best_chi2 = r.lm.chi2;
      best = r;
    }
  }
  if (!best.ok)
    throw ConvergenceError("fit_critical: no start converged near q_c0=" +
                           std::to_string(q_c0));

  // Second pass: the paper's +-20% window around the fitted critical point.
  const double q_c1 = best.lm.theta[1];
  double lo2, hi2;
  make_window(q_c1, opts.window_frac, lo2, hi2);
  FitData d2 = window_data(xi, lo2, hi2);
  if (d2.q.size() >= 6) {
    const Theta warm{best.lm.theta[0], best.lm.theta[1], best.lm.theta[2],
                     best.lm.theta[3]};
    const PassResult r2 = run_pass(d2, warm, opts.max_iter);
    if (r2.ok) return finish(d2, r2.lm, lo2, hi2);
  }
  return finish(d, best.lm, lo, hi);
}

BootstrapResult bootstrap(const std::vector<scaling::LambdaSeries>& series,
                          const scaling::ScalingResult& baseline,
                          double q_c0,
                          const scaling::CollapseOptions& copts,
                          const FitOptions& fopts,
                          const BootstrapOptions& bopts) {
  if (bopts.n_replicas < 1)
    throw ConfigError("bootstrap: need at least one replica");
  if (!std::isfinite(q_c0))
    throw ConfigError("bootstrap: bad critical-point anchor");
  if (baseline.series.size() != series.size())
    throw ConfigError("bootstrap: baseline/series size mismatch");

  // Warm-start shifts aligned with the input series order.
  std::vector<double> init(series.size(), 0.0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    bool found = false;
    for (const auto& s : baseline.series) {
      if (s.control_value == series[i].control_value) {
        init[i] = s.ln_xi;
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("bootstrap: baseline lacks a series at control " +
                        std::to_string(series[i].control_value));
  }
  scaling::CollapseOptions warm = copts;
  warm.init_ln_xi = init;

  const int B = bopts.n_replicas;
  const std::size_t n_series = series.size();

  // Stage one: replica collapses. Collect every replica's ln xi curve (and
  // its curvature errors, the fallback weights when B is too small for a
  // spread estimate). Collapse results come out sorted by control value,
  // so positions match the baseline result across all replicas; everything
  // below works in that order.
  std::vector<std::vector<double>> lnxi_slot(static_cast<std::size_t>(B));
  std::vector<std::vector<double>> sig_slot(static_cast<std::size_t>(B));
  std::vector<char> ok_slot(static_cast<std::size_t>(B), 0);

  num::parallel_for(static_cast<std::size_t>(B), bopts.threads,
                    [&](std::size_t r) {
    rng::Stream stream(bopts.seed, static_cast<std::uint64_t>(r));
    std::vector<scaling::LambdaSeries> perturbed = series;
    for (auto& s : perturbed)
      for (std::size_t j = 0; j < s.lambda.size(); ++j)
        s.lambda[j] *= std::exp(s.lambda_err[j] * stream.normal());
    try {
      const auto sr = scaling::collapse(perturbed, baseline.gauge_ref, warm);
      auto& lx = lnxi_slot[r];
      auto& sg = sig_slot[r];
      lx.resize(n_series);
      sg.resize(n_series);
      for (std::size_t i = 0; i < n_series; ++i) {
        lx[i] = sr.series[i].ln_xi;
        sg[i] = sr.series[i].sigma_ln_xi;
      }
      ok_slot[r] = 1;
    } catch (const Error&) {
      // dropped replica, counted below
    }
  });

  BootstrapResult out;
  out.n_requested = B;
  out.small_sample_warning = B < 100;

  int n_collapsed = 0;
  for (int r = 0; r < B; ++r)
    if (ok_slot[static_cast<std::size_t>(r)]) ++n_collapsed;

  // Replica spread of each ln xi, the shared error model for stage two.
  // Measured as half the central 68% interval over the surviving replicas
  // (the same convention as the parameter intervals below): near the
  // critical point a handful of replicas can jump across the divergence,
  // and a plain standard deviation would let those excursions wipe out the
  // weight of the most informative points. The gauge series is pinned to
  // ln xi = 0 in every replica, so its spread is zero by construction, not
  // infinitely precise; it keeps its collapse curvature error instead.
  if (n_collapsed >= 2) {
    out.ln_xi_sigma.assign(n_series, 0.0);
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n_collapsed));
    for (std::size_t i = 0; i < n_series; ++i) {
      vals.clear();
      for (int r = 0; r < B; ++r)
        if (ok_slot[static_cast<std::size_t>(r)])
          vals.push_back(lnxi_slot[static_cast<std::size_t>(r)][i]);
      const double spread =
          0.5 * (num::quantile(vals, 0.84) - num::quantile(vals, 0.16));
      out.ln_xi_sigma[i] =
          spread > 0.0 ? spread : baseline.series[i].sigma_ln_xi;
    }
  }

  // Stage two: fit each surviving replica with the shared weights.
  std::vector<double> nu_slot(static_cast<std::size_t>(B), 0.0);
  std::vector<double> qc_slot(static_cast<std::size_t>(B), 0.0);
  std::vector<char> fit_ok(static_cast<std::size_t>(B), 0);
  num::parallel_for(static_cast<std::size_t>(B), bopts.threads,
                    [&](std::size_t r) {
    if (!ok_slot[r]) return;
    std::vector<XiPoint> xi(n_series);
    for (std::size_t i = 0; i < n_series; ++i) {
      xi[i].q = baseline.series[i].control_value;
      xi[i].ln_xi = lnxi_slot[r][i];
      xi[i].sigma_ln_xi =
          out.ln_xi_sigma.empty() ? sig_slot[r][i] : out.ln_xi_sigma[i];
    }
    try {
      const auto fit = fit_critical(xi, q_c0, fopts);
      if (!fit.converged) return;
      nu_slot[r] = fit.nu;
      qc_slot[r] = fit.q_c;
      fit_ok[r] = 1;
    } catch (const Error&) {
      // dropped replica, counted below
    }
  });

  for (int r = 0; r < B; ++r) {
    if (!fit_ok[static_cast<std::size_t>(r)]) {
      ++out.n_dropped;
      continue;
    }
    out.nu_samples.push_back(nu_slot[static_cast<std::size_t>(r)]);
    out.q_c_samples.push_back(qc_slot[static_cast<std::size_t>(r)]);
  }
  if (out.n_dropped > bopts.max_drop_fraction * B)
    throw ConvergenceError("bootstrap: " + std::to_string(out.n_dropped) +
                           " of " + std::to_string(B) +
                           " replicas failed to converge");
  if (out.nu_samples.empty())
    throw ConvergenceError("bootstrap: no replica converged");
  out.nu_lo = num::quantile(out.nu_samples, 0.16);
  out.nu_hi = num::quantile(out.nu_samples, 0.84);
  out.q_c_lo = num::quantile(out.q_c_samples, 0.16);
  out.q_c_hi = num::quantile(out.q_c_samples, 0.84);
  return out;
}

CriticalFit fit_critical_bootstrap(
    const std::vector<scaling::LambdaSeries>& series,
    const scaling::ScalingResult& baseline, double q_c0,
    const scaling::CollapseOptions& copts, const FitOptions& fopts,
    const BootstrapOptions& bopts) {
  BootstrapResult boot =
      bootstrap(series, baseline, q_c0, copts, fopts, bopts);

  std::vector<XiPoint> xi = xi_points(baseline);
  if (!boot.ln_xi_sigma.empty()) {
    if (boot.ln_xi_sigma.size() != xi.size())
      throw ConfigError("fit_critical_bootstrap: series/baseline mismatch");
    for (std::size_t i = 0; i < xi.size(); ++i)
      xi[i].sigma_ln_xi = boot.ln_xi_sigma[i];
  }
  CriticalFit fit = fit_critical(xi, q_c0, fopts);
  fit.bootstrap = std::move(boot);
  return fit;
}

UniversalityReport universality_report(
    const std::vector<UniversalityEntry>& entries) {
  if (entries.size() < 2)
    throw ConfigError("universality report: need >= 2 fits");
  UniversalityReport out;
  out.entries = entries;
  double sw = 0.0, swn = 0.0, sww = 0.0;
  for (const auto& e : entries) {
    if (!(e.nu_err > 0.0))
      throw ConfigError("universality report: nu errors must be positive");
    const double w = 1.0 / (e.nu_err * e.nu_err);
    sw += w;
    sww += w * w;
    swn += w * e.nu;
  }
  out.nu_mean = swn / sw;
  const double err_mean = std::sqrt(1.0 / sw);
  // Reliability-weighted dispersion: an unbiased scatter estimate that
  // reduces to the usual sample deviation of the mean for equal weights.
  double sd = 0.0;
  for (const auto& e : entries) {
    const double w = 1.0 / (e.nu_err * e.nu_err);
    sd += w * (e.nu - out.nu_mean) * (e.nu - out.nu_mean);
  }
  const double denom = sw - sww / sw;
  const double err_disp = denom > 0.0 ? std::sqrt(sd / denom) : 0.0;
  out.nu_err = std::max(err_mean, err_disp);
  for (const auto& e : entries) {
    const double dev = std::fabs(e.nu - out.nu_mean) / e.nu_err;
    out.deviation_sigma.push_back(dev);
    out.flagged.push_back(dev > 2.0);
  }
  return out;
}

}  // namespace qpkr::crit
