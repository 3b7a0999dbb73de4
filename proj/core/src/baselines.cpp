#include "qpkr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpkr/errors.hpp"
#include "qpkr/numerics.hpp"
#include "qpkr/rng.hpp"

namespace qpkr::baselines {

void standard_map_step(double& x, double& ptilde, double kick_amp,
                       double kbar) {
  ptilde += (kick_amp / kbar) * std::sin(x);
  x += kbar * ptilde;
}

ClassicalResult classical_diffusion(const model::ParameterSet& ps, double K,
                                    double eps, const ClassicalOptions& opts) {
  ps.validate();
  if (!(K > 0.0)) throw ConfigError("classical baseline: K must be positive");
  if (eps < 0.0 || eps > 1.0)
    throw ConfigError("classical baseline: eps outside [0, 1]");
  if (opts.n_trajectories < 2)
    throw ConfigError("classical baseline: need at least 2 trajectories");

  std::vector<long> record = opts.record_at;
  if (record.empty())
    for (long t = 1; t <= ps.n_kicks; ++t) record.push_back(t);
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());
  if (record.front() < 1)
    throw ConfigError("classical baseline: record times start at kick 1");
  const long t_max = record.back();

  const double kbar = ps.kbar;
  const double omega2 = ps.omega2.value();
  const double omega3 = ps.omega3.value();
  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t n_rec = record.size();
  const std::size_t n_traj = opts.n_trajectories;

  // Trajectories are embarrassingly parallel, but naive per-thread
  // accumulation would make the floating-point sums depend on the thread
  // count. Fill fixed-size chunks of per-trajectory slots in parallel, then
  // reduce each chunk in index order.
  const std::size_t chunk = std::min<std::size_t>(n_traj, 4096);
  std::vector<double> slots(chunk * n_rec);
  std::vector<double> sum(n_rec, 0.0), sumsq(n_rec, 0.0);

  for (std::size_t base = 0; base < n_traj; base += chunk) {
    const std::size_t count = std::min(chunk, n_traj - base);
    num::parallel_for(count, opts.threads, [&](std::size_t k) {
      rng::Stream stream(opts.seed, static_cast<std::uint64_t>(base + k));
      const double p0 = stream.uniform();
      double x = stream.uniform(0.0, two_pi);
      double phi2 = ps.phi2, phi3 = ps.phi3;
      if (opts.phase_average) {
        phi2 = stream.uniform(0.0, two_pi);
        phi3 = stream.uniform(0.0, two_pi);
      }
      double p = p0;
      double* row = &slots[k * n_rec];
      std::size_t next = 0;
      for (long t = 1; t <= t_max && next < n_rec; ++t) {
        const double amp =
            model::kick_amplitude(K, eps, omega2, omega3, phi2, phi3, t - 1);
        standard_map_step(x, p, amp, kbar);
        x = std::fmod(x, two_pi);
        while (record[next] == t) {
          const double d = p - p0;
          row[next] = d * d;
          if (++next == n_rec) break;
        }
      }
    });
    for (std::size_t k = 0; k < count; ++k)
      for (std::size_t j = 0; j < n_rec; ++j) {
        const double v = slots[k * n_rec + j];
        sum[j] += v;
        sumsq[j] += v * v;
      }
  }

  ClassicalResult out;
  out.times = record;
  out.p2.resize(n_rec);
  out.p2_err.resize(n_rec);
  const double n = static_cast<double>(n_traj);
  for (std::size_t j = 0; j < n_rec; ++j) {
    const double m = sum[j] / n;
    const double var = std::max(0.0, (sumsq[j] - n * m * m) / (n - 1.0));
    out.p2[j] = m;
    out.p2_err[j] = std::sqrt(var / n);
  }
  return out;
}

namespace {

double softplus(double u) {
  if (u > 40.0) return u;
  if (u < -40.0) return std::exp(u);
  return std::log1p(std::exp(u));
}

}  // namespace

double synth_ln_xi(const SynthOptions& opts, double q) {
  const double inv_xi =
      opts.alpha * std::pow(std::fabs(q - opts.q_c), opts.nu) + opts.beta;
  return -std::log(inv_xi);
}

std::vector<scaling::LambdaSeries> synth_scaling_data(
    const SynthOptions& opts) {
  if (!(opts.alpha > 0.0) || !(opts.nu > 0.0) || opts.beta < 0.0)
    throw ConfigError("synthetic data: need alpha > 0, nu > 0, beta >= 0");
  if (!(opts.shape_exponent > 0.0))
    throw ConfigError("synthetic data: shape exponent must be positive");
  if (opts.noise < 0.0) throw ConfigError("synthetic data: negative noise");

  std::vector<double> qs = opts.q_values;
  if (qs.empty()) {
    // 32 points across q_c +- 25%; the even count keeps q_c itself out of
    // the grid so every series has a definite branch.
    for (int i = 0; i < 32; ++i)
      qs.push_back(opts.q_c * (0.75 + 0.5 * i / 31.0));
  }
  std::vector<long> ts = opts.t_values;
  if (ts.empty()) {
    for (int k = 0;; ++k) {
      const long t =
          std::lround(std::pow(10.0, std::log10(10.0) + k / 32.0));
      if (t > 1000) break;
      ts.push_back(t);
    }
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  }
  if (qs.size() < 2 || ts.empty())
    throw ConfigError("synthetic data: need >= 2 controls and >= 1 time");

  rng::Stream stream(opts.seed, 0);
  std::vector<scaling::LambdaSeries> out;
  out.reserve(qs.size());
  for (double q : qs) {
    scaling::LambdaSeries s;
    s.control_value = q;
    s.times = ts;
    const double ln_xi = synth_ln_xi(opts, q);
    const double sign = q > opts.q_c ? 1.0 : -1.0;
    for (long t : ts) {
      const double z = ln_xi - std::log(static_cast<double>(t)) / 3.0;
      double ln_lambda;
      if (opts.family == SynthFamily::ZetaLinear) {
        const double zeta = sign * std::exp(-z / opts.shape_exponent);
        ln_lambda = opts.ln_lambda_c + opts.zeta_slope * zeta;
      } else {
        const double w = opts.width;
        const double sp = softplus(-z / w);
        ln_lambda = sign > 0.0 ? opts.ln_lambda_c + w * sp
                               : opts.ln_lambda_c - 2.0 * w * sp;
      }
      if (opts.noise > 0.0) ln_lambda += opts.noise * stream.normal();
      s.lambda.push_back(std::exp(ln_lambda));
      s.lambda_err.push_back(opts.noise);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace qpkr::baselines
