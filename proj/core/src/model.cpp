#include "qpkr/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpkr/errors.hpp"

namespace qpkr::model {

namespace {
constexpr double kPi = 3.141592653589793238462643383280;
}

void ControlPath::validate() const {
  if (k_start == k_end && eps_start == eps_end)
    throw ConfigError("control path: start and end coincide");
  if (k_start <= 0.0 || k_end <= 0.0)
    throw ConfigError("control path: K must stay positive");
  const double eps_lo = std::min(eps_start, eps_end);
  const double eps_hi = std::max(eps_start, eps_end);
  if (eps_lo < 0.0 || eps_hi > 1.0)
    throw ConfigError("control path: eps must stay within [0, 1]");
  if (coordinate == Coordinate::K && k_start == k_end)
    throw ConfigError("control path: coordinate K but K is constant");
  if (coordinate == Coordinate::Epsilon && eps_start == eps_end)
    throw ConfigError("control path: coordinate eps but eps is constant");
}

std::string to_string(ControlPath::Coordinate c) {
  switch (c) {
    case ControlPath::Coordinate::K: return "K";
    case ControlPath::Coordinate::Epsilon: return "epsilon";
    case ControlPath::Coordinate::Arc: return "arc";
  }
  return "K";
}

ControlPath::Coordinate coordinate_from_string(const std::string& s) {
  if (s == "K" || s == "k") return ControlPath::Coordinate::K;
  if (s == "epsilon" || s == "eps") return ControlPath::Coordinate::Epsilon;
  if (s == "arc") return ControlPath::Coordinate::Arc;
  throw ConfigError("unknown path coordinate: " + s);
}

void ParameterSet::validate() const {
  if (kbar <= 0.0) throw ConfigError("parameter set: kbar must be positive");
  if (n_kicks < 1) throw ConfigError("parameter set: n_kicks must be >= 1");
  path.validate();
}

double kick_amplitude(double K, double eps, double omega2, double omega3,
                      double phi2, double phi3, long n) {
  if (eps == 0.0) return K;
  const double t = static_cast<double>(n);
  return K * (1.0 + eps * std::cos(omega2 * t + phi2) *
                        std::cos(omega3 * t + phi3));
}

double kick_amplitude(const ParameterSet& ps, double K, double eps, long n) {
  return kick_amplitude(K, eps, ps.omega2.value(), ps.omega3.value(), ps.phi2,
                        ps.phi3, n);
}

std::pair<double, double> path_point(const ControlPath& path, double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::out_of_range("path_point: s must lie in [0, 1]");
  return {path.k_start + s * (path.k_end - path.k_start),
          path.eps_start + s * (path.eps_end - path.eps_start)};
}

double path_coordinate(const ControlPath& path, double s) {
  const auto [K, eps] = path_point(path, s);
  switch (path.coordinate) {
    case ControlPath::Coordinate::K: return K;
    case ControlPath::Coordinate::Epsilon: return eps;
    case ControlPath::Coordinate::Arc: return s * path.arc_length();
  }
  return K;
}

namespace {

// Best rational approximation p/q with q <= max_den, by continued fractions.
struct Rational {
  long p = 0;
  long q = 1;
  double error = 0.0;
};

Rational best_rational(double x, long max_den) {
  long p0 = 1, q0 = 0;        // h_{-1}/k_{-1}
  long p1 = static_cast<long>(std::floor(x)), q1 = 1;
  double frac = x - std::floor(x);
  for (int i = 0; i < 64; ++i) {
    if (frac < 1e-15) break;
    const double inv = 1.0 / frac;
    const double a_f = std::floor(inv);
    if (a_f > 1e17) break;
    const long a = static_cast<long>(a_f);
    const long p2 = a * p1 + p0;
    const long q2 = a * q1 + q0;
    if (q2 > max_den || q2 <= 0) {
      // Semiconvergent with the largest admissible coefficient.
      const long amax = (max_den - q0) / q1;
      if (amax >= 1) {
        const long ps = amax * p1 + p0;
        const long qs = amax * q1 + q0;
        if (std::fabs(x - static_cast<double>(ps) / qs) <
            std::fabs(x - static_cast<double>(p1) / q1))
          return {ps, qs, x - static_cast<double>(ps) / qs};
      }
      break;
    }
    p0 = p1; q0 = q1;
    p1 = p2; q1 = q2;
    frac = inv - a_f;
  }
  return {p1, q1, x - static_cast<double>(p1) / q1};
}

void check_pair(std::vector<CommensurabilityWarning>& out,
                const std::string& name, double a, double b, double tol,
                long max_den) {
  if (b == 0.0) return;
  const double ratio = a / b;
  const Rational r = best_rational(std::fabs(ratio), max_den);
  if (r.q >= 1 && std::fabs(r.error) < tol)
    out.push_back({name, ratio, r.p, r.q, std::fabs(r.error)});
}

}  // namespace

std::vector<CommensurabilityWarning> commensurability_warnings(
    const ParameterSet& ps, double tol, long max_denominator) {
  std::vector<CommensurabilityWarning> out;
  const double w2 = ps.omega2.value();
  const double w3 = ps.omega3.value();
  check_pair(out, "omega2/omega3", w2, w3, tol, max_denominator);
  check_pair(out, "omega2/pi", w2, kPi, tol, max_denominator);
  check_pair(out, "omega3/pi", w3, kPi, tol, max_denominator);
  check_pair(out, "kbar/pi", ps.kbar, kPi, tol, max_denominator);
  check_pair(out, "omega2/kbar", w2, ps.kbar, tol, max_denominator);
  check_pair(out, "omega3/kbar", w3, ps.kbar, tol, max_denominator);
  // Low-order sum/difference resonances of the modulation frequencies.
  check_pair(out, "(omega2+omega3)/pi", w2 + w3, kPi, tol, max_denominator);
  check_pair(out, "(omega2-omega3)/pi", w2 - w3, kPi, tol, max_denominator);
  return out;
}

namespace {

ParameterSet make_preset(const std::string& label, double kbar, long r2,
                         long r3, double k0, double e0, double k1, double e1,
                         ControlPath::Coordinate coord) {
  ParameterSet ps;
  ps.label = label;
  ps.kbar = kbar;
  ps.omega2 = Frequency::sqrt_two_pi(r2);
  ps.omega3 = Frequency::sqrt_two_pi(r3);
  ps.path = ControlPath{k0, e0, k1, e1, coord};
  ps.n_kicks = 1000;
  return ps;
}

}  // namespace

const std::vector<ParameterSet>& presets() {
  static const std::vector<ParameterSet> sets = {
      make_preset("A", 2.89, 5, 13, 4.0, 0.1, 8.0, 0.8,
                  ControlPath::Coordinate::K),
      make_preset("B", 2.89, 7, 17, 4.0, 0.1, 8.0, 0.8,
                  ControlPath::Coordinate::K),
      make_preset("C", 2.89, 5, 13, 3.0, 0.435, 10.0, 0.435,
                  ControlPath::Coordinate::K),
      make_preset("D", 2.89, 5, 13, 7.5, 0.0, 7.5, 0.73,
                  ControlPath::Coordinate::Epsilon),
      make_preset("E", 2.00, 5, 13, 3.0, 0.1, 5.7, 0.73,
                  ControlPath::Coordinate::K),
      make_preset("F", 2.31, 5, 13, 4.0, 0.1, 9.0, 0.8,
                  ControlPath::Coordinate::K),
      make_preset("G", 2.47, 5, 13, 4.0, 0.1, 9.0, 0.8,
                  ControlPath::Coordinate::K),
      make_preset("H", 3.46, 5, 13, 4.0, 0.1, 9.0, 0.8,
                  ControlPath::Coordinate::K),
      make_preset("I", 3.46, 5, 13, 4.0, 0.1, 9.0, 0.8,
                  ControlPath::Coordinate::K),
  };
  return sets;
}

const ParameterSet& preset(const std::string& label) {
  for (const auto& ps : presets())
    if (ps.label == label) return ps;
  throw ConfigError("unknown preset '" + label + "' (expected A..I)");
}

const std::vector<PresetReference>& preset_references() {
  static const std::vector<PresetReference> refs = {
      {"A", 6.67, 1.63, 0.06}, {"B", 6.68, 1.57, 0.08},
      {"C", 5.91, 1.55, 0.25}, {"D", 0.448, 1.67, 0.18},
      {"E", 4.69, 1.64, 0.08}, {"F", 6.07, 1.68, 0.06},
      {"G", 5.61, 1.55, 0.10}, {"H", 6.86, 1.66, 0.12},
      {"I", 7.06, 1.70, 0.12},
  };
  return refs;
}

}  // namespace qpkr::model
