#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace qpkr::model {

// Modulation angular frequency in radians per kick period. Preset
// frequencies are quadratic irrationals (2*pi*sqrt(r)); keeping the radicand
// exact makes presets serialize losslessly and evaluate identically on every
// platform.
struct Frequency {
  enum class Kind { Literal, SqrtTwoPi };
  Kind kind = Kind::Literal;
  double literal = 0.0;  // radians per kick, used when kind == Literal
  long radicand = 0;     // omega = 2*pi*sqrt(radicand), when kind == SqrtTwoPi

  double value() const {
    if (kind == Kind::SqrtTwoPi)
      return 6.283185307179586476925286766559 *
             std::sqrt(static_cast<double>(radicand));
    return literal;
  }
  // omega / (2*pi), the unit used for reports.
  double over_two_pi() const {
    return value() / 6.283185307179586476925286766559;
  }

  static Frequency sqrt_two_pi(long r) {
    return Frequency{Kind::SqrtTwoPi, 0.0, r};
  }
  static Frequency from_value(double omega) {
    return Frequency{Kind::Literal, omega, 0};
  }
  friend bool operator==(const Frequency& a, const Frequency& b) {
    if (a.kind != b.kind) return false;
    return a.kind == Kind::SqrtTwoPi ? a.radicand == b.radicand
                                     : a.literal == b.literal;
  }
};

// Straight segment through the (K, eps) control plane. `coordinate` names
// the scalar used as fit axis along the path.
struct ControlPath {
  enum class Coordinate { K, Epsilon, Arc };
  double k_start = 0.0;
  double eps_start = 0.0;
  double k_end = 0.0;
  double eps_end = 0.0;
  Coordinate coordinate = Coordinate::K;

  void validate() const;
  double arc_length() const {
    return std::hypot(k_end - k_start, eps_end - eps_start);
  }
  friend bool operator==(const ControlPath&, const ControlPath&) = default;
};

std::string to_string(ControlPath::Coordinate c);
ControlPath::Coordinate coordinate_from_string(const std::string& s);

struct ParameterSet {
  std::string label;
  double kbar = 2.89;     // effective Planck constant, [x, p] = i kbar
  Frequency omega2 = Frequency::sqrt_two_pi(5);
  Frequency omega3 = Frequency::sqrt_two_pi(13);
  double phi2 = 0.0;      // modulation phases at kick 0
  double phi3 = 0.0;
  ControlPath path;
  int n_kicks = 1000;

  void validate() const;
  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

// Kick strength at kick n: K * [1 + eps cos(omega2 n + phi2) cos(omega3 n + phi3)].
// Bounded by K(1 -+ eps); returns K bitwise when eps == 0.
double kick_amplitude(const ParameterSet& ps, double K, double eps, long n);
double kick_amplitude(double K, double eps, double omega2, double omega3,
                      double phi2, double phi3, long n);

// Linear interpolation along the path, s in [0, 1]. Throws std::out_of_range
// outside that interval.
std::pair<double, double> path_point(const ControlPath& path, double s);

// Value of the declared fit coordinate at fraction s.
double path_coordinate(const ControlPath& path, double s);

struct CommensurabilityWarning {
  std::string what;   // e.g. "omega2/omega3"
  double ratio = 0.0;
  long p = 0;
  long q = 0;
  double error = 0.0;
};

// Continued-fraction scan of the ratios among {kbar, omega2, omega3, pi}.
// A convergent p/q with q <= max_denominator within tol of the ratio means
// the frequencies are dangerously close to commensurate and the transition
// may be washed out. Advisory only; never throws.
std::vector<CommensurabilityWarning> commensurability_warnings(
    const ParameterSet& ps, double tol = 1e-6, long max_denominator = 100);

// The nine built-in parameter sets A-I. H and I share identical parameters;
// they differ only by an apparatus detail (pulse duration) that delta kicks
// do not model.
const std::vector<ParameterSet>& presets();
const ParameterSet& preset(const std::string& label);

// Reference critical points and exponents for the presets, used by reports
// and cross-checks (K_c for all but D, which crosses the transition in eps).
struct PresetReference {
  std::string label;
  double q_c;
  double nu;
  double nu_err;
};
const std::vector<PresetReference>& preset_references();

}  // namespace qpkr::model
