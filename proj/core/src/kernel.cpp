#include "kernel.hpp"

#include <cmath>

namespace qpkr::engine::kernel {

void apply_kick_phase(std::complex<double>* zc, const double* cos_x, int n,
                      double c) {
  double* z = reinterpret_cast<double*>(zc);
  for (int j = 0; j < n; ++j) {
    const double phase = -c * cos_x[j];
    const double wr = std::cos(phase);
    const double wi = std::sin(phase);
    const double re = z[2 * j];
    const double im = z[2 * j + 1];
    z[2 * j] = re * wr - im * wi;
    z[2 * j + 1] = re * wi + im * wr;
  }
}

void apply_phase_table(std::complex<double>* zc, const std::complex<double>* wc,
                       int n) {
  double* z = reinterpret_cast<double*>(zc);
  const double* w = reinterpret_cast<const double*>(wc);
  for (int j = 0; j < n; ++j) {
    const double re = z[2 * j];
    const double im = z[2 * j + 1];
    const double wr = w[2 * j];
    const double wi = w[2 * j + 1];
    z[2 * j] = re * wr - im * wi;
    z[2 * j + 1] = re * wi + im * wr;
  }
}

void build_flight_phase(std::complex<double>* w, int n, double kbar,
                        double beta, double scale) {
  const double two_pi = 6.283185307179586476925286766559;
  for (int j = 0; j < n; ++j) {
    const int m = j < n / 2 ? j : j - n;
    // Reduce the quadratic phase modulo 2 pi before the trig call; the raw
    // argument grows like kbar m^2 / 2 and would cost precision otherwise.
    const double q = static_cast<double>(m) + beta;
    const double raw = 0.5 * kbar * q * q;
    const double arg = -(raw - two_pi * std::floor(raw / two_pi));
    w[j] = {scale * std::cos(arg), scale * std::sin(arg)};
  }
}

void build_cosine_table(double* cos_x, int n) {
  const double two_pi = 6.283185307179586476925286766559;
  for (int j = 0; j < n; ++j)
    cos_x[j] = std::cos(two_pi * static_cast<double>(j) / n);
}

BinMoments compute_moments(const std::complex<double>* zc, int n,
                           int m_lattice) {
  const double* z = reinterpret_cast<const double*>(zc);
  const int guard = (9 * m_lattice) / 10;
  double norm2 = 0.0, m1 = 0.0, m2 = 0.0, edge = 0.0;
  for (int j = 0; j < n; ++j) {
    const int m = j < n / 2 ? j : j - n;
    const double p = z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1];
    const double md = static_cast<double>(m);
    norm2 += p;
    m1 += md * p;
    m2 += md * md * p;
    if (m >= guard || m <= -guard) edge += p;
  }
  const double pi0 = z[0] * z[0] + z[1] * z[1];
  return {norm2, m1, m2, pi0, edge};
}

}  // namespace qpkr::engine::kernel
