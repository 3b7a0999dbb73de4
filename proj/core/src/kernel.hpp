#pragma once

#include <complex>

// Inner loops of the split-step evolution, isolated in one translation unit
// compiled with aggressive math flags. Everything here is branch-free over
// contiguous arrays so the compiler can use the vector math library for the
// trigonometric calls.

namespace qpkr::engine::kernel {

// z[j] *= exp(-i * c * cos_x[j]) for j in [0, n).
void apply_kick_phase(std::complex<double>* z, const double* cos_x, int n,
                      double c);

// z[j] *= w[j].
void apply_phase_table(std::complex<double>* z, const std::complex<double>* w,
                       int n);

// w[j] = scale * exp(-i * kbar * (m_j + beta)^2 / 2) with m_j the signed
// FFT frequency of bin j. `scale` folds the 1/N of the unnormalized
// transform pair into the table.
void build_flight_phase(std::complex<double>* w, int n, double kbar,
                        double beta, double scale);

// cos_x[j] = cos(2 pi j / n), the kick potential profile on the grid.
void build_cosine_table(double* cos_x, int n);

struct BinMoments {
  double norm2;
  double m1;
  double m2;
  double pi0;
  double edge;
};

// Probability moments over the signed frequencies; `edge` collects
// everything at |m| >= 0.9 * m_lattice.
BinMoments compute_moments(const std::complex<double>* z, int n,
                           int m_lattice);

}  // namespace qpkr::engine::kernel
