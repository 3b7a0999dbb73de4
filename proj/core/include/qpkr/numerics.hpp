#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qpkr::num {

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double intercept_err = 0.0;
  double chi2 = 0.0;
};

// Weighted least-squares straight line y = a + b x, weights w = 1/sigma^2.
LinearFit weighted_linear_fit(const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w);

// Chebyshev polynomials T_0..T_{dim-1} of the affine map of [lo, hi] onto
// [-1, 1]. This is one global polynomial of degree dim-1: every coefficient
// couples the whole interval, so a fit transmits slope and curvature across
// gaps in the data, and evaluation outside [lo, hi] continues the same
// polynomial (the domain only conditions the representation).
class ChebyshevBasis {
 public:
  ChebyshevBasis(double lo, double hi, std::size_t dim);

  std::size_t dim() const { return dim_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // Fills row[0..dim) with the basis functions evaluated at x.
  void eval(double x, double* row) const;
  // Fills row[0..dim) with the first derivatives of the basis functions.
  void eval_deriv(double x, double* row) const;

  double value(const std::vector<double>& coeffs, double x) const;
  double deriv(const std::vector<double>& coeffs, double x) const;

 private:
  double lo_ = -1.0;
  double hi_ = 1.0;
  std::size_t dim_ = 1;
};

// Weighted linear least squares of y on the basis columns. Returns the
// coefficient vector; chi2_out (optional) receives the weighted SSR.
std::vector<double> fit_basis(const ChebyshevBasis& basis,
                              const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w,
                              double* chi2_out = nullptr);

// Brent minimization of f on [a, b]; returns argmin.
double brent_minimize(const std::function<double(double)>& f, double a,
                      double b, double tol = 1e-10, int max_iter = 200);

// Expands the bracket around x0 until f(x0 - h), f(x0), f(x0 + h) brackets a
// minimum, then runs Brent.
double line_minimize(const std::function<double(double)>& f, double x0,
                     double h = 0.5, double tol = 1e-10);

struct LevMarOptions {
  int max_iter = 400;
  double ftol = 1e-12;   // relative chi2 change
  double xtol = 1e-12;   // relative step size
  double lambda0 = 1e-3;
};

struct LevMarResult {
  std::vector<double> theta;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  // (J^T J)^{-1} at the optimum, row-major n_theta x n_theta.
  std::vector<double> covariance;
};

// Damped least squares on residuals r(theta) with analytic Jacobian.
// residuals fills r[0..m); jacobian fills J row-major m x n.
LevMarResult levenberg_marquardt(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>&
        residuals,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>&
        jacobian,
    std::vector<double> theta0, int n_residuals,
    const LevMarOptions& opts = {});

// Linear-interpolated quantile of an unsorted sample, p in [0, 1].
double quantile(std::vector<double> sample, double p);

double mean(const std::vector<double>& v);
// Standard error of the mean (unbiased sample variance / n).
double sem(const std::vector<double>& v);

// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware default).
// Exceptions are captured and the first one is rethrown after all workers
// finish, so partially-failed sweeps never go unnoticed.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t)>& fn) {
  int k = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  if (k < 1) k = 1;
  if (k == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace qpkr::num
