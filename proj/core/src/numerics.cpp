#include "qpkr/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpkr/errors.hpp"

namespace qpkr::num {

LinearFit weighted_linear_fit(const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
    throw ConfigError("weighted_linear_fit: need >= 2 points");
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    S += w[i];
    Sx += w[i] * x[i];
    Sy += w[i] * y[i];
    Sxx += w[i] * x[i] * x[i];
    Sxy += w[i] * x[i] * y[i];
  }
  const double det = S * Sxx - Sx * Sx;
  if (det <= 0.0) throw DegenerateDataError("weighted_linear_fit: singular");
  LinearFit f;
  f.slope = (S * Sxy - Sx * Sy) / det;
  f.intercept = (Sxx * Sy - Sx * Sxy) / det;
  f.slope_err = std::sqrt(S / det);
  f.intercept_err = std::sqrt(Sxx / det);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.chi2 += w[i] * r * r;
  }
  return f;
}

ChebyshevBasis::ChebyshevBasis(double lo, double hi, std::size_t dim)
    : lo_(lo), hi_(hi), dim_(dim) {
  if (!(hi_ > lo_)) throw ConfigError("ChebyshevBasis: need hi > lo");
  if (dim_ < 1) throw ConfigError("ChebyshevBasis: need dim >= 1");
}

void ChebyshevBasis::eval(double x, double* row) const {
  const double u = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
  row[0] = 1.0;
  if (dim_ > 1) row[1] = u;
  for (std::size_t k = 2; k < dim_; ++k)
    row[k] = 2.0 * u * row[k - 1] - row[k - 2];
}

void ChebyshevBasis::eval_deriv(double x, double* row) const {
  const double u = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
  const double du = 2.0 / (hi_ - lo_);
  row[0] = 0.0;
  if (dim_ > 1) row[1] = du;
  // T_k' = k U_{k-1} with the second-kind recurrence.
  double u_prev = 1.0;      // U_0
  double u_cur = 2.0 * u;   // U_1
  for (std::size_t k = 2; k < dim_; ++k) {
    row[k] = static_cast<double>(k) * u_cur * du;
    const double u_next = 2.0 * u * u_cur - u_prev;
    u_prev = u_cur;
    u_cur = u_next;
  }
}

double ChebyshevBasis::value(const std::vector<double>& coeffs,
                             double x) const {
  // Clenshaw recurrence.
  const double u = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) {
    const double b = coeffs[k] + 2.0 * u * b1 - b2;
    b2 = b1;
    b1 = b;
  }
  return coeffs[0] + u * b1 - b2;
}

double ChebyshevBasis::deriv(const std::vector<double>& coeffs,
                             double x) const {
  if (coeffs.size() < 2) return 0.0;
  const double u = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
  const double du = 2.0 / (hi_ - lo_);
  double acc = coeffs[1];
  double u_prev = 1.0;
  double u_cur = 2.0 * u;
  for (std::size_t k = 2; k < coeffs.size(); ++k) {
    acc += coeffs[k] * static_cast<double>(k) * u_cur;
    const double u_next = 2.0 * u * u_cur - u_prev;
    u_prev = u_cur;
    u_cur = u_next;
  }
  return acc * du;
}

std::vector<double> fit_basis(const ChebyshevBasis& basis,
                              const std::vector<double>& x,
                              const std::vector<double>& y,
                              const std::vector<double>& w,
                              double* chi2_out) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(basis.dim());
  if (n < m) throw DegenerateDataError("fit_basis: fewer points than basis");
  Eigen::MatrixXd A(n, m);
  Eigen::VectorXd b(n);
  std::vector<double> row(basis.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sw = std::sqrt(w[static_cast<std::size_t>(i)]);
    basis.eval(x[static_cast<std::size_t>(i)], row.data());
    for (Eigen::Index k = 0; k < m; ++k)
      A(i, k) = sw * row[static_cast<std::size_t>(k)];
    b(i) = sw * y[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  if (chi2_out) *chi2_out = (A * c - b).squaredNorm();
  return std::vector<double>(c.data(), c.data() + c.size());
}

double brent_minimize(const std::function<double(double)>& f, double a,
                      double b, double tol, int max_iter) {
  const double gold = 0.3819660112501051;
  double x = a + gold * (b - a);
  double wp = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * (std::fabs(x) + 1e-12);
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool parabolic = false;
    if (std::fabs(e) > tol1) {
      const double r = (x - wp) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - wp) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double etemp = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * etemp) && p > q * (a - x) &&
          p < q * (b - x)) {
        parabolic = true;
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
      }
    }
    if (!parabolic) {
      e = (x >= xm) ? a - x : b - x;
      d = gold * e;
    }
    const double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = wp; fv = fw;
      wp = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || wp == x) {
        v = wp; fv = fw;
        wp = u; fw = fu;
      } else if (fu <= fv || v == x || v == wp) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

double line_minimize(const std::function<double(double)>& f, double x0,
                     double h, double tol) {
  double a = x0 - h, b = x0 + h;
  double fa = f(a), f0 = f(x0), fb = f(b);
  // Walk downhill until the center beats both ends.
  for (int i = 0; i < 60 && !(f0 <= fa && f0 <= fb); ++i) {
    if (fa < fb) {
      b = x0; fb = f0;
      x0 = a; f0 = fa;
      a = x0 - (b - x0);
      fa = f(a);
    } else {
      a = x0; fa = f0;
      x0 = b; f0 = fb;
      b = x0 + (x0 - a);
      fb = f(b);
    }
  }
  return brent_minimize(f, a, b, tol);
}

LevMarResult levenberg_marquardt(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>&
        residuals,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>&
        jacobian,
    std::vector<double> theta0, int n_residuals, const LevMarOptions& opts) {
  const int n = static_cast<int>(theta0.size());
  const int m = n_residuals;
  std::vector<double> r(static_cast<std::size_t>(m));
  std::vector<double> J(static_cast<std::size_t>(m) * n);
  auto chi2_of = [&](const std::vector<double>& th) {
    residuals(th, r);
    double c = 0.0;
    for (double ri : r) c += ri * ri;
    return c;
  };

  LevMarResult out;
  out.theta = theta0;
  out.chi2 = chi2_of(theta0);
  double lambda = opts.lambda0;

  Eigen::MatrixXd Jm(m, n);
  Eigen::VectorXd rv(m);
  for (int it = 0; it < opts.max_iter; ++it) {
    out.iterations = it + 1;
    residuals(out.theta, r);
    jacobian(out.theta, J);
    for (int i = 0; i < m; ++i) {
      rv(i) = r[static_cast<std::size_t>(i)];
      for (int k = 0; k < n; ++k)
        Jm(i, k) = J[static_cast<std::size_t>(i) * n + k];
    }
    Eigen::MatrixXd JtJ = Jm.transpose() * Jm;
    Eigen::VectorXd g = Jm.transpose() * rv;
    bool stepped = false;
    for (int tries = 0; tries < 24; ++tries) {
      Eigen::MatrixXd A = JtJ;
      for (int k = 0; k < n; ++k) A(k, k) += lambda * (JtJ(k, k) + 1e-12);
      Eigen::VectorXd step = A.ldlt().solve(-g);
      std::vector<double> trial = out.theta;
      double step_norm = 0.0, theta_norm = 0.0;
      for (int k = 0; k < n; ++k) {
        trial[static_cast<std::size_t>(k)] += step(k);
        step_norm += step(k) * step(k);
        theta_norm += out.theta[static_cast<std::size_t>(k)] *
                      out.theta[static_cast<std::size_t>(k)];
      }
      const double trial_chi2 = chi2_of(trial);
      if (std::isfinite(trial_chi2) && trial_chi2 <= out.chi2) {
        const double drop = out.chi2 - trial_chi2;
        out.theta = trial;
        const double prev = out.chi2;
        out.chi2 = trial_chi2;
        lambda = std::max(lambda * 0.3, 1e-14);
        stepped = true;
        if (drop <= opts.ftol * (prev + 1e-300) ||
            step_norm <= opts.xtol * opts.xtol * (theta_norm + 1e-300)) {
          out.converged = true;
        }
        break;
      }
      lambda *= 8.0;
    }
    if (out.converged) break;
    if (!stepped) {
      // No descent direction even under heavy damping: treat as converged
      // at the current point.
      out.converged = true;
      break;
    }
  }
  // Covariance from the (undamped) normal matrix at the optimum.
  residuals(out.theta, r);
  jacobian(out.theta, J);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < n; ++k)
      Jm(i, k) = J[static_cast<std::size_t>(i) * n + k];
  Eigen::MatrixXd JtJ = Jm.transpose() * Jm;
  Eigen::MatrixXd cov =
      JtJ.completeOrthogonalDecomposition().pseudoInverse();
  out.covariance.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      out.covariance[static_cast<std::size_t>(i) * n + k] = cov(i, k);
  return out;
}

double quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw DegenerateDataError("quantile: empty sample");
  std::sort(sample.begin(), sample.end());
  p = std::clamp(p, 0.0, 1.0);
  const double pos = p * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sample.size()) return sample.back();
  return sample[lo] * (1.0 - frac) + sample[lo + 1] * frac;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sem(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1)));
}

}  // namespace qpkr::num
