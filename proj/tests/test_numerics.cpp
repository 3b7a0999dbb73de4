#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qpkr/errors.hpp"
#include "qpkr/numerics.hpp"
#include "qpkr/rng.hpp"

using namespace qpkr;
using num::ChebyshevBasis;

TEST_CASE("weighted linear fit: exact line and errors") {
  std::vector<double> x{1, 2, 3, 4, 5}, y, w(5, 4.0);  // sigma = 0.5
  for (double xi : x) y.push_back(2.5 * xi - 1.0);
  const auto f = num::weighted_linear_fit(x, y, w);
  CHECK(f.slope == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f.chi2 == doctest::Approx(0.0).epsilon(1e-10));
  // Known closed form: sigma_b^2 = S / (S Sxx - Sx^2) with S = 20, Sx = 60,
  // Sxx = 220: 20 / (4400 - 3600) = 1/40.
  CHECK(f.slope_err == doctest::Approx(std::sqrt(1.0 / 40.0)).epsilon(1e-12));
  CHECK_THROWS_AS(num::weighted_linear_fit({1.0}, {2.0}, {1.0}), ConfigError);
}

TEST_CASE("chebyshev basis: closed forms on the mapped variable") {
  const ChebyshevBasis basis(-2.0, 6.0, 6);
  rng::Stream st(5, 0);
  std::vector<double> row(6);
  for (int rep = 0; rep < 200; ++rep) {
    const double x = st.uniform(-4.0, 10.0);  // includes outside the domain
    const double u = (2.0 * x - 4.0) / 8.0;
    basis.eval(x, row.data());
    CHECK(row[0] == doctest::Approx(1.0));
    CHECK(row[1] == doctest::Approx(u));
    CHECK(row[2] == doctest::Approx(2 * u * u - 1).epsilon(1e-12));
    CHECK(row[3] == doctest::Approx(4 * u * u * u - 3 * u).epsilon(1e-12));
    CHECK(row[4] ==
          doctest::Approx(8 * u * u * u * u - 8 * u * u + 1).epsilon(1e-11));
    CHECK(row[5] == doctest::Approx(16 * std::pow(u, 5) - 20 * u * u * u +
                                    5 * u)
                        .epsilon(1e-11));
  }
}

TEST_CASE("chebyshev basis: value matches the row expansion") {
  const ChebyshevBasis basis(-1.5, 2.5, 7);
  rng::Stream st(6, 0);
  std::vector<double> c(7), row(7);
  for (auto& v : c) v = st.uniform(-2.0, 2.0);
  for (int rep = 0; rep < 100; ++rep) {
    const double x = st.uniform(-3.0, 4.0);
    basis.eval(x, row.data());
    double dot = 0.0;
    for (int k = 0; k < 7; ++k) dot += c[static_cast<std::size_t>(k)] * row[static_cast<std::size_t>(k)];
    CHECK(basis.value(c, x) == doctest::Approx(dot).epsilon(1e-12));
  }
}

TEST_CASE("chebyshev basis: derivatives against finite differences") {
  const ChebyshevBasis basis(-1.0, 3.0, 6);
  std::vector<double> c{0.3, -1.2, 0.7, 0.25, -0.4, 0.11};
  const double h = 1e-6;
  for (double x : {-0.8, 0.0, 1.3, 2.9, 3.4}) {
    const double fd = (basis.value(c, x + h) - basis.value(c, x - h)) / (2 * h);
    CHECK(basis.deriv(c, x) == doctest::Approx(fd).epsilon(1e-6));
  }
  std::vector<double> drow(6), rp(6), rm(6);
  basis.eval_deriv(0.7, drow.data());
  basis.eval(0.7 + h, rp.data());
  basis.eval(0.7 - h, rm.data());
  for (int k = 0; k < 6; ++k)
    CHECK(drow[static_cast<std::size_t>(k)] ==
          doctest::Approx((rp[static_cast<std::size_t>(k)] -
                           rm[static_cast<std::size_t>(k)]) /
                          (2 * h))
              .epsilon(1e-5));
}

TEST_CASE("chebyshev basis: rejects degenerate construction") {
  CHECK_THROWS_AS(ChebyshevBasis(1.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(ChebyshevBasis(2.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(ChebyshevBasis(0.0, 1.0, 0), ConfigError);
}

TEST_CASE("fit_basis: recovers an exact polynomial") {
  const ChebyshevBasis basis(0.0, 4.0, 4);
  std::vector<double> x, y, w;
  for (int i = 0; i < 40; ++i) {
    const double xi = 0.1 * i;
    x.push_back(xi);
    y.push_back(1.0 - 2.0 * xi + 0.5 * xi * xi - 0.125 * xi * xi * xi);
    w.push_back(1.0 + (i % 3));
  }
  double chi2 = -1.0;
  const auto c = num::fit_basis(basis, x, y, w, &chi2);
  REQUIRE(c.size() == 4);
  CHECK(chi2 == doctest::Approx(0.0).epsilon(1e-18));
  for (double xi : {0.05, 1.7, 3.95}) {
    const double truth =
        1.0 - 2.0 * xi + 0.5 * xi * xi - 0.125 * xi * xi * xi;
    CHECK(basis.value(c, xi) == doctest::Approx(truth).epsilon(1e-10));
  }
  CHECK_THROWS_AS(
      num::fit_basis(ChebyshevBasis(0.0, 1.0, 4), {0.0, 1.0}, {0.0, 1.0},
                     {1.0, 1.0}, nullptr),
      DegenerateDataError);
}

TEST_CASE("brent and line minimization") {
  auto f = [](double x) { return (x - 1.7) * (x - 1.7) + 3.0; };
  CHECK(num::brent_minimize(f, -10.0, 10.0) ==
        doctest::Approx(1.7).epsilon(1e-7));
  CHECK(num::line_minimize(f, -25.0, 0.5) == doctest::Approx(1.7).epsilon(1e-7));
}

TEST_CASE("levenberg-marquardt: exponential decay round trip") {
  // y = a exp(-b t) sampled exactly; LM must recover (a, b) from a poor
  // start and report convergence with a sane covariance.
  const double a0 = 3.0, b0 = 0.7;
  std::vector<double> t, y;
  for (int i = 0; i < 30; ++i) {
    t.push_back(0.1 * i);
    y.push_back(a0 * std::exp(-b0 * t.back()));
  }
  auto residuals = [&](const std::vector<double>& th, std::vector<double>& r) {
    for (std::size_t i = 0; i < t.size(); ++i)
      r[i] = th[0] * std::exp(-th[1] * t[i]) - y[i];
  };
  auto jacobian = [&](const std::vector<double>& th, std::vector<double>& J) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = std::exp(-th[1] * t[i]);
      J[i * 2 + 0] = e;
      J[i * 2 + 1] = -th[0] * t[i] * e;
    }
  };
  const auto res = num::levenberg_marquardt(residuals, jacobian, {1.0, 0.1},
                                            static_cast<int>(t.size()));
  CHECK(res.converged);
  CHECK(res.theta[0] == doctest::Approx(a0).epsilon(1e-8));
  CHECK(res.theta[1] == doctest::Approx(b0).epsilon(1e-8));
  CHECK(res.chi2 == doctest::Approx(0.0).epsilon(1e-14));
  REQUIRE(res.covariance.size() == 4);
  CHECK(res.covariance[0] > 0.0);
  CHECK(res.covariance[3] > 0.0);
}

TEST_CASE("quantile, mean, sem") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(num::quantile(v, 0.0) == 1.0);
  CHECK(num::quantile(v, 1.0) == 4.0);
  CHECK(num::quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(num::mean(v) == doctest::Approx(2.5));
  // sample variance 5/3, sem = sqrt(5/12).
  CHECK(num::sem(v) == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-12));
}

TEST_CASE("parallel_for: covers the range once and propagates errors") {
  const std::size_t n = 1000;
  std::vector<std::atomic<int>> hits(n);
  num::parallel_for(n, 3, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);

  CHECK_THROWS_AS(num::parallel_for(100, 4,
                                    [&](std::size_t i) {
                                      if (i == 57)
                                        throw std::runtime_error("boom");
                                    }),
                  std::runtime_error);
}
