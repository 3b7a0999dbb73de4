#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "qpkr/rng.hpp"

using qpkr::rng::Stream;

TEST_CASE("splitmix64: reference sequence") {
  std::uint64_t s = 0;
  CHECK(qpkr::rng::splitmix64(s) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("stream: frozen first outputs pin the seeding scheme") {
  // Published run manifests record only (seed, stream index); changing the
  // derivation would silently break reproducibility of existing runs.
  Stream st(1, 0);
  CHECK(st.u64() == 0xF2949F5499925E16ULL);
  CHECK(st.u64() == 0x20D78CF1982FFD63ULL);
  CHECK(st.u64() == 0x4EF3FE357C5E202AULL);
}

TEST_CASE("stream: deterministic and keyed by (seed, stream)") {
  Stream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool all_equal = true, differs_stream = false, differs_seed = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.u64();
    all_equal = all_equal && va == b.u64();
    differs_stream = differs_stream || va != c.u64();
    differs_seed = differs_seed || va != d.u64();
  }
  CHECK(all_equal);
  CHECK(differs_stream);
  CHECK(differs_seed);
}

TEST_CASE("uniform: range and mean") {
  Stream st(7, 1);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = st.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  const double mean = sum / n;
  // sigma of the mean is 1/sqrt(12 n); allow 5 sigma.
  CHECK(std::fabs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));

  const double v = st.uniform(3.0, 5.0);
  CHECK(v >= 3.0);
  CHECK(v < 5.0);
}

TEST_CASE("normal: first two moments") {
  Stream st(11, 3);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = st.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  // var of the sample variance of a normal is 2/n.
  CHECK(std::fabs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}
