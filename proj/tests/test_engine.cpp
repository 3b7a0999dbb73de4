#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "qpkr/engine.hpp"
#include "qpkr/errors.hpp"
#include "qpkr/model.hpp"

using namespace qpkr;
using model::ParameterSet;

namespace {

// |amplitude|^2 of momentum state m, FFT frequency-order layout.
double prob_at(const engine::Evolver& ev, int m) {
  const int n = ev.grid_size();
  const int idx = m >= 0 ? m : n + m;
  const std::complex<double> a = ev.amplitudes()[idx];
  return std::norm(a);
}

}  // namespace

TEST_CASE("record times: dense early, logarithmic late") {
  const auto t = engine::default_record_times(1000);
  REQUIRE(!t.empty());
  CHECK(t.front() == 1);
  CHECK(t.back() == 1000);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
  for (long v = 1; v <= 10; ++v)
    CHECK(std::find(t.begin(), t.end(), v) != t.end());

  const auto small = engine::default_record_times(7);
  CHECK(small == std::vector<long>{1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("one kick: Bessel law at beta = 0") {
  // After a single kick from the m = 0 plane wave, the momentum amplitudes
  // are i^-m J_m(K/kbar) (free flight only adds phases), so the occupation
  // of state m is J_m(K/kbar)^2. Oracle: the standard-library Bessel.
  ParameterSet ps = model::preset("A");
  for (double ratio : {0.5, 1.0, 2.0}) {
    engine::Evolver ev(ps, 64);
    ev.reset(0.0);
    ev.set_phases(0.0, 0.0);
    ev.step(ratio * ps.kbar, 0.0);

    for (int m = -8; m <= 8; ++m) {
      const double jm = std::cyl_bessel_j(std::abs(m), ratio);
      CHECK(std::fabs(prob_at(ev, m) - jm * jm) < 1e-10);
    }
  }
}

TEST_CASE("one kick: frozen occupations at K/kbar = 1") {
  ParameterSet ps = model::preset("A");
  engine::Evolver ev(ps, 64);
  ev.reset(0.0);
  ev.set_phases(0.0, 0.0);
  ev.step(ps.kbar, 0.0);
  CHECK(prob_at(ev, 0) == doctest::Approx(0.58552749951366402).epsilon(1e-12));
  CHECK(prob_at(ev, 1) == doctest::Approx(0.19364451801445908).epsilon(1e-12));
  CHECK(prob_at(ev, -1) == doctest::Approx(0.19364451801445908).epsilon(1e-12));
  const auto mom = ev.moments();
  CHECK(mom.norm2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mom.m2 == doctest::Approx(0.5).epsilon(1e-10));  // sum m^2 J_m^2 = x^2/2
}

TEST_CASE("unitarity over many kicks") {
  ParameterSet ps = model::preset("A");
  engine::Evolver ev(ps, 256);
  ev.reset(0.37);
  ev.set_phases(0.9, 1.7);
  for (int n = 0; n < 50; ++n) ev.step(8.0, 0.8);
  CHECK(ev.kicks_done() == 50);
  CHECK(ev.moments().norm2 == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("K = 0 leaves the launch state untouched") {
  ParameterSet ps = model::preset("A");
  engine::Evolver ev(ps, 32);
  ev.reset(0.73);
  ev.set_phases(0.1, 0.2);
  for (int n = 0; n < 20; ++n) ev.step(0.0, 0.0);
  const auto mom = ev.moments();
  CHECK(mom.pi0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(mom.m2) < 1e-12);
}

TEST_CASE("grid size does not change the physics") {
  // The same realization on two lattice sizes must agree while the wave
  // packet stays far from both edges.
  ParameterSet ps = model::preset("A");
  const std::vector<long> record{1, 3, 10, 30};
  const auto small =
      engine::run_realization(ps, 4.0, 0.1, 0.167, 0.4, 2.2, record, 256);
  const auto large =
      engine::run_realization(ps, 4.0, 0.1, 0.167, 0.4, 2.2, record, 512);
  REQUIRE(small.times == record);
  for (std::size_t i = 0; i < record.size(); ++i) {
    CHECK(small.m2[i] ==
          doctest::Approx(large.m2[i]).epsilon(1e-6));
    CHECK(small.pi0[i] ==
          doctest::Approx(large.pi0[i]).epsilon(1e-6));
  }
}

TEST_CASE("ensemble: byte-identical for any worker count") {
  ParameterSet ps = model::preset("A");
  const std::vector<long> record{1, 5, 20};
  engine::EnsembleOptions opts;
  opts.m_lattice = 128;
  opts.n_realizations = 16;
  opts.seed = 99;

  opts.threads = 1;
  const auto a = engine::run_ensemble(ps, 5.0, 0.5, record, opts);
  opts.threads = 3;
  const auto b = engine::run_ensemble(ps, 5.0, 0.5, record, opts);
  REQUIRE(a.times == b.times);
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.p2[i] == b.p2[i]);          // bitwise
    CHECK(a.p2_err[i] == b.p2_err[i]);
    CHECK(a.pi0[i] == b.pi0[i]);
    CHECK(a.m1[i] == b.m1[i]);
  }
}

TEST_CASE("ensemble: seed changes the draw, errors are sane") {
  ParameterSet ps = model::preset("A");
  const std::vector<long> record{1, 10};
  engine::EnsembleOptions opts;
  opts.m_lattice = 128;
  opts.n_realizations = 32;
  opts.seed = 1;
  const auto a = engine::run_ensemble(ps, 5.0, 0.5, record, opts);
  opts.seed = 2;
  const auto b = engine::run_ensemble(ps, 5.0, 0.5, record, opts);
  CHECK(a.p2[0] != b.p2[0]);
  for (double e : a.p2_err) CHECK(e > 0.0);
  CHECK(a.n_realizations == 32);
  CHECK(a.m_lattice == 128);
  CHECK(a.grid_size == 512);
}

TEST_CASE("ensemble: parity makes <m> vanish within errors") {
  // beta and 1 - beta realizations mirror each other, so the ensemble mean
  // momentum is zero in expectation.
  ParameterSet ps = model::preset("A");
  const std::vector<long> record{50};
  engine::EnsembleOptions opts;
  opts.m_lattice = 256;
  opts.n_realizations = 128;
  opts.seed = 5;
  const auto r = engine::run_ensemble(ps, 4.0, 0.1, record, opts);
  CHECK(std::fabs(r.m1[0]) < 4.0 * r.m1_err[0]);
}

TEST_CASE("lattice overflow raises the typed error") {
  ParameterSet ps = model::preset("A");
  const std::vector<long> record{200};
  engine::EnsembleOptions opts;
  opts.m_lattice = 16;  // far too small for K = 10 diffusion
  opts.n_realizations = 2;
  CHECK_THROWS_AS(engine::run_ensemble(ps, 10.0, 0.0, record, opts),
                  GridOverflowError);
  try {
    engine::run_ensemble(ps, 10.0, 0.0, record, opts);
  } catch (const GridOverflowError& e) {
    CHECK(exit_code_for(e) == kExitGridOverflow);
  }
}
