#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qpkr/errors.hpp"
#include "qpkr/model.hpp"
#include "qpkr/rng.hpp"

using namespace qpkr;
using model::ControlPath;
using model::Frequency;
using model::ParameterSet;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

TEST_CASE("frequency: exact radicand form") {
  const Frequency f = Frequency::sqrt_two_pi(5);
  CHECK(f.value() == doctest::Approx(kTwoPi * std::sqrt(5.0)).epsilon(1e-15));
  CHECK(f.over_two_pi() == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  const Frequency g = Frequency::from_value(1.25);
  CHECK(g.value() == 1.25);
  CHECK(f == Frequency::sqrt_two_pi(5));
  CHECK_FALSE(f == Frequency::sqrt_two_pi(7));
  CHECK_FALSE(f == g);
}

TEST_CASE("kick amplitude: frozen values on preset A") {
  const ParameterSet ps = model::preset("A");
  // K [1 + eps cos(omega2 n) cos(omega3 n)] at K=4, eps=0.1.
  CHECK(model::kick_amplitude(ps, 4.0, 0.1, 1) ==
        doctest::Approx(3.972442456528333).epsilon(1e-12));
  CHECK(model::kick_amplitude(ps, 4.0, 0.1, 2) ==
        doctest::Approx(3.904689943021777).epsilon(1e-12));
}

TEST_CASE("kick amplitude: eps = 0 returns K bitwise") {
  const ParameterSet ps = model::preset("A");
  for (long n : {0L, 1L, 17L, 999L})
    CHECK(model::kick_amplitude(ps, 6.123456789, 0.0, n) == 6.123456789);
}

TEST_CASE("kick amplitude: bounded by K(1 +- eps)") {
  const ParameterSet ps = model::preset("A");
  rng::Stream stream(12345, 0);
  for (int i = 0; i < 100000; ++i) {
    const double K = stream.uniform(0.1, 20.0);
    const double eps = stream.uniform();
    const long n = static_cast<long>(stream.u64() % 100000);
    const double a = model::kick_amplitude(ps, K, eps, n);
    CHECK(a >= K * (1.0 - eps) - 1e-12 * K);
    CHECK(a <= K * (1.0 + eps) + 1e-12 * K);
  }
}

TEST_CASE("kick amplitude: phase offsets shift the schedule") {
  const double w2 = kTwoPi * std::sqrt(5.0), w3 = kTwoPi * std::sqrt(13.0);
  const double direct = model::kick_amplitude(5.0, 0.4, w2, w3, 0.0, 0.0, 7);
  const double shifted =
      model::kick_amplitude(5.0, 0.4, w2, w3, 3.0 * w2, 3.0 * w3, 4);
  CHECK(direct == doctest::Approx(shifted).epsilon(1e-9));
}

TEST_CASE("control path: linear interpolation and coordinates") {
  ControlPath path{4.0, 0.1, 8.0, 0.8, ControlPath::Coordinate::K};
  path.validate();
  auto [k0, e0] = model::path_point(path, 0.0);
  CHECK(k0 == 4.0);
  CHECK(e0 == 0.1);
  auto [k1, e1] = model::path_point(path, 1.0);
  CHECK(k1 == 8.0);
  CHECK(e1 == 0.8);
  auto [km, em] = model::path_point(path, 0.5);
  CHECK(km == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(em == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(model::path_coordinate(path, 0.25) == doctest::Approx(5.0));

  path.coordinate = ControlPath::Coordinate::Epsilon;
  CHECK(model::path_coordinate(path, 0.5) == doctest::Approx(0.45));

  path.coordinate = ControlPath::Coordinate::Arc;
  CHECK(model::path_coordinate(path, 1.0) ==
        doctest::Approx(std::hypot(4.0, 0.7)).epsilon(1e-15));

  CHECK_THROWS_AS(model::path_point(path, -0.01), std::out_of_range);
  CHECK_THROWS_AS(model::path_point(path, 1.01), std::out_of_range);
}

TEST_CASE("control path: validation rejects bad segments") {
  ControlPath same{4.0, 0.1, 4.0, 0.1, ControlPath::Coordinate::K};
  CHECK_THROWS_AS(same.validate(), ConfigError);
  ControlPath negk{-1.0, 0.1, 8.0, 0.8, ControlPath::Coordinate::K};
  CHECK_THROWS_AS(negk.validate(), ConfigError);
  ControlPath bigeps{4.0, 0.1, 8.0, 1.4, ControlPath::Coordinate::K};
  CHECK_THROWS_AS(bigeps.validate(), ConfigError);
  // Fit coordinate must actually vary along the path.
  ControlPath kconst{4.0, 0.1, 4.0, 0.8, ControlPath::Coordinate::K};
  CHECK_THROWS_AS(kconst.validate(), ConfigError);
}

TEST_CASE("coordinate names round-trip") {
  using C = ControlPath::Coordinate;
  for (C c : {C::K, C::Epsilon, C::Arc})
    CHECK(model::coordinate_from_string(model::to_string(c)) == c);
  CHECK_THROWS_AS(model::coordinate_from_string("sideways"), ConfigError);
}

TEST_CASE("parameter set validation") {
  ParameterSet ps = model::preset("A");
  ps.kbar = 0.0;
  CHECK_THROWS_AS(ps.validate(), ConfigError);
  ps = model::preset("A");
  ps.n_kicks = 0;
  CHECK_THROWS_AS(ps.validate(), ConfigError);
}

TEST_CASE("presets: the nine built-in sets") {
  const auto& sets = model::presets();
  REQUIRE(sets.size() == 9);
  const char* labels[] = {"A", "B", "C", "D", "E", "F", "G", "H", "I"};
  for (int i = 0; i < 9; ++i) CHECK(sets[i].label == labels[i]);

  const ParameterSet& a = model::preset("A");
  CHECK(a.kbar == 2.89);
  CHECK(a.omega2 == Frequency::sqrt_two_pi(5));
  CHECK(a.omega3 == Frequency::sqrt_two_pi(13));
  CHECK(a.path.k_start == 4.0);
  CHECK(a.path.eps_start == 0.1);
  CHECK(a.path.k_end == 8.0);
  CHECK(a.path.eps_end == 0.8);
  CHECK(a.path.coordinate == ControlPath::Coordinate::K);
  CHECK(a.n_kicks == 1000);

  // D crosses the transition in eps at fixed K.
  CHECK(model::preset("D").path.coordinate == ControlPath::Coordinate::Epsilon);

  // H and I differ only by label (an apparatus detail outside this model).
  ParameterSet h = model::preset("H");
  ParameterSet i = model::preset("I");
  h.label = i.label;
  CHECK(h == i);

  for (const auto& ps : sets) CHECK_NOTHROW(ps.validate());
  CHECK_THROWS_AS(model::preset("Z"), ConfigError);
}

TEST_CASE("preset references: one row per preset") {
  const auto& refs = model::preset_references();
  REQUIRE(refs.size() == 9);
  CHECK(refs[0].label == "A");
  CHECK(refs[0].q_c == 6.67);
  CHECK(refs[4].label == "E");
  CHECK(refs[4].q_c == 4.69);
  for (const auto& r : refs) {
    CHECK(r.nu > 1.0);
    CHECK(r.nu < 2.0);
    CHECK(r.nu_err > 0.0);
  }
}

TEST_CASE("commensurability scan") {
  // The preset frequencies are quadratic irrationals: no warning.
  CHECK(model::commensurability_warnings(model::preset("A")).empty());

  // A rational ratio between the modulation frequencies must be flagged.
  ParameterSet ps = model::preset("A");
  ps.omega2 = Frequency::from_value(1.5 * ps.omega3.value());
  const auto warn = model::commensurability_warnings(ps);
  CHECK_FALSE(warn.empty());
}
