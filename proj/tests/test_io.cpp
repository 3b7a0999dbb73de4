#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "qpkr/errors.hpp"
#include "qpkr/io.hpp"

using namespace qpkr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("qpkr_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

TEST_CASE("g17 round-trips doubles bit for bit") {
  for (double v : {3.141592653589793, 0.1, 1e-300, 6.02214076e23, -0.0,
                   1.0 / 3.0, 2.0 / 3.0e-10}) {
    const double back = io::parse_double(io::g17(v));
    CHECK(std::signbit(back) == std::signbit(v));
    CHECK(back == v);
  }
}

TEST_CASE("parse_double is strict") {
  CHECK(io::parse_double("42") == 42.0);
  CHECK(io::parse_double("-1.25e-3") == -1.25e-3);
  CHECK_THROWS_AS(io::parse_double(""), ConfigError);
  CHECK_THROWS_AS(io::parse_double("1.2x"), ConfigError);
  CHECK_THROWS_AS(io::parse_double("x1.2"), ConfigError);
  CHECK_THROWS_AS(io::parse_double("1.2 3"), ConfigError);
}

TEST_CASE("sha256 known answers") {
  CHECK(io::sha256_bytes("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  CHECK(io::sha256_bytes(abc.data(), abc.size()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  TempDir tmp;
  const fs::path f = tmp.path / "abc.txt";
  io::write_text_file(f, abc);
  CHECK(io::sha256_file(f) == io::sha256_bytes(abc.data(), abc.size()));
}

TEST_CASE("utc timestamp shape") {
  const std::string ts = io::utc_timestamp();
  REQUIRE(ts.size() == 20);
  CHECK(ts[4] == '-');
  CHECK(ts[7] == '-');
  CHECK(ts[10] == 'T');
  CHECK(ts[13] == ':');
  CHECK(ts[16] == ':');
  CHECK(ts[19] == 'Z');
}

TEST_CASE("observable csv round trip") {
  engine::EnsembleResult r;
  r.times = {1, 10, 100};
  r.p2 = {0.5, 5.123456789012345, 50.0};
  r.p2_err = {0.01, 0.1 / 3.0, 1.0};
  r.pi0 = {0.9, 0.25, 0.0625};
  r.pi0_err = {0.001, 0.002, 0.0003};

  TempDir tmp;
  const fs::path f = tmp.path / "obs.csv";
  io::write_observable_csv(f, r);

  const auto back = io::read_observable_csv(f);
  REQUIRE(back.times == r.times);
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    CHECK(back.p2[i] == r.p2[i]);
    CHECK(back.p2_err[i] == r.p2_err[i]);
    CHECK(back.pi0[i] == r.pi0[i]);
    CHECK(back.pi0_err[i] == r.pi0_err[i]);
  }

  // Same content, same bytes: the digest is reproducible.
  const auto d1 = io::sha256_file(f);
  io::write_observable_csv(f, r);
  CHECK(io::sha256_file(f) == d1);
}

TEST_CASE("observable csv rejects malformed input") {
  TempDir tmp;
  const fs::path f = tmp.path / "bad.csv";

  io::write_text_file(f, "t,wrong,header,here,x\n1,2,3,4,5\n");
  CHECK_THROWS_AS(io::read_observable_csv(f), ConfigError);

  io::write_text_file(f, "t,p2,p2_err,pi0,pi0_err\n1,2,3,4\n");
  CHECK_THROWS_AS(io::read_observable_csv(f), ConfigError);

  io::write_text_file(f, "t,p2,p2_err,pi0,pi0_err\n");
  CHECK_THROWS_AS(io::read_observable_csv(f), ConfigError);

  CHECK_THROWS_AS(io::read_observable_csv(tmp.path / "absent.csv"),
                  ConfigError);
}

TEST_CASE("generic table csv") {
  TempDir tmp;
  const fs::path f = tmp.path / "table.csv";
  io::write_table_csv(f, {"a", "b"}, {{"1", "x"}, {"2", "y"}});
  CHECK(io::read_text_file(f) == "a,b\n1,x\n2,y\n");
}

TEST_CASE("parameter set json round trip") {
  model::ParameterSet ps = model::preset("E");
  ps.phi2 = 0.125;
  ps.phi3 = -2.5;
  ps.n_kicks = 777;
  const auto text = io::parameter_set_to_json(ps);
  const auto back = io::parameter_set_from_json(text);
  CHECK(back == ps);

  // A literal (non-symbolic) frequency survives as well.
  ps.omega2 = model::Frequency::from_value(1.2345678901234567);
  CHECK(io::parameter_set_from_json(io::parameter_set_to_json(ps)) == ps);
}

TEST_CASE("parameter set json defaults and errors") {
  // n_kicks, label, and phases are optional on read.
  const char* minimal = R"({
    "kbar": 2.89,
    "omega2": {"sqrt": 5},
    "omega3": {"sqrt": 13},
    "path": {"k_start": 4.0, "eps_start": 0.1, "k_end": 8.0, "eps_end": 0.8,
             "coordinate": "K"}
  })";
  const auto ps = io::parameter_set_from_json(minimal);
  CHECK(ps.label.empty());
  CHECK(ps.n_kicks == 1000);
  CHECK(ps.phi2 == 0.0);
  CHECK(ps.omega2 == model::Frequency::sqrt_two_pi(5));

  CHECK_THROWS_AS(io::parameter_set_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(io::parameter_set_from_json("{}"), ConfigError);
}

TEST_CASE("text file write and read") {
  TempDir tmp;
  const fs::path f = tmp.path / "note.txt";
  io::write_text_file(f, "hello\nworld\n");
  CHECK(io::read_text_file(f) == "hello\nworld\n");
  // Overwrite goes through the tmp+rename path.
  io::write_text_file(f, "second");
  CHECK(io::read_text_file(f) == "second");
  CHECK(!fs::exists(f.string() + ".tmp"));
  CHECK_THROWS_AS(io::read_text_file(tmp.path / "absent"), ConfigError);
}
