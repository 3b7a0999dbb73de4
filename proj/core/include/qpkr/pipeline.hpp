#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qpkr/baselines.hpp"
#include "qpkr/crit.hpp"
#include "qpkr/engine.hpp"
#include "qpkr/model.hpp"
#include "qpkr/scaling.hpp"

// Run-directory orchestration. A simulation run is a directory holding one
// observable CSV per control point plus manifest.json, which records the
// resolved configuration and a sha256 digest of every data file. Analysis
// validates those digests, then writes its results under <run>/analysis/.
// All outputs are deterministic for a fixed seed, independent of the worker
// count; manifests additionally carry wall-clock timestamps.

namespace qpkr::pipeline {

struct SimulateConfig {
  model::ParameterSet ps;
  std::string preset_label;  // empty when ps was given explicitly
  int n_points = 20;
  int n_realizations = 1024;
  int m_lattice = 1024;
  int threads = 0;
  bool phase_average = true;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  bool dry_run = false;
  bool resume = true;  // reuse completed points whose digests still match
  std::vector<long> record_at;  // empty = default_record_times(ps.n_kicks)
};

struct PointEntry {
  int index = 0;
  double control_value = 0.0;
  double K = 0.0;
  double eps = 0.0;
  std::string file;    // path relative to the run directory
  std::string sha256;  // empty in dry runs
};

struct SimulateSummary {
  std::filesystem::path run_dir;
  std::vector<PointEntry> points;
  int n_computed = 0;
  int n_reused = 0;
  bool dry_run = false;
};

SimulateSummary simulate(const SimulateConfig& cfg);

struct AnalyzeConfig {
  long window_lo = 30;
  long window_hi = 1000;
  scaling::Source source = scaling::Source::P2;
  scaling::CollapseOptions collapse;
  crit::FitOptions fit;
  int bootstrap_replicas = 100;
  std::uint64_t bootstrap_seed = 1;
  int threads = 0;
};

struct AnalyzeSummary {
  std::filesystem::path run_dir;
  scaling::ScalingResult scaling;
  crit::CrossingEstimate crossing;
  crit::CriticalFit fit;  // fit.bootstrap holds the replica intervals
  std::vector<std::string> outputs;  // files written, relative to run_dir
};

// Reads a simulation run directory, verifies every digest, builds the
// Lambda(t) series inside the analysis window, collapses them, and fits the
// critical point. Throws ConfigError on manifest/digest mismatch and
// ConvergenceError (exit code 3 at the CLI) when collapse or fit fail.
AnalyzeSummary analyze(const std::filesystem::path& run_dir,
                       const AnalyzeConfig& cfg);

struct UniversalityConfig {
  bool from_table = false;  // use the built-in reference table instead of runs
  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path out_dir;  // where the two CSVs go
};

struct UniversalitySummary {
  crit::UniversalityReport report;
  std::vector<std::string> outputs;
};

UniversalitySummary universality(const UniversalityConfig& cfg);

struct SynthConfig {
  baselines::SynthOptions synth;
  std::filesystem::path out_dir;
  long n_kicks = 1000;  // recorded in the manifest for the analysis window
};

// Fabricates a run directory from the synthetic scaling family (observable
// CSVs with p2 = Lambda t^(2/3), pi0 = p2^(-1/2)), so the analysis chain can
// be exercised end to end against known (alpha, q_c, nu, beta).
SimulateSummary synth_run(const SynthConfig& cfg);

struct ClassicalConfig {
  model::ParameterSet ps;
  double K = 10.0;
  double eps = 0.8;
  baselines::ClassicalOptions opts;
  std::filesystem::path out_dir;
};

// Writes the classical Monte Carlo series in the observable CSV layout
// (pi0 columns zero) with a manifest flagged "classical".
SimulateSummary classical_run(const ClassicalConfig& cfg);

}  // namespace qpkr::pipeline
