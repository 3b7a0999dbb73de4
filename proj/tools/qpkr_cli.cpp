// qpkr: command line driver for the kicked-rotor transition laboratory.
//
// Subcommands: simulate, analyze, universality, presets, synth.
// Config file: key=value (long option names) via --config; flags win.
// Exit codes: 0 ok, 2 bad configuration/input, 3 non-convergence,
// 4 momentum-grid overflow.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "qpkr/errors.hpp"
#include "qpkr/io.hpp"
#include "qpkr/model.hpp"
#include "qpkr/pipeline.hpp"
#include "qpkr/scaling.hpp"
#include "qpkr/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qpkr;

fs::path resolve_out(const std::string& out_root, const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  return fs::path(out_root) / p;
}

void apply_preset_or_params(const std::string& preset_label,
                            const std::string& params_file,
                            model::ParameterSet& ps) {
  if (!preset_label.empty() && !params_file.empty())
    throw ConfigError("choose either --preset or --params, not both");
  if (!preset_label.empty())
    ps = model::preset(preset_label);
  else if (!params_file.empty())
    ps = io::parameter_set_from_json(io::read_text_file(params_file));
  else
    throw ConfigError("one of --preset or --params is required");
}

void parse_window(const std::string& text, long& lo, long& hi) {
  if (text == "paper") {
    lo = 30;
    hi = 150;
    return;
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("window must be LO:HI or 'paper', got '" + text + "'");
  try {
    lo = std::stol(text.substr(0, colon));
    hi = std::stol(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("window must be LO:HI or 'paper', got '" + text + "'");
  }
}

void print_point_grid(const pipeline::SimulateSummary& sum) {
  std::printf("index  control      K        eps\n");
  for (const auto& p : sum.points)
    std::printf("%5d  %-10.6g %-8.6g %-8.6g\n", p.index, p.control_value,
                p.K, p.eps);
}

int run(int argc, char** argv) {
  CLI::App app{"quasi-periodic kicked rotor: simulation and scaling analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "key=value config file (flags win)");
  app.require_subcommand(1);

  std::string out_root = ".";
  app.add_option("--out-root", out_root,
                 "root for relative output directories")
      ->envname("QPKR_OUT_ROOT")
      ->capture_default_str();

  // ---- simulate ----
  auto* sim = app.add_subcommand(
      "simulate", "run the quantum ensemble over a control-path sweep");
  std::string sim_preset, sim_params, sim_out = "run";
  pipeline::SimulateConfig scfg;
  int sim_kicks = 0;
  bool no_resume = false, no_phase_average = false;
  std::string emit_config;
  sim->add_option("--preset", sim_preset, "built-in parameter set (A..I)");
  sim->add_option("--params", sim_params, "parameter set JSON file");
  sim->add_option("--points", scfg.n_points, "control points along the path")
      ->capture_default_str();
  sim->add_option("--realizations", scfg.n_realizations,
                  "disorder realizations per point")
      ->capture_default_str();
  sim->add_option("--m", scfg.m_lattice,
                  "momentum lattice half-width (grid is next_pow2(4m))")
      ->capture_default_str();
  sim->add_option("--kicks", sim_kicks, "kicks per realization (default 1000)");
  sim->add_option("--seed", scfg.seed, "ensemble seed")->capture_default_str();
  sim->add_option("--threads", scfg.threads, "worker threads (0 = hardware)")
      ->capture_default_str();
  sim->add_option("--out", sim_out, "run directory (under --out-root)")
      ->capture_default_str();
  sim->add_flag("--dry-run", scfg.dry_run,
                "print the resolved (K, eps) grid and exit");
  sim->add_flag("--no-resume", no_resume,
                "recompute every point even if digests match");
  sim->add_flag("--no-phase-average", no_phase_average,
                "keep the configured phi2, phi3 for every realization");
  sim->add_option("--emit-config", emit_config,
                  "write the resolved options as a key=value file");

  // ---- analyze ----
  auto* ana = app.add_subcommand(
      "analyze", "collapse a finished run and fit the critical point");
  std::string ana_dir, ana_window = "30:1000", ana_source = "p2";
  pipeline::AnalyzeConfig acfg;
  ana->add_option("run_dir", ana_dir, "simulation run directory")->required();
  ana->add_option("--window", ana_window,
                  "analysis time window LO:HI in kicks, or 'paper' (30:150)")
      ->capture_default_str();
  ana->add_option("--source", ana_source, "observable: p2 or pi0")
      ->check(CLI::IsMember({"p2", "pi0"}))
      ->capture_default_str();
  ana->add_option("--replicas", acfg.bootstrap_replicas,
                  "bootstrap replicas (0 disables)")
      ->capture_default_str();
  ana->add_option("--bootstrap-seed", acfg.bootstrap_seed, "bootstrap seed")
      ->capture_default_str();
  ana->add_option("--threads", acfg.threads, "worker threads (0 = hardware)")
      ->capture_default_str();
  ana->add_option("--shape-exponent", acfg.collapse.shape_exponent,
                  "trial exponent shaping the collapse variable")
      ->capture_default_str();
  ana->add_option("--basis-dim", acfg.collapse.basis_dim,
                  "collapse polynomial coefficient count (0 = default)")
      ->capture_default_str();

  // ---- universality ----
  auto* uni = app.add_subcommand(
      "universality", "weighted mean of nu across analyzed runs");
  pipeline::UniversalityConfig ucfg;
  std::vector<std::string> uni_dirs;
  std::string uni_out = ".";
  uni->add_option("run_dirs", uni_dirs, "analyzed run directories");
  uni->add_flag("--from-table", ucfg.from_table,
                "use the built-in reference table instead of run results");
  uni->add_option("--out", uni_out, "directory for the two CSV tables")
      ->capture_default_str();

  // ---- presets ----
  auto* pre = app.add_subcommand("presets", "list built-in parameter sets");
  std::string pre_emit;
  pre->add_option("--emit-params", pre_emit,
                  "write one preset's parameter set JSON to stdout (A..I)");

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "generate synthetic data (scaling family or classical map)");
  synth->require_subcommand(1);

  auto* ssc = synth->add_subcommand(
      "scaling", "synthetic finite-time scaling surface with known exponents");
  pipeline::SynthConfig sycfg;
  std::string sy_family = "softplus", sy_out = "synth";
  int sy_points = 0;
  ssc->add_option("--alpha", sycfg.synth.alpha)->capture_default_str();
  ssc->add_option("--qc", sycfg.synth.q_c)->capture_default_str();
  ssc->add_option("--nu", sycfg.synth.nu)->capture_default_str();
  ssc->add_option("--beta", sycfg.synth.beta)->capture_default_str();
  ssc->add_option("--lambda-c", sycfg.synth.ln_lambda_c,
                  "plateau of ln Lambda")
      ->capture_default_str();
  ssc->add_option("--family", sy_family, "zeta-linear or softplus")
      ->check(CLI::IsMember({"zeta-linear", "softplus"}))
      ->capture_default_str();
  ssc->add_option("--noise", sycfg.synth.noise, "sigma of ln Lambda")
      ->capture_default_str();
  ssc->add_option("--seed", sycfg.synth.seed)->capture_default_str();
  ssc->add_option("--points", sy_points,
                  "control points (0 = default grid of 32)");
  ssc->add_option("--out", sy_out, "run directory (under --out-root)")
      ->capture_default_str();

  auto* scl = synth->add_subcommand(
      "classical", "Monte Carlo of the classical kicked map");
  pipeline::ClassicalConfig ccfg;
  std::string cl_preset = "A", cl_out = "classical";
  int cl_kicks = 0;
  scl->add_option("--preset", cl_preset,
                  "parameter set for kbar and frequencies")
      ->capture_default_str();
  scl->add_option("--K", ccfg.K, "kick strength")->capture_default_str();
  scl->add_option("--eps", ccfg.eps, "modulation depth")->capture_default_str();
  scl->add_option("--kicks", cl_kicks, "kicks per trajectory (default 1000)");
  scl->add_option("--trajectories", ccfg.opts.n_trajectories)
      ->capture_default_str();
  scl->add_option("--seed", ccfg.opts.seed)->capture_default_str();
  scl->add_option("--threads", ccfg.opts.threads)->capture_default_str();
  scl->add_option("--out", cl_out, "run directory (under --out-root)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return kExitConfig;
  }

  if (sim->parsed()) {
    apply_preset_or_params(sim_preset, sim_params, scfg.ps);
    scfg.preset_label = sim_preset;
    if (sim_kicks > 0) scfg.ps.n_kicks = sim_kicks;
    scfg.resume = !no_resume;
    scfg.phase_average = !no_phase_average;
    scfg.out_dir = resolve_out(out_root, sim_out);
    if (!emit_config.empty())
      io::write_text_file(emit_config, app.config_to_str(true, true));
    const auto sum = pipeline::simulate(scfg);
    if (sum.dry_run) {
      print_point_grid(sum);
      return kExitOk;
    }
    std::printf("run directory: %s\n", sum.run_dir.string().c_str());
    std::printf("points: %zu computed, %d reused\n", sum.points.size() -
                static_cast<std::size_t>(sum.n_reused), sum.n_reused);
    return kExitOk;
  }

  if (ana->parsed()) {
    parse_window(ana_window, acfg.window_lo, acfg.window_hi);
    acfg.source = ana_source == "pi0" ? scaling::Source::Pi0
                                      : scaling::Source::P2;
    const auto sum = pipeline::analyze(ana_dir, acfg);
    std::printf("collapse: chi2/dof = %.4g, residual rms = %.4g, %d sweeps\n",
                sum.scaling.chi2_per_dof, sum.scaling.residual_rms,
                sum.scaling.sweeps);
    std::printf("crossing estimate: q_c0 = %.6g (%d crossings%s)\n",
                sum.crossing.q_c0, sum.crossing.n_crossings,
                sum.crossing.fallback ? ", fallback" : "");
    std::printf("critical fit: q_c = %.6g +- %.3g, nu = %.4g +- %.3g\n",
                sum.fit.q_c, sum.fit.q_c_err, sum.fit.nu, sum.fit.nu_err);
    if (sum.fit.bootstrap.n_requested > 0)
      std::printf("bootstrap 68%%: nu in [%.4g, %.4g], q_c in [%.6g, %.6g]"
                  " (%d/%d replicas)\n",
                  sum.fit.bootstrap.nu_lo, sum.fit.bootstrap.nu_hi,
                  sum.fit.bootstrap.q_c_lo, sum.fit.bootstrap.q_c_hi,
                  sum.fit.bootstrap.n_requested - sum.fit.bootstrap.n_dropped,
                  sum.fit.bootstrap.n_requested);
    for (const auto& rel : sum.outputs)
      std::printf("wrote %s\n", (sum.run_dir / rel).string().c_str());
    return kExitOk;
  }

  if (uni->parsed()) {
    for (const auto& d : uni_dirs) ucfg.run_dirs.emplace_back(d);
    ucfg.out_dir = resolve_out(out_root, uni_out);
    const auto sum = pipeline::universality(ucfg);
    std::printf("%-8s %-10s %-10s %s\n", "label", "nu", "sigma_nu",
                "deviation");
    for (std::size_t i = 0; i < sum.report.entries.size(); ++i) {
      const auto& e = sum.report.entries[i];
      std::printf("%-8s %-10.4g %-10.3g %.2f sigma%s\n", e.label.c_str(),
                  e.nu, e.nu_err, sum.report.deviation_sigma[i],
                  sum.report.flagged[i] ? "  <-- outlier" : "");
    }
    std::printf("weighted mean: nu = %.4g +- %.3g\n", sum.report.nu_mean,
                sum.report.nu_err);
    for (const auto& f : sum.outputs)
      std::printf("wrote %s\n", f.c_str());
    return kExitOk;
  }

  if (pre->parsed()) {
    if (!pre_emit.empty()) {
      std::fputs(io::parameter_set_to_json(model::preset(pre_emit)).c_str(),
                 stdout);
      return kExitOk;
    }
    std::printf("%-6s %-6s %-12s %-12s %-28s %-8s %s\n", "label", "kbar",
                "omega2/2pi", "omega3/2pi", "path", "q_c", "nu");
    for (const auto& ps : model::presets()) {
      const auto* ref = [&]() -> const model::PresetReference* {
        for (const auto& r : model::preset_references())
          if (r.label == ps.label) return &r;
        return nullptr;
      }();
      char path[64];
      std::snprintf(path, sizeof path, "K=%g..%g eps=%g..%g",
                    ps.path.k_start, ps.path.k_end, ps.path.eps_start,
                    ps.path.eps_end);
      std::printf("%-6s %-6.3g %-12.6g %-12.6g %-28s %-8.4g %.4g +- %.3g\n",
                  ps.label.c_str(), ps.kbar, ps.omega2.over_two_pi(),
                  ps.omega3.over_two_pi(), path, ref ? ref->q_c : 0.0,
                  ref ? ref->nu : 0.0, ref ? ref->nu_err : 0.0);
    }
    return kExitOk;
  }

  if (ssc->parsed()) {
    if (sy_family == "zeta-linear")
      sycfg.synth.family = baselines::SynthFamily::ZetaLinear;
    if (sy_points > 0) {
      sycfg.synth.q_values.clear();
      for (int i = 0; i < sy_points; ++i)
        sycfg.synth.q_values.push_back(
            sycfg.synth.q_c *
            (0.75 + 0.5 * (sy_points == 1 ? 0.5 : i / (sy_points - 1.0))));
    }
    sycfg.out_dir = resolve_out(out_root, sy_out);
    const auto sum = pipeline::synth_run(sycfg);
    std::printf("synthetic run: %s (%zu points)\n",
                sum.run_dir.string().c_str(), sum.points.size());
    return kExitOk;
  }

  if (scl->parsed()) {
    ccfg.ps = model::preset(cl_preset);
    if (cl_kicks > 0) ccfg.ps.n_kicks = cl_kicks;
    ccfg.out_dir = resolve_out(out_root, cl_out);
    const auto sum = pipeline::classical_run(ccfg);
    std::printf("classical run: %s\n", sum.run_dir.string().c_str());
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qpkr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return qpkr::exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
