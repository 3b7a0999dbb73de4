#include "qpkr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "qpkr/errors.hpp"
#include "qpkr/io.hpp"
#include "qpkr/numerics.hpp"
#include "qpkr/version.hpp"
#include "serial.hpp"

namespace qpkr::pipeline {

using io::detail::json;

namespace {

std::string point_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "point_%03d.csv", index);
  return buf;
}

std::vector<PointEntry> control_grid(const model::ParameterSet& ps,
                                     int n_points) {
  if (n_points < 1) throw ConfigError("simulate: need at least one point");
  std::vector<PointEntry> points;
  points.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double s =
        n_points == 1 ? 0.0 : static_cast<double>(i) / (n_points - 1);
    PointEntry e;
    e.index = i;
    std::tie(e.K, e.eps) = model::path_point(ps.path, s);
    e.control_value = model::path_coordinate(ps.path, s);
    e.file = point_filename(i);
    points.push_back(e);
  }
  return points;
}

json grid_json(const std::vector<PointEntry>& points,
               const model::ParameterSet& ps) {
  json values = json::array();
  for (const auto& p : points) values.push_back(p.control_value);
  return json{{"n_points", points.size()},
              {"coordinate", model::to_string(ps.path.coordinate)},
              {"control_values", values}};
}

json manifest_skeleton(const SimulateConfig& cfg,
                       const std::vector<PointEntry>& points,
                       const std::vector<long>& record) {
  json m;
  m["kind"] = "simulation";
  m["code_version"] = kVersion;
  m["created_utc"] = io::utc_timestamp();
  m["updated_utc"] = m["created_utc"];
  if (cfg.preset_label.empty())
    m["preset"] = nullptr;
  else
    m["preset"] = cfg.preset_label;
  m["parameters"] = io::detail::parameter_set_to_json(cfg.ps);
  m["seed"] = cfg.seed;
  m["grid"] = grid_json(points, cfg.ps);
  m["ensemble"] = json{
      {"n_realizations", cfg.n_realizations},
      {"m_lattice", cfg.m_lattice},
      {"grid_size", num::next_pow2(4 * cfg.m_lattice)},
      {"phase_average", cfg.phase_average},
  };
  m["record_times"] = record;
  m["files"] = json::array();
  return m;
}

// The configuration part of a manifest, used to decide whether an existing
// run directory belongs to this config (timestamps and file digests differ
// between partial runs, so they stay out of the comparison).
json config_fingerprint(const json& manifest) {
  json f;
  for (const char* key :
       {"kind", "parameters", "seed", "grid", "ensemble", "record_times"})
    f[key] = manifest.contains(key) ? manifest.at(key) : json{};
  return f;
}

json load_manifest(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "manifest.json";
  if (!std::filesystem::exists(path))
    throw ConfigError("no manifest.json in " + run_dir.string());
  try {
    return json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

void save_manifest(const std::filesystem::path& run_dir, json& manifest) {
  manifest["updated_utc"] = io::utc_timestamp();
  io::write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

engine::EnsembleResult series_from_lambda(const scaling::LambdaSeries& s) {
  engine::EnsembleResult r;
  r.times = s.times;
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    const double t = static_cast<double>(s.times[j]);
    const double p2 = s.lambda[j] * std::pow(t, 2.0 / 3.0);
    const double sigma_ln = s.lambda_err[j];
    r.p2.push_back(p2);
    r.p2_err.push_back(p2 * sigma_ln);
    const double pi0 = 1.0 / std::sqrt(p2);
    r.pi0.push_back(pi0);
    r.pi0_err.push_back(pi0 * sigma_ln / 2.0);
  }
  return r;
}

}  // namespace

SimulateSummary simulate(const SimulateConfig& cfg) {
  cfg.ps.validate();
  if (cfg.out_dir.empty()) throw ConfigError("simulate: no output directory");
  if (cfg.n_realizations < 2)
    throw ConfigError("simulate: need at least 2 realizations");

  std::vector<long> record = cfg.record_at;
  if (record.empty()) record = engine::default_record_times(cfg.ps.n_kicks);

  SimulateSummary out;
  out.run_dir = cfg.out_dir;
  out.points = control_grid(cfg.ps, cfg.n_points);
  out.dry_run = cfg.dry_run;
  if (cfg.dry_run) return out;

  std::filesystem::create_directories(cfg.out_dir);
  json manifest = manifest_skeleton(cfg, out.points, record);

  // Resume: an existing manifest must describe this exact configuration;
  // its completed points are reused when the file digest still matches.
  std::vector<std::string> have_sha(out.points.size());
  if (std::filesystem::exists(cfg.out_dir / "manifest.json")) {
    const json previous = load_manifest(cfg.out_dir);
    if (config_fingerprint(previous) != config_fingerprint(manifest))
      throw ConfigError(
          "simulate: " + cfg.out_dir.string() +
          " already holds a run with a different configuration");
    if (cfg.resume && previous.contains("files"))
      for (const auto& f : previous.at("files")) {
        const int idx = f.at("index").get<int>();
        if (idx < 0 || idx >= static_cast<int>(out.points.size())) continue;
        const auto path = cfg.out_dir / out.points[idx].file;
        if (std::filesystem::exists(path) &&
            io::sha256_file(path) == f.at("sha256").get<std::string>())
          have_sha[idx] = f.at("sha256").get<std::string>();
      }
  }

  for (auto& point : out.points) {
    const auto idx = static_cast<std::size_t>(point.index);
    if (!have_sha[idx].empty()) {
      point.sha256 = have_sha[idx];
      ++out.n_reused;
    } else {
      engine::EnsembleOptions eopts;
      eopts.m_lattice = cfg.m_lattice;
      eopts.n_realizations = cfg.n_realizations;
      eopts.threads = cfg.threads;
      eopts.phase_average = cfg.phase_average;
      eopts.seed = cfg.seed + static_cast<std::uint64_t>(point.index);
      const auto ens =
          engine::run_ensemble(cfg.ps, point.K, point.eps, record, eopts);
      io::write_observable_csv(cfg.out_dir / point.file, ens);
      point.sha256 = io::sha256_file(cfg.out_dir / point.file);
      ++out.n_computed;
    }
    manifest["files"].push_back(json{{"index", point.index},
                                     {"control_value", point.control_value},
                                     {"K", point.K},
                                     {"eps", point.eps},
                                     {"file", point.file},
                                     {"seed", cfg.seed + static_cast<std::uint64_t>(
                                                             point.index)},
                                     {"sha256", point.sha256}});
    save_manifest(cfg.out_dir, manifest);
  }
  return out;
}

namespace {

std::string branch_name(scaling::Branch b) { return scaling::to_string(b); }

json scaling_to_json(const scaling::ScalingResult& sr) {
  json series = json::array();
  for (const auto& s : sr.series)
    series.push_back(json{{"control_value", s.control_value},
                          {"ln_xi", s.ln_xi},
                          {"sigma_ln_xi", s.sigma_ln_xi},
                          {"assigned_branch", branch_name(s.assigned)},
                          {"classified_branch", branch_name(s.classified)},
                          {"slope", s.slope},
                          {"slope_err", s.slope_err}});
  return json{{"series", series},
              {"gauge_ref", sr.gauge_ref},
              {"shape_exponent", sr.shape_exponent},
              {"ln_lambda_c", sr.ln_lambda_c},
              {"chi2", sr.chi2},
              {"n_points", sr.n_points},
              {"dof", sr.dof},
              {"chi2_per_dof", sr.chi2_per_dof},
              {"residual_rms", sr.residual_rms},
              {"sweeps", sr.sweeps},
              {"converged", sr.converged},
              {"zeta_domain", json::array({sr.zeta_lo, sr.zeta_hi})},
              {"coeffs", sr.coeffs}};
}

json fit_to_json(const crit::CriticalFit& fit,
                 const crit::CrossingEstimate& crossing,
                 const AnalyzeConfig& cfg) {
  json j{{"alpha", fit.alpha},
         {"alpha_err", fit.alpha_err},
         {"q_c", fit.q_c},
         {"q_c_err", fit.q_c_err},
         {"nu", fit.nu},
         {"nu_err", fit.nu_err},
         {"beta_cutoff", fit.beta_cutoff},
         {"beta_err", fit.beta_err},
         {"chi2", fit.chi2},
         {"chi2_per_dof", fit.chi2_per_dof},
         {"window_lo", fit.window_lo},
         {"window_hi", fit.window_hi},
         {"n_used", fit.n_used},
         {"converged", fit.converged},
         // The fit minimizes residuals of 1/xi weighted by propagated
         // errors; recorded so downstream comparisons know the convention.
         {"weighting", fit.bootstrap.ln_xi_sigma.empty()
                           ? "inverse_xi_residuals/curvature"
                           : "inverse_xi_residuals/collapse_bootstrap"},
         {"analysis_window", json{{"lo", cfg.window_lo}, {"hi", cfg.window_hi}}},
         {"source", cfg.source == scaling::Source::P2 ? "p2" : "pi0"},
         {"crossing", json{{"q_c0", crossing.q_c0},
                           {"fallback", crossing.fallback},
                           {"n_crossings", crossing.n_crossings}}}};
  const auto& b = fit.bootstrap;
  if (b.n_requested > 0) {
    j["bootstrap"] = json{{"n_requested", b.n_requested},
                          {"n_dropped", b.n_dropped},
                          {"nu_lo", b.nu_lo},
                          {"nu_hi", b.nu_hi},
                          {"q_c_lo", b.q_c_lo},
                          {"q_c_hi", b.q_c_hi},
                          {"small_sample_warning", b.small_sample_warning}};
  }
  return j;
}

}  // namespace

AnalyzeSummary analyze(const std::filesystem::path& run_dir,
                       const AnalyzeConfig& cfg) {
  if (cfg.window_lo < 1 || cfg.window_hi <= cfg.window_lo)
    throw ConfigError("analyze: bad time window");
  const json manifest = load_manifest(run_dir);
  const std::string kind = manifest.value("kind", "simulation");
  if (kind == "classical")
    throw ConfigError("analyze: " + run_dir.string() +
                      " is a classical baseline run, nothing to collapse");
  if (!manifest.contains("files") || manifest.at("files").empty())
    throw ConfigError("analyze: manifest lists no data files");
  const auto n_points =
      manifest.contains("grid")
          ? manifest.at("grid").at("n_points").get<std::size_t>()
          : manifest.at("files").size();
  if (manifest.at("files").size() != n_points)
    throw ConfigError("analyze: run is incomplete (" +
                      std::to_string(manifest.at("files").size()) + " of " +
                      std::to_string(n_points) + " points present)");

  // Digest validation before any numbers are trusted.
  std::vector<scaling::LambdaSeries> series;
  for (const auto& f : manifest.at("files")) {
    const auto path = run_dir / f.at("file").get<std::string>();
    if (!std::filesystem::exists(path))
      throw ConfigError("analyze: missing data file " + path.string());
    const std::string sha = io::sha256_file(path);
    if (sha != f.at("sha256").get<std::string>())
      throw ConfigError("analyze: digest mismatch for " + path.string() +
                        " (file changed since it was written)");
    const auto ens = io::read_observable_csv(path);
    series.push_back(scaling::lambda_series(
        ens, f.at("control_value").get<double>(), cfg.window_lo,
        cfg.window_hi, cfg.source));
  }

  AnalyzeSummary out;
  out.run_dir = run_dir;
  scaling::CollapseOptions copts = cfg.collapse;
  copts.init_ln_xi.clear();
  out.scaling = scaling::collapse(series, copts);
  out.crossing = crit::crossing_estimate(series);
  if (cfg.bootstrap_replicas > 0) {
    // Bootstrap-first: the replica collapses provide the ln xi error model
    // for the critical fit, then the same replicas give its intervals.
    crit::BootstrapOptions bopts;
    bopts.n_replicas = cfg.bootstrap_replicas;
    bopts.seed = cfg.bootstrap_seed;
    bopts.threads = cfg.threads;
    out.fit = crit::fit_critical_bootstrap(series, out.scaling,
                                           out.crossing.q_c0, copts, cfg.fit,
                                           bopts);
  } else {
    out.fit = crit::fit_critical(crit::xi_points(out.scaling),
                                 out.crossing.q_c0, cfg.fit);
  }

  const auto dir = run_dir / "analysis";
  std::filesystem::create_directories(dir);

  io::write_text_file(dir / "scaling.json",
                      scaling_to_json(out.scaling).dump(2) + "\n");
  out.outputs.push_back("analysis/scaling.json");

  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : out.scaling.f_samples)
      rows.push_back({io::g17(s.z), io::g17(s.ln_lambda),
                      branch_name(s.branch)});
    io::write_table_csv(dir / "fsamples.csv", {"z", "ln_lambda", "branch"},
                        rows);
    out.outputs.push_back("analysis/fsamples.csv");
  }
  {
    const auto& boot_sigma = out.fit.bootstrap.ln_xi_sigma;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < out.scaling.series.size(); ++i) {
      const auto& s = out.scaling.series[i];
      const double xi = std::exp(s.ln_xi);
      double sig = i < boot_sigma.size() ? boot_sigma[i] : s.sigma_ln_xi;
      const double err = std::isfinite(sig) ? xi * sig : 0.0;
      rows.push_back(
          {io::g17(s.control_value), io::g17(xi), io::g17(err)});
    }
    io::write_table_csv(dir / "xi.csv", {"control_value", "xi", "xi_err"},
                        rows);
    out.outputs.push_back("analysis/xi.csv");
  }
  io::write_text_file(dir / "fit.json",
                      fit_to_json(out.fit, out.crossing, cfg).dump(2) + "\n");
  out.outputs.push_back("analysis/fit.json");

  {
    json am;
    am["kind"] = "analysis";
    am["code_version"] = kVersion;
    am["created_utc"] = io::utc_timestamp();
    am["inputs_verified"] = manifest.at("files");
    am["options"] = json{
        {"window_lo", cfg.window_lo},
        {"window_hi", cfg.window_hi},
        {"source", cfg.source == scaling::Source::P2 ? "p2" : "pi0"},
        {"shape_exponent", cfg.collapse.shape_exponent},
        {"bootstrap_replicas", cfg.bootstrap_replicas},
        {"bootstrap_seed", cfg.bootstrap_seed},
    };
    json outs = json::array();
    for (const auto& rel : out.outputs)
      outs.push_back(json{{"file", rel},
                          {"sha256", io::sha256_file(run_dir / rel)}});
    am["outputs"] = outs;
    io::write_text_file(dir / "manifest.json", am.dump(2) + "\n");
    out.outputs.push_back("analysis/manifest.json");
  }
  return out;
}

UniversalitySummary universality(const UniversalityConfig& cfg) {
  struct Row {
    std::string label;
    double kbar = 0.0, w2 = 0.0, w3 = 0.0;
    std::string path;
    double q_c = 0.0, nu = 0.0, nu_err = 0.0;
  };
  std::vector<Row> rows;

  auto path_cell = [](const model::ControlPath& p) {
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", v);
      return std::string(buf);
    };
    return "K=" + num(p.k_start) + ".." + num(p.k_end) +
           " eps=" + num(p.eps_start) + ".." + num(p.eps_end) + " along " +
           model::to_string(p.coordinate);
  };

  if (cfg.from_table) {
    for (const auto& ref : model::preset_references()) {
      const auto& ps = model::preset(ref.label);
      rows.push_back({ref.label, ps.kbar, ps.omega2.over_two_pi(),
                      ps.omega3.over_two_pi(), path_cell(ps.path), ref.q_c,
                      ref.nu, ref.nu_err});
    }
  } else {
    if (cfg.run_dirs.size() < 2)
      throw ConfigError("universality: need at least 2 analyzed runs");
    for (const auto& dir : cfg.run_dirs) {
      const json manifest = load_manifest(dir);
      const auto fit_path = dir / "analysis" / "fit.json";
      if (!std::filesystem::exists(fit_path))
        throw ConfigError("universality: " + dir.string() +
                          " has no analysis/fit.json (run analyze first)");
      json fit;
      try {
        fit = json::parse(io::read_text_file(fit_path));
      } catch (const json::exception& e) {
        throw ConfigError("universality: " + fit_path.string() + ": " +
                          e.what());
      }
      const auto ps =
          io::detail::parameter_set_from_json(manifest.at("parameters"));
      std::string label = ps.label;
      if (manifest.contains("preset") && manifest.at("preset").is_string())
        label = manifest.at("preset").get<std::string>();
      if (label.empty()) label = dir.filename().string();
      double nu_err = fit.at("nu_err").get<double>();
      if (fit.contains("bootstrap")) {
        // Bootstrap percentile interval is the authoritative uncertainty.
        const auto& b = fit.at("bootstrap");
        nu_err = 0.5 * (b.at("nu_hi").get<double>() -
                        b.at("nu_lo").get<double>());
      }
      rows.push_back({label, ps.kbar, ps.omega2.over_two_pi(),
                      ps.omega3.over_two_pi(), path_cell(ps.path),
                      fit.at("q_c").get<double>(), fit.at("nu").get<double>(),
                      nu_err});
    }
  }

  std::vector<crit::UniversalityEntry> entries;
  for (const auto& r : rows)
    entries.push_back({r.label, r.q_c, r.nu, r.nu_err});

  UniversalitySummary out;
  out.report = crit::universality_report(entries);

  std::filesystem::path dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
  std::filesystem::create_directories(dir);
  {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows)
      cells.push_back({r.label, io::g17(r.kbar), io::g17(r.w2), io::g17(r.w3),
                       r.path, io::g17(r.q_c), io::g17(r.nu),
                       io::g17(r.nu_err)});
    io::write_table_csv(dir / "universality.csv",
                        {"label", "kbar", "omega2_over_2pi", "omega3_over_2pi",
                         "path", "q_c", "nu", "sigma_nu"},
                        cells);
    out.outputs.push_back((dir / "universality.csv").string());
  }
  {
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows)
      cells.push_back(
          {r.label, io::g17(r.nu), io::g17(r.nu_err), io::g17(1.58)});
    io::write_table_csv(dir / "exponents.csv",
                        {"label", "nu", "sigma_nu", "reference"}, cells);
    out.outputs.push_back((dir / "exponents.csv").string());
  }
  return out;
}

SimulateSummary synth_run(const SynthConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("synth: no output directory");
  const auto data = baselines::synth_scaling_data(cfg.synth);
  std::filesystem::create_directories(cfg.out_dir);

  SimulateSummary out;
  out.run_dir = cfg.out_dir;

  json manifest;
  manifest["kind"] = "synthetic";
  manifest["code_version"] = kVersion;
  manifest["created_utc"] = io::utc_timestamp();
  manifest["updated_utc"] = manifest["created_utc"];
  manifest["truth"] = json{
      {"alpha", cfg.synth.alpha},
      {"q_c", cfg.synth.q_c},
      {"nu", cfg.synth.nu},
      {"beta", cfg.synth.beta},
      {"ln_lambda_c", cfg.synth.ln_lambda_c},
      {"shape_exponent", cfg.synth.shape_exponent},
      {"family", cfg.synth.family == baselines::SynthFamily::ZetaLinear
                     ? "zeta_linear"
                     : "softplus"},
      {"noise", cfg.synth.noise},
      {"seed", cfg.synth.seed},
  };

  // A nominal parameter set so reports can label the run; the synthetic
  // family has no microscopic dynamics behind it.
  model::ParameterSet ps;
  ps.label = "synthetic";
  ps.n_kicks = static_cast<int>(cfg.n_kicks);
  ps.path.k_start = data.front().control_value;
  ps.path.k_end = data.back().control_value;
  ps.path.eps_start = 0.0;
  ps.path.eps_end = 0.0;
  ps.path.coordinate = model::ControlPath::Coordinate::K;
  manifest["parameters"] = io::detail::parameter_set_to_json(ps);
  manifest["preset"] = nullptr;
  manifest["seed"] = cfg.synth.seed;

  json values = json::array();
  for (const auto& s : data) values.push_back(s.control_value);
  manifest["grid"] = json{{"n_points", data.size()},
                          {"coordinate", "K"},
                          {"control_values", values}};
  manifest["record_times"] = data.front().times;
  manifest["files"] = json::array();

  for (std::size_t i = 0; i < data.size(); ++i) {
    PointEntry e;
    e.index = static_cast<int>(i);
    e.control_value = data[i].control_value;
    e.K = data[i].control_value;
    e.eps = 0.0;
    e.file = point_filename(e.index);
    io::write_observable_csv(cfg.out_dir / e.file,
                             series_from_lambda(data[i]));
    e.sha256 = io::sha256_file(cfg.out_dir / e.file);
    manifest["files"].push_back(json{{"index", e.index},
                                     {"control_value", e.control_value},
                                     {"K", e.K},
                                     {"eps", e.eps},
                                     {"file", e.file},
                                     {"sha256", e.sha256}});
    out.points.push_back(e);
    ++out.n_computed;
  }
  save_manifest(cfg.out_dir, manifest);
  return out;
}

SimulateSummary classical_run(const ClassicalConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("classical: no output directory");
  const auto result = baselines::classical_diffusion(cfg.ps, cfg.K, cfg.eps,
                                                     cfg.opts);
  std::filesystem::create_directories(cfg.out_dir);

  engine::EnsembleResult ens;
  ens.times = result.times;
  ens.p2 = result.p2;
  ens.p2_err = result.p2_err;
  ens.pi0.assign(result.times.size(), 0.0);
  ens.pi0_err.assign(result.times.size(), 0.0);

  SimulateSummary out;
  out.run_dir = cfg.out_dir;
  PointEntry e;
  e.index = 0;
  e.control_value = cfg.K;
  e.K = cfg.K;
  e.eps = cfg.eps;
  e.file = "classical.csv";
  io::write_observable_csv(cfg.out_dir / e.file, ens);
  e.sha256 = io::sha256_file(cfg.out_dir / e.file);
  out.points.push_back(e);
  out.n_computed = 1;

  json manifest;
  manifest["kind"] = "classical";
  manifest["code_version"] = kVersion;
  manifest["created_utc"] = io::utc_timestamp();
  manifest["updated_utc"] = manifest["created_utc"];
  manifest["parameters"] = io::detail::parameter_set_to_json(cfg.ps);
  manifest["preset"] = nullptr;
  manifest["seed"] = cfg.opts.seed;
  manifest["ensemble"] = json{{"n_trajectories", cfg.opts.n_trajectories},
                              {"phase_average", cfg.opts.phase_average}};
  manifest["files"] = json::array({json{{"index", 0},
                                        {"control_value", e.control_value},
                                        {"K", e.K},
                                        {"eps", e.eps},
                                        {"file", e.file},
                                        {"sha256", e.sha256}}});
  save_manifest(cfg.out_dir, manifest);
  return out;
}

}  // namespace qpkr::pipeline
