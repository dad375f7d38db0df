// cqedsim: tables, trajectory ensembles and their analyses from one config tree.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "cqed/errors.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/units.hpp"

using namespace cqed;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string preset;
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--preset", c.preset, "hood, pinkse or custom");
  cmd->add_option("--config", c.config_file, "JSON config tree")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "dotted override, e.g. --set trigger.threshold=0.4")->allow_extra_args(false);
  cmd->add_option("--n", c.n, "number of trajectories");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--out", c.out, "output directory");
}

RunConfig resolve(const Common& c) {
  nlohmann::json file = nlohmann::json::object();
  if (!c.config_file.empty()) file = load_config_file(c.config_file);
  CliOverrides f;
  f.preset = c.preset;
  f.sets = c.sets;
  f.n = c.n;
  f.seed = c.seed;
  f.out = c.out;
  return resolve_config(file, f);
}

fs::path prepare_out(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  std::ofstream(config.out_dir / "config.json") << config.tree.dump(2) << "\n";
  return config.out_dir;
}

DriveTables tables_for(const RunConfig& config) {
  return load_drive_tables(config, config.out_dir / "cache", &std::cerr);
}

void finish(const fs::path& path, const RunConfig& config, const std::string& command,
            nlohmann::json extra = nlohmann::json::object()) {
  stamp_file(path, config);
  nlohmann::json meta = output_metadata(config, command);
  for (auto& [k, v] : extra.items()) meta[k] = v;
  write_sidecar(path, meta);
  std::cerr << "wrote " << path.string() << "\n";
}

nlohmann::json summary_json(const DurationSummary& s) {
  nlohmann::json j;
  j["n_run"] = s.n_run;
  j["n_counted"] = s.durations.size();
  j["n_not_triggered"] = s.n_not_triggered;
  j["n_no_transit"] = s.n_no_transit;
  j["n_failed"] = s.failures.size();
  if (s.histogram) {
    j["mean_us"] = s.histogram->mean;
    j["dispersion_us"] = s.histogram->dispersion;
  }
  nlohmann::json f = nlohmann::json::array();
  for (const auto& e : s.failures) f.push_back({{"index", e.index}, {"seed", e.seed}, {"error", e.message}});
  j["failures"] = f;
  return j;
}

void report_failures(const std::vector<EnsembleFailure>& failures) {
  for (const auto& f : failures) std::cerr << "trajectory " << f.index << " (seed " << f.seed << ") failed: " << f.message << "\n";
  if (!failures.empty()) std::cerr << failures.size() << " trajectories failed; outputs are partial\n";
}

int cmd_table_build(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const DriveTables t = tables_for(config);
  for (const auto& [name, table] : {std::pair{"probe", t.probe}, std::pair{"trap", t.trap}}) {
    const fs::path p = out / (std::string("table_") + name + ".csv");
    write_table(*table, p);
    stamp_file(p, config);
    std::cerr << "wrote " << p.string() << " (fock cutoff " << table->params.fock_cutoff << ")\n";
  }
  return 0;
}

int cmd_sim_run(const RunConfig& config, std::size_t save_trajectories) {
  const fs::path out = prepare_out(config);
  const DriveTables tables = tables_for(config);

  struct Row {
    std::uint64_t seed;
    std::optional<double> duration;
    bool triggered;
    Termination term;
    double end_time;
  };
  const std::function<Row(const TrajectoryRecord&)> fn = [&](const TrajectoryRecord& r) {
    return Row{r.seed, record_duration(r, config), r.trigger_time.has_value(), r.termination, r.end_time};
  };
  const unsigned threads = static_cast<unsigned>(config.tree["run"]["threads"].get<long long>());
  auto mapped = map_ensemble(config.sim, tables, config.n_trajectories, config.seed, fn, threads);
  report_failures(mapped.failures);

  const fs::path per = out / "transits.csv";
  {
    std::ofstream f(per);
    f << "index,seed,triggered,termination,end_time,duration\n";
    char buf[256];
    for (std::size_t i = 0; i < mapped.results.size(); ++i) {
      const auto& r = mapped.results[i];
      if (!r) continue;
      std::snprintf(buf, sizeof buf, "%zu,%llu,%d,%s,%.10g,", i, static_cast<unsigned long long>(r->seed),
                    r->triggered ? 1 : 0, to_string(r->term), r->end_time);
      f << buf;
      if (r->duration) {
        std::snprintf(buf, sizeof buf, "%.10g", *r->duration);
        f << buf;
      }
      f << "\n";
    }
  }
  finish(per, config, "sim run");

  DurationSummary s;
  s.n_run = config.n_trajectories;
  s.failures = mapped.failures;
  for (const auto& r : mapped.results) {
    if (!r) continue;
    if (config.sim.mode == TriggerMode::triggered && !r->triggered) ++s.n_not_triggered;
    else if (!r->duration) ++s.n_no_transit;
    else s.durations.push_back(*r->duration);
  }
  if (!s.durations.empty()) {
    s.histogram = duration_histogram(s.durations, config.analysis.bin_width);
    const fs::path h = out / "histogram.csv";
    write_histogram_csv(*s.histogram, h);
    finish(h, config, "sim run");
  }
  const nlohmann::json summary = summary_json(s);
  {
    nlohmann::json j = output_metadata(config, "sim run");
    j["summary"] = summary;
    std::ofstream(out / "summary.json") << j.dump(2) << "\n";
  }
  std::cout << summary.dump(2) << "\n";

  for (std::size_t i = 0; i < std::min(save_trajectories, config.n_trajectories); ++i) {
    const TrajectoryRecord rec = run_transit(config.sim, tables, trajectory_seed(config.seed, i));
    char name[64];
    std::snprintf(name, sizeof name, "trajectory_%04zu.csv", i);
    write_trajectory_csv(rec, out / name);
    finish(out / name, config, "sim run", {{"index", i}, {"trajectory_seed", rec.seed}});
  }
  return s.failures.empty() ? 0 : 3;
}

int cmd_histogram(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const DurationSummary s = ensemble_durations(config, tables_for(config));
  report_failures(s.failures);
  if (!s.histogram) throw EmptyEnsemble();
  const fs::path h = out / "histogram.csv";
  write_histogram_csv(*s.histogram, h);
  finish(h, config, "analyze histogram", {{"summary", summary_json(s)}});
  std::cout << summary_json(s).dump(2) << "\n";
  return s.failures.empty() ? 0 : 3;
}

int cmd_periods(const RunConfig& config) {
  const fs::path out = prepare_out(config);
  const DriveTables tables = tables_for(config);
  const std::function<std::vector<ModulationEvent>(const TrajectoryRecord&)> fn = [&](const TrajectoryRecord& r) {
    if (!r.switch_time) return std::vector<ModulationEvent>{};
    return record_modulations(r, config);
  };
  const unsigned threads = static_cast<unsigned>(config.tree["run"]["threads"].get<long long>());
  auto mapped = map_ensemble(config.sim, tables, config.n_trajectories, config.seed, fn, threads);
  report_failures(mapped.failures);
  std::vector<ModulationEvent> events;
  for (const auto& r : mapped.results)
    if (r) events.insert(events.end(), r->begin(), r->end());
  const fs::path m = out / "modulations.csv";
  write_modulations_csv(events, m);
  finish(m, config, "analyze periods", {{"n_events", events.size()}});

  const auto curve = period_amplitude_theory(*tables.trap, config.sim.trigger.observable);
  const fs::path th = out / "period_theory.csv";
  {
    std::ofstream f(th);
    f << "rho_max,P,A\n";
    char buf[128];
    for (const auto& p : curve) {
      std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", p.rho_max, p.period, p.amplitude);
      f << buf;
    }
  }
  finish(th, config, "analyze periods");
  std::cout << events.size() << " modulation events\n";
  return mapped.failures.empty() ? 0 : 3;
}

int cmd_spectrogram(const RunConfig& config, std::size_t count) {
  const fs::path out = prepare_out(config);
  const DriveTables tables = tables_for(config);
  // first pass: time spent after the drive switch; the longest ones are re-run in full
  const std::function<double(const TrajectoryRecord&)> fn = [](const TrajectoryRecord& r) {
    return r.switch_time ? r.end_time - *r.switch_time : 0.0;
  };
  const unsigned threads = static_cast<unsigned>(config.tree["run"]["threads"].get<long long>());
  auto mapped = map_ensemble(config.sim, tables, config.n_trajectories, config.seed, fn, threads);
  report_failures(mapped.failures);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mapped.results.size(); ++i)
    if (mapped.results[i] && *mapped.results[i] > 0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return *mapped.results[a] > *mapped.results[b];
  });
  if (idx.size() > count) idx.resize(count);
  for (std::size_t i : idx) {
    const TrajectoryRecord rec = run_transit(config.sim, tables, trajectory_seed(config.seed, i));
    const auto obs = rec.observable(config.sim.trigger.observable);
    std::size_t first = 0;
    while (first < rec.size() && rec.drive_flag[first] == 0) ++first;
    const std::vector<double> seg(obs.begin() + static_cast<std::ptrdiff_t>(first), obs.end());
    try {
      const Spectrogram s =
          spectrogram(seg, rec.dt_record, config.analysis.spectrogram_window, config.analysis.spectrogram_step);
      char name[64];
      std::snprintf(name, sizeof name, "spectrogram_%04zu.csv", i);
      write_spectrogram_csv(s, out / name);
      finish(out / name, config, "analyze spectrogram",
             {{"index", i}, {"trajectory_seed", rec.seed}, {"t_origin", rec.t[first]}});
      std::snprintf(name, sizeof name, "trajectory_%04zu.csv", i);
      write_trajectory_csv(rec, out / name);
      finish(out / name, config, "analyze spectrogram", {{"index", i}, {"trajectory_seed", rec.seed}});
    } catch (const SignalTooShort& e) {
      std::cerr << "trajectory " << i << ": " << e.what() << "\n";
    }
  }
  return mapped.failures.empty() ? 0 : 3;
}

int cmd_profiles(const RunConfig& config, bool compare_free_space) {
  const fs::path out = prepare_out(config);
  const std::size_t n_points = config.tree["profiles"]["n_points"].get<std::size_t>();
  const unsigned threads = static_cast<unsigned>(config.tree["run"]["threads"].get<long long>());
  const CoefficientTable table =
      cached_table(config.profile_params, "profile", config.n_grid, out / "cache", &std::cerr, threads);
  nlohmann::json freqs;
  for (ProfileAxis axis : {ProfileAxis::radial, ProfileAxis::axial}) {
    PotentialProfile p = effective_potential(table, axis, n_points);
    p.label = "cavity";
    const fs::path path = out / (std::string("profile_cavity_") + to_string(axis) + ".csv");
    write_profile_csv(p, path);
    freqs[std::string("cavity_") + to_string(axis) + "_khz"] = harmonic_frequency_khz(p, table.params.mass);
    finish(path, config, "analyze profiles");
  }
  if (compare_free_space) {
    const FreeSpaceParams fp = free_space_equivalent(config.profile_params, config.calibration);
    auto [radial, axial] = build_free_space_profiles(fp, n_points, config.n_grid);
    const nlohmann::json fmeta = {{"calibration", to_string(fp.calibration)},
                                  {"rabi_peak_mhz", units::to_mhz(fp.rabi_peak)},
                                  {"detuning_mhz", units::to_mhz(fp.detuning)}};
    for (PotentialProfile* p : {&radial, &axial}) {
      const fs::path path = out / (std::string("profile_free_space_") + to_string(p->axis) + ".csv");
      write_profile_csv(*p, path);
      freqs[std::string("free_space_") + to_string(p->axis) + "_khz"] = harmonic_frequency_khz(*p, fp.mass);
      finish(path, config, "analyze profiles", {{"free_space", fmeta}});
    }
  }
  std::cout << freqs.dump(2) << "\n";
  return 0;
}

int cmd_validity(const RunConfig& config, double delta_p) {
  const SystemParams& p = config.sim.params;
  if (!(delta_p > 0)) {
    // thermal spread at the source temperature
    const double sigma_v = std::sqrt(units::kB_si * config.sim.initial.temperature_uK * 1e-6 / p.mass);
    delta_p = sigma_v / (units::hbar_over_mass(p.mass) * p.wavenumber());
  }
  const ValidityReport r = validity_report(p, delta_p);
  nlohmann::json j = {{"delta_p_hbar_k", delta_p},
                      {"epsilon1", r.epsilon1},
                      {"epsilon2", r.epsilon2},
                      {"recoil_over_gamma", r.recoil_over_gamma},
                      {"recoil_over_kappa", r.recoil_over_kappa},
                      {"valid", r.epsilon1 < 1.0 && r.epsilon2 < 1.0}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cqedsim: atom trajectories in a driven optical cavity"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  auto* table = app.add_subcommand("table", "coefficient tables")->require_subcommand(1);
  auto* table_build = table->add_subcommand("build", "build (or load from cache) the probe and trap tables");
  add_common(table_build, common);

  auto* sim = app.add_subcommand("sim", "trajectory ensembles")->require_subcommand(1);
  auto* sim_run = sim->add_subcommand("run", "run an ensemble and record transit durations");
  add_common(sim_run, common);
  std::size_t save_trajectories = 0;
  sim_run->add_option("--save-trajectories", save_trajectories, "write the first K trajectories in full");

  auto* analyze = app.add_subcommand("analyze", "analyses")->require_subcommand(1);
  auto* a_hist = analyze->add_subcommand("histogram", "transit-duration histogram");
  add_common(a_hist, common);
  auto* a_periods = analyze->add_subcommand("periods", "modulation period/amplitude pairs and the theory curve");
  add_common(a_periods, common);
  auto* a_spec = analyze->add_subcommand("spectrogram", "windowed spectra of the longest transits");
  add_common(a_spec, common);
  std::size_t spec_count = 3;
  a_spec->add_option("--count", spec_count, "number of transits");
  auto* a_prof = analyze->add_subcommand("profiles", "potential and heating profiles");
  add_common(a_prof, common);
  std::string compare;
  a_prof->add_option("--compare", compare, "free-space: add the equivalent free-space profiles")
      ->check(CLI::IsMember({"free-space"}));

  auto* validity = app.add_subcommand("validity", "validity parameters of the semiclassical treatment");
  add_common(validity, common);
  double delta_p = 0.0;
  validity->add_option("--delta-p", delta_p, "momentum spread in hbar k (default: thermal at the source temperature)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = resolve(common);
    if (table_build->parsed()) return cmd_table_build(config);
    if (sim_run->parsed()) return cmd_sim_run(config, save_trajectories);
    if (a_hist->parsed()) return cmd_histogram(config);
    if (a_periods->parsed()) return cmd_periods(config);
    if (a_spec->parsed()) return cmd_spectrogram(config, spec_count);
    if (a_prof->parsed()) return cmd_profiles(config, !compare.empty());
    if (validity->parsed()) return cmd_validity(config, delta_p);
  } catch (const ValidationError& e) {
    std::cerr << "config error [" << e.field() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
