#include "cqed/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"

namespace cqed {

using nlohmann::json;

namespace {

std::string fnv1a_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(numerics::fnv1a(data)));
  return buf;
}

unsigned config_threads(const RunConfig& config) {
  return static_cast<unsigned>(config.tree.at("run").at("threads").get<long long>());
}

}  // namespace

std::string table_cache_key(const SystemParams& params, const std::string& drive_label, std::size_t n_grid) {
  json j;
  j["params"] = params;
  j["drive_label"] = drive_label;
  j["n_grid"] = n_grid;
  j["format_version"] = kTableFormatVersion;
  return fnv1a_hex(j.dump());
}

CoefficientTable cached_table(const SystemParams& params, const std::string& drive_label, std::size_t n_grid,
                              const std::filesystem::path& cache_dir, std::ostream* log, unsigned threads) {
  const std::string key = table_cache_key(params, drive_label, n_grid);
  const std::filesystem::path path = cache_dir / (drive_label + "-" + key + ".csv");
  if (!cache_dir.empty() && std::filesystem::exists(path)) {
    try {
      CoefficientTable t = read_table(path);
      if (log) *log << "table " << drive_label << ": cache hit " << key << "\n";
      return t;
    } catch (const Error& e) {
      if (log) *log << "table " << drive_label << ": unreadable cache entry, rebuilding (" << e.what() << ")\n";
    }
  }
  if (log) *log << "table " << drive_label << ": cache miss " << key << ", building " << n_grid << " points\n";
  TableBuildOptions opt;
  opt.n_grid = n_grid;
  opt.threads = threads;
  opt.drive_label = drive_label;
  CoefficientTable t = build_table(params, opt);
  if (!cache_dir.empty()) write_table(t, path, {{"cache_key", key}});
  return t;
}

DriveTables load_drive_tables(const RunConfig& config, const std::filesystem::path& cache_dir, std::ostream* log) {
  const SimConfig& sim = config.sim;
  SystemParams probe = sim.params;
  probe.drive = drive_for_target(probe, sim.trigger.probe_level, sim.trigger.observable);
  SystemParams trap = sim.params;
  trap.drive = drive_for_target(trap, sim.trigger.trap_level, sim.trigger.observable);
  const unsigned threads = config_threads(config);
  DriveTables t;
  t.probe = std::make_shared<const CoefficientTable>(
      cached_table(probe, "probe", config.n_grid, cache_dir, log, threads));
  t.trap = std::make_shared<const CoefficientTable>(cached_table(trap, "trap", config.n_grid, cache_dir, log, threads));
  return t;
}

namespace {

enum class DurationOutcome { ok, not_triggered, no_transit };

struct DurationResult {
  DurationOutcome outcome = DurationOutcome::ok;
  double duration = 0.0;
};

DurationResult classify(const TrajectoryRecord& rec, const RunConfig& config) {
  const SimConfig& sim = config.sim;
  const AnalysisSettings& a = config.analysis;
  if (sim.mode == TriggerMode::triggered && !rec.trigger_time) return {DurationOutcome::not_triggered, 0.0};
  const std::vector<double> obs = rec.observable(sim.trigger.observable);
  Rng rng(numerics::mix_seed(rec.seed, 3));
  const NoiseModel noise = a.noisy_durations ? a.noise : NoiseModel{};
  const TransitSignal sig = bandwidth_process(obs, rec.dt_record, a.bandwidth_khz, noise, rng);
  const double sd = filtered_noise_std(a.noise, sim.trigger.trap_level, rec.dt_record, a.bandwidth_khz);
  try {
    return {DurationOutcome::ok,
            transit_duration(sig.filtered, rec.empty_level(sim.trigger), rec.dt_record, sd, a.threshold_factor)};
  } catch (const NoTransit&) {
    return {DurationOutcome::no_transit, 0.0};
  }
}

}  // namespace

std::optional<double> record_duration(const TrajectoryRecord& rec, const RunConfig& config) {
  const DurationResult r = classify(rec, config);
  if (r.outcome != DurationOutcome::ok) return std::nullopt;
  return r.duration;
}

DurationSummary ensemble_durations(const RunConfig& config, const DriveTables& tables) {
  const std::function<DurationResult(const TrajectoryRecord&)> fn = [&](const TrajectoryRecord& rec) {
    return classify(rec, config);
  };
  auto mapped = map_ensemble(config.sim, tables, config.n_trajectories, config.seed, fn, config_threads(config));
  DurationSummary s;
  s.n_run = config.n_trajectories;
  s.failures = std::move(mapped.failures);
  for (const auto& r : mapped.results) {
    if (!r) continue;
    switch (r->outcome) {
      case DurationOutcome::ok: s.durations.push_back(r->duration); break;
      case DurationOutcome::not_triggered: ++s.n_not_triggered; break;
      case DurationOutcome::no_transit: ++s.n_no_transit; break;
    }
  }
  if (!s.durations.empty()) s.histogram = duration_histogram(s.durations, config.analysis.bin_width);
  return s;
}

std::vector<ModulationEvent> record_modulations(const TrajectoryRecord& rec, const RunConfig& config) {
  std::size_t first = 0;
  while (first < rec.size() && rec.drive_flag[first] == 0) ++first;
  if (rec.size() - first < 8) return {};
  const std::vector<double> obs = rec.observable(config.sim.trigger.observable);
  const std::vector<double> seg(obs.begin() + static_cast<std::ptrdiff_t>(first), obs.end());
  const ZeroPhaseLowPass filter(config.analysis.modulation_cutoff_khz, rec.dt_record);
  std::vector<ModulationEvent> events = extract_modulations(filter.apply(seg), rec.dt_record, config.analysis.modulation);
  const std::vector<double> L = angular_momentum_series(rec, config.sim.params.wavenumber());
  const double t0 = rec.t[first];
  for (auto& e : events) {
    // L at the trough between the two peaks
    const auto i = first + static_cast<std::size_t>(std::lround(e.t_mid / rec.dt_record));
    e.angular_momentum = L[std::min(i, rec.size() - 1)];
    e.t_mid += t0;
  }
  return events;
}

json output_metadata(const RunConfig& config, const std::string& command) {
  return {{"command", command},
          {"config_hash", config.hash()},
          {"seed", config.seed},
          {"version", kVersion},
          {"config", config.tree}};
}

void write_sidecar(const std::filesystem::path& data_path, const json& meta) {
  std::filesystem::path side = data_path;
  side += ".json";
  std::ofstream out(side);
  if (!out) throw Error("cannot write " + side.string());
  out << meta.dump(2) << "\n";
}

void stamp_file(const std::filesystem::path& path, const RunConfig& config) {
  std::string body;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    body.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "# cqedsim " << kVersion << " config_hash=" << config.hash() << " seed=" << config.seed << "\n" << body;
}

}  // namespace cqed
