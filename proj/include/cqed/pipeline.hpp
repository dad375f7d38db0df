#pragma once

// Orchestration shared by the command-line tool and the acceptance checks:
// cached table builds, per-trajectory transit durations, ensemble summaries
// and the file outputs of each command.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqed/config.hpp"

namespace cqed {

/// Content hash of (params incl. drive, drive label, grid size, kind).
std::string table_cache_key(const SystemParams& params, const std::string& drive_label, std::size_t n_grid);

/// Looks for `<cache_dir>/<key>.csv`; builds and stores it on a miss. Logs "cache hit"/"cache miss".
CoefficientTable cached_table(const SystemParams& params, const std::string& drive_label, std::size_t n_grid,
                              const std::filesystem::path& cache_dir, std::ostream* log, unsigned threads = 0);

/// Probe and trap tables for the configured trigger levels, through the cache.
/// An empty cache_dir disables caching.
DriveTables load_drive_tables(const RunConfig& config, const std::filesystem::path& cache_dir, std::ostream* log);

/// Transit duration of one record per the analysis settings; nullopt when the
/// record never leaves the empty-cavity band, or is an untriggered atom in a
/// triggered run.
std::optional<double> record_duration(const TrajectoryRecord& rec, const RunConfig& config);

struct DurationSummary {
  std::vector<double> durations;  // index order
  std::size_t n_run = 0;
  std::size_t n_not_triggered = 0;
  std::size_t n_no_transit = 0;
  std::vector<EnsembleFailure> failures;
  std::optional<DurationHistogram> histogram;  // empty when no durations
};

DurationSummary ensemble_durations(const RunConfig& config, const DriveTables& tables);

/// Modulation events with the angular momentum at mid-time, from the trap-drive part
/// of each triggered record.
std::vector<ModulationEvent> record_modulations(const TrajectoryRecord& rec, const RunConfig& config);

/// Common metadata block embedded in every output: config hash, seed, version, resolved config.
nlohmann::json output_metadata(const RunConfig& config, const std::string& command);

/// Writes `<path>.json` next to a data file. Keys are sorted, so output is deterministic.
void write_sidecar(const std::filesystem::path& data_path, const nlohmann::json& meta);

/// Prepends "# cqedsim <version> config_hash=<h> seed=<s>" to a written text file.
void stamp_file(const std::filesystem::path& path, const RunConfig& config);

}  // namespace cqed
