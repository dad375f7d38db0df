#pragma once

// Run configuration: presets, a JSON key-value tree with dotted-path
// overrides, and the typed structures derived from it.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqed/analysis.hpp"
#include "cqed/free_space_model.hpp"
#include "cqed/trajectory_sim.hpp"

namespace cqed {

inline constexpr const char* kVersion = "0.1.0";

struct AnalysisSettings {
  double bandwidth_khz = 100.0;
  NoiseModel noise;
  double threshold_factor = 2.0;
  /// Durations are read from the noiseless filtered trace unless this is set;
  /// the threshold always uses the detection noise level.
  bool noisy_durations = false;
  double modulation_cutoff_khz = 25.0;
  ModulationOptions modulation;
  double bin_width = 50.0;
  double spectrogram_window = 25.0;
  double spectrogram_step = 5.0;
};

struct RunConfig {
  nlohmann::json tree;  // fully resolved key-value tree
  std::string preset;
  SimConfig sim;
  std::size_t n_trajectories = 100;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::size_t n_grid = 200;
  AnalysisSettings analysis;
  FreeSpaceCalibration calibration = FreeSpaceCalibration::loaded_center;
  SystemParams profile_params;  // parameters used for potential/heating profiles

  /// FNV-1a of the canonical dump of `tree` without run.out, as 16 hex digits.
  std::string hash() const;
};

/// Preset trees: "hood", "pinkse", and "custom" (no system values).
nlohmann::json preset_tree(const std::string& name);

/// Sets `value` at a dotted path, creating objects as needed. The value text
/// is parsed as JSON when possible, otherwise stored as a string.
void set_dotted(nlohmann::json& tree, const std::string& path, const std::string& value);

struct CliOverrides {
  std::string preset;
  std::vector<std::string> sets;  // key=value
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// Preset defaults, then the file tree, then flag overrides; validated.
/// Throws ValidationError naming the offending field.
RunConfig resolve_config(const nlohmann::json& file_tree, const CliOverrides& flags);
RunConfig resolve_config(const nlohmann::json& tree);

nlohmann::json load_config_file(const std::filesystem::path& path);

/// The resolved tree; resolve(serialize(r)) reproduces it.
nlohmann::json serialize(const RunConfig& config);

}  // namespace cqed
