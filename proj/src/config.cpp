#include "cqed/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"
#include "cqed/units.hpp"

namespace cqed {

using nlohmann::json;

namespace {

// Frequencies in the tree are cyclic MHz, lengths um, times us, masses amu.
json common_sections() {
  return {
      {"integrator",
       {{"dt", 0.01},
        {"max_time", 5000.0},
        {"axial_bound", 5.0},
        {"record_stride", 10},
        {"noise", true},
        {"friction_sign", 1.0},
        {"noise_substeps", 1}}},
      {"table", {{"n_grid", 200}}},
      {"run", {{"mode", "triggered"}, {"n_trajectories", 300}, {"seed", 1}, {"out", "out"}, {"threads", 0}}},
      {"analysis",
       {{"bandwidth_khz", 100.0},
        {"noise", "gaussian"},
        {"noise_std", 0.05},
        {"count_rate", 2.0},
        {"threshold_factor", 2.0},
        {"noisy_durations", false},
        {"modulation_cutoff_khz", 25.0},
        {"amplitude_floor", 0.05},
        {"swing_fraction", 0.02},
        {"bin_width", 50.0},
        {"spectrogram_window", 25.0},
        {"spectrogram_step", 5.0}}},
      {"free_space", {{"calibration", "loaded_center"}}},
      {"profiles", {{"n_points", 401}}},
  };
}

json hood_tree() {
  json t = common_sections();
  t["preset"] = "hood";
  t["system"] = {{"g0", 110.0},       {"gamma", 2.6},   {"kappa", 14.2}, {"delta_ac", -47.0},
                 {"delta_probe", -125.0}, {"wavelength", 0.852}, {"waist", 14.0},
                 {"mass", units::mass_cs133 / units::amu_si}, {"fock_cutoff", 0}};
  t["trigger"] = {{"observable", "field_squared"},
                  {"probe_level", 0.05},
                  {"threshold", 0.32},
                  {"trap_level", 0.3},
                  {"window", 9.0},
                  {"delay", 2.0},
                  {"noise", "gaussian"},
                  {"noise_std", 0.05},
                  {"count_rate", 2.0}};
  t["initial"] = {{"mode", "drop"},          {"start_offset_waists", 1.75}, {"y_half_width_waists", 1.5},
                  {"vx_max", 0.0046},        {"temperature_uK", 20.0},       {"source_height", 3200.0},
                  {"source_spread", 600.0},  {"vz_mean", 0.2},               {"vz_std", 0.1}};
  t["profiles"]["delta_ac"] = -47.0;
  t["profiles"]["delta_probe"] = -125.0;
  return t;
}

json pinkse_tree() {
  json t = hood_tree();
  t["preset"] = "pinkse";
  t["system"] = {{"g0", 16.0},       {"gamma", 3.0},   {"kappa", 1.4}, {"delta_ac", -35.0},
                 {"delta_probe", -40.0}, {"wavelength", 0.780}, {"waist", 29.0},
                 {"mass", units::mass_rb87 / units::amu_si}, {"fock_cutoff", 0}};
  t["trigger"] = {{"observable", "photon_number"},
                  {"probe_level", 0.15},
                  {"threshold", 0.85},
                  {"trap_level", 0.9},
                  {"window", 10.0},
                  {"delay", 0.0},
                  {"noise", "poisson"},
                  {"noise_std", 0.05},
                  {"count_rate", 2.0}};
  t["initial"]["mode"] = "fountain";
  t["initial"]["vx_max"] = 0.004;
  t["integrator"]["axial_bound"] = 50.0;
  t["analysis"]["noise"] = "poisson";
  t["analysis"]["bandwidth_khz"] = 50.0;
  t["analysis"]["modulation_cutoff_khz"] = 10.0;
  // the potential/heating figures use slightly different detunings
  t["profiles"]["delta_ac"] = -40.0;
  t["profiles"]["delta_probe"] = -45.0;
  return t;
}

const json& required(const json& tree, const std::string& section, const std::string& key) {
  auto s = tree.find(section);
  if (s == tree.end() || !s->is_object()) throw ValidationError(key, "missing section '" + section + "'");
  auto v = s->find(key);
  if (v == s->end() || v->is_null()) throw ValidationError(key, "missing value '" + section + "." + key + "'");
  return *v;
}

double num(const json& tree, const std::string& section, const std::string& key) {
  const json& v = required(tree, section, key);
  if (!v.is_number()) throw ValidationError(key, "'" + section + "." + key + "' must be a number");
  return v.get<double>();
}

long long integer(const json& tree, const std::string& section, const std::string& key) {
  const json& v = required(tree, section, key);
  if (!v.is_number_integer()) throw ValidationError(key, "'" + section + "." + key + "' must be an integer");
  return v.get<long long>();
}

bool boolean(const json& tree, const std::string& section, const std::string& key) {
  const json& v = required(tree, section, key);
  if (!v.is_boolean()) throw ValidationError(key, "'" + section + "." + key + "' must be true or false");
  return v.get<bool>();
}

std::string text(const json& tree, const std::string& section, const std::string& key) {
  const json& v = required(tree, section, key);
  if (!v.is_string()) throw ValidationError(key, "'" + section + "." + key + "' must be a string");
  return v.get<std::string>();
}

DetectionNoise noise_kind(const std::string& s, const std::string& field) {
  if (s == "none") return DetectionNoise::none;
  if (s == "gaussian") return DetectionNoise::gaussian;
  if (s == "poisson") return DetectionNoise::poisson;
  throw ValidationError(field, "unknown noise model '" + s + "'");
}

// Rejects keys that no preset defines, so typos do not pass silently.
void check_known_keys(const json& tree, const json& schema, const std::string& prefix) {
  for (auto it = tree.begin(); it != tree.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    auto s = schema.find(it.key());
    if (s == schema.end()) throw ValidationError(it.key(), "unknown config key '" + path + "'");
    if (s->is_object()) {
      if (!it->is_object()) throw ValidationError(it.key(), "'" + path + "' must be a section");
      check_known_keys(*it, *s, path);
    }
  }
}

json full_schema() {
  json s = pinkse_tree();
  s.merge_patch(hood_tree());
  return s;
}

std::string fnv1a_hex(const std::string& data) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(numerics::fnv1a(data)));
  return buf;
}

}  // namespace

// The output directory does not change any result, so it is left out.
std::string RunConfig::hash() const {
  json t = tree;
  if (t.contains("run") && t["run"].is_object()) t["run"].erase("out");
  return fnv1a_hex(t.dump());
}

json preset_tree(const std::string& name) {
  if (name == "hood") return hood_tree();
  if (name == "pinkse") return pinkse_tree();
  if (name == "custom") {
    // Experiment-independent defaults only; every system value must be supplied.
    json t = hood_tree();
    t["preset"] = "custom";
    t["system"] = json::object();
    t["profiles"].erase("delta_ac");
    t["profiles"].erase("delta_probe");
    return t;
  }
  throw ValidationError("preset", "unknown preset '" + name + "' (expected hood, pinkse or custom)");
}

void set_dotted(json& tree, const std::string& path, const std::string& value) {
  if (path.empty()) throw ValidationError("set", "empty key in --set");
  json* node = &tree;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ValidationError("set", "malformed key '" + path + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ValidationError(parts[i], "'" + parts[i] + "' is not a section");
    node = &child;
  }
  json parsed = json::parse(value, nullptr, false);
  (*node)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot read config file " + path.string());
  json j = json::parse(in, nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("config", "config file is not a JSON object: " + path.string());
  return j;
}

RunConfig resolve_config(const json& file_tree, const CliOverrides& flags) {
  std::string preset = flags.preset;
  if (preset.empty()) {
    auto p = file_tree.find("preset");
    preset = (p != file_tree.end() && p->is_string()) ? p->get<std::string>() : "hood";
  }
  json tree = preset_tree(preset);
  tree.merge_patch(file_tree);
  tree["preset"] = preset;
  for (const auto& kv : flags.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("set", "--set expects key=value, got '" + kv + "'");
    set_dotted(tree, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.n) tree["run"]["n_trajectories"] = *flags.n;
  if (flags.seed) tree["run"]["seed"] = *flags.seed;
  if (flags.out) tree["run"]["out"] = *flags.out;
  return resolve_config(tree);
}

RunConfig resolve_config(const json& tree_in) {
  if (!tree_in.is_object()) throw ValidationError("config", "config must be a JSON object");
  json tree = tree_in;
  static const json schema = full_schema();
  check_known_keys(tree, schema, "");

  RunConfig c;
  SystemParams& p = c.sim.params;
  const char* sys_keys[] = {"g0", "gamma", "kappa", "delta_ac", "delta_probe", "wavelength", "waist", "mass", "fock_cutoff"};
  for (const char* k : sys_keys) required(tree, "system", k);
  p.g0 = units::mhz(num(tree, "system", "g0"));
  p.gamma = units::mhz(num(tree, "system", "gamma"));
  p.kappa = units::mhz(num(tree, "system", "kappa"));
  p.delta_ac = units::mhz(num(tree, "system", "delta_ac"));
  p.delta_probe = units::mhz(num(tree, "system", "delta_probe"));
  p.wavelength = num(tree, "system", "wavelength");
  p.waist = num(tree, "system", "waist");
  p.mass = num(tree, "system", "mass") * units::amu_si;
  p.fock_cutoff = static_cast<int>(integer(tree, "system", "fock_cutoff"));
  p.drive = {0.0, 0.0};
  if (p.fock_cutoff != 0 && p.fock_cutoff < 2) throw ValidationError("fock_cutoff", "fock_cutoff must be 0 (auto) or >= 2");

  TriggerConfig& tr = c.sim.trigger;
  const std::string obs = text(tree, "trigger", "observable");
  if (obs == "field_squared") tr.observable = DriveObservable::field_squared;
  else if (obs == "photon_number") tr.observable = DriveObservable::photon_number;
  else throw ValidationError("observable", "unknown observable '" + obs + "'");
  tr.probe_level = num(tree, "trigger", "probe_level");
  tr.threshold = num(tree, "trigger", "threshold");
  tr.trap_level = num(tree, "trigger", "trap_level");
  tr.window = num(tree, "trigger", "window");
  tr.delay = num(tree, "trigger", "delay");
  tr.noise = noise_kind(text(tree, "trigger", "noise"), "noise");
  tr.noise_std = num(tree, "trigger", "noise_std");
  tr.count_rate = num(tree, "trigger", "count_rate");

  InitialConditionModel& ic = c.sim.initial;
  const std::string mode = text(tree, "initial", "mode");
  if (mode == "drop") ic.mode = LaunchMode::drop;
  else if (mode == "fountain") ic.mode = LaunchMode::fountain;
  else throw ValidationError("mode", "unknown launch mode '" + mode + "'");
  ic.start_offset_waists = num(tree, "initial", "start_offset_waists");
  ic.y_half_width_waists = num(tree, "initial", "y_half_width_waists");
  ic.vx_max = num(tree, "initial", "vx_max");
  ic.temperature_uK = num(tree, "initial", "temperature_uK");
  ic.source_height = num(tree, "initial", "source_height");
  ic.source_spread = num(tree, "initial", "source_spread");
  ic.vz_mean = num(tree, "initial", "vz_mean");
  ic.vz_std = num(tree, "initial", "vz_std");

  c.sim.dt = num(tree, "integrator", "dt");
  c.sim.max_time = num(tree, "integrator", "max_time");
  c.sim.axial_bound = num(tree, "integrator", "axial_bound");
  c.sim.record_stride = static_cast<int>(integer(tree, "integrator", "record_stride"));
  c.sim.noise = boolean(tree, "integrator", "noise");
  c.sim.friction_sign = num(tree, "integrator", "friction_sign");
  c.sim.noise_substeps = static_cast<int>(integer(tree, "integrator", "noise_substeps"));

  const std::string run_mode = text(tree, "run", "mode");
  if (run_mode == "triggered") c.sim.mode = TriggerMode::triggered;
  else if (run_mode == "untriggered") c.sim.mode = TriggerMode::untriggered;
  else throw ValidationError("mode", "run.mode must be triggered or untriggered");
  c.sim.validate();

  const long long n_grid = integer(tree, "table", "n_grid");
  if (n_grid < 64) throw ValidationError("n_grid", "table.n_grid must be at least 64");
  c.n_grid = static_cast<std::size_t>(n_grid);

  const long long n = integer(tree, "run", "n_trajectories");
  if (n < 1) throw ValidationError("n_trajectories", "run.n_trajectories must be positive");
  c.n_trajectories = static_cast<std::size_t>(n);
  const json& seed = required(tree, "run", "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw ValidationError("seed", "run.seed must be a non-negative integer");
  c.seed = seed.get<std::uint64_t>();
  c.out_dir = text(tree, "run", "out");
  if (integer(tree, "run", "threads") < 0) throw ValidationError("threads", "run.threads must be >= 0");

  AnalysisSettings& a = c.analysis;
  a.bandwidth_khz = num(tree, "analysis", "bandwidth_khz");
  a.noise.kind = noise_kind(text(tree, "analysis", "noise"), "noise");
  a.noise.std_after_filter = num(tree, "analysis", "noise_std");
  a.noise.count_rate = num(tree, "analysis", "count_rate");
  a.threshold_factor = num(tree, "analysis", "threshold_factor");
  a.noisy_durations = boolean(tree, "analysis", "noisy_durations");
  a.modulation_cutoff_khz = num(tree, "analysis", "modulation_cutoff_khz");
  a.modulation.amplitude_floor = num(tree, "analysis", "amplitude_floor");
  a.modulation.swing_fraction = num(tree, "analysis", "swing_fraction");
  a.bin_width = num(tree, "analysis", "bin_width");
  a.spectrogram_window = num(tree, "analysis", "spectrogram_window");
  a.spectrogram_step = num(tree, "analysis", "spectrogram_step");
  const double nyquist_khz = 1e3 / (2.0 * c.sim.dt * c.sim.record_stride);
  if (!(a.bandwidth_khz > 0 && a.bandwidth_khz < nyquist_khz))
    throw ValidationError("bandwidth_khz", "analysis.bandwidth_khz must lie in (0, Nyquist of the recorded trace)");
  if (!(a.modulation_cutoff_khz > 0 && a.modulation_cutoff_khz < nyquist_khz))
    throw ValidationError("modulation_cutoff_khz", "analysis.modulation_cutoff_khz out of range");
  if (!(a.noise.std_after_filter >= 0)) throw ValidationError("noise_std");
  if (!(a.noise.count_rate > 0)) throw ValidationError("count_rate");
  if (!(a.threshold_factor > 0)) throw ValidationError("threshold_factor");
  if (!(a.bin_width > 0)) throw ValidationError("bin_width");
  if (!(a.spectrogram_window > 0 && a.spectrogram_step > 0)) throw ValidationError("spectrogram_window");
  if (!(a.modulation.amplitude_floor >= 0 && a.modulation.swing_fraction >= 0))
    throw ValidationError("amplitude_floor");

  c.calibration = free_space_calibration_from_string(text(tree, "free_space", "calibration"));

  c.profile_params = p;
  // profile detunings default to the trajectory ones
  if (tree["profiles"].contains("delta_ac")) c.profile_params.delta_ac = units::mhz(num(tree, "profiles", "delta_ac"));
  if (tree["profiles"].contains("delta_probe"))
    c.profile_params.delta_probe = units::mhz(num(tree, "profiles", "delta_probe"));
  c.profile_params.drive = drive_for_target(c.profile_params, tr.trap_level, tr.observable);
  if (integer(tree, "profiles", "n_points") < 3) throw ValidationError("n_points");

  c.preset = tree["preset"].is_string() ? tree["preset"].get<std::string>() : "custom";
  c.tree = std::move(tree);
  return c;
}

json serialize(const RunConfig& config) { return config.tree; }

}  // namespace cqed
