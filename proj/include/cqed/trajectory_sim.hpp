#pragma once

// Quasiclassical atom trajectories: initial-condition sampling, the Ito
// momentum SDE driven by table lookups, and the trigger/detection loop that
// switches the drive from probe to trap level.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cqed/coefficient_tables.hpp"

namespace cqed {

using Rng = std::mt19937_64;

/// Phase-space point: position in um, momentum in units of hbar k.
struct PhasePoint {
  Vec3 r;
  Vec3 p;
};

enum class LaunchMode { drop, fountain };

/// Coordinates: x along the cavity axis, y horizontal across the mode, z vertical (up).
struct InitialConditionModel {
  LaunchMode mode = LaunchMode::drop;
  double start_offset_waists = 1.75;  // start plane above (drop) or below (fountain) the axis
  double y_half_width_waists = 1.5;
  double vx_max = 0.0046;      // um/us, uniform in [-vx_max, vx_max]
  double temperature_uK = 20;  // horizontal thermal velocity spread (y)
  // drop: free fall from a source `source_height` above the axis, Gaussian height spread
  double source_height = 3200.0;  // um
  double source_spread = 600.0;   // um
  // fountain: Gaussian vertical speed, resampled until positive
  double vz_mean = 0.2;  // um/us
  double vz_std = 0.1;

  void validate() const;
};

PhasePoint sample_initial(const InitialConditionModel& model, const SystemParams& params, Rng& rng);

enum class DetectionNoise { none, gaussian, poisson };

struct TriggerConfig {
  DriveObservable observable = DriveObservable::field_squared;
  double probe_level = 0.05;  // empty-cavity photons at the probe drive
  double threshold = 0.32;
  double trap_level = 0.3;
  double window = 9.0;  // us
  double delay = 2.0;   // us
  DetectionNoise noise = DetectionNoise::gaussian;
  double noise_std = 0.05;  // std of the window average (gaussian)
  double count_rate = 2.0;  // counts per us per photon (poisson)

  void validate() const;
};

/// Rolling-window average of the noisy transmission, with a latched trigger.
class DetectionMonitor {
 public:
  DetectionMonitor(const TriggerConfig& config, double dt, int substeps = 1);

  struct Update {
    double averaged = 0.0;
    bool fired = false;  // true only on the step the trigger latches
  };
  /// `signal` is the instantaneous observable (photons); `t` the time at the end of the step.
  Update update(double signal, double t, Rng& rng);

  bool triggered() const { return trigger_time_.has_value(); }
  std::optional<double> trigger_time() const { return trigger_time_; }
  double last_average() const { return last_average_; }

 private:
  TriggerConfig config_;
  double dt_;
  int substeps_;
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  double sum_ = 0.0;
  double last_average_ = 0.0;
  std::optional<double> trigger_time_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Poisson sample by CDF inversion from a single uniform (keeps streams aligned).
int poisson_inverse(double mean, double u);

/// Probe- and trap-level tables sharing one parameter set.
struct DriveTables {
  std::shared_ptr<const CoefficientTable> probe;
  std::shared_ptr<const CoefficientTable> trap;
};

enum class TriggerMode { triggered, untriggered };

struct SimConfig {
  SystemParams params;  // drive is ignored; levels come from `trigger`
  InitialConditionModel initial;
  TriggerConfig trigger;
  TriggerMode mode = TriggerMode::triggered;
  double dt = 0.01;          // us
  double max_time = 5000.0;  // us
  double axial_bound = 5.0;  // um
  int record_stride = 10;
  bool noise = true;
  double friction_sign = 1.0;  // -1 reverses the friction term, 0 disables it
  /// Each step draws this many normals per noise channel and combines them,
  /// so a run at dt with 2 substeps shares its Brownian path with a run at dt/2.
  int noise_substeps = 1;

  void validate() const;
};

enum class Termination { radial_exit, axial_exit, max_time };
const char* to_string(Termination t);

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  double dt_record = 0.0;  // spacing of the recorded samples (us)
  std::vector<double> t;
  std::vector<Vec3> r;
  std::vector<Vec3> p;
  std::vector<double> g;
  std::vector<double> n_bar;
  std::vector<cplx> field;
  std::vector<double> excited;
  std::vector<int> drive_flag;  // 0 probe, 1 trap
  PhasePoint initial;
  std::optional<double> trigger_time;
  std::optional<double> switch_time;
  Termination termination = Termination::max_time;
  double end_time = 0.0;

  std::size_t size() const { return t.size(); }
  /// Observable used by the detection model (|<a>|^2 or <a^+a>).
  std::vector<double> observable(DriveObservable which) const;
  /// Empty-cavity level of that observable at each sample.
  std::vector<double> empty_level(const TriggerConfig& trigger) const;
};

/// Fokker-Planck coefficients at one point, in hbar k units.
struct MotionCoefficients {
  Vec3 force;     // mean force, hbar k / us
  double xi_coef = 0.0;     // cavity diffusion: D_c = xi_coef * u u^T, u = grad g / |grad g|
  Vec3 grad_g;
  double spont = 0.0;       // gamma <s^+ s>, recoil diffusion scale
  double chi = 0.0;
  CouplingPointData data;
};

MotionCoefficients motion_coefficients(const CoefficientTable& table, const Vec3& r, std::size_t& hint);

/// Diffusion tensor diagonal along the axes plus the cavity part, in (hbar k)^2/us.
struct DiffusionTensor {
  double xx = 0, yy = 0, zz = 0, xy = 0, xz = 0, yz = 0;
  double trace() const { return xx + yy + zz; }
};
DiffusionTensor diffusion_tensor(const MotionCoefficients& c, double wavenumber);

/// Stochastic momentum increment with covariance 2 D dt; consumes 4 normals per substep.
Vec3 momentum_noise(const MotionCoefficients& c, double wavenumber, double dt, int substeps, Rng& rng,
                    std::normal_distribution<double>& normal);

/// Kinetic plus tabulated potential energy (rad/us).
double mechanical_energy(const CoefficientTable& table, const PhasePoint& s);

/// Deterministic integrator for the conservative part plus optional friction
/// and noise at a fixed drive; used for property tests and frequency checks.
struct FixedDriveOptions {
  double dt = 0.01;
  bool noise = false;
  double friction_sign = 0.0;
  bool freeze_position = false;
};
PhasePoint propagate_fixed_drive(const CoefficientTable& table, PhasePoint s, double duration,
                                 const FixedDriveOptions& options, Rng& rng,
                                 const std::function<void(double, const PhasePoint&)>& observer = {});

DriveTables build_drive_tables(const SimConfig& config, std::size_t n_grid = 200, unsigned threads = 0);

TrajectoryRecord run_transit(const SimConfig& config, const DriveTables& tables, std::uint64_t seed);

/// Seed of trajectory i in an ensemble.
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::size_t index);

struct EnsembleFailure {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct EnsembleResult {
  std::vector<TrajectoryRecord> records;  // in index order; failed slots omitted
  std::vector<EnsembleFailure> failures;
};

EnsembleResult run_ensemble(const SimConfig& config, const DriveTables& tables, std::size_t n,
                            std::uint64_t base_seed, unsigned threads = 0);

/// Map each trajectory through `fn` without keeping records; results are in index order.
template <class T>
struct MappedEnsemble {
  std::vector<std::optional<T>> results;
  std::vector<EnsembleFailure> failures;
};

template <class T>
MappedEnsemble<T> map_ensemble(const SimConfig& config, const DriveTables& tables, std::size_t n,
                               std::uint64_t base_seed, const std::function<T(const TrajectoryRecord&)>& fn,
                               unsigned threads = 0);

void write_trajectory_csv(const TrajectoryRecord& rec, const std::filesystem::path& path);

}  // namespace cqed

#include "cqed/detail/ensemble_impl.hpp"
