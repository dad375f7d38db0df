#pragma once

// Post-processing of transmission traces: detection bandwidth and noise,
// transit durations, modulation period/amplitude pairs, the conservative
// theory curve, angular momentum, and windowed spectra.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "cqed/coefficient_tables.hpp"
#include "cqed/trajectory_sim.hpp"

namespace cqed {

/// Zero-phase low-pass: second-order Butterworth run forward then backward.
class ZeroPhaseLowPass {
 public:
  ZeroPhaseLowPass(double cutoff_khz, double dt_us);
  std::vector<double> apply(const std::vector<double>& x) const;
  /// Sum of squared impulse-response taps of the forward-backward cascade,
  /// i.e. the white-noise variance gain.
  double noise_gain() const { return noise_gain_; }
  double cutoff_khz() const { return cutoff_khz_; }

 private:
  std::vector<double> pass(const std::vector<double>& x) const;
  double b0_, b1_, b2_, a1_, a2_;
  double cutoff_khz_;
  double noise_gain_ = 0.0;
};

struct NoiseModel {
  DetectionNoise kind = DetectionNoise::none;
  double std_after_filter = 0.0;  // gaussian: std of the filtered noise
  double count_rate = 2.0;        // poisson: counts per us per photon
};

struct TransitSignal {
  double dt = 0.0;
  std::vector<double> raw;
  std::vector<double> filtered;
  double bandwidth_khz = 0.0;
  NoiseModel noise;
};

/// Low-pass the raw trace and add detection noise per the model. With
/// kind == none the output is the noiseless filtered trace.
TransitSignal bandwidth_process(const std::vector<double>& raw, double dt, double bandwidth_khz,
                                const NoiseModel& noise, Rng& rng);

/// Std of the filtered detection noise at a given signal level.
double filtered_noise_std(const NoiseModel& noise, double level, double dt, double bandwidth_khz);

/// Last minus first sample where |signal - empty| > factor * noise_std. Throws NoTransit.
double transit_duration(const std::vector<double>& signal, const std::vector<double>& empty_level, double dt,
                        double noise_std, double factor = 2.0);
double transit_duration(const std::vector<double>& signal, double empty_level, double dt, double noise_std,
                        double factor = 2.0);

struct HistogramBin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
};

struct DurationHistogram {
  std::vector<HistogramBin> bins;
  double mean = 0.0;
  double dispersion = 0.0;  // sample standard deviation
  std::size_t total = 0;
};

/// Throws EmptyEnsemble when `durations` is empty.
DurationHistogram duration_histogram(const std::vector<double>& durations, double bin_width);

struct ModulationEvent {
  double period = 0.0;     // us
  double amplitude = 0.0;  // dimensionless
  double h1 = 0.0, h2 = 0.0, hc = 0.0;
  double t_mid = 0.0;
  double angular_momentum = 0.0;  // hbar units, filled by the caller when a trajectory is known
};

struct ModulationOptions {
  double amplitude_floor = 0.05;
  /// Hysteresis for extremum detection, as a fraction of the signal range.
  double swing_fraction = 0.02;
};

/// Peak, trough, peak triples of the filtered signal. Time origin is sample 0.
std::vector<ModulationEvent> extract_modulations(const std::vector<double>& filtered, double dt,
                                                 const ModulationOptions& options = {});

struct TheoryPoint {
  double rho_max = 0.0;  // um
  double period = 0.0;   // transmission period, us (half the mechanical period)
  double amplitude = 0.0;
};

/// Transmission period 2 int_0^rho_max drho sqrt(m / 2(U(rho_max) - U(rho))) for a
/// symmetric 1-D well. `potential` in rad/us (hbar = 1), lengths in um.
double half_period(const std::function<double(double)>& potential, double rho_max, double hbar_over_mass,
                   int nodes = 64);

/// Theory curve for radial motion through the axis (x = 0) in the table's potential.
std::vector<TheoryPoint> period_amplitude_theory(const CoefficientTable& table, DriveObservable observable,
                                                 std::size_t n_points = 80, double rho_max_waists = 1.6);

/// Interpolated theory period at amplitude A (clamped to the curve's range).
double theory_period_at(const std::vector<TheoryPoint>& curve, double amplitude);

/// L about the cavity axis in units of hbar: k (y pz - z py) with p in hbar k.
std::vector<double> angular_momentum_series(const TrajectoryRecord& rec, double wavenumber);

struct Spectrogram {
  std::vector<double> centers;      // us
  std::vector<double> frequencies;  // kHz
  std::vector<std::vector<double>> magnitude;  // [window][bin]
  double window = 25.0;
  double step = 5.0;
  std::size_t window_samples = 0;
  std::size_t nfft = 0;
};

/// Hann-windowed FFT magnitudes; throws SignalTooShort if shorter than one window.
Spectrogram spectrogram(const std::vector<double>& signal, double dt, double window = 25.0, double step = 5.0,
                        std::size_t min_nfft = 2048);

/// Energy of the windowed samples versus the one-sided spectral energy for window i.
std::pair<double, double> spectrogram_energy(const Spectrogram& s, const std::vector<double>& signal, double dt,
                                             std::size_t window_index);

/// Hann window of length n (symmetric).
std::vector<double> hann(std::size_t n);

void write_histogram_csv(const DurationHistogram& h, const std::filesystem::path& path);
void write_modulations_csv(const std::vector<ModulationEvent>& events, const std::filesystem::path& path);
void write_spectrogram_csv(const Spectrogram& s, const std::filesystem::path& path);

}  // namespace cqed
