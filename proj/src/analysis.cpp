#include "cqed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"
#include "cqed/units.hpp"

namespace cqed {

ZeroPhaseLowPass::ZeroPhaseLowPass(double cutoff_khz, double dt_us) : cutoff_khz_(cutoff_khz) {
  const double fs_khz = 1e3 / dt_us;
  if (!(cutoff_khz > 0.0) || !(cutoff_khz < 0.5 * fs_khz)) {
    throw ValidationError("bandwidth", "cutoff must lie between 0 and the Nyquist frequency");
  }
  const double k = std::tan(units::pi * cutoff_khz / fs_khz);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  b0_ = k * k * norm;
  b1_ = 2.0 * b0_;
  b2_ = b0_;
  a1_ = 2.0 * (k * k - 1.0) * norm;
  a2_ = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;

  // White-noise gain of the cascade from its impulse response; the response
  // decays on ~fs/(2 pi fc) samples.
  const auto half = static_cast<std::size_t>(std::ceil(40.0 * fs_khz / cutoff_khz)) + 64;
  std::vector<double> impulse(2 * half + 1, 0.0);
  impulse[half] = 1.0;
  std::vector<double> y = pass(impulse);
  std::reverse(y.begin(), y.end());
  y = pass(y);
  noise_gain_ = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
}

std::vector<double> ZeroPhaseLowPass::pass(const std::vector<double>& x) const {
  // Transposed direct form II, started from rest.
  std::vector<double> y(x.size());
  double z1 = 0.0, z2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double out = b0_ * x[i] + z1;
    z1 = b1_ * x[i] - a1_ * out + z2;
    z2 = b2_ * x[i] - a2_ * out;
    y[i] = out;
  }
  return y;
}

std::vector<double> ZeroPhaseLowPass::apply(const std::vector<double>& x) const {
  if (x.empty()) return {};
  auto run = [this](const std::vector<double>& in) {
    // Steady-state initial conditions for a constant input equal to in[0].
    std::vector<double> out(in.size());
    double z2 = (b2_ - a2_) * in[0];
    double z1 = (b1_ - a1_) * in[0] + z2;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double y = b0_ * in[i] + z1;
      z1 = b1_ * in[i] - a1_ * y + z2;
      z2 = b2_ * in[i] - a2_ * y;
      out[i] = y;
    }
    return out;
  };
  std::vector<double> y = run(x);
  std::reverse(y.begin(), y.end());
  y = run(y);
  std::reverse(y.begin(), y.end());
  return y;
}

TransitSignal bandwidth_process(const std::vector<double>& raw, double dt, double bandwidth_khz,
                                const NoiseModel& noise, Rng& rng) {
  const ZeroPhaseLowPass filter(bandwidth_khz, dt);
  TransitSignal out;
  out.dt = dt;
  out.raw = raw;
  out.bandwidth_khz = bandwidth_khz;
  out.noise = noise;
  std::vector<double> in = raw;
  switch (noise.kind) {
    case DetectionNoise::none:
      break;
    case DetectionNoise::gaussian: {
      std::normal_distribution<double> normal(0.0, noise.std_after_filter / std::sqrt(filter.noise_gain()));
      for (double& v : in) v += normal(rng);
      break;
    }
    case DetectionNoise::poisson: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double per_count = 1.0 / (noise.count_rate * dt);
      for (double& v : in) v = poisson_inverse(noise.count_rate * std::max(v, 0.0) * dt, unit(rng)) * per_count;
      break;
    }
  }
  out.filtered = filter.apply(in);
  return out;
}

double filtered_noise_std(const NoiseModel& noise, double level, double dt, double bandwidth_khz) {
  switch (noise.kind) {
    case DetectionNoise::none:
      return 0.0;
    case DetectionNoise::gaussian:
      return noise.std_after_filter;
    case DetectionNoise::poisson: {
      const ZeroPhaseLowPass filter(bandwidth_khz, dt);
      return std::sqrt(level / (noise.count_rate * dt) * filter.noise_gain());
    }
  }
  return 0.0;
}

double transit_duration(const std::vector<double>& signal, const std::vector<double>& empty_level, double dt,
                        double noise_std, double factor) {
  if (signal.size() != empty_level.size()) throw ValidationError("empty_level", "length differs from the signal");
  const double thr = factor * noise_std;
  std::size_t first = signal.size(), last = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    if (std::abs(signal[i] - empty_level[i]) > thr) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == signal.size()) throw NoTransit();
  return static_cast<double>(last - first) * dt;
}

double transit_duration(const std::vector<double>& signal, double empty_level, double dt, double noise_std,
                        double factor) {
  return transit_duration(signal, std::vector<double>(signal.size(), empty_level), dt, noise_std, factor);
}

DurationHistogram duration_histogram(const std::vector<double>& durations, double bin_width) {
  if (durations.empty()) throw EmptyEnsemble();
  if (!(bin_width > 0.0)) throw ValidationError("bin_width");
  DurationHistogram h;
  h.total = durations.size();
  const double n = static_cast<double>(durations.size());
  h.mean = std::accumulate(durations.begin(), durations.end(), 0.0) / n;
  if (durations.size() > 1) {
    double ss = 0.0;
    for (double d : durations) ss += (d - h.mean) * (d - h.mean);
    h.dispersion = std::sqrt(ss / (n - 1.0));
  }
  const double top = *std::max_element(durations.begin(), durations.end());
  const auto nbins = static_cast<std::size_t>(std::floor(top / bin_width)) + 1;
  h.bins.resize(nbins);
  for (std::size_t i = 0; i < nbins; ++i) h.bins[i] = {i * bin_width, (i + 1) * bin_width, 0};
  for (double d : durations) {
    const auto i = std::min(nbins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(d / bin_width))));
    ++h.bins[i].count;
  }
  return h;
}

// ---------------------------------------------------------------------------

std::vector<ModulationEvent> extract_modulations(const std::vector<double>& s, double dt,
                                                 const ModulationOptions& options) {
  std::vector<ModulationEvent> events;
  if (s.size() < 3) return events;
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  const double delta = options.swing_fraction * (*hi_it - *lo_it);
  if (!(delta > 0.0)) return events;

  // Alternating extrema with hysteresis: a peak is confirmed once the signal
  // falls delta below it, a trough once it rises delta above it.
  struct Extremum {
    std::size_t i;
    bool peak;
  };
  std::vector<Extremum> ext;
  double mx = s[0], mn = s[0];
  std::size_t imx = 0, imn = 0;
  int state = 0;  // +1 after a trough (seeking a peak), -1 after a peak
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > mx) mx = s[i], imx = i;
    if (s[i] < mn) mn = s[i], imn = i;
    if (state != -1 && s[i] < mx - delta) {
      if (imx > 0) ext.push_back({imx, true});
      state = -1;
      mn = s[i];
      imn = i;
    } else if (state != 1 && s[i] > mn + delta) {
      if (imn > 0) ext.push_back({imn, false});
      state = 1;
      mx = s[i];
      imx = i;
    }
  }
  for (std::size_t k = 0; k + 2 < ext.size(); ++k) {
    if (!ext[k].peak || ext[k + 1].peak || !ext[k + 2].peak) continue;
    ModulationEvent e;
    e.h1 = s[ext[k].i];
    e.hc = s[ext[k + 1].i];
    e.h2 = s[ext[k + 2].i];
    e.period = static_cast<double>(ext[k + 2].i - ext[k].i) * dt;
    const double sum = e.h1 + e.h2;
    e.amplitude = sum > 0.0 ? 2.0 * (0.5 * sum - e.hc) / sum : 0.0;
    e.t_mid = static_cast<double>(ext[k + 1].i) * dt;
    if (e.amplitude >= options.amplitude_floor && e.amplitude <= 1.0) events.push_back(e);
  }
  return events;
}

double half_period(const std::function<double(double)>& potential, double rho_max, double hbar_over_mass,
                   int nodes) {
  // rho = rho_max sin(theta) removes the inverse-square-root turning-point singularity.
  const auto [x, w] = numerics::gauss_legendre(nodes);
  const double u_top = potential(rho_max);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double theta = 0.25 * units::pi * (x[i] + 1.0);
    const double rho = rho_max * std::sin(theta);
    const double du = u_top - potential(rho);
    if (!(du > 0.0)) continue;
    sum += w[i] * rho_max * std::cos(theta) / std::sqrt(2.0 * du * hbar_over_mass);
  }
  return 2.0 * 0.25 * units::pi * sum;
}

std::vector<TheoryPoint> period_amplitude_theory(const CoefficientTable& table, DriveObservable observable,
                                                 std::size_t n_points, double rho_max_waists) {
  const double w0 = table.params.waist;
  const double hbar_m = units::hbar_over_mass(table.params.mass);
  auto coupling = [&](double rho) { return table.peak * std::exp(-rho * rho / (w0 * w0)); };
  auto potential = [&](double rho) { return work_at(table, std::min(coupling(std::abs(rho)), table.peak)); };
  auto transmission = [&](double rho) {
    const CouplingPointData d = lookup(table, std::min(coupling(rho), table.peak)).data;
    return observable == DriveObservable::field_squared ? std::norm(d.field_amp) : d.photon_number;
  };
  std::vector<TheoryPoint> curve;
  curve.reserve(n_points);
  for (std::size_t i = 1; i <= n_points; ++i) {
    const double rho_max = rho_max_waists * w0 * static_cast<double>(i) / static_cast<double>(n_points);
    TheoryPoint pt;
    pt.rho_max = rho_max;
    pt.period = half_period(potential, rho_max, hbar_m);
    double hi = -1e300, lo = 1e300;
    for (int k = 0; k <= 200; ++k) {
      const double v = transmission(rho_max * k / 200.0);
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    pt.amplitude = hi > 0.0 ? (hi - lo) / hi : 0.0;
    curve.push_back(pt);
  }
  return curve;
}

double theory_period_at(const std::vector<TheoryPoint>& curve, double amplitude) {
  if (curve.empty()) throw EmptyEnsemble();
  std::vector<TheoryPoint> c = curve;
  std::sort(c.begin(), c.end(), [](const TheoryPoint& a, const TheoryPoint& b) { return a.amplitude < b.amplitude; });
  if (amplitude <= c.front().amplitude) return c.front().period;
  if (amplitude >= c.back().amplitude) return c.back().period;
  const auto it = std::lower_bound(c.begin(), c.end(), amplitude,
                                   [](const TheoryPoint& p, double a) { return p.amplitude < a; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double t = (amplitude - a.amplitude) / (b.amplitude - a.amplitude);
  return a.period + t * (b.period - a.period);
}

std::vector<double> angular_momentum_series(const TrajectoryRecord& rec, double wavenumber) {
  std::vector<double> out(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    out[i] = wavenumber * (rec.r[i].y * rec.p[i].z - rec.r[i].z * rec.p[i].y);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 * (1.0 - std::cos(units::two_pi * i / static_cast<double>(n - 1)));
  return w;
}

Spectrogram spectrogram(const std::vector<double>& signal, double dt, double window, double step,
                        std::size_t min_nfft) {
  Spectrogram out;
  out.window = window;
  out.step = step;
  const auto n = static_cast<std::size_t>(std::lround(window / dt));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(step / dt)));
  if (n < 2 || signal.size() < n) throw SignalTooShort("signal shorter than one spectrogram window");
  std::size_t nfft = 1;
  while (nfft < std::max(n, min_nfft)) nfft <<= 1;
  out.window_samples = n;
  out.nfft = nfft;
  const std::size_t nbins = nfft / 2 + 1;
  out.frequencies.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k) out.frequencies[k] = 1e3 * k / (nfft * dt);

  const std::vector<double> w = hann(n);
  Eigen::FFT<double> fft;
  std::vector<double> buf(nfft);
  std::vector<std::complex<double>> spec;
  for (std::size_t start = 0; start + n <= signal.size(); start += hop) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = w[i] * signal[start + i];
    fft.fwd(spec, buf);
    std::vector<double> mag(nbins);
    for (std::size_t k = 0; k < nbins; ++k) mag[k] = std::abs(spec[k]);
    out.magnitude.push_back(std::move(mag));
    out.centers.push_back((start + 0.5 * (n - 1)) * dt);
  }
  return out;
}

std::pair<double, double> spectrogram_energy(const Spectrogram& s, const std::vector<double>& signal, double dt,
                                             std::size_t window_index) {
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(s.step / dt)));
  const std::size_t start = window_index * hop;
  const std::vector<double> w = hann(s.window_samples);
  double time_energy = 0.0;
  for (std::size_t i = 0; i < s.window_samples; ++i) {
    const double v = w[i] * signal[start + i];
    time_energy += v * v;
  }
  const auto& m = s.magnitude.at(window_index);
  double spec_energy = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const bool edge = k == 0 || k == s.nfft / 2;
    spec_energy += (edge ? 1.0 : 2.0) * m[k] * m[k];
  }
  return {time_energy, spec_energy / static_cast<double>(s.nfft)};
}

// ---------------------------------------------------------------------------

void write_histogram_csv(const DurationHistogram& h, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "bin_lo,bin_hi,count\n";
  char buf[128];
  for (const auto& b : h.bins) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%zu\n", b.lo, b.hi, b.count);
    out << buf;
  }
}

void write_modulations_csv(const std::vector<ModulationEvent>& events, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "P,A,H1,H2,Hc,L,t_mid\n";
  char buf[256];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g\n", e.period, e.amplitude, e.h1, e.h2, e.hc,
                  e.angular_momentum, e.t_mid);
    out << buf;
  }
}

void write_spectrogram_csv(const Spectrogram& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t_i,f,magnitude\n";
  char buf[128];
  for (std::size_t w = 0; w < s.centers.size(); ++w) {
    for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.8g\n", s.centers[w], s.frequencies[k], s.magnitude[w][k]);
      out << buf;
    }
  }
}

}  // namespace cqed
