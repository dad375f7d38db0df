// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion, with the
// measured numbers, and a short block of supporting detail above each.
//
// Exit status: 1 if any of the deterministic criteria (1-5, 10) fails. The
// Monte Carlo reproductions (6-9) are reported but do not set the status;
// their outcomes are listed in the README.

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cqed/errors.hpp"
#include "cqed/free_space_model.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/units.hpp"
#include "oracles.hpp"

using namespace cqed;
using nlohmann::json;

namespace {

bool gating_failed = false;

void verdict(int id, bool ok, const std::string& what) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok && (id <= 5 || id == 10)) gating_failed = true;
}

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  std::printf("    ");
  va_list ap;
  va_start(ap, fmt);
  std::vprintf(fmt, ap);
  va_end(ap);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

RunConfig config(const std::string& preset, std::vector<std::string> sets, std::size_t n = 300, std::uint64_t seed = 1) {
  return resolve_config(json::object(), CliOverrides{preset, std::move(sets), n, seed, {}});
}

SystemParams at_drive(const RunConfig& c, bool trap) {
  SystemParams p = c.sim.params;
  const auto& tr = c.sim.trigger;
  p.drive = drive_for_target(p, trap ? tr.trap_level : tr.probe_level, tr.observable);
  p.fock_cutoff = default_fock_cutoff(p);
  return p;
}

// ---------------------------------------------------------------------------

void recoil() {
  const RecoilTensor e = recoil_tensor();
  const bool ok = std::abs(e.exx - 0.4) < 1e-9 && std::abs(e.eyy - 0.3) < 1e-9 && std::abs(e.ezz - 0.3) < 1e-9;
  verdict(1, ok, fmt("Exx=%.12f Eyy=%.12f Ezz=%.12f", e.exx, e.eyy, e.ezz));
}

void oracle_equivalence() {
  bool ok = true;
  std::string line;
  for (const char* name : {"hood", "pinkse"}) {
    SystemParams p = at_drive(config(name, {}), true);
    // the trap drive at the tightest cutoff that passes the population test everywhere
    if (std::string(name) == "pinkse") p.fock_cutoff = 17;
    double worst = 0.0;
    int points = 0;
    for (int i = 0; i < 10; ++i) {
      const double g = p.g0 * (i + 0.5) / 10.0;
      const EvolutionGenerator gen = build_generator(p, g);
      const CouplingPointData d = solve_coupling_point(gen, g);
      const oracle::Correlations o = oracle::quadrature(gen, p.gamma, p.kappa);
      const double e = std::max(oracle::rel_err(d.xi, o.xi), oracle::rel_err(d.chi, o.chi));
      note("%s g/g0=%.2f xi=%.9g (quad %.9g) chi=%.9g (quad %.9g)", name, g / p.g0, d.xi, o.xi, d.chi, o.chi);
      worst = std::max(worst, e);
      ++points;
    }
    ok = ok && worst < 1e-6 && points >= 10;
    line += std::string(name) + fmt(" %.0f points, worst rel err %.2e; ", points, worst);
  }
  verdict(2, ok, line);
}

void hood_depth() {
  const RunConfig c = config("hood", {});
  const CoefficientTable t = build_table(c.profile_params, c.n_grid);
  const PotentialProfile p = effective_potential(t, ProfileAxis::radial);
  const double depth = p.potential.back() - p.potential.front();
  verdict(3, std::abs(depth / 2.5 - 1) <= 0.15, fmt("Hood radial depth %.3f mK (target 2.5 +/- 15%%), fock cutoff %.0f", depth, t.params.fock_cutoff));
}

struct ProfileSet {
  PotentialProfile radial, axial, fs_radial, fs_axial;
  double mass;
};

ProfileSet profiles(const std::string& name) {
  const RunConfig c = config(name, {});
  const CoefficientTable t = build_table(c.profile_params, c.n_grid);
  ProfileSet s;
  s.radial = effective_potential(t, ProfileAxis::radial);
  s.axial = effective_potential(t, ProfileAxis::axial);
  const FreeSpaceParams fp = free_space_equivalent(c.profile_params, c.calibration);
  std::tie(s.fs_radial, s.fs_axial) = build_free_space_profiles(fp, 401, c.n_grid);
  s.mass = c.profile_params.mass;
  return s;
}

double peak(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

void heating_and_frequencies() {
  const ProfileSet hood = profiles("hood");
  const ProfileSet pinkse = profiles("pinkse");

  const double rh = peak(hood.fs_axial.heating) / peak(hood.axial.heating);
  const double rp = peak(pinkse.fs_axial.heating) / peak(pinkse.axial.heating);
  note("peak axial heating (mK/ms): hood cavity %.4g free %.4g; pinkse cavity %.4g free %.4g", peak(hood.axial.heating),
       peak(hood.fs_axial.heating), peak(pinkse.axial.heating), peak(pinkse.fs_axial.heating));
  auto depth = [](const PotentialProfile& p) { return p.potential.back() - p.potential.front(); };
  note("radial depths (mK): hood cavity %.3f free %.3f; pinkse cavity %.3f free %.3f", depth(hood.radial),
       depth(hood.fs_radial), depth(pinkse.radial), depth(pinkse.fs_radial));
  verdict(4, rh >= 5 && rh <= 20 && rp >= 0.5 && rp <= 2,
          fmt("free/cavity peak axial heating: hood %.2f (want 5-20), pinkse %.2f (want 0.5-2)", rh, rp));

  const double fh = harmonic_frequency_khz(hood.radial, hood.mass);
  const double fr = harmonic_frequency_khz(pinkse.radial, pinkse.mass);
  const double fa = harmonic_frequency_khz(pinkse.axial, pinkse.mass);
  auto near = [](double x, double target) { return std::abs(x / target - 1) <= 0.10; };
  verdict(5, near(fh, 9.4) && near(fr, 2.6) && near(fa, 430.0),
          fmt("radial hood %.2f kHz (9.4), radial pinkse %.3f kHz (2.6), axial pinkse %.1f kHz (430)", fh, fr, fa));
}

// ---------------------------------------------------------------------------

struct Stats {
  double mean = 0, disp = 0;
  std::size_t n = 0;
};

Stats durations(const RunConfig& c, const DriveTables& tables) {
  const DurationSummary s = ensemble_durations(c, tables);
  if (!s.histogram) throw EmptyEnsemble();
  note("%s %s: run %zu, counted %zu, not triggered %zu, no transit %zu, failed %zu; mean %.1f us, dispersion %.1f us",
       c.preset.c_str(), c.sim.mode == TriggerMode::triggered ? "triggered" : "untriggered", s.n_run, s.durations.size(),
       s.n_not_triggered, s.n_no_transit, s.failures.size(), s.histogram->mean, s.histogram->dispersion);
  return {s.histogram->mean, s.histogram->dispersion, s.durations.size()};
}

bool within(double value, double target, double se) {
  return std::abs(value - target) <= std::max(0.15 * target, 2.0 * se);
}

void ensembles(const DriveTables& hood_t, const DriveTables& pinkse_t) {
  struct Target {
    const char* preset;
    const char* mode;
    double mean, disp;
  };
  const Target targets[] = {{"hood", "untriggered", 96, 84},
                            {"hood", "triggered", 383, 240},
                            {"pinkse", "untriggered", 160, 161},
                            {"pinkse", "triggered", 280, 282}};
  bool ok = true;
  std::string line;
  for (const Target& t : targets) {
    const RunConfig c = config(t.preset, {std::string("run.mode=") + t.mode}, 1500, 11);
    const Stats s = durations(c, std::string(t.preset) == "hood" ? hood_t : pinkse_t);
    // standard error of a standard deviation is about sigma / sqrt(2n)
    const bool m = within(s.mean, t.mean, s.disp / std::sqrt(double(s.n)));
    const bool d = within(s.disp, t.disp, s.disp / std::sqrt(2.0 * s.n));
    const bool enough = s.n >= 300;
    note("%s %s: mean %.1f vs %.0f %s, dispersion %.1f vs %.0f %s, n %zu %s", t.preset, t.mode, s.mean, t.mean,
         m ? "ok" : "out", s.disp, t.disp, d ? "ok" : "out", s.n, enough ? "ok" : "too few");
    ok = ok && m && d && enough;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %s %.0f/%.0f us; ", t.preset, t.mode == std::string("triggered") ? "trig" : "untrig",
                  s.mean, s.disp);
    line += buf;
  }
  verdict(6, ok, line + "(mean/dispersion)");
}

void friction_reversal(const DriveTables& tables) {
  const Stats normal = durations(config("pinkse", {"run.mode=untriggered"}, 1500, 11), tables);
  const Stats reversed = durations(config("pinkse", {"run.mode=triggered", "integrator.friction_sign=-1"}, 1500, 11), tables);
  verdict(7, reversed.mean < normal.mean,
          fmt("pinkse friction reversed, triggered mean %.1f us < untriggered mean %.1f us", reversed.mean, normal.mean));
}

void period_amplitude(const DriveTables& tables) {
  const RunConfig c = config("hood", {"run.mode=triggered"}, 800, 23);
  const std::function<std::vector<ModulationEvent>(const TrajectoryRecord&)> fn = [&](const TrajectoryRecord& r) {
    if (!r.switch_time) return std::vector<ModulationEvent>{};
    return record_modulations(r, c);
  };
  const auto mapped = map_ensemble(c.sim, tables, c.n_trajectories, c.seed, fn);
  std::vector<ModulationEvent> ev;
  for (const auto& r : mapped.results)
    if (r) ev.insert(ev.end(), r->begin(), r->end());
  const auto curve = period_amplitude_theory(*tables.trap, c.sim.trigger.observable);
  if (ev.size() < 30) {
    verdict(8, false, fmt("only %.0f modulation events", double(ev.size())));
    return;
  }
  std::vector<std::pair<double, double>> err;  // |L|, relative period error
  std::size_t inside = 0;
  for (const auto& e : ev) {
    const double rel = std::abs(e.period / theory_period_at(curve, e.amplitude) - 1);
    if (rel <= 0.2) ++inside;
    err.emplace_back(std::abs(e.angular_momentum), rel);
  }
  std::sort(err.begin(), err.end());
  const std::size_t third = err.size() / 3;
  double terc[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    const std::size_t a = k * third, b = k == 2 ? err.size() : (k + 1) * third;
    for (std::size_t i = a; i < b; ++i) terc[k] += err[i].second / double(b - a);
  }
  const double frac = double(inside) / double(ev.size());
  note("%zu events from %zu trajectories; theory small-amplitude period %.1f us", ev.size(), c.n_trajectories,
       curve.front().period);
  note("mean |P/P_theory - 1| by |L| tercile: low %.3f, mid %.3f, high %.3f", terc[0], terc[1], terc[2]);
  const bool closest = terc[0] < terc[1] && terc[0] < terc[2];
  verdict(8, frac >= 0.6 && closest,
          fmt("%.1f%% of events within 20%% of theory (want >= 60%%); lowest-L tercile error %.3f vs %.3f/%.3f", 100 * frac,
              terc[0], terc[1], terc[2]));
}

void spectral_bands(const DriveTables& tables) {
  const RunConfig c = config("pinkse", {"run.mode=triggered"}, 600, 29);
  const std::function<double(const TrajectoryRecord&)> fn = [](const TrajectoryRecord& r) {
    return r.switch_time ? r.end_time - *r.switch_time : 0.0;
  };
  const auto mapped = map_ensemble(c.sim, tables, c.n_trajectories, c.seed, fn);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mapped.results.size(); ++i)
    if (mapped.results[i] && *mapped.results[i] > 100.0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return *mapped.results[a] > *mapped.results[b]; });
  if (idx.size() > 12) idx.resize(12);

  const double lambda = c.sim.params.wavelength;
  // well index: antinodes at multiples of lambda/2, nodes half way between
  auto well = [&](double x) { return static_cast<long>(std::floor((x + 0.25 * lambda) / (0.5 * lambda))); };

  // peaks are searched above 200 kHz: the Hann sidelobes of the large DC term
  // (25 us window, 40 kHz resolution) still dominate at 100 kHz
  const double floor_khz = 200.0;
  std::vector<double> burst_sum;
  std::vector<double> freqs;
  std::size_t n_burst = 0, n_flight = 0, n_local = 0, peak_in_band = 0;
  double dc_flight = 0, dc_local = 0;
  for (std::size_t i : idx) {
    const TrajectoryRecord rec = run_transit(c.sim, tables, trajectory_seed(c.seed, i));
    std::size_t first = 0;
    while (first < rec.size() && rec.drive_flag[first] == 0) ++first;
    const std::vector<double> obs = rec.observable(c.sim.trigger.observable);
    const std::vector<double> seg(obs.begin() + static_cast<std::ptrdiff_t>(first), obs.end());
    Spectrogram s;
    try {
      s = spectrogram(seg, rec.dt_record, c.analysis.spectrogram_window, c.analysis.spectrogram_step);
    } catch (const SignalTooShort&) {
      continue;
    }
    if (freqs.empty()) {
      freqs = s.frequencies;
      burst_sum.assign(freqs.size(), 0.0);
    }
    for (std::size_t w = 0; w < s.centers.size(); ++w) {
      const auto lo = first + static_cast<std::size_t>(std::lround((s.centers[w] - 0.5 * s.window) / rec.dt_record));
      const std::size_t hi = std::min(lo + s.window_samples, rec.size());
      long wmin = well(rec.r[lo].x), wmax = wmin;
      double xmin = rec.r[lo].x, xmax = xmin;
      for (std::size_t j = lo; j < hi; ++j) {
        wmin = std::min(wmin, well(rec.r[j].x));
        wmax = std::max(wmax, well(rec.r[j].x));
        xmin = std::min(xmin, rec.r[j].x);
        xmax = std::max(xmax, rec.r[j].x);
      }
      const bool flight = wmax - wmin >= 2;                                // over several antinodes
      const bool local = wmax == wmin && xmax - xmin >= 0.125 * lambda;  // one well, heated
      if (!flight && !local) continue;
      ++n_burst;
      (flight ? n_flight : n_local)++;
      (flight ? dc_flight : dc_local) += s.magnitude[w][0];
      std::size_t best = 0;
      for (std::size_t k = 0; k < freqs.size(); ++k) {
        if (freqs[k] >= floor_khz) burst_sum[k] += s.magnitude[w][k];
        if (freqs[k] >= floor_khz && (best == 0 || s.magnitude[w][k] > s.magnitude[w][best])) best = k;
      }
      if (freqs[best] >= 500.0 && freqs[best] <= 600.0) ++peak_in_band;
    }
  }
  if (n_flight == 0 || n_local == 0) {
    verdict(9, false, fmt("not enough windows: %.0f flight, %.0f localized", double(n_flight), double(n_local)));
    return;
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < freqs.size(); ++k)
    if (freqs[k] >= floor_khz && (best == 0 || burst_sum[k] > burst_sum[best])) best = k;
  dc_flight /= n_flight;
  dc_local /= n_local;
  note("%zu transits, %zu burst windows (%zu flight, %zu localized); per-window peak in 500-600 kHz: %zu", idx.size(),
       n_burst, n_flight, n_local, peak_in_band);
  note("mean |N(0)|: flight %.4g, localized %.4g", dc_flight, dc_local);
  const bool band = freqs[best] >= 500.0 && freqs[best] <= 600.0;
  verdict(9, band && dc_flight < dc_local,
          fmt("pooled burst-window peak at %.0f kHz (want 500-600); DC content flight/localized = %.3f (want < 1)",
              freqs[best], dc_flight / dc_local));
}

// ---------------------------------------------------------------------------

void sde_properties(const DriveTables& hood_t) {
  bool ok = true;
  std::string line;

  // energy drift with noise and friction off
  {
    const CoefficientTable& t = *hood_t.trap;
    const double scale = units::hbar_over_mass(t.params.mass) * t.params.wavenumber();
    double worst = 0.0;
    for (const PhasePoint s0 : {PhasePoint{{0.02, 6.0, 0.0}, {0.0, 0.0, 0.03 / scale}},
                                PhasePoint{{-0.05, 2.0, 9.0}, {0.01 / scale, 0.02 / scale, -0.01 / scale}}}) {
      const double e0 = mechanical_energy(t, s0);
      FixedDriveOptions opt;
      opt.dt = 0.01;
      Rng rng(1);
      const PhasePoint s1 = propagate_fixed_drive(t, s0, 1000.0, opt, rng);
      worst = std::max(worst, std::abs(mechanical_energy(t, s1) - e0) / std::abs(e0));
    }
    note("energy drift over 1 ms: %.2e relative", worst);
    ok = ok && worst < 1e-3;
    line += fmt("drift %.1e/ms; ", worst);
  }

  // momentum variance growth at a frozen position
  {
    const CoefficientTable& t = *hood_t.trap;
    const Vec3 r{0.07, 6.0, -3.0};
    std::size_t hint = 0;
    const DiffusionTensor d = diffusion_tensor(motion_coefficients(t, r, hint), t.params.wavenumber());
    FixedDriveOptions opt;
    opt.dt = 0.01;
    opt.noise = true;
    opt.freeze_position = true;
    const double T = 2.0;
    const int n = 100000;
    double m[3] = {0, 0, 0}, q[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
      Rng rng(1000 + i);
      const PhasePoint s = propagate_fixed_drive(t, PhasePoint{r, {0, 0, 0}}, T, opt, rng);
      const double v[3] = {s.p.x, s.p.y, s.p.z};
      for (int k = 0; k < 3; ++k) m[k] += v[k], q[k] += v[k] * v[k];
    }
    const double want[3] = {2 * d.xx * T, 2 * d.yy * T, 2 * d.zz * T};
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double var = (q[k] - m[k] * m[k] / n) / (n - 1);
      worst = std::max(worst, std::abs(var / want[k] - 1));
      note("Var[p_%c] %.5g, 2 D t %.5g", "xyz"[k], var, want[k]);
    }
    ok = ok && worst < 0.02;
    line += fmt("Var[p] vs 2Dt worst %.2f%%; ", 100 * worst);
  }

  // halving dt, same Brownian path. Trapped trajectories decorrelate within a
  // few hundred us anyway, so the ensembles must be large for 2% to be resolved.
  {
    double worst = 0.0;
    for (const char* mode : {"untriggered", "triggered"}) {
      const std::string m = std::string("run.mode=") + mode;
      const RunConfig a = config("hood", {m, "integrator.dt=0.01", "integrator.noise_substeps=2"}, 12000, 5);
      const RunConfig b = config("hood", {m, "integrator.dt=0.005", "integrator.record_stride=20"}, 12000, 5);
      const Stats sa = durations(a, hood_t), sb = durations(b, hood_t);
      note("%s: dt 0.01 mean %.2f us, dt 0.005 mean %.2f us, change %.2f%% (one-ensemble standard error %.2f%%)", mode,
           sa.mean, sb.mean, 100 * (sb.mean / sa.mean - 1), 100 * sa.disp / std::sqrt(double(sa.n)) / sa.mean);
      worst = std::max(worst, std::abs(sb.mean / sa.mean - 1));
    }
    note("dt halving changes the mean duration by at most %.2f%%", 100 * worst);
    ok = ok && worst < 0.02;
    line += fmt("dt halving %.2f%%; ", 100 * worst);
  }

  // bit reproducibility, including across thread counts
  {
    const RunConfig c = config("hood", {}, 40, 3);
    bool same = true;
    for (std::size_t i = 0; i < 5; ++i) {
      const TrajectoryRecord x = run_transit(c.sim, hood_t, trajectory_seed(3, i));
      const TrajectoryRecord y = run_transit(c.sim, hood_t, trajectory_seed(3, i));
      same = same && x.t == y.t && x.n_bar == y.n_bar && x.g == y.g && x.size() == y.size();
      for (std::size_t j = 0; same && j < x.size(); ++j)
        same = x.r[j].x == y.r[j].x && x.r[j].y == y.r[j].y && x.r[j].z == y.r[j].z && x.p[j].z == y.p[j].z;
    }
    const std::function<double(const TrajectoryRecord&)> end = [](const TrajectoryRecord& r) { return r.end_time; };
    const auto one = map_ensemble(c.sim, hood_t, 40, 3, end, 1);
    const auto four = map_ensemble(c.sim, hood_t, 40, 3, end, 4);
    same = same && one.results == four.results;
    note("repeat runs and 1 vs 4 threads identical: %s", same ? "yes" : "no");
    ok = ok && same;
    line += same ? "bit-reproducible" : "NOT reproducible";
  }
  verdict(10, ok, line);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  auto stage = [&](const char* name) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%7.1f s] %s\n", s, name);
    std::fflush(stdout);
  };
  try {
    stage("recoil tensor");
    recoil();
    stage("oracle equivalence");
    oracle_equivalence();
    stage("hood depth");
    hood_depth();
    stage("profiles");
    heating_and_frequencies();

    stage("tables");
    const DriveTables hood_t = load_drive_tables(config("hood", {}), {}, nullptr);
    const DriveTables pinkse_t = load_drive_tables(config("pinkse", {}), {}, nullptr);
    stage("ensembles");
    ensembles(hood_t, pinkse_t);
    stage("friction reversal");
    friction_reversal(pinkse_t);
    stage("period-amplitude");
    period_amplitude(hood_t);
    stage("spectral bands");
    spectral_bands(pinkse_t);
    stage("SDE properties");
    sde_properties(hood_t);
    stage("done");
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  return gating_failed ? 1 : 0;
}
