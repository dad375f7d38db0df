#include "cqed/trajectory_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cqed/errors.hpp"
#include "cqed/numerics.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

const RecoilTensor& recoil() {
  static const RecoilTensor e = recoil_tensor();
  return e;
}

double observe(const CouplingPointData& d, DriveObservable which) {
  return which == DriveObservable::field_squared ? std::norm(d.field_amp) : d.photon_number;
}

}  // namespace

void InitialConditionModel::validate() const {
  if (!(start_offset_waists > 0.0)) throw ValidationError("initial.start_offset_waists");
  if (!(y_half_width_waists >= 0.0)) throw ValidationError("initial.y_half_width_waists");
  if (!(vx_max >= 0.0)) throw ValidationError("initial.vx_max");
  if (!(temperature_uK >= 0.0)) throw ValidationError("initial.temperature_uK");
  if (mode == LaunchMode::drop) {
    if (!(source_height > 0.0)) throw ValidationError("initial.source_height");
    if (!(source_spread >= 0.0)) throw ValidationError("initial.source_spread");
  } else {
    if (!(vz_std >= 0.0)) throw ValidationError("initial.vz_std");
    if (!(vz_mean > 0.0 || vz_std > 0.0)) throw ValidationError("initial.vz_mean");
  }
}

PhasePoint sample_initial(const InitialConditionModel& model, const SystemParams& params, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w0 = params.waist;
  const double lambda = params.wavelength;

  Vec3 r, v;
  r.x = lambda * (unit(rng) - 0.5) * 0.5;  // one axial period, [-lambda/4, lambda/4)
  r.y = model.y_half_width_waists * w0 * (2.0 * unit(rng) - 1.0);
  const double offset = model.start_offset_waists * w0;
  v.x = model.vx_max * (2.0 * unit(rng) - 1.0);
  const double thermal = std::sqrt(units::kB_si * model.temperature_uK * 1e-6 / params.mass);  // m/s == um/us
  v.y = thermal * normal(rng);
  if (model.mode == LaunchMode::drop) {
    r.z = offset;
    const double g_earth = units::g_earth_si * 1e-6;  // um/us^2
    double h = 0.0;
    do {
      h = model.source_height - offset + model.source_spread * normal(rng);
    } while (!(h > 0.0));
    v.z = -std::sqrt(2.0 * g_earth * h);
  } else {
    r.z = -offset;
    double vz = 0.0;
    do {
      vz = model.vz_mean + model.vz_std * normal(rng);
    } while (!(vz > 0.0));
    v.z = vz;
  }
  const double scale = 1.0 / (units::hbar_over_mass(params.mass) * params.wavenumber());
  return {r, scale * v};
}

// ---------------------------------------------------------------------------

void TriggerConfig::validate() const {
  if (!(probe_level >= 0.0)) throw ValidationError("trigger.probe_level");
  if (!(trap_level >= 0.0)) throw ValidationError("trigger.trap_level");
  if (!(threshold > probe_level)) throw ValidationError("trigger.threshold", "trigger threshold must exceed the probe level");
  if (!(window > 0.0)) throw ValidationError("trigger.window");
  if (!(delay >= 0.0)) throw ValidationError("trigger.delay");
  if (!(noise_std >= 0.0)) throw ValidationError("trigger.noise_std");
  if (!(count_rate > 0.0)) throw ValidationError("trigger.count_rate");
}

int poisson_inverse(double mean, double u) {
  if (!(mean > 0.0)) return 0;
  if (mean > 700.0) throw ValidationError("poisson mean", "poisson mean too large for inversion");
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 10 * static_cast<int>(mean) + 100) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

DetectionMonitor::DetectionMonitor(const TriggerConfig& config, double dt, int substeps)
    : config_(config), dt_(dt), substeps_(std::max(1, substeps)) {
  const auto n = static_cast<std::size_t>(std::max(1L, std::lround(config.window / dt)));
  ring_.assign(n, 0.0);
}

DetectionMonitor::Update DetectionMonitor::update(double signal, double t, Rng& rng) {
  const std::size_t nw = ring_.size();
  double sample = signal;
  switch (config_.noise) {
    case DetectionNoise::none:
      break;
    case DetectionNoise::gaussian: {
      double z = 0.0;
      for (int s = 0; s < substeps_; ++s) z += normal_(rng);
      sample += config_.noise_std * std::sqrt(static_cast<double>(nw)) * z / std::sqrt(static_cast<double>(substeps_));
      break;
    }
    case DetectionNoise::poisson: {
      const double mean = config_.count_rate * std::max(signal, 0.0) * dt_ / substeps_;
      int counts = 0;
      for (int s = 0; s < substeps_; ++s) counts += poisson_inverse(mean, uniform_(rng));
      sample = counts / (config_.count_rate * dt_);
      break;
    }
  }
  sum_ += sample - ring_[head_];
  ring_[head_] = sample;
  head_ = (head_ + 1) % nw;
  if (head_ == 0) {
    double s = 0.0;
    for (double v : ring_) s += v;
    sum_ = s;
  }
  filled_ = std::min(filled_ + 1, nw);

  Update u;
  if (filled_ < nw) return u;
  u.averaged = last_average_ = sum_ / static_cast<double>(nw);
  if (!trigger_time_ && u.averaged > config_.threshold) {
    trigger_time_ = t;
    u.fired = true;
  }
  return u;
}

// ---------------------------------------------------------------------------

void SimConfig::validate() const {
  SystemParams q = params;
  if (q.fock_cutoff == 0) q.fock_cutoff = 2;  // 0 asks the table build for the default cutoff
  q.validate();
  initial.validate();
  trigger.validate();
  if (!(dt > 0.0)) throw ValidationError("dt");
  if (!(max_time > dt)) throw ValidationError("max_time");
  if (!(axial_bound > 0.0)) throw ValidationError("axial_bound");
  if (record_stride < 1) throw ValidationError("record_stride");
  if (noise_substeps < 1) throw ValidationError("noise_substeps");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::radial_exit:
      return "radial_exit";
    case Termination::axial_exit:
      return "axial_exit";
    case Termination::max_time:
      return "max_time";
  }
  return "unknown";
}

std::vector<double> TrajectoryRecord::observable(DriveObservable which) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i] = which == DriveObservable::field_squared ? std::norm(field[i]) : n_bar[i];
  }
  return out;
}

std::vector<double> TrajectoryRecord::empty_level(const TriggerConfig& trigger) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = drive_flag[i] ? trigger.trap_level : trigger.probe_level;
  return out;
}

MotionCoefficients motion_coefficients(const CoefficientTable& table, const Vec3& r, std::size_t& hint) {
  const LocalCoupling lc = local_coupling(table, r);
  const LookupResult lr = lookup(table, lc.g, hint);
  hint = lr.hint;
  const double k = table.params.wavenumber();
  MotionCoefficients c;
  c.data = lr.data;
  c.grad_g = lc.grad;
  c.force = (-lr.data.mean_phi / k) * lc.grad;
  c.xi_coef = lr.data.xi / (k * k);
  c.spont = table.params.gamma * lr.data.excited_pop;
  c.chi = lr.data.chi;
  return c;
}

DiffusionTensor diffusion_tensor(const MotionCoefficients& c, double) {
  const RecoilTensor& e = recoil();
  const Vec3& u = c.grad_g;
  DiffusionTensor d;
  d.xx = c.xi_coef * u.x * u.x + c.spont * e.exx;
  d.yy = c.xi_coef * u.y * u.y + c.spont * e.eyy;
  d.zz = c.xi_coef * u.z * u.z + c.spont * e.ezz;
  d.xy = c.xi_coef * u.x * u.y;
  d.xz = c.xi_coef * u.x * u.z;
  d.yz = c.xi_coef * u.y * u.z;
  return d;
}

Vec3 momentum_noise(const MotionCoefficients& c, double, double dt, int substeps, Rng& rng,
                    std::normal_distribution<double>& normal) {
  double z[4] = {0.0, 0.0, 0.0, 0.0};
  for (int s = 0; s < substeps; ++s) {
    for (double& zi : z) zi += normal(rng);
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(substeps));
  const RecoilTensor& e = recoil();
  const double cav = std::sqrt(2.0 * c.xi_coef * dt) * z[0] * norm;
  const double sp = std::sqrt(2.0 * c.spont * dt) * norm;
  return cav * c.grad_g + Vec3{sp * std::sqrt(e.exx) * z[1], sp * std::sqrt(e.eyy) * z[2], sp * std::sqrt(e.ezz) * z[3]};
}

double mechanical_energy(const CoefficientTable& table, const PhasePoint& s) {
  const double k = table.params.wavenumber();
  const double kinetic = 0.5 * units::hbar_over_mass(table.params.mass) * k * k * s.p.norm2();
  return kinetic + potential_energy(table, s.r);
}

namespace {

// One step: Euler-Maruyama friction and noise at the start point, then a
// kick-drift-kick update for the conservative force. `c` holds the
// coefficients at s.r on entry and at the new position on exit.
void advance(const CoefficientTable& table, PhasePoint& s, MotionCoefficients& c, std::size_t& hint, double dt,
             bool noise, double friction_sign, int substeps, Rng& rng, std::normal_distribution<double>& normal,
             double velocity_scale, double hbar_m) {
  const double k = table.params.wavenumber();
  if (friction_sign != 0.0 && c.chi != 0.0) {
    const double proj = dot(s.p, c.grad_g);
    s.p = s.p - (friction_sign * hbar_m * c.chi * proj * dt) * c.grad_g;
  }
  if (noise) s.p = s.p + momentum_noise(c, k, dt, substeps, rng, normal);
  s.p = s.p + (0.5 * dt) * c.force;
  s.r = s.r + (dt * velocity_scale) * s.p;
  c = motion_coefficients(table, s.r, hint);
  s.p = s.p + (0.5 * dt) * c.force;
}

}  // namespace

PhasePoint propagate_fixed_drive(const CoefficientTable& table, PhasePoint s, double duration,
                                 const FixedDriveOptions& options, Rng& rng,
                                 const std::function<void(double, const PhasePoint&)>& observer) {
  const double hbar_m = units::hbar_over_mass(table.params.mass);
  const double k = table.params.wavenumber();
  const double vscale = hbar_m * k;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t hint = 0;
  MotionCoefficients c = motion_coefficients(table, s.r, hint);
  const auto steps = static_cast<long>(std::llround(duration / options.dt));
  for (long i = 1; i <= steps; ++i) {
    if (options.freeze_position) {
      if (options.friction_sign != 0.0) {
        s.p = s.p - (options.friction_sign * hbar_m * c.chi * dot(s.p, c.grad_g) * options.dt) * c.grad_g;
      }
      if (options.noise) s.p = s.p + momentum_noise(c, k, options.dt, 1, rng, normal);
    } else {
      advance(table, s, c, hint, options.dt, options.noise, options.friction_sign, 1, rng, normal, vscale, hbar_m);
    }
    if (observer) observer(i * options.dt, s);
  }
  return s;
}

DriveTables build_drive_tables(const SimConfig& config, std::size_t n_grid, unsigned threads) {
  auto make = [&](double level, const char* label) {
    SystemParams p = config.params;
    p.drive = drive_for_target(p, level, config.trigger.observable);
    TableBuildOptions o;
    o.n_grid = n_grid;
    o.threads = threads;
    o.drive_label = label;
    return std::make_shared<const CoefficientTable>(build_table(p, o));
  };
  return {make(config.trigger.probe_level, "probe"), make(config.trigger.trap_level, "trap")};
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::size_t index) {
  return numerics::mix_seed(base_seed, index);
}

TrajectoryRecord run_transit(const SimConfig& config, const DriveTables& tables, std::uint64_t seed) {
  if (!tables.probe || !tables.trap) throw ValidationError("tables", "probe and trap tables are required");
  Rng rng_init(numerics::mix_seed(seed, 0));
  Rng rng_dyn(numerics::mix_seed(seed, 1));
  Rng rng_det(numerics::mix_seed(seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);

  const SystemParams& params = config.params;
  const double hbar_m = units::hbar_over_mass(params.mass);
  const double vscale = hbar_m * params.wavenumber();
  const double dt = config.dt;

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.dt_record = dt * config.record_stride;
  PhasePoint s = sample_initial(config.initial, params, rng_init);
  rec.initial = s;
  const double rho_start = std::hypot(s.r.y, s.r.z);

  const bool triggered_mode = config.mode == TriggerMode::triggered;
  const CoefficientTable* table = triggered_mode ? tables.probe.get() : tables.trap.get();
  int flag = triggered_mode ? 0 : 1;
  std::size_t hint = 0;
  MotionCoefficients c = motion_coefficients(*table, s.r, hint);
  DetectionMonitor monitor(config.trigger, dt, config.noise_substeps);
  std::optional<double> switch_at;

  auto record = [&](double t) {
    rec.t.push_back(t);
    rec.r.push_back(s.r);
    rec.p.push_back(s.p);
    rec.g.push_back(c.data.g);
    rec.n_bar.push_back(c.data.photon_number);
    rec.field.push_back(c.data.field_amp);
    rec.excited.push_back(c.data.excited_pop);
    rec.drive_flag.push_back(flag);
  };
  record(0.0);

  const auto max_steps = static_cast<long>(std::ceil(config.max_time / dt - 1e-9));
  std::optional<Termination> done;
  for (long step = 1;; ++step) {
    const double t = step * dt;
    advance(*table, s, c, hint, dt, config.noise, config.friction_sign, config.noise_substeps, rng_dyn, normal,
            vscale, hbar_m);

    const auto upd = monitor.update(observe(c.data, config.trigger.observable), t, rng_det);
    if (triggered_mode && upd.fired) {
      rec.trigger_time = t;
      switch_at = t + config.trigger.delay;
    }
    if (switch_at && flag == 0 && t >= *switch_at - 1e-9) {
      table = tables.trap.get();
      flag = 1;
      rec.switch_time = t;
      c = motion_coefficients(*table, s.r, hint);
    }

    if (!done) {
      if (std::hypot(s.r.y, s.r.z) > rho_start) {
        done = Termination::radial_exit;
      } else if (std::abs(s.r.x) > config.axial_bound) {
        done = Termination::axial_exit;
      } else if (step >= max_steps) {
        done = Termination::max_time;
      }
      if (done) {
        rec.termination = *done;
        rec.end_time = t;
      }
    }
    // After termination, run on to the next record point so the grid stays uniform.
    if (step % config.record_stride == 0) {
      record(t);
      if (done) break;
    }
  }
  return rec;
}

EnsembleResult run_ensemble(const SimConfig& config, const DriveTables& tables, std::size_t n,
                            std::uint64_t base_seed, unsigned threads) {
  if (n < 1) throw ValidationError("n", "ensemble size must be at least 1");
  MappedEnsemble<TrajectoryRecord> mapped = map_ensemble<TrajectoryRecord>(
      config, tables, n, base_seed, [](const TrajectoryRecord& r) { return r; }, threads);
  EnsembleResult out;
  out.failures = std::move(mapped.failures);
  for (auto& r : mapped.results) {
    if (r) out.records.push_back(std::move(*r));
  }
  return out;
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,x,y,z,px,py,pz,g,n_bar,a_re,a_im,sigsig,drive_flag\n";
  char buf[512];
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const Vec3& r = rec.r[i];
    const Vec3& p = rec.p[i];
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n",
                  rec.t[i], r.x, r.y, r.z, p.x, p.y, p.z, rec.g[i], rec.n_bar[i], rec.field[i].real(),
                  rec.field[i].imag(), rec.excited[i], rec.drive_flag[i]);
    out << buf;
  }
}

}  // namespace cqed
