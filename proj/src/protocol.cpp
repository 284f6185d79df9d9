#include "dexwrite/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#ifndef DEXWRITE_VERSION
#define DEXWRITE_VERSION "0.0.0"
#endif

namespace dexw {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Physicality audit_states(const Trajectory& traj) {
  Physicality p;
  p.min_eigenvalue = 1.0;
  for (const auto& s : traj.states) {
    p.max_trace_error = std::max(p.max_trace_error, std::abs(s.trace() - 1.0));
    p.min_eigenvalue = std::min(p.min_eigenvalue, s.min_eigenvalue());
  }
  p.max_hermiticity_correction = traj.max_hermiticity_correction;
  return p;
}

bool dcp_bounded(const DcpTrace& t) {
  for (Eigen::Index i = 0; i < t.dcp.size(); ++i)
    if (t.valid(i) && !(t.dcp(i) >= -1.0 && t.dcp(i) <= 1.0)) return false;
  return true;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot write '" + path + "'");
  return f;
}

}  // namespace

Physicality merge(const Physicality& a, const Physicality& b) {
  return {std::max(a.max_trace_error, b.max_trace_error), std::min(a.min_eigenvalue, b.min_eigenvalue),
          std::max(a.max_hermiticity_correction, b.max_hermiticity_correction), a.dcp_in_bounds && b.dcp_in_bounds};
}

VectorXd sequence_grid(const ExperimentConfig& c) {
  const double h = c.detector.bin_width_ns;
  const double t0 = c.write.t0_ns;
  const auto k0 = static_cast<long>(std::floor((c.write.window_start() - c.run.trace_padding_ns - t0) / h));
  const auto k1 = static_cast<long>(std::ceil((c.probe.window_end() + c.run.trace_padding_ns - t0) / h));
  VectorXd t(k1 - k0 + 1);
  for (long k = k0; k <= k1; ++k) t(k - k0) = t0 + static_cast<double>(k) * h;
  return t;
}

FitWindow fit_window(const ExperimentConfig& c, const LevelScheme& scheme) {
  const double sigma = c.detector.irf_sigma_ns();
  FitWindow w;
  w.t_min = std::max(c.write.t0_ns + 3.0 / scheme.rates().relax, c.probe.t0_ns) + 2.0 * sigma;
  w.t_max = c.probe.window_end() - c.probe.edge_ns - 2.0 * sigma;
  if (c.probe.envelope == EnvelopeShape::Gaussian) w.t_max = c.probe.t0_ns + c.probe.duration_ns - 2.0 * sigma;
  if (!std::isnan(c.run.fit_start_ns)) w.t_min = c.run.fit_start_ns;
  if (!std::isnan(c.run.fit_end_ns)) w.t_max = c.run.fit_end_ns;
  return w;
}

namespace {

SequenceResult run_point_impl(const ExperimentConfig& c, const LevelScheme& scheme,
                              const std::vector<LindbladChannel>& channels, const PolarizationState& commanded,
                              double area, std::uint64_t point_index, bool keep_trajectory, bool fit_trace) {
  SequenceResult out;
  out.commanded = commanded;
  out.write_area = area;

  PulseSpec write = c.write;
  write.polarization = PolarizationState{commanded.theta, commanded.phi + c.run.phi_offset_rad};
  write.area_rad = area;
  write.power.reset();
  const std::vector<DriveTerm> drives = build_drive(scheme, write, DriveOptions{c.run.be_leakage});

  EvolveOptions opts;
  opts.max_step_ns = c.run.max_step_ns;
  opts.pulse_resolution = c.run.pulse_resolution;
  opts.impulsive_write = c.run.impulsive_write;

  const VectorXd grid = sequence_grid(c);
  // Depletion leaves the dot empty.
  const StateMatrix vacuum = StateMatrix::basis(Level::Vac);
  Trajectory traj;
  try {
    traj = evolve(vacuum, scheme, drives, channels, grid, opts);
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure(std::string("write/precession window [") + short_fmt(grid(0)) + ", " +
                         short_fmt(grid(grid.size() - 1)) + "] ns: " + e.what());
  }
  out.physicality = audit_states(traj);

  PulseSpec probe = c.probe;
  probe.circular = Circular::R;
  if (c.run.readout == ReadoutMode::Weak) {
    out.raw = weak_probe_readout(traj, probe, scheme);
  } else {
    Eigen::Index i0 = 0;
    while (i0 < grid.size() && grid(i0) < write.window_end()) ++i0;
    if (i0 >= grid.size()) throw ValidationError("probe window outside the trajectory");
    const Eigen::Index n = grid.size() - i0;
    ProbeSignal sig;
    try {
      sig = coherent_probe_readout(traj.states[static_cast<std::size_t>(i0)], scheme, channels, probe, grid.tail(n), opts);
    } catch (const RuntimeFailure& e) {
      throw RuntimeFailure(std::string("probe window [") + short_fmt(probe.window_start()) + ", " +
                           short_fmt(probe.window_end()) + "] ns: " + e.what());
    }
    out.raw = ProbeSignal{grid, VectorXd::Zero(grid.size()), VectorXd::Zero(grid.size())};
    out.raw.i_r.tail(n) = sig.i_r.cwiseMax(0.0);
    out.raw.i_l.tail(n) = sig.i_l.cwiseMax(0.0);
  }

  ProbeSignal detected = apply_contrast(convolve_irf(out.raw, c.detector), c.detector.contrast);
  if (c.run.peak_counts_per_bin > 0) {
    const double peak = std::max(detected.i_r.maxCoeff(), detected.i_l.maxCoeff());
    if (peak > 0) {
      const double scale = c.run.peak_counts_per_bin / peak;
      std::mt19937_64 rng(c.run.seed + point_index);
      for (VectorXd* ch : {&detected.i_r, &detected.i_l})
        for (Eigen::Index i = 0; i < ch->size(); ++i) {
          std::poisson_distribution<long long> counts(scale * (*ch)(i));
          (*ch)(i) = (*ch)(i) > 0 ? static_cast<double>(counts(rng)) : 0.0;
        }
    }
  }
  out.total_emission = (detected.i_r + detected.i_l).sum() * c.detector.bin_width_ns;
  out.trace = dcp_trace(detected.times, detected.i_r, detected.i_l);
  out.physicality.dcp_in_bounds = dcp_bounded(out.trace);
  out.window = fit_window(c, scheme);
  if (fit_trace) out.fit = fit_precession(out.trace, out.window);
  if (keep_trajectory) out.trajectory = std::move(traj);
  return out;
}

}  // namespace

SequenceResult run_point(const ExperimentConfig& c, const LevelScheme& scheme, const PolarizationState& commanded,
                         double write_area, std::uint64_t point_index, bool keep_trajectory) {
  return run_point_impl(c, scheme, channels_from_scheme(scheme), commanded, write_area, point_index, keep_trajectory,
                        true);
}

std::string tool_version() { return DEXWRITE_VERSION; }

RunReport run_sequence(const ExperimentConfig& c) {
  validate_config(c);
  RunReport r;
  r.config = c;
  r.config_echo = config_echo(c);
  r.version = tool_version();
  const LevelScheme scheme = build_scheme(c.scheme);
  const auto channels = channels_from_scheme(scheme);
  std::vector<DriveTerm> drives = build_drive(scheme, c.write, DriveOptions{c.run.be_leakage});
  for (const auto& d : build_drive(scheme, c.probe)) drives.push_back(d);
  r.audit = audit_timescales(scheme, drives, channels);
  r.warnings = pulse_warnings(c.write, scheme);
  r.result = run_point_impl(c, scheme, channels, *c.write.polarization, c.write.area(), 0,
                            wants_output(c, "trajectory"), true);
  return r;
}

RabiScan scan_rabi(const ExperimentConfig& c, int jobs) {
  validate_config(c);
  const LevelScheme scheme = build_scheme(c.scheme);
  const auto channels = channels_from_scheme(scheme);
  const int n = c.scan.rabi_points;
  const double k = c.write.calibration_k;
  const double x_max = c.scan.rabi_max_area_pi * constants::pi / k;
  RabiScan scan;
  scan.sqrt_power = VectorXd::LinSpaced(n, 0.0, x_max);
  scan.pl = VectorXd::Zero(n);
  std::vector<Physicality> phys(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
    const double x = scan.sqrt_power(static_cast<Eigen::Index>(i));
    const SequenceResult r = run_point_impl(c, scheme, channels, *c.write.polarization, area_from_power(x * x, k), i,
                                            false, false);
    scan.pl(static_cast<Eigen::Index>(i)) = r.total_emission;
    phys[i] = r.physicality;
  });
  scan.physicality = phys.front();
  for (const auto& p : phys) scan.physicality = merge(scan.physicality, p);
  try {
    scan.fit = fit_rabi(scan.sqrt_power, scan.pl);
  } catch (const ValidationError& e) {
    scan.fit_error = e.what();
  }
  return scan;
}

std::vector<std::pair<double, double>> scan_points(const ExperimentConfig& c) {
  std::vector<std::pair<double, double>> pts;
  const int nt = c.scan.theta_points, np = c.scan.phi_points;
  switch (c.scan.kind) {
    case ScanKind::Theta:
      for (int i = 0; i < nt; ++i) pts.emplace_back(constants::two_pi * i / nt, c.scan.phi_rad);
      break;
    case ScanKind::Phi:
      for (int j = 0; j < np; ++j) pts.emplace_back(c.scan.theta_rad, constants::two_pi * j / np);
      break;
    case ScanKind::Map:
      for (int i = 0; i < nt; ++i)
        for (int j = 0; j < np; ++j) pts.emplace_back(constants::pi * i / (nt - 1), constants::two_pi * j / np);
      break;
    default:
      pts.emplace_back(c.write.polarization->theta, c.write.polarization->phi);
  }
  return pts;
}

MapScan scan_map(const ExperimentConfig& c, int jobs) {
  validate_config(c);
  const LevelScheme scheme = build_scheme(c.scheme);
  const auto channels = channels_from_scheme(scheme);
  const auto pts = scan_points(c);
  const bool keep = wants_output(c, "trajectory");
  MapScan scan;
  scan.rows.resize(pts.size());
  parallel_for(pts.size(), jobs, [&](std::size_t i) {
    auto& row = scan.rows[i];
    row.theta = pts[i].first;
    row.phi = pts[i].second;
    row.result = run_point_impl(c, scheme, channels, PolarizationState{row.theta, row.phi}, c.write.area(), i, keep,
                                true);
  });

  std::vector<FidelityInput> inputs;
  inputs.reserve(pts.size());
  for (const auto& row : scan.rows) inputs.push_back({row.theta, row.phi + c.run.phi_offset_rad, row.result.fit});
  scan.summary = fidelity_map(inputs, ResponseModel::from(scheme, c.detector));
  scan.physicality = scan.rows.front().result.physicality;
  for (std::size_t i = 0; i < scan.rows.size(); ++i) {
    scan.rows[i].fidelity = scan.summary.fidelity[i];
    const SequenceResult& r = scan.rows[i].result;
    scan.max_abs_dcp = std::max(scan.max_abs_dcp, r.trace.max_abs_dcp(r.window.t_min, r.window.t_max));
    scan.max_abs_dcp_all_bins = std::max(scan.max_abs_dcp_all_bins, r.trace.max_abs_dcp());
    scan.physicality = merge(scan.physicality, scan.rows[i].result.physicality);
  }
  return scan;
}

std::string timescale_ladder(const ExperimentConfig& c, const LevelScheme& scheme) {
  const std::pair<const char*, double> steps[] = {
      {"pulse", c.write.duration_ns},
      {"relax", 1.0 / scheme.rates().relax},
      {"period", scheme.precession_period_ns()},
      {"T2", c.scheme.de_coherence_ns},
      {"lifetime", c.scheme.de_lifetime_ns},
  };
  std::ostringstream o;
  for (std::size_t i = 0; i < std::size(steps); ++i) {
    if (i > 0) {
      const double ratio = steps[i].second / steps[i - 1].second;
      o << (ratio >= 5.0 ? " << " : ratio > 1.0 ? " < " : " >= ");
    }
    o << steps[i].first << " " << short_fmt(steps[i].second) << " ns";
  }
  return o.str();
}

void write_trace_csv(const std::string& path, const DcpTrace& t) {
  auto f = open_out(path);
  f << "time_ns,i_r,i_l,dcp,valid\n";
  for (Eigen::Index i = 0; i < t.times.size(); ++i)
    f << fmt(t.times(i)) << ',' << fmt(t.i_r(i)) << ',' << fmt(t.i_l(i)) << ',' << fmt(t.dcp(i)) << ','
      << (t.valid(i) ? 1 : 0) << '\n';
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  auto f = open_out(path);
  f << "time_ns";
  for (Level l : kAllLevels) f << ",pop_" << label(l);
  f << ",re_rho_de_g,im_rho_de_g";
  for (const auto& n : traj.flux_names) f << ",flux_" << n;
  f << '\n';
  const int gp = index(Level::DeGroundPlus), gm = index(Level::DeGroundMinus);
  for (Eigen::Index i = 0; i < traj.times.size(); ++i) {
    const auto& s = traj.states[static_cast<std::size_t>(i)];
    f << fmt(traj.times(i));
    for (Level l : kAllLevels) f << ',' << fmt(s.population(l));
    f << ',' << fmt(s.elements(gp, gm).real()) << ',' << fmt(s.elements(gp, gm).imag());
    for (Eigen::Index j = 0; j < traj.emission_flux.cols(); ++j) f << ',' << fmt(traj.emission_flux(i, j));
    f << '\n';
  }
}

void write_map_csv(const std::string& path, const MapScan& scan) {
  auto f = open_out(path);
  f << "theta_rad,phi_rad,visibility,phase_rad,period_ns,fidelity,reliable\n";
  for (const auto& r : scan.rows) {
    const auto& fit = r.result.fit;
    f << fmt(r.theta) << ',' << fmt(r.phi) << ',' << fmt(fit.visibility) << ',' << fmt(fit.phase) << ','
      << fmt(fit.period) << ',' << (std::isnan(r.fidelity) ? "nan" : fmt(r.fidelity)) << ','
      << (fit.period_reliable ? 1 : 0) << '\n';
  }
}

void write_rabi_csv(const std::string& path, const RabiScan& scan) {
  auto f = open_out(path);
  f << "sqrt_power,pl_intensity\n";
  for (Eigen::Index i = 0; i < scan.sqrt_power.size(); ++i) f << fmt(scan.sqrt_power(i)) << ',' << fmt(scan.pl(i)) << '\n';
  if (scan.fit) {
    f << "# fit k=" << fmt(scan.fit->k) << " amplitude=" << fmt(scan.fit->amplitude)
      << " damping=" << fmt(scan.fit->damping) << " background=" << fmt(scan.fit->background) << '\n';
    f << "# sqrt_power_pi=" << fmt(scan.fit->sqrt_power_pi()) << " sqrt_power_2pi=" << fmt(scan.fit->sqrt_power_2pi())
      << '\n';
  } else {
    f << "# fit failed: " << scan.fit_error << '\n';
  }
}

void write_spectrum_csv(const std::string& path, const PleSpectrum& s) {
  auto f = open_out(path);
  f << "energy_mev,de_h,de_v,be_h,be_v\n";
  for (Eigen::Index i = 0; i < s.energy_mev.size(); ++i)
    f << fmt(s.energy_mev(i)) << ',' << fmt(s.de_h(i)) << ',' << fmt(s.de_v(i)) << ',' << fmt(s.be_h(i)) << ','
      << fmt(s.be_v(i)) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
}

namespace {

void physicality_lines(std::ostringstream& o, const Physicality& p) {
  o << "max_trace_error = " << fmt(p.max_trace_error) << '\n';
  o << "min_eigenvalue = " << fmt(p.min_eigenvalue) << '\n';
  o << "max_hermiticity_correction = " << fmt(p.max_hermiticity_correction) << '\n';
  o << "dcp_in_bounds = " << (p.dcp_in_bounds ? "true" : "false") << '\n';
}

void fit_lines(std::ostringstream& o, const PrecessionFit& fit) {
  o << "visibility = " << fmt(fit.visibility) << '\n';
  o << "phase_rad = " << fmt(fit.phase) << '\n';
  o << "period_ns = " << fmt(fit.period) << '\n';
  o << "decay_time_ns = " << fmt(fit.decay_time) << '\n';
  o << "offset = " << fmt(fit.offset) << '\n';
  o << "residual_rms = " << fmt(fit.residual_rms) << '\n';
  o << "period_reliable = " << (fit.period_reliable ? "true" : "false") << '\n';
  o << "fit_points = " << fit.points << '\n';
}

}  // namespace

std::string format_report(const RunReport& r) {
  const LevelScheme scheme = build_scheme(r.config.scheme);
  std::ostringstream o;
  o << "dexwrite " << r.version << "\n\n[timescales]\n" << timescale_ladder(r.config, scheme) << '\n';
  o << "implied_period_ns = " << fmt(scheme.precession_period_ns()) << '\n';
  o << "integrator_step_ns = " << fmt(r.audit.step_ns) << " (limited by " << r.audit.limiting << ")\n";
  for (const auto& w : r.warnings) o << "warning: " << w << '\n';
  o << "\n[fit]\n";
  fit_lines(o, r.result.fit);
  o << "fit_window_ns = " << fmt(r.result.window.t_min) << " " << fmt(r.result.window.t_max) << '\n';
  o << "max_abs_dcp = " << fmt(r.result.trace.max_abs_dcp(r.result.window.t_min, r.result.window.t_max)) << '\n';
  o << "max_abs_dcp_all_bins = " << fmt(r.result.trace.max_abs_dcp()) << '\n';
  o << "\n[physicality]\n";
  physicality_lines(o, r.result.physicality);
  return o.str();
}

std::string format_rabi_report(const ExperimentConfig& c, const RabiScan& scan) {
  std::ostringstream o;
  o << "dexwrite " << tool_version() << "\n\n[rabi]\npoints = " << scan.sqrt_power.size() << '\n';
  o << "max_area_pi = " << fmt(c.scan.rabi_max_area_pi) << '\n';
  if (scan.fit) {
    o << "k = " << fmt(scan.fit->k) << "\namplitude = " << fmt(scan.fit->amplitude)
      << "\ndamping = " << fmt(scan.fit->damping) << "\nbackground = " << fmt(scan.fit->background)
      << "\nsqrt_power_pi = " << fmt(scan.fit->sqrt_power_pi()) << "\nsqrt_power_2pi = " << fmt(scan.fit->sqrt_power_2pi())
      << "\nresidual_rms = " << fmt(scan.fit->residual_rms) << '\n';
  } else {
    o << "fit_error = " << scan.fit_error << '\n';
  }
  o << "\n[physicality]\n";
  physicality_lines(o, scan.physicality);
  return o.str();
}

std::string format_map_report(const ExperimentConfig& c, const MapScan& scan) {
  std::ostringstream o;
  o << "dexwrite " << tool_version() << "\n\n[scan]\nkind = " << to_string(c.scan.kind) << "\npoints = " << scan.rows.size()
    << "\nmax_abs_dcp = " << fmt(scan.max_abs_dcp) << "\nmax_abs_dcp_all_bins = " << fmt(scan.max_abs_dcp_all_bins)
    << "\nfidelity_min = " << fmt(scan.summary.min)
    << "\nfidelity_mean = " << fmt(scan.summary.mean) << "\nexcluded_fits = " << scan.summary.excluded << '\n';
  o << "\n[physicality]\n";
  physicality_lines(o, scan.physicality);
  return o.str();
}

}  // namespace dexw
