#include "dexwrite/readout.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dexw {

namespace {
constexpr double kFwhmToSigma = 0.42466090014400953;
}

double DetectorModel::irf_sigma_ns() const { return irf == IrfShape::Gaussian ? irf_fwhm_ns * kFwhmToSigma : 0.0; }

double DetectorModel::irf_attenuation(double period_ns) const {
  const double x = constants::two_pi * irf_sigma_ns() / period_ns;
  return std::exp(-0.5 * x * x);
}

void DetectorModel::validate() const {
  if (!(bin_width_ns > 0) || !std::isfinite(bin_width_ns)) throw ValidationError("detector: bin width must be > 0");
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ValidationError("detector: contrast must lie in [0, 1]");
  if (irf == IrfShape::Gaussian) {
    if (!(irf_fwhm_ns > 0) || !std::isfinite(irf_fwhm_ns)) throw ValidationError("detector: IRF FWHM must be > 0");
    if (bin_width_ns > irf_fwhm_ns / 4.0)
      throw ValidationError("detector: undersampled IRF kernel (bin width must be <= FWHM/4)");
  }
}

DetectorModel DetectorModel::ideal() { return {IrfShape::None, 0.4, 0.05, 1.0}; }

DetectorModel DetectorModel::paper_like() { return {IrfShape::Gaussian, 0.4, 0.05, 0.69}; }

double DcpTrace::max_abs_dcp() const {
  return max_abs_dcp(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
}

double DcpTrace::max_abs_dcp(double t_min, double t_max) const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < dcp.size(); ++i)
    if (valid(i) && times(i) >= t_min && times(i) <= t_max) m = std::max(m, std::abs(dcp(i)));
  return m;
}

ProbeSignal weak_probe_readout(const Trajectory& traj, const PulseSpec& probe, const LevelScheme& scheme) {
  if (probe.kind != PulseKind::Probe) throw ValidationError("weak_probe_readout: pulse is not a probe");
  validate_pulse(probe);
  if (traj.times.size() == 0 || probe.window_end() < traj.times(0) ||
      probe.window_start() > traj.times(traj.times.size() - 1))
    throw ValidationError("weak_probe_readout: probe window lies outside the trajectory");

  const double d_r = std::abs(transition_dipole(scheme, Level::DeGroundPlus, Level::XxPlus, Circular::R));
  const double d_l = std::abs(transition_dipole(scheme, Level::DeGroundMinus, Level::XxMinus, Circular::L));
  const double gamma = scheme.rates().xx_rad;
  ProbeSignal out{traj.times, VectorXd::Zero(traj.times.size()), VectorXd::Zero(traj.times.size())};
  for (Eigen::Index i = 0; i < traj.times.size(); ++i) {
    const double env = envelope_value(probe, traj.times(i));
    const auto& s = traj.states[static_cast<std::size_t>(i)];
    out.i_r(i) = std::max(0.0, (d_r * env) * (d_r * env) / gamma * s.population(Level::DeGroundPlus));
    out.i_l(i) = std::max(0.0, (d_l * env) * (d_l * env) / gamma * s.population(Level::DeGroundMinus));
  }
  return out;
}

ProbeSignal coherent_probe_readout(const StateMatrix& rho_start, const LevelScheme& scheme,
                                   const std::vector<LindbladChannel>& channels, const PulseSpec& probe,
                                   const VectorXd& t_grid, const EvolveOptions& options) {
  if (probe.kind != PulseKind::Probe) throw ValidationError("coherent_probe_readout: pulse is not a probe");
  ProbeSignal out{t_grid, VectorXd(), VectorXd()};
  for (Circular c : {Circular::R, Circular::L}) {
    PulseSpec p = probe;
    p.circular = c;
    const Trajectory traj = evolve(rho_start, scheme, build_drive(scheme, p), channels, t_grid, options);
    const int col = traj.flux_column(c == Circular::R ? "xx_rad(+3)" : "xx_rad(-3)");
    (c == Circular::R ? out.i_r : out.i_l) = traj.emission_flux.col(col);
  }
  return out;
}

ProbeSignal convolve_irf(const ProbeSignal& signal, const DetectorModel& detector) {
  detector.validate();
  if (detector.irf == IrfShape::None) return signal;
  const Eigen::Index n = signal.times.size();
  if (n < 2) return signal;
  const double h = (signal.times(n - 1) - signal.times(0)) / static_cast<double>(n - 1);
  if (std::abs(h - detector.bin_width_ns) > 1e-9 * detector.bin_width_ns)
    throw ValidationError("convolve_irf: trace bins do not match the detector bin width");

  const double sigma = detector.irf_sigma_ns();
  const auto half = static_cast<Eigen::Index>(std::ceil(6.0 * sigma / h));
  VectorXd kernel(2 * half + 1);
  for (Eigen::Index k = -half; k <= half; ++k) {
    const double x = static_cast<double>(k) * h / sigma;
    kernel(k + half) = std::exp(-0.5 * x * x);
  }

  auto spread = [&](const VectorXd& in) {
    VectorXd out = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in(i) == 0.0) continue;
      const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
      const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half);
      const auto w = kernel.segment(lo - i + half, hi - lo + 1);
      out.segment(lo, hi - lo + 1) += (in(i) / w.sum()) * w;
    }
    return out;
  };
  return {signal.times, spread(signal.i_r), spread(signal.i_l)};
}

ProbeSignal apply_contrast(const ProbeSignal& s, double contrast) {
  if (!(contrast >= 0.0 && contrast <= 1.0)) throw ValidationError("apply_contrast: contrast must lie in [0, 1]");
  const double keep = 0.5 * (1.0 + contrast), leak = 0.5 * (1.0 - contrast);
  return {s.times, keep * s.i_r + leak * s.i_l, leak * s.i_r + keep * s.i_l};
}

DcpTrace dcp_trace(const VectorXd& times, const VectorXd& i_r, const VectorXd& i_l, double floor_fraction) {
  if (times.size() != i_r.size() || times.size() != i_l.size())
    throw ValidationError("dcp_trace: mismatched grids");
  DcpTrace t{times, i_r, i_l, VectorXd::Zero(times.size()), Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(times.size(), false)};
  if (times.size() == 0) return t;
  const VectorXd total = i_r + i_l;
  const double floor = floor_fraction * total.maxCoeff();
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    if (total(i) > floor && total(i) > 0.0) {
      t.valid(i) = true;
      t.dcp(i) = std::clamp((i_r(i) - i_l(i)) / total(i), -1.0, 1.0);
    }
  }
  return t;
}

cdouble ResponseModel::transfer(double w) const {
  cdouble h(contrast * std::exp(-0.5 * (w * irf_sigma_ns) * (w * irf_sigma_ns)), 0.0);
  if (relax_rate > 0) h *= relax_rate / cdouble(relax_rate, w);
  return h;
}

ResponseModel ResponseModel::from(const LevelScheme& scheme, const DetectorModel& detector) {
  return {scheme.rates().relax, detector.irf_sigma_ns(), detector.contrast};
}

WrittenStateEstimate reconstruct_written_state(const PrecessionFit& fit, const ResponseModel& response,
                                               int eigenaxis_sign, double degenerate_below) {
  WrittenStateEstimate est;
  const double w = fit.period > 0 ? constants::two_pi / fit.period : 0.0;
  const cdouble h = response.transfer(w);
  est.visibility = std::abs(h) > 0 ? std::min(1.0, fit.visibility / std::abs(h)) : 0.0;
  est.phase = wrap_angle(fit.phase - std::arg(h));
  const double sign = eigenaxis_sign >= 0 ? 1.0 : -1.0;
  const double v = est.visibility;
  est.bloch = Bloch(sign * std::sqrt(std::max(0.0, 1.0 - v * v)), -v * std::sin(est.phase), v * std::cos(est.phase));
  const double polar = std::asin(v);
  est.poincare.theta = sign > 0 ? polar : constants::pi - polar;
  if (v < degenerate_below) {
    est.poincare.phi = 0.0;
    est.poincare.phi_degenerate = true;
  } else {
    est.poincare.phi = wrap_angle(est.phase + constants::pi);
  }
  return est;
}

FidelitySummary fidelity_map(const std::vector<FidelityInput>& points, const ResponseModel& response) {
  FidelitySummary s;
  s.fidelity.reserve(points.size());
  double sum = 0.0;
  int used = 0;
  s.min = 1.0;
  for (const auto& p : points) {
    if (!p.fit.period_reliable && p.fit.visibility > 0.02) {
      s.fidelity.push_back(std::numeric_limits<double>::quiet_NaN());
      ++s.excluded;
      continue;
    }
    const Bloch target = target_de_state(p.theta, p.phi).bloch();
    const WrittenStateEstimate est = reconstruct_written_state(p.fit, response, target.x() >= 0 ? +1 : -1);
    const double f = bloch_fidelity(est.bloch, target);
    s.fidelity.push_back(f);
    s.min = std::min(s.min, f);
    sum += f;
    ++used;
  }
  s.mean = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  if (used == 0) s.min = std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace dexw
