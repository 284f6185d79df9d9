// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dexwrite/oracles.hpp"
#include "dexwrite/protocol.hpp"

using namespace dexw;

namespace {

constexpr double pi = constants::pi;
constexpr double deg = pi / 180.0;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_{std::chrono::steady_clock::now()};
};

int failures = 0;
Physicality physicality{0.0, 1.0, 0.0, true};

void report(int id, const std::string& name, bool ok, const std::string& detail, double secs, double limit) {
  const bool in_time = secs < limit;
  const bool pass = ok && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %2d %-32s %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
              secs, limit, in_time ? "" : " over time");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void track(const Trajectory& t) {
  for (const auto& s : t.states) {
    physicality.max_trace_error = std::max(physicality.max_trace_error, std::abs(s.trace() - 1.0));
    physicality.min_eigenvalue = std::min(physicality.min_eigenvalue, s.min_eigenvalue());
  }
  physicality.max_hermiticity_correction = std::max(physicality.max_hermiticity_correction, t.max_hermiticity_correction);
}

void track(const Physicality& p) { physicality = merge(physicality, p); }

double phase_error(double a, double b) { return std::abs(wrap_angle(a - b + pi) - pi); }

std::string csv_bytes(const MapScan& s) {
  const auto path = std::filesystem::temp_directory_path() / "dexwrite_acceptance_map.csv";
  write_map_csv(path.string(), s);
  std::ifstream f(path, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

std::string csv_bytes(const DcpTrace& t) {
  const auto path = std::filesystem::temp_directory_path() / "dexwrite_acceptance_trace.csv";
  write_trace_csv(path.string(), t);
  std::ifstream f(path, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

ExperimentConfig preset(Preset p) {
  ExperimentConfig c = default_config();
  apply_preset(c, p);
  return c;
}

// Reruns recorded for criterion 9.
int rerun_checks = 0;
int rerun_mismatches = 0;

void rerun_map(const ExperimentConfig& c, const MapScan& first) {
  const ExperimentConfig back = parse_config_text(config_echo(c), "echo");
  ++rerun_checks;
  if (config_echo(back) != config_echo(c) || csv_bytes(scan_map(back)) != csv_bytes(first)) ++rerun_mismatches;
}

// 1. Two-level Rabi flopping against sin^2(theta / 2).
void rabi_oracle_equivalence() {
  Stopwatch sw;
  const LevelScheme scheme = build_scheme();
  std::vector<LindbladChannel> decay;
  for (const auto& ch : channels_from_scheme(scheme))
    if (ch.name.rfind("de_excited_rad", 0) == 0) decay.push_back(ch);
  double lossless = 0.0, lossy = 0.0;
  for (int q = 1; q <= 16; ++q) {
    const double theta = 0.25 * pi * q;
    PulseSpec p;
    p.polarization = PolarizationState::right();
    p.area_rad = theta;
    const std::vector<DriveTerm> drive{{Level::Vac, Level::DeExcitedPlus, 1.0, 0.0, p}};
    VectorXd grid(2);
    grid << p.window_start(), p.window_end();
    const double expected = std::pow(std::sin(theta / 2), 2);
    const Trajectory a = evolve(StateMatrix::basis(Level::Vac), scheme, drive, {}, grid);
    const Trajectory b = evolve(StateMatrix::basis(Level::Vac), scheme, drive, decay, grid);
    track(a);
    track(b);
    lossless = std::max(lossless, std::abs(a.states.back().population(Level::DeExcitedPlus) - expected));
    lossy = std::max(lossy, std::abs(b.states.back().population(Level::DeExcitedPlus) - expected));
  }
  report(1, "Rabi oracle equivalence", lossless < 1e-6 && lossy < 1e-3,
         fmt("max error %.2e (< 1e-6) lossless, %.2e (< 1e-3) with decay", lossless, lossy), sw.seconds(), 5);
}

// 2. Free precession of 50 random pure DE states against a 2x2 propagator.
void precession_oracle_equivalence() {
  Stopwatch sw;
  const LevelScheme scheme = build_scheme();
  const auto channels = channels_from_scheme(scheme);
  const double w = 2 * pi * scheme.delta_ev() / constants::h_ev_ns;
  const double g_rad = 1.0 / 1000.0, g_deph = 1.0 / 100.0;
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> g;
  const VectorXd grid = VectorXd::LinSpaced(201, 0.0, 20.0);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    CVector2<double> c0(cdouble(g(rng), g(rng)), cdouble(g(rng), g(rng)));
    c0.normalize();
    const Trajectory t = evolve(StateMatrix::ground_de(c0), scheme, {}, channels, grid);
    track(t);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double tt = grid(i);
      const cdouble co(std::cos(w * tt / 2), 0.0), si(0.0, -std::sin(w * tt / 2));
      const cdouble a = co * c0(0) + si * c0(1), b = si * c0(0) + co * c0(1);
      const cdouble coh = a * std::conj(b) * std::exp(-g_rad * tt);
      const Bloch ref(2 * coh.real(), -2 * coh.imag() * std::exp(-g_deph * tt),
                      (std::norm(a) - std::norm(b)) * std::exp(-(g_rad + g_deph) * tt));
      worst = std::max(worst, (t.states[static_cast<std::size_t>(i)].ground_de_bloch() - ref).norm());
    }
  }
  report(2, "precession oracle equivalence", worst < 1e-6, fmt("max Bloch deviation %.2e (< 1e-6)", worst), sw.seconds(),
         10);
}

// 3. Fitted period against h / delta.
void period_splitting() {
  Stopwatch sw;
  double periods[2];
  const double deltas[2] = {1.5, 1.334};
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig c = preset(Preset::Ideal);
    c.scheme.delta_uev = deltas[i];
    const RunReport r = run_sequence(c);
    track(r.result.physicality);
    periods[i] = r.result.fit.period;
  }
  const double e1 = std::abs(periods[0] / 2.757 - 1), e2 = std::abs(periods[1] / 3.10 - 1);
  report(3, "period-splitting consistency", e1 < 3e-3 && e2 < 3e-3,
         fmt("T(1.5 ueV) = %.4f ns (%.2f%%), T(1.334 ueV) = %.4f ns (%.2f%%), limit 0.3%%", periods[0], 100 * e1,
             periods[1], 100 * e2),
         sw.seconds(), 10);
}

// 4. Visibility law and phase slope with the ideal detector.
void visibility_law() {
  Stopwatch sw;
  ExperimentConfig c = preset(Preset::Ideal);
  c.scan.kind = ScanKind::Theta;
  c.scan.theta_points = 24;
  c.scan.phi_rad = 3 * pi / 2;
  const MapScan theta = scan_map(c);
  track(theta.physicality);
  double vis_err = 0.0;
  for (const auto& row : theta.rows)
    vis_err = std::max(vis_err, std::abs(row.result.fit.visibility - std::abs(std::sin(row.theta))));
  rerun_map(c, theta);

  ExperimentConfig p = preset(Preset::Ideal);
  p.scan.kind = ScanKind::Phi;
  p.scan.phi_points = 24;
  p.scan.theta_rad = pi / 2;
  const MapScan phi = scan_map(p);
  track(phi.physicality);
  // Unwrap the fitted phase along phi and regress.
  std::vector<double> x, y;
  double prev = 0.0, offset = 0.0;
  for (std::size_t i = 0; i < phi.rows.size(); ++i) {
    double v = phi.rows[i].result.fit.phase;
    if (i > 0) {
      while (v + offset - prev > pi) offset -= 2 * pi;
      while (v + offset - prev < -pi) offset += 2 * pi;
    }
    prev = v + offset;
    x.push_back(phi.rows[i].phi);
    y.push_back(prev);
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double resid = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) resid = std::max(resid, std::abs(y[i] - slope * x[i] - icpt));
  // Slope error expressed as the drift accumulated across the full 2 pi scan.
  const double drift = std::abs(std::abs(slope) - 1.0) * 2 * pi;
  report(4, "visibility law", vis_err < 1e-3 && drift < deg && resid < deg,
         fmt("max |v - |sin theta|| %.2e (< 1e-3); |slope| %.6f, drift %.3f deg, max residual %.3f deg (< 1 deg)",
             vis_err, std::abs(slope), drift / deg, resid / deg),
         sw.seconds(), 60);
}

// 5. Reconstruction of (theta, phi) over a 16 x 16 map.
void one_to_one_map() {
  Stopwatch sw;
  ExperimentConfig c = preset(Preset::Ideal);
  c.scan.kind = ScanKind::Map;
  c.scan.theta_points = 16;
  c.scan.phi_points = 16;
  const MapScan m = scan_map(c);
  track(m.physicality);
  const ResponseModel response = ResponseModel::from(build_scheme(c.scheme), c.detector);
  double th_err = 0.0, ph_err = 0.0, pole_err = 0.0;
  int pole_degenerate = 0, poles = 0;
  for (const auto& row : m.rows) {
    // The circular probes cannot see the eigenaxis component; its sign
    // (the hemisphere) is taken from the commanded state.
    const int sign = std::cos(row.theta) >= 0 ? +1 : -1;
    const WrittenStateEstimate est = reconstruct_written_state(row.result.fit, response, sign);
    if (row.theta < 10 * deg - 1e-12 || row.theta > 170 * deg + 1e-12) {
      ++poles;
      pole_err = std::max(pole_err, std::abs(est.poincare.theta - row.theta));
      pole_degenerate += est.poincare.phi_degenerate ? 1 : 0;
      continue;
    }
    th_err = std::max(th_err, std::abs(est.poincare.theta - row.theta));
    ph_err = std::max(ph_err, phase_error(est.poincare.phi, row.phi));
  }
  report(5, "one-to-one map", th_err < deg && ph_err < deg && pole_err < deg && pole_degenerate == poles,
         fmt("max theta error %.4f deg, max phi error %.4f deg, pole theta error %.4f deg, %.0f", th_err / deg,
             ph_err / deg, pole_err / deg, pole_degenerate) +
             fmt("/%.0f poles flagged degenerate; hemisphere from the commanded state", poles),
         sw.seconds(), 120);
}

// 6. Numeric IRF convolution against the closed-form attenuation.
void irf_attenuation() {
  Stopwatch sw;
  DetectorModel det;
  det.bin_width_ns = 0.01;
  const double sigma = 0.4 / (2 * std::sqrt(2 * std::log(2.0)));
  double worst = 0.0;
  for (double period : {1.0, 2.0, 3.1, 5.0, 10.0}) {
    const VectorXd t = VectorXd::LinSpaced(8001, -40.0, 40.0);
    const VectorXd y = (1.0 + 0.5 * (2 * pi * t.array() / period).cos()).matrix();
    const ProbeSignal out = convolve_irf({t, y, y}, det);
    const double closed = std::exp(-0.5 * std::pow(2 * pi * sigma / period, 2));
    worst = std::max(worst, std::abs((out.i_r(4000) - 1.0) / 0.5 - closed));
  }
  const double f31 = std::exp(-0.5 * std::pow(2 * pi * sigma / 3.1, 2));
  report(6, "IRF attenuation", worst < 1e-4 && std::abs(f31 - 0.943) < 1e-3,
         fmt("max |numeric - closed form| %.2e (< 1e-4); factor at 3.1 ns %.4f (~0.943)", worst, f31), sw.seconds(), 5);
}

// 7. Paper-like map: peak DCP and fidelity after deconvolution.
void paper_like_map_regression() {
  Stopwatch sw;
  ExperimentConfig c = preset(Preset::PaperLike);
  c.scan.kind = ScanKind::Map;
  const MapScan m = scan_map(c);
  track(m.physicality);
  const bool ok = std::abs(m.max_abs_dcp - 0.65) <= 0.02 && m.summary.mean > 0.9;
  report(7, "paper-like map regression", ok,
         fmt("max |DCP| %.4f (0.65 +- 0.02; %.4f incl. edge bins), fidelity mean %.4f (> 0.9), min %.4f", m.max_abs_dcp,
             m.max_abs_dcp_all_bins, m.summary.mean, m.summary.min) +
             fmt(", %.0f x %.0f points", c.scan.theta_points, c.scan.phi_points),
         sw.seconds(), 120);
}

// Vertex of the parabola through three neighbouring samples.
double vertex(const VectorXd& x, const VectorXd& y, Eigen::Index i) {
  const double h = x(i + 1) - x(i);
  const double denom = y(i - 1) - 2 * y(i) + y(i + 1);
  return x(i) + 0.5 * h * (y(i - 1) - y(i + 1)) / denom;
}

// 8. Rabi scan with the default rates.
void rabi_regression() {
  Stopwatch sw;
  ExperimentConfig c = default_config();
  c.scan.rabi_max_area_pi = 3.0;
  const RabiScan s = scan_rabi(c);
  track(s.physicality);
  const Eigen::Index n = s.pl.size();
  Eigen::Index imax = 1;
  for (Eigen::Index i = 1; i < n - 1; ++i)
    if (s.pl(i) > s.pl(imax)) imax = i;
  Eigen::Index imin = imax + 1;
  for (Eigen::Index i = imax + 1; i < n - 1; ++i)
    if (s.pl(i) < s.pl(imin)) imin = i;
  const double x_pi = vertex(s.sqrt_power, s.pl, imax);
  const double x_2pi = vertex(s.sqrt_power, s.pl, imin);
  const double k = c.write.calibration_k;
  const double ratio = x_pi / x_2pi;
  // Max-to-min contrast: modulated fraction of the peak signal.
  const double contrast = (s.pl(imax) - s.pl(imin)) / s.pl(imax);
  const bool ok = std::abs(ratio / 0.5 - 1) < 5e-3 && std::abs(k * x_pi / pi - 1) < 5e-3 &&
                  std::abs(k * x_2pi / (2 * pi) - 1) < 5e-3 && contrast > 0.9;
  report(8, "Rabi regression", ok,
         fmt("max at %.4f pi, min at %.4f pi, ratio %.5f (0.5 within 0.5%%), contrast %.4f (> 0.9)", k * x_pi / pi,
             k * x_2pi / pi, ratio, contrast),
         sw.seconds(), 60);
}

// 10. Spin preservation after a pi write and relaxation, against a rate-equation ladder.
void spin_preservation() {
  Stopwatch sw;
  const ExperimentConfig c = default_config();
  const LevelScheme scheme = build_scheme(c.scheme);
  const auto channels = channels_from_scheme(scheme);
  const VectorXd grid = VectorXd::LinSpaced(41, c.write.window_end(), c.write.window_end() + 2.0);
  VectorXd full(grid.size() + 1);
  full << c.write.window_start(), grid;
  const Trajectory t = evolve(StateMatrix::basis(Level::Vac), scheme, build_drive(scheme, c.write), channels, full);
  track(t);

  // Ladder E -> G at the relaxation rate, E -> vacuum and G -> vacuum radiatively.
  const double r = 1.0 / c.scheme.relax_time_ns;
  const double ge = scheme.de_excited_rad();
  const double gg = 1.0 / c.scheme.de_lifetime_ns;
  const auto& s0 = t.states[1];
  const double e0 = s0.population(Level::DeExcitedPlus) + s0.population(Level::DeExcitedMinus);
  const double g0 = s0.population(Level::DeGroundPlus) + s0.population(Level::DeGroundMinus);
  double oracle_err = 0.0, de_g = 0.0, be = 0.0;
  for (Eigen::Index i = 1; i < full.size(); ++i) {
    const double tau = full(i) - full(1);
    const double ke = r + ge;
    const double e = e0 * std::exp(-ke * tau);
    const double g = g0 * std::exp(-gg * tau) + e0 * r / (ke - gg) * (std::exp(-gg * tau) - std::exp(-ke * tau));
    const auto& s = t.states[static_cast<std::size_t>(i)];
    const double e_sim = s.population(Level::DeExcitedPlus) + s.population(Level::DeExcitedMinus);
    de_g = s.population(Level::DeGroundPlus) + s.population(Level::DeGroundMinus);
    be = 0.0;
    for (Level l : {Level::BeGroundPlus, Level::BeGroundMinus, Level::BeExcitedPlus, Level::BeExcitedMinus})
      be += s.population(l);
    oracle_err = std::max({oracle_err, std::abs(e_sim - e), std::abs(de_g - g)});
  }

  // Same write with the off-resonant bright-exciton coupling switched on.
  const Trajectory leak = evolve(StateMatrix::basis(Level::Vac), scheme,
                                 build_drive(scheme, c.write, DriveOptions{true}), channels, full);
  track(leak);
  double be_leak = 0.0;
  for (Level l : {Level::BeGroundPlus, Level::BeGroundMinus, Level::BeExcitedPlus, Level::BeExcitedMinus})
    be_leak += leak.states.back().population(l);
  // BE population decays within a few ns; the value right after the pulse is the relevant bound.
  double be_leak_peak = 0.0;
  for (const auto& s : leak.states) {
    double b = 0.0;
    for (Level l : {Level::BeGroundPlus, Level::BeGroundMinus, Level::BeExcitedPlus, Level::BeExcitedMinus})
      b += s.population(l);
    be_leak_peak = std::max(be_leak_peak, b);
  }
  report(10, "spin preservation", de_g > 0.95 && be < 0.01 && oracle_err < 1e-6,
         fmt("ground-DE %.5f (> 0.95), BE %.2e (< 0.01), rate-equation deviation %.2e; BE peak with leakage %.2e",
             de_g, be, oracle_err, be_leak_peak),
         sw.seconds(), 5);
}

// 9. Physicality over everything above plus byte-identical reruns.
void physicality_suite() {
  Stopwatch sw;
  ExperimentConfig c = preset(Preset::PaperLike);
  const RunReport a = run_sequence(c);
  const RunReport b = run_sequence(parse_config_text(a.config_echo, "echo"));
  track(a.result.physicality);
  ++rerun_checks;
  if (b.config_echo != a.config_echo || csv_bytes(a.result.trace) != csv_bytes(b.result.trace)) ++rerun_mismatches;
  const bool ok = physicality.max_trace_error < 1e-10 && physicality.min_eigenvalue >= -1e-9 &&
                  physicality.dcp_in_bounds && rerun_mismatches == 0;
  report(9, "physicality suite", ok,
         fmt("max trace error %.2e (< 1e-10), min eigenvalue %.2e (>= -1e-9), DCP in bounds %.0f, ",
             physicality.max_trace_error, physicality.min_eigenvalue, physicality.dcp_in_bounds ? 1.0 : 0.0) +
             fmt("%.0f/%.0f reruns byte identical", rerun_checks - rerun_mismatches, rerun_checks),
         sw.seconds(), 60);
}

}  // namespace

int main() {
  std::printf("dexwrite %s acceptance\n", tool_version().c_str());
  const auto guarded = [](int id, void (*fn)()) {
    try {
      fn();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d threw: %s\n", id, e.what());
    }
  };
  guarded(1, rabi_oracle_equivalence);
  guarded(2, precession_oracle_equivalence);
  guarded(3, period_splitting);
  guarded(4, visibility_law);
  guarded(5, one_to_one_map);
  guarded(6, irf_attenuation);
  guarded(7, paper_like_map_regression);
  guarded(8, rabi_regression);
  guarded(10, spin_preservation);
  guarded(9, physicality_suite);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
