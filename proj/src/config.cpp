#include "dexwrite/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace dexw {

std::string_view to_string(ReadoutMode m) { return m == ReadoutMode::Weak ? "weak" : "coherent"; }

std::string_view to_string(ScanKind k) {
  switch (k) {
    case ScanKind::None: return "none";
    case ScanKind::Rabi: return "rabi";
    case ScanKind::Theta: return "theta";
    case ScanKind::Phi: return "phi";
    case ScanKind::Map: return "map";
  }
  return "?";
}

Preset parse_preset(const std::string& name) {
  if (name.empty() || name == "none") return Preset::None;
  if (name == "ideal") return Preset::Ideal;
  if (name == "paper-like") return Preset::PaperLike;
  throw ValidationError("unknown preset '" + name + "' (expected ideal or paper-like)");
}

ExperimentConfig::ExperimentConfig() {
  deplete.kind = PulseKind::Deplete;
  deplete.t0_ns = -2.0;

  write.kind = PulseKind::Write;
  write.t0_ns = 0.0;
  write.duration_ns = 0.010;
  write.envelope = EnvelopeShape::Gaussian;
  write.polarization = PolarizationState::right();
  write.area_rad = constants::pi;

  probe.kind = PulseKind::Probe;
  probe.t0_ns = 0.1;
  probe.duration_ns = 12.0;
  probe.envelope = EnvelopeShape::FlatTop;
  probe.edge_ns = 0.05;
  probe.circular = Circular::R;
  probe.area_rad = 0.2 * constants::pi;

  detector = DetectorModel{};
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_preset(ExperimentConfig& c, Preset preset) {
  switch (preset) {
    case Preset::None: return;
    case Preset::Ideal:
      c.detector = DetectorModel::ideal();
      c.scheme.relax_time_ns = 1e-4;
      c.scheme.de_lifetime_ns = 1e12;
      c.scheme.de_coherence_ns = 1e12;
      c.run.impulsive_write = true;
      return;
    case Preset::PaperLike:
      c.detector = DetectorModel::paper_like();
      // The measured 3.1 ns precession period.
      c.scheme.delta_uev = splitting_from_period(3.10) * 1e6;
      return;
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Cursor {
  std::string where;  // "<source>:<line>"
  std::string key;
  std::string value;

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(where + ": " + key + ": " + what);
  }

  double number() const {
    double v = 0.0;
    const char* b = value.data();
    const char* e = b + value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("expected a number, got '" + value + "'");
    if (!std::isfinite(v)) fail("value must be finite");
    return v;
  }

  int integer() const {
    int v = 0;
    const char* b = value.data();
    const char* e = b + value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("expected an integer, got '" + value + "'");
    return v;
  }

  std::uint64_t unsigned_integer() const {
    std::uint64_t v = 0;
    const char* b = value.data();
    const char* e = b + value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) fail("expected a non-negative integer, got '" + value + "'");
    return v;
  }

  bool boolean() const {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail("expected true or false, got '" + value + "'");
  }
};

using Setter = std::function<void(ExperimentConfig&, const Cursor&)>;
using Table = std::map<std::string, Setter>;

EnvelopeShape parse_envelope(const Cursor& c) {
  if (c.value == "gaussian") return EnvelopeShape::Gaussian;
  if (c.value == "flat_top") return EnvelopeShape::FlatTop;
  c.fail("expected gaussian or flat_top, got '" + c.value + "'");
}

Circular parse_circular(const Cursor& c) {
  if (c.value == "R" || c.value == "r") return Circular::R;
  if (c.value == "L" || c.value == "l") return Circular::L;
  c.fail("expected R or L, got '" + c.value + "'");
}

void add_pulse_keys(Table& t, const std::string& section, PulseSpec ExperimentConfig::*member) {
  auto k = [&](const std::string& key) { return section + "." + key; };
  t[k("t0_ns")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).t0_ns = c.number(); };
  if (section == "deplete") return;
  t[k("duration_ns")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).duration_ns = c.number(); };
  t[k("envelope")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).envelope = parse_envelope(c); };
  t[k("edge_ns")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).edge_ns = c.number(); };
  t[k("area_rad")] = [member](ExperimentConfig& e, const Cursor& c) {
    (e.*member).area_rad = c.number();
    (e.*member).power.reset();
  };
  t[k("area_pi")] = [member](ExperimentConfig& e, const Cursor& c) {
    (e.*member).area_rad = c.number() * constants::pi;
    (e.*member).power.reset();
  };
  t[k("power")] = [member](ExperimentConfig& e, const Cursor& c) {
    (e.*member).power = c.number();
    (e.*member).area_rad.reset();
  };
  t[k("calibration_k")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).calibration_k = c.number(); };
  t[k("detuning_uev")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).detuning_ev = c.number() * 1e-6; };
  t[k("detuning_ev")] = [member](ExperimentConfig& e, const Cursor& c) { (e.*member).detuning_ev = c.number(); };
  t[k("spectral_width_uev")] = [member](ExperimentConfig& e, const Cursor& c) {
    (e.*member).spectral_width_ev = c.number() * 1e-6;
  };
  t[k("spectral_width_ev")] = [member](ExperimentConfig& e, const Cursor& c) {
    (e.*member).spectral_width_ev = c.number();
  };
}

const Table& key_table() {
  static const Table table = [] {
    Table t;
    auto num = [&t](const std::string& key, auto field) {
      t[key] = [field](ExperimentConfig& e, const Cursor& c) { field(e) = c.number(); };
    };
    auto opt = [&t](const std::string& key, auto field) {
      t[key] = [field](ExperimentConfig& e, const Cursor& c) {
        if (c.value == "auto") field(e).reset();
        else field(e) = c.number();
      };
    };
    num("scheme.scan_origin_ev", [](ExperimentConfig& e) -> double& { return e.scheme.scan_origin_ev; });
    num("scheme.de_ground_mev", [](ExperimentConfig& e) -> double& { return e.scheme.de_ground_mev; });
    num("scheme.de_excited_mev", [](ExperimentConfig& e) -> double& { return e.scheme.de_excited_mev; });
    num("scheme.de_second_mev", [](ExperimentConfig& e) -> double& { return e.scheme.de_second_mev; });
    num("scheme.be_offset_uev", [](ExperimentConfig& e) -> double& { return e.scheme.be_offset_uev; });
    num("scheme.xx_offset_mev", [](ExperimentConfig& e) -> double& { return e.scheme.xx_offset_mev; });
    num("scheme.delta_uev", [](ExperimentConfig& e) -> double& { return e.scheme.delta_uev; });
    num("scheme.de_lifetime_ns", [](ExperimentConfig& e) -> double& { return e.scheme.de_lifetime_ns; });
    num("scheme.de_coherence_ns", [](ExperimentConfig& e) -> double& { return e.scheme.de_coherence_ns; });
    num("scheme.relax_time_ns", [](ExperimentConfig& e) -> double& { return e.scheme.relax_time_ns; });
    num("scheme.be_lifetime_ns", [](ExperimentConfig& e) -> double& { return e.scheme.be_lifetime_ns; });
    num("scheme.xx_lifetime_ns", [](ExperimentConfig& e) -> double& { return e.scheme.xx_lifetime_ns; });
    opt("scheme.beta_abs", [](ExperimentConfig& e) -> std::optional<double>& { return e.scheme.beta_abs; });
    opt("scheme.gamma_abs", [](ExperimentConfig& e) -> std::optional<double>& { return e.scheme.gamma_abs; });
    num("scheme.beta_phase_rad", [](ExperimentConfig& e) -> double& { return e.scheme.beta_phase_rad; });
    num("scheme.gamma_phase_rad", [](ExperimentConfig& e) -> double& { return e.scheme.gamma_phase_rad; });
    opt("scheme.be_excited_over_de_excited",
        [](ExperimentConfig& e) -> std::optional<double>& { return e.scheme.be_excited_over_de_excited; });
    num("scheme.be_ground_over_be_excited",
        [](ExperimentConfig& e) -> double& { return e.scheme.be_ground_over_be_excited; });
    num("scheme.de_excited_over_de_ground",
        [](ExperimentConfig& e) -> double& { return e.scheme.de_excited_over_de_ground; });
    num("scheme.de_second_over_de_excited",
        [](ExperimentConfig& e) -> double& { return e.scheme.de_second_over_de_excited; });

    add_pulse_keys(t, "deplete", &ExperimentConfig::deplete);
    add_pulse_keys(t, "write", &ExperimentConfig::write);
    add_pulse_keys(t, "probe", &ExperimentConfig::probe);
    t["write.theta_rad"] = [](ExperimentConfig& e, const Cursor& c) {
      e.write.polarization = PolarizationState{c.number(), e.write.polarization->phi};
    };
    t["write.phi_rad"] = [](ExperimentConfig& e, const Cursor& c) {
      e.write.polarization = PolarizationState{e.write.polarization->theta, c.number()};
    };
    t["probe.circular"] = [](ExperimentConfig& e, const Cursor& c) { e.probe.circular = parse_circular(c); };

    t["detector.irf"] = [](ExperimentConfig& e, const Cursor& c) {
      if (c.value == "gaussian") e.detector.irf = IrfShape::Gaussian;
      else if (c.value == "none") e.detector.irf = IrfShape::None;
      else c.fail("expected gaussian or none, got '" + c.value + "'");
    };
    num("detector.irf_fwhm_ns", [](ExperimentConfig& e) -> double& { return e.detector.irf_fwhm_ns; });
    num("detector.bin_width_ns", [](ExperimentConfig& e) -> double& { return e.detector.bin_width_ns; });
    num("detector.contrast", [](ExperimentConfig& e) -> double& { return e.detector.contrast; });
    num("detector.peak_counts_per_bin", [](ExperimentConfig& e) -> double& { return e.run.peak_counts_per_bin; });

    num("run.rep_period_ns", [](ExperimentConfig& e) -> double& { return e.run.rep_period_ns; });
    t["run.readout"] = [](ExperimentConfig& e, const Cursor& c) {
      if (c.value == "weak") e.run.readout = ReadoutMode::Weak;
      else if (c.value == "coherent") e.run.readout = ReadoutMode::Coherent;
      else c.fail("expected weak or coherent, got '" + c.value + "'");
    };
    t["run.impulsive_write"] = [](ExperimentConfig& e, const Cursor& c) { e.run.impulsive_write = c.boolean(); };
    t["run.be_leakage"] = [](ExperimentConfig& e, const Cursor& c) { e.run.be_leakage = c.boolean(); };
    num("run.pulse_resolution", [](ExperimentConfig& e) -> double& { return e.run.pulse_resolution; });
    num("run.max_step_ns", [](ExperimentConfig& e) -> double& { return e.run.max_step_ns; });
    num("run.phi_offset_rad", [](ExperimentConfig& e) -> double& { return e.run.phi_offset_rad; });
    num("run.trace_padding_ns", [](ExperimentConfig& e) -> double& { return e.run.trace_padding_ns; });
    auto nan_or = [&t](const std::string& key, double RunSettings::*field) {
      t[key] = [field](ExperimentConfig& e, const Cursor& c) {
        e.run.*field = c.value == "auto" ? std::numeric_limits<double>::quiet_NaN() : c.number();
      };
    };
    nan_or("run.fit_start_ns", &RunSettings::fit_start_ns);
    nan_or("run.fit_end_ns", &RunSettings::fit_end_ns);
    t["run.seed"] = [](ExperimentConfig& e, const Cursor& c) { e.run.seed = c.unsigned_integer(); };
    t["run.outputs"] = [](ExperimentConfig& e, const Cursor& c) {
      static const std::set<std::string> known{"trace", "trajectory", "point_traces"};
      e.run.outputs.clear();
      if (c.value == "none") return;
      std::stringstream ss(c.value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (!known.count(item)) c.fail("unknown output '" + item + "' (expected trace, trajectory, point_traces)");
        e.run.outputs.push_back(item);
      }
    };

    t["scan.kind"] = [](ExperimentConfig& e, const Cursor& c) {
      for (ScanKind k : {ScanKind::None, ScanKind::Rabi, ScanKind::Theta, ScanKind::Phi, ScanKind::Map})
        if (c.value == to_string(k)) {
          e.scan.kind = k;
          return;
        }
      c.fail("expected none, rabi, theta, phi or map, got '" + c.value + "'");
    };
    t["scan.theta_points"] = [](ExperimentConfig& e, const Cursor& c) { e.scan.theta_points = c.integer(); };
    t["scan.phi_points"] = [](ExperimentConfig& e, const Cursor& c) { e.scan.phi_points = c.integer(); };
    num("scan.theta_rad", [](ExperimentConfig& e) -> double& { return e.scan.theta_rad; });
    num("scan.phi_rad", [](ExperimentConfig& e) -> double& { return e.scan.phi_rad; });
    t["scan.rabi_points"] = [](ExperimentConfig& e, const Cursor& c) { e.scan.rabi_points = c.integer(); };
    num("scan.rabi_max_area_pi", [](ExperimentConfig& e) -> double& { return e.scan.rabi_max_area_pi; });

    num("spectra.line_width_uev", [](ExperimentConfig& e) -> double& { return e.spectra.line_width_uev; });
    num("spectra.energy_min_mev", [](ExperimentConfig& e) -> double& { return e.spectra.energy_min_mev; });
    num("spectra.energy_max_mev", [](ExperimentConfig& e) -> double& { return e.spectra.energy_max_mev; });
    t["spectra.points"] = [](ExperimentConfig& e, const Cursor& c) { e.spectra.points = c.integer(); };
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name,
                                   const ExperimentConfig& base) {
  static const std::set<std::string> sections{"scheme", "deplete", "write", "probe",
                                              "detector", "run", "scan", "spectra"};
  ExperimentConfig cfg = base;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source_name + ":" + std::to_string(line_no);
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ValidationError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ValidationError(where + ": key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    const auto it = key_table().find(full);
    if (it == key_table().end()) throw ValidationError(where + ": unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(full).second) throw ValidationError(where + ": duplicate key '" + key + "'");
    if (value.empty()) throw ValidationError(where + ": " + key + ": missing value");
    it->second(cfg, Cursor{where, key, value});
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path, base);
}

void validate_config(const ExperimentConfig& c) {
  const LevelScheme scheme = build_scheme(c.scheme);
  c.detector.validate();
  validate_pulse(c.deplete);
  validate_pulse(c.write);
  validate_pulse(c.probe);
  if (c.deplete.kind != PulseKind::Deplete || c.write.kind != PulseKind::Write || c.probe.kind != PulseKind::Probe)
    throw ValidationError("pulse kinds are fixed per section");
  if (c.write.envelope != EnvelopeShape::Gaussian && c.run.impulsive_write)
    throw ValidationError("run.impulsive_write requires a gaussian write pulse");
  if (!(c.deplete.t0_ns < c.write.window_start()))
    throw ValidationError("ordering: depletion must precede the write pulse window");
  if (!(c.write.window_end() <= c.probe.window_start()))
    throw ValidationError("ordering: the write pulse must end before the probe window starts");
  if (!(c.probe.window_end() - c.deplete.t0_ns <= c.run.rep_period_ns))
    throw ValidationError("ordering: the sequence does not fit in the repetition period");
  if (!(c.run.pulse_resolution > 0)) throw ValidationError("run.pulse_resolution must be > 0");
  if (c.run.max_step_ns < 0) throw ValidationError("run.max_step_ns must be >= 0 (0 selects automatically)");
  if (!(c.run.trace_padding_ns >= 0)) throw ValidationError("run.trace_padding_ns must be >= 0");
  if (c.run.peak_counts_per_bin < 0) throw ValidationError("detector.peak_counts_per_bin must be >= 0");
  if (!std::isnan(c.run.fit_start_ns) && !std::isnan(c.run.fit_end_ns) && !(c.run.fit_start_ns < c.run.fit_end_ns))
    throw ValidationError("run.fit_start_ns must be below run.fit_end_ns");
  if (c.scan.theta_points < 2 || c.scan.phi_points < 2) throw ValidationError("scan: at least 2 points per axis");
  if (c.scan.rabi_points < 8) throw ValidationError("scan.rabi_points must be >= 8");
  if (!(c.scan.rabi_max_area_pi > 0)) throw ValidationError("scan.rabi_max_area_pi must be > 0");
  if (!(c.spectra.line_width_uev > 0)) throw ValidationError("spectra.line_width_uev must be > 0");
  if (c.spectra.points < 2 || !(c.spectra.energy_min_mev < c.spectra.energy_max_mev))
    throw ValidationError("spectra: need at least 2 points over a non-empty range");
  (void)scheme;
}

std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream o;
  auto kv = [&o](const std::string& k, const std::string& v) { o << k << " = " << v << "\n"; };
  auto kd = [&](const std::string& k, double v) { kv(k, fmt(v)); };
  auto ko = [&](const std::string& k, const std::optional<double>& v) { kv(k, v ? fmt(*v) : "auto"); };
  auto pulse = [&](const std::string& name, const PulseSpec& p) {
    o << "[" << name << "]\n";
    kd("t0_ns", p.t0_ns);
    if (p.kind == PulseKind::Deplete) return;
    kd("duration_ns", p.duration_ns);
    kv("envelope", std::string(to_string(p.envelope)));
    kd("edge_ns", p.edge_ns);
    if (p.area_rad) kd("area_rad", *p.area_rad);
    if (p.power) kd("power", *p.power);
    kd("calibration_k", p.calibration_k);
    kd("detuning_ev", p.detuning_ev);
    kd("spectral_width_ev", p.spectral_width_ev);
  };
  const SchemeConfig& s = c.scheme;
  o << "[scheme]\n";
  kd("scan_origin_ev", s.scan_origin_ev);
  kd("de_ground_mev", s.de_ground_mev);
  kd("de_excited_mev", s.de_excited_mev);
  kd("de_second_mev", s.de_second_mev);
  kd("be_offset_uev", s.be_offset_uev);
  kd("xx_offset_mev", s.xx_offset_mev);
  kd("delta_uev", s.delta_uev);
  kd("de_lifetime_ns", s.de_lifetime_ns);
  kd("de_coherence_ns", s.de_coherence_ns);
  kd("relax_time_ns", s.relax_time_ns);
  kd("be_lifetime_ns", s.be_lifetime_ns);
  kd("xx_lifetime_ns", s.xx_lifetime_ns);
  ko("beta_abs", s.beta_abs);
  ko("gamma_abs", s.gamma_abs);
  kd("beta_phase_rad", s.beta_phase_rad);
  kd("gamma_phase_rad", s.gamma_phase_rad);
  ko("be_excited_over_de_excited", s.be_excited_over_de_excited);
  kd("be_ground_over_be_excited", s.be_ground_over_be_excited);
  kd("de_excited_over_de_ground", s.de_excited_over_de_ground);
  kd("de_second_over_de_excited", s.de_second_over_de_excited);
  o << "\n";
  pulse("deplete", c.deplete);
  o << "\n";
  pulse("write", c.write);
  kd("theta_rad", c.write.polarization->theta);
  kd("phi_rad", c.write.polarization->phi);
  o << "\n";
  pulse("probe", c.probe);
  kv("circular", *c.probe.circular == Circular::R ? "R" : "L");
  o << "\n[detector]\n";
  kv("irf", c.detector.irf == IrfShape::Gaussian ? "gaussian" : "none");
  kd("irf_fwhm_ns", c.detector.irf_fwhm_ns);
  kd("bin_width_ns", c.detector.bin_width_ns);
  kd("contrast", c.detector.contrast);
  kd("peak_counts_per_bin", c.run.peak_counts_per_bin);
  o << "\n[run]\n";
  kd("rep_period_ns", c.run.rep_period_ns);
  kv("readout", std::string(to_string(c.run.readout)));
  kv("impulsive_write", c.run.impulsive_write ? "true" : "false");
  kv("be_leakage", c.run.be_leakage ? "true" : "false");
  kd("pulse_resolution", c.run.pulse_resolution);
  kd("max_step_ns", c.run.max_step_ns);
  kd("phi_offset_rad", c.run.phi_offset_rad);
  kd("trace_padding_ns", c.run.trace_padding_ns);
  kv("fit_start_ns", std::isnan(c.run.fit_start_ns) ? "auto" : fmt(c.run.fit_start_ns));
  kv("fit_end_ns", std::isnan(c.run.fit_end_ns) ? "auto" : fmt(c.run.fit_end_ns));
  kv("seed", std::to_string(c.run.seed));
  std::string outs;
  for (const auto& s : c.run.outputs) outs += (outs.empty() ? "" : ",") + s;
  kv("outputs", outs.empty() ? "none" : outs);
  o << "\n[scan]\n";
  kv("kind", std::string(to_string(c.scan.kind)));
  kv("theta_points", std::to_string(c.scan.theta_points));
  kv("phi_points", std::to_string(c.scan.phi_points));
  kd("theta_rad", c.scan.theta_rad);
  kd("phi_rad", c.scan.phi_rad);
  kv("rabi_points", std::to_string(c.scan.rabi_points));
  kd("rabi_max_area_pi", c.scan.rabi_max_area_pi);
  o << "\n[spectra]\n";
  kd("line_width_uev", c.spectra.line_width_uev);
  kd("energy_min_mev", c.spectra.energy_min_mev);
  kd("energy_max_mev", c.spectra.energy_max_mev);
  kv("points", std::to_string(c.spectra.points));
  return o.str();
}

bool wants_output(const ExperimentConfig& c, const std::string& name) {
  return std::find(c.run.outputs.begin(), c.run.outputs.end(), name) != c.run.outputs.end();
}

}  // namespace dexw
