#include <doctest.h>

#include "dexwrite/config.hpp"

using namespace dexw;

namespace {

std::string error_of(const std::string& text) {
  try {
    validate_config(parse_config_text(text, "test.ini"));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("empty input keeps the defaults") {
  const ExperimentConfig c = parse_config_text("", "empty.ini");
  CHECK(config_echo(c) == config_echo(default_config()));
  CHECK(c.scheme.delta_uev == 1.5);
  CHECK(c.detector.irf_fwhm_ns == doctest::Approx(0.4));
  CHECK(c.run.readout == ReadoutMode::Weak);
  CHECK_NOTHROW(validate_config(c));
  CHECK(parse_config_text("# only a comment\n; another\n\n", "c.ini").write.area() == doctest::Approx(constants::pi));
}

TEST_CASE("values are parsed into their sections") {
  const ExperimentConfig c = parse_config_text(
      "[scheme]\ndelta_uev = 1.334\n[write]\ntheta_rad = 1.2\nphi_rad = 0.3\narea_pi = 0.5\n"
      "[detector]\nirf = none\ncontrast = 0.69\n[run]\nreadout = coherent\nfit_start_ns = 2\noutputs = trace, trajectory\n"
      "[scan]\nkind = theta\ntheta_points = 12\n",
      "c.ini");
  CHECK(c.scheme.delta_uev == 1.334);
  CHECK(c.write.polarization->theta == 1.2);
  CHECK(c.write.polarization->phi == 0.3);
  CHECK(c.write.area() == doctest::Approx(constants::pi / 2));
  CHECK(c.detector.irf == IrfShape::None);
  CHECK(c.detector.contrast == 0.69);
  CHECK(c.run.readout == ReadoutMode::Coherent);
  CHECK(c.run.fit_start_ns == 2.0);
  CHECK(std::isnan(c.run.fit_end_ns));
  CHECK(wants_output(c, "trajectory"));
  CHECK(c.scan.kind == ScanKind::Theta);
  CHECK(c.scan.theta_points == 12);
}

TEST_CASE("power and area are mutually exclusive") {
  const ExperimentConfig c = parse_config_text("[write]\npower = 4\ncalibration_k = 0.5\n", "c.ini");
  CHECK_FALSE(c.write.area_rad.has_value());
  CHECK(c.write.area() == doctest::Approx(1.0));
  const ExperimentConfig d = parse_config_text("[write]\npower = 4\narea_rad = 2\n", "c.ini");
  CHECK_FALSE(d.write.power.has_value());
  CHECK(d.write.area() == 2.0);
}

TEST_CASE("errors name the source line and the offending key") {
  std::string e = error_of("[scheme]\ndelta_uev = 1.5\n[detctor]\ncontrast = 1\n");
  CHECK(e.find("test.ini:3") != std::string::npos);
  CHECK(e.find("detctor") != std::string::npos);

  e = error_of("[detector]\nirf_fwhm = 0.4\n");
  CHECK(e.find("test.ini:2") != std::string::npos);
  CHECK(e.find("irf_fwhm") != std::string::npos);

  e = error_of("[write]\narea_pi = 1\narea_pi = 2\n");
  CHECK(e.find("test.ini:3") != std::string::npos);
  CHECK(e.find("duplicate") != std::string::npos);

  CHECK(error_of("[write]\narea_pi = lots\n").find("test.ini:2") != std::string::npos);
  CHECK(error_of("[write]\narea_pi =\n").find("missing value") != std::string::npos);
  CHECK(error_of("delta_uev = 1\n").find("outside any section") != std::string::npos);
  CHECK(error_of("[run]\nreadout = strong\n").find("test.ini:2") != std::string::npos);
  CHECK(error_of("[run]\noutputs = movie\n").find("movie") != std::string::npos);
  CHECK_THROWS_AS(parse_config("/nonexistent/config.ini"), ValidationError);
}

TEST_CASE("protocol ordering is enforced") {
  CHECK(error_of("[probe]\nt0_ns = -1\n").find("ordering") != std::string::npos);
  CHECK(error_of("[deplete]\nt0_ns = 0.5\n").find("ordering") != std::string::npos);
  CHECK(error_of("[run]\nrep_period_ns = 5\n").find("ordering") != std::string::npos);
  CHECK(error_of("[write]\nenvelope = flat_top\nduration_ns = 0.05\nedge_ns = 0.01\n[run]\nimpulsive_write = true\n")
            .find("impulsive") != std::string::npos);
  CHECK_FALSE(error_of("[detector]\nbin_width_ns = 0.2\n").empty());
  CHECK_FALSE(error_of("[scheme]\ndelta_uev = -1\n").empty());
  CHECK_FALSE(error_of("[run]\nfit_start_ns = 5\nfit_end_ns = 4\n").empty());
}

TEST_CASE("echo round trip") {
  ExperimentConfig c = default_config();
  c.scheme.delta_uev = 1.3339999999999999;
  c.scheme.beta_abs = 0.3;
  c.write.polarization = PolarizationState{0.1 + 0.2, 3 * constants::pi / 2};
  c.write.detuning_ev = 12.3e-6;
  c.probe.circular = Circular::L;
  c.run.fit_start_ns = 1.7;
  c.run.outputs.clear();
  c.run.seed = 18446744073709551615ULL;
  c.scan.kind = ScanKind::Map;
  const std::string echo = config_echo(c);
  const ExperimentConfig back = parse_config_text(echo, "echo.ini");
  CHECK(config_echo(back) == echo);
  CHECK(back.write.polarization->theta == c.write.polarization->theta);
  CHECK(back.scheme.delta_uev == c.scheme.delta_uev);
  CHECK(back.write.detuning_ev == c.write.detuning_ev);
  CHECK(back.run.seed == c.run.seed);
  CHECK(back.run.outputs.empty());
  CHECK(*back.probe.circular == Circular::L);

  for (Preset p : {Preset::Ideal, Preset::PaperLike}) {
    ExperimentConfig q = default_config();
    apply_preset(q, p);
    CHECK(config_echo(parse_config_text(config_echo(q), "p.ini")) == config_echo(q));
  }
}

TEST_CASE("presets") {
  CHECK(parse_preset("") == Preset::None);
  CHECK(parse_preset("ideal") == Preset::Ideal);
  CHECK(parse_preset("paper-like") == Preset::PaperLike);
  CHECK_THROWS_AS(parse_preset("best"), ValidationError);

  ExperimentConfig ideal = default_config();
  apply_preset(ideal, Preset::Ideal);
  CHECK(ideal.detector.irf == IrfShape::None);
  CHECK(ideal.detector.contrast == 1.0);
  CHECK(ideal.run.impulsive_write);
  CHECK_NOTHROW(validate_config(ideal));

  ExperimentConfig paper = default_config();
  apply_preset(paper, Preset::PaperLike);
  CHECK(paper.detector.contrast == doctest::Approx(0.69));
  CHECK(period_from_splitting(paper.scheme.delta_uev * 1e-6) == doctest::Approx(3.10).epsilon(1e-9));
  CHECK_NOTHROW(validate_config(paper));

  // Config values override the preset.
  const ExperimentConfig over = parse_config_text("[detector]\ncontrast = 0.5\n", "o.ini", paper);
  CHECK(over.detector.contrast == 0.5);
  CHECK(over.scheme.delta_uev == paper.scheme.delta_uev);
}
