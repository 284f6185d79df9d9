#include <algorithm>
#include <cmath>
#include <vector>

#include <unsupported/Eigen/LevenbergMarquardt>

#include "dexwrite/readout.hpp"

namespace dexw {

namespace {

constexpr double kFlatThreshold = 1e-3;
constexpr double kMinPeriods = 3.0;

struct Samples {
  VectorXd t;
  VectorXd y;
};

Samples window_samples(const DcpTrace& trace, const FitWindow& w) {
  std::vector<double> t, y;
  for (Eigen::Index i = 0; i < trace.times.size(); ++i) {
    if (!trace.valid(i) || trace.times(i) < w.t_min || trace.times(i) > w.t_max) continue;
    t.push_back(trace.times(i));
    y.push_back(trace.dcp(i));
  }
  Samples s{VectorXd(static_cast<Eigen::Index>(t.size())), VectorXd(static_cast<Eigen::Index>(y.size()))};
  for (std::size_t i = 0; i < t.size(); ++i) {
    s.t(static_cast<Eigen::Index>(i)) = t[i];
    s.y(static_cast<Eigen::Index>(i)) = y[i];
  }
  return s;
}

double periodogram_power(const Samples& s, double mean, double w) {
  cdouble acc(0.0, 0.0);
  for (Eigen::Index i = 0; i < s.t.size(); ++i) acc += (s.y(i) - mean) * std::polar(1.0, -w * s.t(i));
  return std::norm(acc);
}

// Strongest line; scanning upward with a strict comparison keeps the lower
// frequency on ties.
double dominant_angular_frequency(const Samples& s, double mean) {
  const Eigen::Index n = s.t.size();
  const double span = s.t(n - 1) - s.t(0);
  const double dt = span / static_cast<double>(n - 1);
  const double w_min = constants::two_pi / span;
  const double w_max = constants::pi / dt;
  const double coarse = 0.25 * constants::two_pi / span;
  double best_w = w_min, best_p = -1.0;
  for (double w = w_min; w <= w_max; w += coarse) {
    const double p = periodogram_power(s, mean, w);
    if (p > best_p * (1.0 + 1e-12)) {
      best_p = p;
      best_w = w;
    }
  }
  const double fine = coarse / 50.0;
  double refined = best_w;
  for (double w = best_w - coarse; w <= best_w + coarse; w += fine) {
    if (w <= 0) continue;
    const double p = periodogram_power(s, mean, w);
    if (p > best_p * (1.0 + 1e-12)) {
      best_p = p;
      refined = w;
    }
  }
  return refined;
}

// offset + v exp(-kappa t) cos(2 pi t / T + phase); p = (offset, v, phase, T, kappa)
struct PrecessionResidual : Eigen::DenseFunctor<double> {
  const Samples& s;
  explicit PrecessionResidual(const Samples& samples)
      : Eigen::DenseFunctor<double>(5, static_cast<int>(samples.t.size())), s(samples) {}

  int operator()(const VectorXd& p, VectorXd& f) const {
    for (Eigen::Index i = 0; i < s.t.size(); ++i) {
      const double t = s.t(i);
      f(i) = p(0) + p(1) * std::exp(-p(4) * t) * std::cos(constants::two_pi * t / p(3) + p(2)) - s.y(i);
    }
    return 0;
  }

  int df(const VectorXd& p, MatrixXd& j) const {
    for (Eigen::Index i = 0; i < s.t.size(); ++i) {
      const double t = s.t(i);
      const double e = std::exp(-p(4) * t);
      const double arg = constants::two_pi * t / p(3) + p(2);
      const double c = std::cos(arg), sn = std::sin(arg);
      j(i, 0) = 1.0;
      j(i, 1) = e * c;
      j(i, 2) = -p(1) * e * sn;
      j(i, 3) = p(1) * e * sn * constants::two_pi * t / (p(3) * p(3));
      j(i, 4) = -t * p(1) * e * c;
    }
    return 0;
  }
};

// A (1 - exp(-g Theta) cos Theta) / 2 + c, Theta = k x; p = (A, g, c, k)
struct RabiResidual : Eigen::DenseFunctor<double> {
  const VectorXd& x;
  const VectorXd& y;
  RabiResidual(const VectorXd& xs, const VectorXd& ys)
      : Eigen::DenseFunctor<double>(4, static_cast<int>(xs.size())), x(xs), y(ys) {}

  int operator()(const VectorXd& p, VectorXd& f) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double th = p(3) * x(i);
      f(i) = p(0) * 0.5 * (1.0 - std::exp(-p(1) * th) * std::cos(th)) + p(2) - y(i);
    }
    return 0;
  }

  int df(const VectorXd& p, MatrixXd& j) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double th = p(3) * x(i);
      const double e = std::exp(-p(1) * th);
      const double c = std::cos(th), s = std::sin(th);
      j(i, 0) = 0.5 * (1.0 - e * c);
      j(i, 1) = 0.5 * p(0) * th * e * c;
      j(i, 2) = 1.0;
      // d/dTheta of -(e cos) = g e cos + e sin
      j(i, 3) = 0.5 * p(0) * (p(1) * e * c + e * s) * x(i);
    }
    return 0;
  }
};

}  // namespace

PrecessionFit fit_precession(const DcpTrace& trace, const FitWindow& window) {
  const Samples s = window_samples(trace, window);
  PrecessionFit fit;
  fit.points = static_cast<int>(s.t.size());
  if (fit.points < 8) throw ValidationError("fit_precession: fewer than 8 valid bins in the fit window");

  const double mean = s.y.mean();
  const double spread = std::sqrt((s.y.array() - mean).square().mean());
  fit.offset = mean;
  if (spread < kFlatThreshold) {
    // No detectable precession: an eigenstate of the eigenaxis (or no signal).
    fit.visibility = std::sqrt(2.0) * spread;
    fit.residual_rms = spread;
    return fit;
  }

  const double w0 = dominant_angular_frequency(s, mean);
  // Linear solve for the quadrature amplitudes at the initial frequency.
  MatrixXd basis(s.t.size(), 3);
  basis.col(0).setOnes();
  basis.col(1) = (w0 * s.t).array().cos().matrix();
  basis.col(2) = (w0 * s.t).array().sin().matrix();
  const Eigen::Vector3d lin = basis.colPivHouseholderQr().solve(s.y);
  // a cos + b sin = v cos(w t + phase) with v cos(phase) = a, v sin(phase) = -b
  VectorXd p(5);
  p << lin(0), std::hypot(lin(1), lin(2)), std::atan2(-lin(2), lin(1)), constants::two_pi / w0, 0.0;

  PrecessionResidual functor(s);
  Eigen::LevenbergMarquardt<PrecessionResidual> lm(functor);
  lm.setXtol(1e-12);
  lm.setFtol(1e-14);
  lm.setMaxfev(2000);
  lm.minimize(p);

  if (p(1) < 0) {
    p(1) = -p(1);
    p(2) += constants::pi;
  }
  VectorXd f(s.t.size());
  functor(p, f);

  fit.offset = p(0);
  fit.visibility = p(1);
  fit.phase = wrap_angle(p(2));
  fit.period = p(3);
  fit.decay_time = p(4) > 0 ? 1.0 / p(4) : std::numeric_limits<double>::infinity();
  fit.residual_rms = std::sqrt(f.squaredNorm() / static_cast<double>(f.size()));
  const double span = s.t(s.t.size() - 1) - s.t(0);
  fit.period_reliable = p.allFinite() && fit.period > 0 && span >= kMinPeriods * fit.period;
  return fit;
}

double RabiFit::model(double sqrt_power) const {
  const double th = k * sqrt_power;
  return amplitude * 0.5 * (1.0 - std::exp(-damping * th) * std::cos(th)) + background;
}

RabiFit fit_rabi(const VectorXd& sqrt_power, const VectorXd& pl) {
  if (sqrt_power.size() != pl.size() || sqrt_power.size() < 8)
    throw ValidationError("fit_rabi: need at least 8 matching (sqrt_power, pl) samples");
  if ((sqrt_power.array() < 0).any()) throw ValidationError("fit_rabi: negative sqrt(power)");
  const double x_max = sqrt_power.maxCoeff();
  if (!(x_max > 0)) throw ValidationError("fit_rabi: empty power range");

  // Grid over k (covering 1 to 40 rotations across the scan) and damping;
  // amplitude and background are linear.
  VectorXd best(4);
  double best_cost = std::numeric_limits<double>::infinity();
  for (int ik = 0; ik <= 4000; ++ik) {
    const double k = (constants::pi + ik * 0.02 * constants::pi) / x_max;
    for (double g : {0.0, 0.02, 0.05, 0.1, 0.2}) {
      MatrixXd a(pl.size(), 2);
      for (Eigen::Index i = 0; i < pl.size(); ++i) {
        const double th = k * sqrt_power(i);
        a(i, 0) = 0.5 * (1.0 - std::exp(-g * th) * std::cos(th));
        a(i, 1) = 1.0;
      }
      const Eigen::Vector2d lin = a.colPivHouseholderQr().solve(pl);
      const double cost = (a * lin - pl).squaredNorm();
      if (cost < best_cost * (1.0 - 1e-12)) {
        best_cost = cost;
        best << lin(0), g, lin(1), k;
      }
    }
  }

  RabiResidual functor(sqrt_power, pl);
  Eigen::LevenbergMarquardt<RabiResidual> lm(functor);
  lm.setXtol(1e-12);
  lm.setFtol(1e-14);
  lm.minimize(best);
  VectorXd f(pl.size());
  functor(best, f);

  RabiFit fit{best(3), best(0), best(1), best(2), std::sqrt(f.squaredNorm() / static_cast<double>(f.size()))};
  if (!best.allFinite() || fit.k <= 0) throw RuntimeFailure("fit_rabi: fit did not converge");
  if (fit.k * x_max < 2.5 * constants::pi)
    throw ValidationError("fit_rabi: the scan does not reach past the 2 pi minimum");
  return fit;
}

}  // namespace dexw
