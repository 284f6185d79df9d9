#pragma once

#include <cmath>

#include "dexwrite/types.hpp"

namespace dexw {

// Pure-polarization algebra on the Poincare sphere and the matching qubit
// algebra on the dark-exciton Bloch sphere.
//
// Conventions:
//   jones(theta, phi) = (cos(theta/2), exp(i(phi + pi/2)) sin(theta/2)) in (H, V)
//   R = (H - iV)/sqrt(2),  L = (H + iV)/sqrt(2)
// so that P(pi, 0) = V, P(pi/2, pi/2) = anti-diagonal, P(pi/2, pi) = R.

template <typename Scalar>
struct PoincareAngles {
  Scalar theta{0};
  Scalar phi{0};
  // phi carries no information at the poles; reported as 0.
  bool phi_degenerate{false};
};

template <typename Scalar>
CVector2<Scalar> poincare_to_jones(Scalar theta, Scalar phi) {
  using std::cos;
  using std::sin;
  const Scalar half_pi = Scalar(constants::pi / 2);
  CVector2<Scalar> j;
  j(0) = Complex<Scalar>(cos(theta / 2), 0);
  j(1) = std::polar(Scalar(1), phi + half_pi) * sin(theta / 2);
  return j;
}

template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  const Scalar period = Scalar(constants::two_pi);
  a = std::fmod(a, period);
  if (a < 0) a += period;
  // fmod can land exactly on the period after the correction above
  if (a >= period) a -= period;
  return a;
}

/// Inverse of poincare_to_jones up to global phase; theta is returned in [0, pi].
template <typename Scalar>
PoincareAngles<Scalar> jones_to_poincare(const CVector2<Scalar>& jones, Scalar pole_tol = Scalar(1e-12)) {
  const Scalar norm = jones.norm();
  if (!(norm > Scalar(0))) throw ValidationError("jones_to_poincare: zero Jones vector");
  const Scalar mag_h = std::abs(jones(0)) / norm;
  const Scalar mag_v = std::abs(jones(1)) / norm;
  PoincareAngles<Scalar> out;
  out.theta = 2 * std::atan2(mag_v, mag_h);
  if (mag_h < pole_tol || mag_v < pole_tol) {
    out.phi = 0;
    out.phi_degenerate = true;
    return out;
  }
  const Scalar rel = std::arg(jones(1)) - std::arg(jones(0));
  out.phi = wrap_angle(rel - Scalar(constants::pi / 2));
  return out;
}

/// (a_R, a_L): projections on the circular basis.
template <typename Scalar>
CVector2<Scalar> circular_components(const CVector2<Scalar>& jones) {
  const Complex<Scalar> i(0, 1);
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  CVector2<Scalar> c;
  c(0) = (jones(0) + i * jones(1)) * inv_sqrt2;
  c(1) = (jones(0) - i * jones(1)) * inv_sqrt2;
  return c;
}

/// Stokes (S1, S2, S3) of a Jones vector; S3 = |a_R|^2 - |a_L|^2.
template <typename Scalar>
Vector3<Scalar> stokes(const CVector2<Scalar>& jones) {
  const Complex<Scalar> cross = std::conj(jones(0)) * jones(1);
  return Vector3<Scalar>(std::norm(jones(0)) - std::norm(jones(1)), 2 * cross.real(), -2 * cross.imag());
}

template <typename Scalar>
struct PolarizationStateT {
  Scalar theta{0};
  Scalar phi{0};

  CVector2<Scalar> jones() const { return poincare_to_jones(theta, phi); }
  Vector3<Scalar> stokes() const { return dexw::stokes(jones()); }
  CVector2<Scalar> circular() const { return circular_components(jones()); }

  static PolarizationStateT horizontal() { return {Scalar(0), Scalar(0)}; }
  static PolarizationStateT vertical() { return {Scalar(constants::pi), Scalar(0)}; }
  static PolarizationStateT antidiagonal() { return {Scalar(constants::pi / 2), Scalar(constants::pi / 2)}; }
  static PolarizationStateT right() { return {Scalar(constants::pi / 2), Scalar(constants::pi)}; }
  static PolarizationStateT left() { return {Scalar(constants::pi / 2), Scalar(0)}; }
};

/// Dark-exciton qubit in the {|+2>, |-2>} basis.
template <typename Scalar>
struct QubitStateT {
  CVector2<Scalar> amplitudes{CVector2<Scalar>(Complex<Scalar>(1), Complex<Scalar>(0))};

  Complex<Scalar> plus2() const { return amplitudes(0); }
  Complex<Scalar> minus2() const { return amplitudes(1); }

  /// (s_x, s_y, s_z) with s_z = |c_+2|^2 - |c_-2|^2. The x axis is the
  /// precession eigenaxis: (|+2> +- |-2>)/sqrt(2) sit at s_x = +-1.
  Vector3<Scalar> bloch() const {
    const Complex<Scalar> cross = std::conj(amplitudes(0)) * amplitudes(1);
    return Vector3<Scalar>(2 * cross.real(), 2 * cross.imag(), std::norm(amplitudes(0)) - std::norm(amplitudes(1)));
  }
};

template <typename Scalar>
QubitStateT<Scalar> target_de_state(Scalar theta, Scalar phi) {
  return {circular_components(poincare_to_jones(theta, phi))};
}

/// |<a|b>|^2 for normalized pure states.
template <typename Scalar>
Scalar state_overlap(const QubitStateT<Scalar>& a, const QubitStateT<Scalar>& b) {
  return std::norm(a.amplitudes.dot(b.amplitudes));
}

/// Fidelity between Bloch vectors of a pure target and a (possibly mixed) state.
template <typename Scalar>
Scalar bloch_fidelity(const Vector3<Scalar>& written, const Vector3<Scalar>& target) {
  return (Scalar(1) + written.dot(target)) / 2;
}

using PolarizationState = PolarizationStateT<double>;
using QubitState = QubitStateT<double>;
using PoincarePoint = PoincareAngles<double>;

}  // namespace dexw
