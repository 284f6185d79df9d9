#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dexw {

// Dense types, templated on the real scalar. Times are in ns, energies in eV,
// angular frequencies in rad/ns.
template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using CMatrixX = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using CVectorX = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using CVector2 = Eigen::Matrix<Complex<Scalar>, 2, 1>;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using cdouble = Complex<double>;
using CMatrix = CMatrixX<double>;
using CVector = CVectorX<double>;
using Jones = CVector2<double>;
using Bloch = Vector3<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
// Planck constant and reduced Planck constant in eV*ns.
inline constexpr double h_ev_ns = 4.135667696e-6;
inline constexpr double hbar_ev_ns = h_ev_ns / two_pi;
}  // namespace constants

/// Energy (eV) to angular frequency (rad/ns).
inline double energy_to_angular(double energy_ev) { return energy_ev / constants::hbar_ev_ns; }

/// Precession period (ns) of a doublet split by `splitting_ev`.
inline double period_from_splitting(double splitting_ev) { return constants::h_ev_ns / splitting_ev; }

inline double splitting_from_period(double period_ns) { return constants::h_ev_ns / period_ns; }

/// Input or configuration violates a documented invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure while running a validated configuration.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dexw
