#pragma once

#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "dexwrite/levels.hpp"
#include "dexwrite/pulse.hpp"

namespace dexw {

using SparseCMatrix = Eigen::SparseMatrix<cdouble>;

/// Density matrix over the truncated basis.
struct StateMatrix {
  CMatrix elements;

  static StateMatrix basis(Level l, int dim = kNumLevels);
  /// Pure state a|+2> + b|-2> in the ground DE doublet.
  static StateMatrix ground_de(const CVector2<double>& amplitudes, int dim = kNumLevels);

  int dim() const { return static_cast<int>(elements.rows()); }
  double population(Level l) const { return elements(index(l), index(l)).real(); }
  double trace() const { return elements.trace().real(); }
  double hermiticity_error() const { return (elements - elements.adjoint()).cwiseAbs().maxCoeff(); }
  double min_eigenvalue() const;
  /// Unnormalized Bloch vector of the ground DE block (norm = DE population for a pure block).
  Bloch ground_de_bloch() const;
};

struct LindbladChannel {
  std::string name;
  double rate{0.0};  // 1/ns
  SparseCMatrix jump;
  // Photon-emitting channel; its flux rate * <L^dag L> is recorded.
  bool radiative{false};
};

/// Relaxation, radiative decay and eigenbasis dephasing channels of the scheme.
std::vector<LindbladChannel> channels_from_scheme(const LevelScheme& scheme);

/// Rotating-frame Hamiltonian without drives, rad/ns. Only the ground DE
/// doublet carries structure: (delta/2) sigma_x in the {|+2>, |-2>} basis.
CMatrix free_hamiltonian(const LevelScheme& scheme);

/// d rho / dt for a fixed Hamiltonian.
CMatrix lindblad_rhs(const CMatrix& hamiltonian, const std::vector<LindbladChannel>& channels, const CMatrix& rho);

/// Column-stacked Liouvillian superoperator for a fixed Hamiltonian.
CMatrix liouvillian(const CMatrix& hamiltonian, const std::vector<LindbladChannel>& channels);

struct Trajectory {
  VectorXd times;
  std::vector<StateMatrix> states;
  // rows: times, columns: radiative channels (1/ns)
  MatrixXd emission_flux;
  std::vector<std::string> flux_names;
  double max_hermiticity_correction{0.0};
  long rk4_steps{0};
  long exact_steps{0};

  int flux_column(const std::string& name) const;
};

struct EvolveOptions {
  // 0 selects the step from the timescale audit; an explicit value larger
  // than 1/20 of the shortest timescale is rejected.
  double max_step_ns{0.0};
  // Bound on Omega * h inside time-dependent pulse windows, and on h relative
  // to the gaussian sigma or flat-top edge there.
  double pulse_resolution{0.02};
  // Propagate drive-free (or constant-drive) stretches with the exact
  // exponential of the Liouvillian instead of RK4.
  bool exact_constant_segments{true};
  // Replace gaussian write pulses (FWHM <= 20 ps) by the unitary of their
  // integrated resonant drive, applied at the pulse center.
  bool impulsive_write{false};
};

struct TimescaleAudit {
  double shortest_ns{0.0};
  double step_ns{0.0};
  std::string limiting;
};

TimescaleAudit audit_timescales(const LevelScheme& scheme, const std::vector<DriveTerm>& drives,
                                const std::vector<LindbladChannel>& channels);

/// Exact unitary of an integrated resonant drive (all terms share one envelope).
CMatrix impulsive_unitary(const std::vector<DriveTerm>& terms, int dim = kNumLevels);

Trajectory evolve(const StateMatrix& rho0, const LevelScheme& scheme, const std::vector<DriveTerm>& drives,
                  const std::vector<LindbladChannel>& channels, const VectorXd& t_grid,
                  const EvolveOptions& options = {});

/// Closed-form ground-DE Bloch vector: rotation of (s_y, s_z) about the x
/// eigenaxis at 2 pi delta / h; s_x damped by gamma_rad, (s_y, s_z) by
/// gamma_rad + gamma_deph.
template <typename Scalar>
Vector3<Scalar> precession_oracle(const Vector3<Scalar>& bloch0, Scalar delta_ev, Scalar gamma_deph, Scalar gamma_rad,
                                  Scalar t_ns) {
  using std::cos;
  using std::exp;
  using std::sin;
  const Scalar w = delta_ev / Scalar(constants::hbar_ev_ns);
  const Scalar c = cos(w * t_ns), s = sin(w * t_ns);
  const Scalar long_damp = exp(-gamma_rad * t_ns);
  const Scalar trans_damp = exp(-(gamma_rad + gamma_deph) * t_ns);
  return Vector3<Scalar>(bloch0.x() * long_damp, (bloch0.y() * c - bloch0.z() * s) * trans_damp,
                         (bloch0.z() * c + bloch0.y() * s) * trans_damp);
}

/// Upper-state population after a pulse of area theta. At nonzero detuning
/// (rad/ns) the pulse is taken as square with the given duration.
template <typename Scalar>
Scalar rabi_oracle(Scalar theta, Scalar detuning = Scalar(0), Scalar duration_ns = Scalar(1)) {
  using std::sin;
  using std::sqrt;
  if (detuning == Scalar(0)) {
    const Scalar s = sin(theta / 2);
    return s * s;
  }
  const Scalar omega = theta / duration_ns;
  const Scalar general = sqrt(omega * omega + detuning * detuning);
  const Scalar s = sin(general * duration_ns / 2);
  return omega * omega / (general * general) * s * s;
}

}  // namespace dexw
