#include "dexwrite/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace dexw {

namespace {

const cdouble kI(0.0, 1.0);

SparseCMatrix jump_from(int dim, std::initializer_list<std::tuple<Level, Level, cdouble>> entries) {
  std::vector<Eigen::Triplet<cdouble>> t;
  for (const auto& [row, col, v] : entries) t.emplace_back(index(row), index(col), v);
  SparseCMatrix m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

StateMatrix StateMatrix::basis(Level l, int dim) {
  StateMatrix s{CMatrix::Zero(dim, dim)};
  s.elements(index(l), index(l)) = 1.0;
  return s;
}

StateMatrix StateMatrix::ground_de(const CVector2<double>& amplitudes, int dim) {
  StateMatrix s{CMatrix::Zero(dim, dim)};
  const int p = index(Level::DeGroundPlus), m = index(Level::DeGroundMinus);
  const CMatrix block = amplitudes * amplitudes.adjoint();
  s.elements(p, p) = block(0, 0);
  s.elements(p, m) = block(0, 1);
  s.elements(m, p) = block(1, 0);
  s.elements(m, m) = block(1, 1);
  return s;
}

double StateMatrix::min_eigenvalue() const {
  const CMatrix herm = 0.5 * (elements + elements.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Bloch StateMatrix::ground_de_bloch() const {
  const int p = index(Level::DeGroundPlus), m = index(Level::DeGroundMinus);
  const cdouble coh = elements(p, m);  // c_+ conj(c_-)
  return Bloch(2.0 * coh.real(), -2.0 * coh.imag(), elements(p, p).real() - elements(m, m).real());
}

int Trajectory::flux_column(const std::string& name) const {
  const auto it = std::find(flux_names.begin(), flux_names.end(), name);
  if (it == flux_names.end()) throw ValidationError("trajectory: no radiative channel named " + name);
  return static_cast<int>(it - flux_names.begin());
}

std::vector<LindbladChannel> channels_from_scheme(const LevelScheme& scheme) {
  const int n = scheme.dim();
  const RateSet& r = scheme.rates();
  using L = Level;
  std::vector<LindbladChannel> ch;
  // Phonon relaxation does not resolve spin: one collective jump keeps the
  // written coherence between the two spin branches.
  ch.push_back({"relax_de", r.relax,
                jump_from(n, {{L::DeGroundPlus, L::DeExcitedPlus, 1.0}, {L::DeGroundMinus, L::DeExcitedMinus, 1.0}}),
                false});
  ch.push_back({"relax_be", r.relax,
                jump_from(n, {{L::BeGroundPlus, L::BeExcitedPlus, 1.0}, {L::BeGroundMinus, L::BeExcitedMinus, 1.0}}),
                false});
  ch.push_back({"de_rad(+2)", r.de_rad, jump_from(n, {{L::Vac, L::DeGroundPlus, 1.0}}), true});
  ch.push_back({"de_rad(-2)", r.de_rad, jump_from(n, {{L::Vac, L::DeGroundMinus, 1.0}}), true});
  // sigma_x of the doublet: dephasing between (|+2> +- |-2>)/sqrt(2) at de_deph.
  ch.push_back({"de_deph", 0.5 * r.de_deph,
                jump_from(n, {{L::DeGroundPlus, L::DeGroundMinus, 1.0}, {L::DeGroundMinus, L::DeGroundPlus, 1.0}}),
                false});
  const double de_excited_rad = scheme.de_excited_rad();
  if (de_excited_rad > 0) {
    ch.push_back({"de_excited_rad(+2)", de_excited_rad, jump_from(n, {{L::Vac, L::DeExcitedPlus, 1.0}}), true});
    ch.push_back({"de_excited_rad(-2)", de_excited_rad, jump_from(n, {{L::Vac, L::DeExcitedMinus, 1.0}}), true});
  }
  ch.push_back({"be_rad(+1)", r.be_rad, jump_from(n, {{L::Vac, L::BeGroundPlus, 1.0}}), true});
  ch.push_back({"be_rad(-1)", r.be_rad, jump_from(n, {{L::Vac, L::BeGroundMinus, 1.0}}), true});
  ch.push_back({"xx_rad(+3)", r.xx_rad, jump_from(n, {{L::BeExcitedPlus, L::XxPlus, 1.0}}), true});
  ch.push_back({"xx_rad(-3)", r.xx_rad, jump_from(n, {{L::BeExcitedMinus, L::XxMinus, 1.0}}), true});
  return ch;
}

CMatrix free_hamiltonian(const LevelScheme& scheme) {
  CMatrix h = CMatrix::Zero(scheme.dim(), scheme.dim());
  const double half_split = 0.5 * energy_to_angular(scheme.delta_ev());
  const int p = index(Level::DeGroundPlus), m = index(Level::DeGroundMinus);
  h(p, m) = half_split;
  h(m, p) = half_split;
  return h;
}

namespace {

// Effective non-Hermitian Hamiltonian H - i/2 sum rate L^dag L.
CMatrix damping_matrix(const std::vector<LindbladChannel>& channels, int dim) {
  CMatrix g = CMatrix::Zero(dim, dim);
  for (const auto& c : channels) {
    const SparseCMatrix ldl = SparseCMatrix(c.jump.adjoint()) * c.jump;
    g += 0.5 * c.rate * CMatrix(ldl);
  }
  return g;
}

}  // namespace

CMatrix lindblad_rhs(const CMatrix& hamiltonian, const std::vector<LindbladChannel>& channels, const CMatrix& rho) {
  const CMatrix heff = hamiltonian - kI * damping_matrix(channels, static_cast<int>(rho.rows()));
  CMatrix out = -kI * (heff * rho) + kI * (rho * heff.adjoint());
  for (const auto& c : channels) {
    const SparseCMatrix ladj = c.jump.adjoint();
    out += c.rate * (CMatrix(c.jump * rho) * ladj);
  }
  return out;
}

CMatrix liouvillian(const CMatrix& hamiltonian, const std::vector<LindbladChannel>& channels) {
  const int n = static_cast<int>(hamiltonian.rows());
  const CMatrix heff = hamiltonian - kI * damping_matrix(channels, n);
  const CMatrix ident = CMatrix::Identity(n, n);
  // vec(A rho B) = (B^T kron A) vec(rho)
  auto kron = [n](const CMatrix& a, const CMatrix& b) {
    CMatrix k(n * n, n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) k.block(i * n, j * n, n, n) = a(i, j) * b;
    return k;
  };
  CMatrix sup = -kI * kron(ident, heff) + kI * kron(heff.conjugate(), ident);
  for (const auto& c : channels) {
    const CMatrix l(c.jump);
    sup += c.rate * kron(l.conjugate(), l);
  }
  return sup;
}

TimescaleAudit audit_timescales(const LevelScheme& scheme, const std::vector<DriveTerm>& drives,
                                const std::vector<LindbladChannel>& channels) {
  TimescaleAudit a;
  double fastest = energy_to_angular(scheme.delta_ev());
  a.limiting = "precession";
  auto consider = [&](double rate, const std::string& what) {
    if (rate > fastest) {
      fastest = rate;
      a.limiting = what;
    }
  };
  for (const auto& c : channels) {
    double col = 0.0;
    for (int k = 0; k < c.jump.outerSize(); ++k) {
      double s = 0.0;
      for (SparseCMatrix::InnerIterator it(c.jump, k); it; ++it) s += std::norm(it.value());
      col = std::max(col, s);
    }
    consider(c.rate * col, c.name);
  }
  for (const auto& d : drives) {
    consider(std::abs(energy_to_angular(d.frame_ev)), "detuning of " + std::string(label(d.to)));
    // Gaussian pulses get their own refinement; flat-top plateaus enter here.
    if (d.pulse.envelope == EnvelopeShape::FlatTop) consider(std::abs(d.weight) * d.pulse.peak_rabi(), "probe Rabi rate");
  }
  a.shortest_ns = 1.0 / fastest;
  a.step_ns = a.shortest_ns / 40.0;
  return a;
}

CMatrix impulsive_unitary(const std::vector<DriveTerm>& terms, int dim) {
  CMatrix k = CMatrix::Zero(dim, dim);
  double area = 0.0;
  for (const auto& t : terms) {
    k(index(t.to), index(t.from)) += 0.5 * t.weight;
    k(index(t.from), index(t.to)) += 0.5 * std::conj(t.weight);
    area = t.pulse.area();
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(k);
  const CVector phases = (-kI * area * es.eigenvalues().cast<cdouble>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

enum class DriveState { Zero, Constant, Varying };

DriveState classify(const PulseSpec& p, double t) {
  if (t <= p.window_start() || t >= p.window_end()) return DriveState::Zero;
  if (p.envelope == EnvelopeShape::Gaussian) return DriveState::Varying;
  if (t > p.t0_ns && t < p.t0_ns + p.duration_ns) return DriveState::Constant;
  return DriveState::Varying;
}

class Integrator {
 public:
  Integrator(const LevelScheme& scheme, std::vector<DriveTerm> drives, const std::vector<LindbladChannel>& channels,
             const EvolveOptions& options)
      : drives_(std::move(drives)), channels_(channels), options_(options) {
    dim_ = scheme.dim();
    h_static_ = free_hamiltonian(scheme);
    std::map<int, double> frames;
    for (const auto& d : drives_) {
      const auto [it, inserted] = frames.emplace(index(d.to), d.frame_ev);
      if (!inserted && it->second != d.frame_ev)
        throw ValidationError("evolve: conflicting rotating frames for " + std::string(label(d.to)));
      CMatrix k = CMatrix::Zero(dim_, dim_);
      k(index(d.to), index(d.from)) = 0.5 * d.weight;
      k(index(d.from), index(d.to)) = 0.5 * std::conj(d.weight);
      couplings_.push_back(k);
    }
    for (const auto& [row, frame] : frames) h_static_(row, row) += energy_to_angular(frame);
    damping_ = damping_matrix(channels_, dim_);
    for (const auto& c : channels_) {
      jumps_.push_back(c.jump);
      jumps_adj_.push_back(c.jump.adjoint());
    }

    const TimescaleAudit audit = audit_timescales(scheme, drives_, channels_);
    if (options_.max_step_ns > 0) {
      if (options_.max_step_ns > audit.shortest_ns / 20.0) {
        std::ostringstream os;
        os << "evolve: step " << options_.max_step_ns << " ns exceeds 1/20 of the shortest timescale ("
           << audit.shortest_ns << " ns, " << audit.limiting << ")";
        throw ValidationError(os.str());
      }
      base_step_ = options_.max_step_ns;
    } else {
      base_step_ = audit.step_ns;
    }
  }

  const std::vector<DriveTerm>& drives() const { return drives_; }

  CMatrix hamiltonian(double t) const {
    CMatrix h = h_static_;
    for (std::size_t k = 0; k < drives_.size(); ++k) {
      const double env = envelope_value(drives_[k].pulse, t);
      if (env != 0.0) h += env * couplings_[k];
    }
    return h;
  }

  CMatrix rhs(double t, const CMatrix& rho) const {
    const CMatrix heff = hamiltonian(t) - kI * damping_;
    CMatrix out = -kI * (heff * rho) + kI * (rho * heff.adjoint());
    for (std::size_t c = 0; c < jumps_.size(); ++c) out += channels_[c].rate * (CMatrix(jumps_[c] * rho) * jumps_adj_[c]);
    return out;
  }

  // Advances rho from a to b; returns the number of steps taken and whether
  // the exact propagator was used.
  void advance(CMatrix& rho, double a, double b, Trajectory& traj) {
    const double mid = 0.5 * (a + b);
    bool varying = false;
    std::uint64_t mask = 0;
    double peak = 0.0;
    double shape = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < drives_.size(); ++k) {
      switch (classify(drives_[k].pulse, mid)) {
        case DriveState::Zero: break;
        case DriveState::Constant: mask |= (std::uint64_t{1} << k); break;
        case DriveState::Varying:
          varying = true;
          peak += std::abs(drives_[k].weight) * drives_[k].pulse.peak_rabi();
          shape = std::min(shape, drives_[k].pulse.envelope == EnvelopeShape::Gaussian ? drives_[k].pulse.sigma_ns()
                                                                                        : drives_[k].pulse.edge_ns);
          break;
      }
    }
    const double span = b - a;
    if (!varying && options_.exact_constant_segments) {
      const CMatrix& prop = propagator(mask, span, mid);
      Eigen::Map<CVector> v(rho.data(), rho.size());
      const CVector next = prop * v;
      v = next;
      ++traj.exact_steps;
      finish_step(rho, b, traj);
      return;
    }
    double h = base_step_;
    if (varying && peak > 0) h = std::min(h, options_.pulse_resolution / peak);
    if (varying) h = std::min(h, options_.pulse_resolution * shape);
    const long n = std::max<long>(1, static_cast<long>(std::ceil(span / h - 1e-9)));
    const double step = span / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double t = a + step * static_cast<double>(i);
      const CMatrix k1 = rhs(t, rho);
      const CMatrix k2 = rhs(t + 0.5 * step, rho + 0.5 * step * k1);
      const CMatrix k3 = rhs(t + 0.5 * step, rho + 0.5 * step * k2);
      const CMatrix k4 = rhs(t + step, rho + step * k3);
      rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      ++traj.rk4_steps;
      finish_step(rho, t + step, traj);
    }
  }

 private:
  void finish_step(CMatrix& rho, double t, Trajectory& traj) const {
    if (!rho.allFinite()) {
      std::ostringstream os;
      os << "evolve: non-finite density matrix at t = " << t << " ns";
      throw RuntimeFailure(os.str());
    }
    const CMatrix anti = 0.5 * (rho - rho.adjoint());
    const double corr = anti.cwiseAbs().maxCoeff();
    traj.max_hermiticity_correction = std::max(traj.max_hermiticity_correction, corr);
    rho -= anti;
  }

  const CMatrix& propagator(std::uint64_t mask, double span, double mid) {
    // Spans from a uniform grid differ in the last bits; share their propagator.
    const auto key = std::make_pair(mask, std::llround(span * 1e12));
    if (auto it = props_.find(key); it != props_.end()) return it->second;
    auto lit = liouvillians_.find(mask);
    if (lit == liouvillians_.end()) {
      CMatrix h = h_static_;
      for (std::size_t k = 0; k < drives_.size(); ++k)
        if (mask & (std::uint64_t{1} << k)) h += envelope_value(drives_[k].pulse, mid) * couplings_[k];
      lit = liouvillians_.emplace(mask, liouvillian(h, channels_)).first;
    }
    const CMatrix scaled = lit->second * cdouble(span);
    return props_.emplace(key, scaled.exp()).first->second;
  }

  int dim_{kNumLevels};
  std::vector<DriveTerm> drives_;
  const std::vector<LindbladChannel>& channels_;
  EvolveOptions options_;
  CMatrix h_static_;
  CMatrix damping_;
  std::vector<CMatrix> couplings_;
  std::vector<SparseCMatrix> jumps_, jumps_adj_;
  double base_step_{0.0};
  std::map<std::uint64_t, CMatrix> liouvillians_;
  std::map<std::pair<std::uint64_t, long long>, CMatrix> props_;
};

bool impulsive_candidate(const DriveTerm& d) {
  return d.pulse.kind == PulseKind::Write && d.pulse.envelope == EnvelopeShape::Gaussian &&
         d.pulse.duration_ns <= 0.020 + 1e-15;
}

}  // namespace

Trajectory evolve(const StateMatrix& rho0, const LevelScheme& scheme, const std::vector<DriveTerm>& drives,
                  const std::vector<LindbladChannel>& channels, const VectorXd& t_grid, const EvolveOptions& options) {
  if (t_grid.size() == 0) throw ValidationError("evolve: empty time grid");
  for (Eigen::Index i = 1; i < t_grid.size(); ++i)
    if (!(t_grid(i) > t_grid(i - 1))) throw ValidationError("evolve: time grid must be strictly increasing");
  if (rho0.dim() != scheme.dim()) throw ValidationError("evolve: initial state has the wrong dimension");
  if (std::abs(rho0.trace() - 1.0) > 1e-10 || rho0.hermiticity_error() > 1e-12)
    throw ValidationError("evolve: initial state is not a unit-trace Hermitian matrix");
  if (drives.size() > 63) throw ValidationError("evolve: too many drive terms");

  std::vector<DriveTerm> timed;
  std::vector<DriveTerm> impulsive;
  for (const auto& d : drives) {
    if (options.impulsive_write && d.pulse.kind == PulseKind::Write) {
      if (!impulsive_candidate(d)) throw ValidationError("evolve: impulsive write requires a gaussian pulse <= 20 ps");
      impulsive.push_back(d);
    } else {
      timed.push_back(d);
    }
  }
  // Impulsive terms must share one pulse (one unitary).
  for (const auto& d : impulsive)
    if (d.pulse.t0_ns != impulsive.front().pulse.t0_ns || d.pulse.area() != impulsive.front().pulse.area())
      throw ValidationError("evolve: impulsive write terms must belong to a single pulse");

  Integrator integ(scheme, timed, channels, options);

  const double t_begin = t_grid(0), t_end = t_grid(t_grid.size() - 1);
  std::vector<double> points(t_grid.data(), t_grid.data() + t_grid.size());
  auto add_point = [&](double t) {
    if (t > t_begin && t < t_end) points.push_back(t);
  };
  for (const auto& d : integ.drives()) {
    add_point(d.pulse.window_start());
    add_point(d.pulse.window_end());
    if (d.pulse.envelope == EnvelopeShape::FlatTop) {
      add_point(d.pulse.t0_ns);
      add_point(d.pulse.t0_ns + d.pulse.duration_ns);
    }
  }
  std::optional<double> kick_time;
  CMatrix kick;
  if (!impulsive.empty()) {
    const double t0 = impulsive.front().pulse.t0_ns;
    if (t0 >= t_begin && t0 < t_end) {
      kick_time = t0;
      kick = impulsive_unitary(impulsive, scheme.dim());
      add_point(t0);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  Trajectory traj;
  traj.times = t_grid;
  traj.states.reserve(static_cast<std::size_t>(t_grid.size()));
  std::vector<std::size_t> rad;
  std::vector<CMatrix> number_ops;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (!channels[c].radiative) continue;
    rad.push_back(c);
    traj.flux_names.push_back(channels[c].name);
    number_ops.push_back(CMatrix(SparseCMatrix(channels[c].jump.adjoint()) * channels[c].jump));
  }
  traj.emission_flux = MatrixXd::Zero(t_grid.size(), static_cast<Eigen::Index>(rad.size()));

  CMatrix rho = rho0.elements;
  Eigen::Index next_out = 0;
  auto record = [&]() {
    traj.states.push_back(StateMatrix{rho});
    for (std::size_t k = 0; k < rad.size(); ++k) {
      const double pop = (number_ops[k].cwiseProduct(rho.transpose())).sum().real();
      traj.emission_flux(next_out, static_cast<Eigen::Index>(k)) = channels[rad[k]].rate * std::max(0.0, pop);
    }
    ++next_out;
  };

  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t = points[i];
    if (next_out < t_grid.size() && t == t_grid(next_out)) record();
    if (i + 1 == points.size()) break;
    if (kick_time && t == *kick_time) rho = kick * rho * kick.adjoint();
    integ.advance(rho, t, points[i + 1], traj);
  }
  return traj;
}

}  // namespace dexw
