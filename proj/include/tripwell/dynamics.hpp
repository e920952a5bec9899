#ifndef TRIPWELL_DYNAMICS_HPP
#define TRIPWELL_DYNAMICS_HPP

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tripwell/errors.hpp"
#include "tripwell/fock.hpp"
#include "tripwell/hamiltonians.hpp"
#include "tripwell/parallel.hpp"

namespace tripwell {

struct Spectrum {
  Eigen::VectorXd values;  // ascending
  CMatrix vectors;         // column k belongs to values(k)
};

/// Lowest `count` eigenpairs of a dense Hermitian operator. Real matrices go
/// through the real symmetric solver.
inline Spectrum eigensystem(const CMatrix& h, std::size_t count, bool with_vectors = true) {
  const auto d = h.rows();
  if (count == 0 || static_cast<Eigen::Index>(count) > d) {
    throw std::invalid_argument("requested eigenpair count outside [1, dimension]");
  }
  const auto k = static_cast<Eigen::Index>(count);
  const auto opts = with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  Spectrum s;
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.real(), opts);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver did not converge");
    s.values = es.eigenvalues().head(k);
    if (with_vectors) s.vectors = es.eigenvectors().leftCols(k).cast<Complex>();
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, opts);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver did not converge");
    s.values = es.eigenvalues().head(k);
    if (with_vectors) s.vectors = es.eigenvectors().leftCols(k);
  }
  return s;
}

inline Spectrum eigensystem(const HermitianOperator& h, std::size_t count,
                            bool with_vectors = true) {
  return eigensystem(h.dense(), count, with_vectors);
}

/// exp(-i H t) through a cached full eigendecomposition of H.
class Propagator {
 public:
  explicit Propagator(const HermitianOperator& h)
      : basis_(h.basis_ptr()), spectrum_(eigensystem(h, h.basis().size())) {}

  const Spectrum& spectrum() const { return spectrum_; }

  StateVector apply(double t, const StateVector& psi) const {
    if (!(psi.basis() == *basis_)) throw std::invalid_argument("basis mismatch");
    const CMatrix& v = spectrum_.vectors;
    CVector c = v.adjoint() * psi.amplitudes();
    c.array() *= phases(t).array();
    return StateVector(basis_, v * c);
  }

  CMatrix unitary(double t) const {
    const CMatrix& v = spectrum_.vectors;
    return v * phases(t).asDiagonal() * v.adjoint();
  }

  // Column `k` of exp(-iHt), i.e. the image of basis ket k.
  CVector column(double t, std::size_t k) const {
    const CMatrix& v = spectrum_.vectors;
    CVector c = v.row(static_cast<Eigen::Index>(k)).adjoint();
    c.array() *= phases(t).array();
    return v * c;
  }

 private:
  CVector phases(double t) const {
    return (spectrum_.values.cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
  }

  BasisPtr basis_;
  Spectrum spectrum_;
};

inline StateVector propagate_const(const HermitianOperator& h, double t, const StateVector& psi) {
  return Propagator(h).apply(t, psi);
}

/// |<psi|phi>|^2
inline double fidelity(const StateVector& psi, const StateVector& phi) {
  return std::norm(psi.inner(phi));
}

/// The basis of the J = 0 ground manifold: T0 is the three-mode NOON state,
/// T1 and T2 carry relative phases exp(+-2 pi i / 3) on wells 2 and 3.
struct NoonTriple {
  StateVector t0;
  StateVector t1;
  StateVector t2;

  const StateVector& operator[](int a) const { return a == 0 ? t0 : (a == 1 ? t1 : t2); }
};

inline NoonTriple make_noon_triple(const BasisPtr& basis) {
  const Complex w = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  const double s = 1.0 / std::sqrt(3.0);
  auto build = [&](Complex c2, Complex c3) {
    StateVector v(basis);
    v[basis->extreme_index(0)] = s;
    v[basis->extreme_index(1)] = s * c2;
    v[basis->extreme_index(2)] = s * c3;
    return v;
  };
  return {build(1.0, 1.0), build(w, std::conj(w)), build(std::conj(w), w)};
}

// ---------------------------------------------------------------------------
// Fixed-step classical RK4 for i d/dt psi = H(t) psi.
//
// Each step subtracts the instantaneous energy E = <psi|H(t)|psi> from H. The
// shift only changes the global phase, which is tracked and restored, but keeps
// the occupied part of the spectrum near zero so the scheme's amplitude damping
// |R(i h dt)| stays negligible even when |E| dt is O(1).

template <typename Action>  // void(double t, const CVector& in, CVector& out), out = H(t) in
class Rk4Integrator {
 public:
  Rk4Integrator(Action action, Eigen::Index dim)
      : action_(std::move(action)), k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim), h_(dim) {}

  void step(double t, double dt, CVector& psi) {
    action_(t, psi, h_);
    const double e = psi.dot(h_).real() / psi.squaredNorm();
    const Complex mi(0.0, -1.0);
    k1_ = mi * (h_ - e * psi);
    tmp_ = psi + (0.5 * dt) * k1_;
    action_(t + 0.5 * dt, tmp_, h_);
    k2_ = mi * (h_ - e * tmp_);
    tmp_ = psi + (0.5 * dt) * k2_;
    action_(t + 0.5 * dt, tmp_, h_);
    k3_ = mi * (h_ - e * tmp_);
    tmp_ = psi + dt * k3_;
    action_(t + dt, tmp_, h_);
    k4_ = mi * (h_ - e * tmp_);
    psi += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    phase_ += e * dt;
  }

  // The true state is exp(-i phase) times the integrated (gauge-shifted) one.
  double accumulated_phase() const { return phase_; }

  CVector restore_phase(const CVector& psi) const { return std::polar(1.0, -phase_) * psi; }

 private:
  Action action_;
  CVector k1_, k2_, k3_, k4_, tmp_, h_;
  double phase_ = 0.0;
};

/// RK4 evolution under a constant operator; used to cross-validate Propagator.
inline StateVector evolve_rk4(const HermitianOperator& h, double t, std::size_t steps,
                              const StateVector& psi) {
  if (steps == 0) throw std::invalid_argument("steps must be positive");
  const SparseCMatrix& m = h.sparse();
  auto act = [&m](double, const CVector& in, CVector& out) { out.noalias() = m * in; };
  Rk4Integrator<decltype(act)> rk(act, h.dimension());
  CVector v = psi.amplitudes();
  const double dt = t / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) rk.step(dt * static_cast<double>(s), dt, v);
  return StateVector(psi.basis_ptr(), rk.restore_phase(v));
}

// ---------------------------------------------------------------------------
// Adiabatic preparation

namespace detail {
inline std::string short_number(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}
}  // namespace detail

struct SweepSchedule {
  double J0 = 10.0;
  double v = 0.2;
  double U = -0.5;
  double dt = 1e-3;
  std::size_t record_stride = 100;
  bool keep_snapshots = false;

  double duration() const { return J0 / v; }
  double coupling(double t) const { return J0 - v * t; }

  void validate() const {
    if (!(J0 > 0.0)) throw std::invalid_argument("J0 must be > 0");
    if (!(v > 0.0)) throw std::invalid_argument("ramp speed v must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!std::isfinite(U)) throw std::invalid_argument("U must be finite");
    if (record_stride == 0) throw std::invalid_argument("record_stride must be >= 1");
  }
};

inline constexpr double kSweepNormTolerance = 1e-8;
inline constexpr double kStartGapFraction = 1e-6;

struct TrajectorySample {
  double t = 0.0;
  double J = 0.0;
  std::array<double, 3> fid{};
  double norm_drift = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<StateVector> snapshots;  // filled only when requested
  std::optional<StateVector> initial;
  std::optional<StateVector> final_state;
  double start_gap = 0.0;
  std::size_t steps = 0;
  double dt = 0.0;

  const TrajectorySample& last() const { return samples.back(); }
  double max_norm_drift() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.norm_drift);
    return m;
  }
};

// Fixes the global phase so that the largest-magnitude amplitude is real positive.
inline void canonicalize_phase(CVector& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  v *= std::polar(1.0, -std::arg(v(k)));
}

/// Ground state of H(J0, U) swept to J = 0 along J(t) = J0 - v t.
inline Trajectory adiabatic_sweep(const SweepSchedule& sched, int N) {
  sched.validate();
  const BasisPtr basis = make_basis(N);
  const HermitianOperator hop(basis, detail::ring_hopping(*basis));
  const Eigen::VectorXd diag = detail::pair_interaction_diagonal(*basis);
  const SparseCMatrix& k = hop.sparse();
  const NoonTriple noon = make_noon_triple(basis);

  Trajectory traj;
  const Spectrum start = eigensystem(build_bose_hubbard(basis, {sched.J0, sched.U}), 2);
  traj.start_gap = start.values(1) - start.values(0);
  if (traj.start_gap < kStartGapFraction * sched.J0) {
    throw NumericalError("initial ground state is nearly degenerate (gap " +
                         detail::short_number(traj.start_gap) + "); increase J0");
  }
  CVector psi = start.vectors.col(0);
  canonicalize_phase(psi);
  traj.initial = StateVector(basis, psi);

  const double t_end = sched.duration();
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / sched.dt - 1e-9));
  const double dt = t_end / static_cast<double>(steps);
  traj.steps = steps;
  traj.dt = dt;

  const double u = sched.U;
  auto act = [&](double t, const CVector& in, CVector& out) {
    out.noalias() = k * in;
    out *= -sched.coupling(t);
    out.array() += u * diag.array() * in.array();
  };
  Rk4Integrator<decltype(act)> rk(act, hop.dimension());

  auto record = [&](double t, double j) {
    StateVector s(basis, rk.restore_phase(psi));
    TrajectorySample row{t, j, {}, std::abs(s.norm() - 1.0)};
    for (int a = 0; a < 3; ++a) row.fid[a] = std::norm(s.inner(noon[a]));
    traj.samples.push_back(row);
    if (row.norm_drift > kSweepNormTolerance) {
      throw NumericalError("norm drift " + detail::short_number(row.norm_drift) +
                           " exceeds tolerance at t=" + detail::short_number(t) +
                           "; reduce dt");
    }
    if (sched.keep_snapshots) traj.snapshots.push_back(std::move(s));
  };

  record(0.0, sched.J0);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = dt * static_cast<double>(s);
    rk.step(t, dt, psi);
    const bool last = s + 1 == steps;
    if (last || (s + 1) % sched.record_stride == 0) {
      const double tn = last ? t_end : dt * static_cast<double>(s + 1);
      record(tn, last ? 0.0 : sched.coupling(tn));
    }
  }
  traj.final_state = StateVector(basis, rk.restore_phase(psi));
  return traj;
}

struct RampRow {
  double v = 0.0;
  std::optional<double> final_fid0;
  std::string error;
};

/// One sweep per ramp speed; a failing row records its error and the rest continue.
inline std::vector<RampRow> ramp_speed_study(double J0, double U, int N,
                                             const std::vector<double>& speeds, double dt,
                                             unsigned workers = 1) {
  if (speeds.empty()) throw std::invalid_argument("ramp speed list is empty");
  std::vector<RampRow> rows(speeds.size());
  parallel_for(speeds.size(), workers, [&](std::size_t i) {
    rows[i].v = speeds[i];
    try {
      SweepSchedule s;
      s.J0 = J0;
      s.v = speeds[i];
      s.U = U;
      s.dt = dt;
      s.record_stride = 1000;
      rows[i].final_fid0 = adiabatic_sweep(s, N).last().fid[0];
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Spectrum and C3 symmetry sectors

/// Orthonormal basis of the sector where the cyclic permutation acts as
/// exp(2 pi i k / 3). Columns are indexed by orbit representatives.
inline CMatrix cyclic_sector_basis(const FockBasis& b, int sector) {
  if (sector < 0 || sector > 2) throw std::invalid_argument("sector must be 0, 1 or 2");
  const Complex w = std::polar(1.0, -2.0 * std::numbers::pi * sector / 3.0);
  std::vector<CVector> cols;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const FockTriple t = b[k];
    const FockTriple p1{t.n3, t.n1, t.n2};
    const FockTriple p2{t.n2, t.n3, t.n1};
    const std::size_t i1 = b.index(p1);
    const std::size_t i2 = b.index(p2);
    if (i1 < k || i2 < k) continue;  // not the orbit representative
    CVector v = CVector::Zero(static_cast<Eigen::Index>(b.size()));
    if (i1 == k) {
      if (sector != 0) continue;
      v(static_cast<Eigen::Index>(k)) = 1.0;
    } else {
      const double s = 1.0 / std::sqrt(3.0);
      v(static_cast<Eigen::Index>(k)) = s;
      v(static_cast<Eigen::Index>(i1)) = s * w;
      v(static_cast<Eigen::Index>(i2)) = s * w * w;
    }
    cols.push_back(std::move(v));
  }
  CMatrix m(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
  return m;
}

/// Lowest eigenvalues of H restricted to one cyclic symmetry sector.
inline Eigen::VectorXd sector_spectrum(const HermitianOperator& h, int sector, std::size_t count) {
  const CMatrix b = cyclic_sector_basis(h.basis(), sector);
  const CMatrix reduced = b.adjoint() * h.dense() * b;
  return eigensystem(0.5 * (reduced + reduced.adjoint()), count, false).values;
}

/// Low-lying levels resolved by cyclic sector, plus the sign structure that
/// makes the ground state unique: a real Hamiltonian with non-positive
/// off-diagonal entries whose hopping graph is connected.
struct SectorStructure {
  double sector0_ground = 0.0;
  double sector0_first = 0.0;   // second-lowest level in the symmetric sector
  double sector1_ground = 0.0;
  double sector2_ground = 0.0;
  bool stoquastic = false;
  bool connected = false;

  bool unique_ground() const { return stoquastic && connected; }
  double pair_splitting() const { return std::abs(sector1_ground - sector2_ground); }
};

inline SectorStructure sector_structure(const HermitianOperator& h) {
  SectorStructure s;
  const auto v0 = sector_spectrum(h, 0, 2);
  s.sector0_ground = v0(0);
  s.sector0_first = v0(1);
  s.sector1_ground = sector_spectrum(h, 1, 1)(0);
  s.sector2_ground = sector_spectrum(h, 2, 1)(0);

  const CMatrix& m = h.dense();
  const Eigen::Index d = m.rows();
  s.stoquastic = m.imag().cwiseAbs().maxCoeff() == 0.0;
  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == j || m(i, j) == Complex(0.0)) continue;
      if (m(i, j).real() > 0.0) s.stoquastic = false;
      adj[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  std::vector<char> seen(static_cast<std::size_t>(d), 0);
  std::vector<Eigen::Index> stack{0};
  seen[0] = 1;
  Eigen::Index reached = 1;
  while (!stack.empty()) {
    const Eigen::Index i = stack.back();
    stack.pop_back();
    for (Eigen::Index j : adj[static_cast<std::size_t>(i)]) {
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        stack.push_back(j);
      }
    }
  }
  s.connected = reached == d;
  return s;
}

struct SpectrumScan {
  std::vector<double> couplings;
  Eigen::MatrixXd levels;  // row per coupling, ascending levels
};

inline SpectrumScan spectrum_scan(int N, double U, const std::vector<double>& couplings,
                                  std::size_t levels, unsigned workers = 1) {
  const BasisPtr basis = make_basis(N);
  const std::size_t count = std::min(levels, basis->size());
  SpectrumScan out{couplings, Eigen::MatrixXd(static_cast<Eigen::Index>(couplings.size()),
                                              static_cast<Eigen::Index>(count))};
  parallel_for(couplings.size(), workers, [&](std::size_t i) {
    const auto s = eigensystem(build_bose_hubbard(basis, {couplings[i], U}), count, false);
    out.levels.row(static_cast<Eigen::Index>(i)) = s.values.transpose();
  });
  return out;
}

}  // namespace tripwell

#endif  // TRIPWELL_DYNAMICS_HPP
