#ifndef TRIPWELL_METROLOGY_HPP
#define TRIPWELL_METROLOGY_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tripwell/dynamics.hpp"
#include "tripwell/errors.hpp"
#include "tripwell/fock.hpp"
#include "tripwell/hamiltonians.hpp"

namespace tripwell {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kRotationPeriod = kTwoPi / 3.0;  // period of P(theta, tau) in tau
inline constexpr double kOptimalTau = kTwoPi / 9.0;
inline constexpr double kSingularTauTolerance = 1e-9;
inline constexpr double kProbabilityGuard = 1e-15;
inline constexpr double kMaxConditionNumber = 1e12;
// A CFIM whose trace is below this fraction of N^2 is rounding noise.
inline constexpr double kNullInformationFraction = 1e-12;

/// The two encoded phase differences (theta_3 = 0). The state depends on each
/// only through exp(-i N theta), so scans work in effective phases N theta.
struct PhasePair {
  double theta1 = 0.0;
  double theta2 = 0.0;

  double operator[](int mu) const { return mu == 0 ? theta1 : theta2; }

  static PhasePair from_effective(double eff1, double eff2, int N) {
    return {eff1 / N, eff2 / N};
  }
};

/// The closed-form point G: N theta_1 = N theta_2 = 2 (N + 1) pi / 3.
inline PhasePair g_point(int N) {
  const double eff = 2.0 * (N + 1) * std::numbers::pi / 3.0;
  return PhasePair::from_effective(eff, eff, N);
}

inline bool is_singular_tau(double tau) {
  const double r = tau - kRotationPeriod * std::round(tau / kRotationPeriod);
  return std::abs(r) <= kSingularTauTolerance;
}

inline void check_parameter(int mu) {
  if (mu != 0 && mu != 1) {
    throw std::out_of_range("parameter index must be 0 (theta_1) or 1 (theta_2)");
  }
}

// (exp(-i N theta_1), exp(-i N theta_2), 1)
inline std::array<Complex, 3> encoding_phases(const PhasePair& theta, int N) {
  return {std::polar(1.0, -N * theta.theta1), std::polar(1.0, -N * theta.theta2),
          Complex(1.0, 0.0)};
}

/// (e^{-iN theta_1}|N,0,0> + e^{-iN theta_2}|0,N,0> + |0,0,N>) / sqrt(3)
inline StateVector output_state(const PhasePair& theta, const BasisPtr& basis) {
  const auto ph = encoding_phases(theta, basis->particles());
  StateVector s(basis);
  for (int i = 0; i < 3; ++i) s[basis->extreme_index(i)] = ph[i] / std::sqrt(3.0);
  return s;
}

/// d/d theta_mu of output_state (unnormalized).
inline StateVector output_state_derivative(const PhasePair& theta, const BasisPtr& basis, int mu) {
  check_parameter(mu);
  const int N = basis->particles();
  const auto ph = encoding_phases(theta, N);
  StateVector s(basis);
  s[basis->extreme_index(mu)] = Complex(0.0, -static_cast<double>(N)) * ph[mu] / std::sqrt(3.0);
  return s;
}

// ---------------------------------------------------------------------------

enum class FisherKind { kClassical, kQuantum };

struct FisherMatrix {
  double f11 = 0.0;
  double f12 = 0.0;
  double f22 = 0.0;
  FisherKind kind = FisherKind::kClassical;
  bool singular = false;
  std::size_t guarded = 0;  // outcomes skipped by the probability guard

  double operator()(int mu, int nu) const {
    if (mu == 0 && nu == 0) return f11;
    if (mu == 1 && nu == 1) return f22;
    return f12;
  }
  double determinant() const { return f11 * f22 - f12 * f12; }
  double trace() const { return f11 + f22; }

  std::array<double, 2> eigenvalues() const {
    const double m = 0.5 * (f11 + f22);
    const double r = std::hypot(0.5 * (f11 - f22), f12);
    return {m - r, m + r};
  }
};

/// tr(F^-1) via the 2x2 closed form; +inf for singular, indefinite or
/// ill-conditioned input.
inline double precision(const FisherMatrix& f) {
  if (f.singular) return std::numeric_limits<double>::infinity();
  const double det = f.determinant();
  const auto [lo, hi] = f.eigenvalues();
  if (!(det > 0.0) || !(lo > 0.0) || hi > kMaxConditionNumber * lo) {
    return std::numeric_limits<double>::infinity();
  }
  return f.trace() / det;
}

/// QFIM of the pure output state from the analytic derivative states:
/// F_mn = 4 Re[<d_m psi|d_n psi> - <d_m psi|psi><psi|d_n psi>].
inline FisherMatrix qfim(const PhasePair& theta, const BasisPtr& basis) {
  const StateVector psi = output_state(theta, basis);
  const std::array<StateVector, 2> d{output_state_derivative(theta, basis, 0),
                                     output_state_derivative(theta, basis, 1)};
  auto entry = [&](int m, int n) {
    return 4.0 * (d[m].inner(d[n]) - d[m].inner(psi) * psi.inner(d[n])).real();
  };
  FisherMatrix f;
  f.kind = FisherKind::kQuantum;
  f.f11 = entry(0, 0);
  f.f12 = entry(0, 1);
  f.f22 = entry(1, 1);
  return f;
}

inline FisherMatrix qfim(const PhasePair& theta, int N) { return qfim(theta, make_basis(N)); }

/// tr[(F^q)^-1] = 3 / N^2.
inline double qfim_bound(int N) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  return 3.0 / (static_cast<double>(N) * N);
}

// ---------------------------------------------------------------------------

struct OutcomeDistribution {
  BasisPtr basis;
  Eigen::VectorXd probabilities;

  double operator()(const FockTriple& n) const {
    return probabilities(static_cast<Eigen::Index>(basis->index(n)));
  }
  double sum() const { return probabilities.sum(); }
};

/// log sqrt(N! / (3^{2N+1} n1! n2! n3!))
inline double log_rotation_prefactor(const FockTriple& n) {
  const int N = n.total();
  return 0.5 * (std::lgamma(N + 1.0) - (2.0 * N + 1.0) * std::log(3.0) -
                std::lgamma(n.n1 + 1.0) - std::lgamma(n.n2 + 1.0) - std::lgamma(n.n3 + 1.0));
}

/// Final-state amplitudes factored by encoding branch.
///
/// The rotated state is A(n) = sum_i e^{-i N theta_i} T_i(n), and every
/// quantity downstream (probabilities, gradients, CFIM) is built from the three
/// branch vectors T_i. Two sources fill them:
///  - the ideal rotation in closed form,
///      T_i(n) = C(n) (e^{2i tau} + 2 e^{-i tau})^{n_i} (e^{2i tau} - e^{-i tau})^{N - n_i},
///    with both power tables cached for k <= N;
///  - any unitary U, as T_i = U |e_i> / sqrt(3) (used for the imperfect rotation).
/// Constructing the kernel is the per-(tau, rotation) cost; each theta evaluation
/// afterwards is O(basis size).
class RotatedNoonKernel {
 public:
  static RotatedNoonKernel ideal(const BasisPtr& basis, double tau) {
    RotatedNoonKernel k(basis, tau);
    k.singular_ = is_singular_tau(tau);
    const int N = basis->particles();
    const Complex p = std::polar(1.0, 2.0 * tau) + 2.0 * std::polar(1.0, -tau);
    const Complex q = std::polar(1.0, 2.0 * tau) - std::polar(1.0, -tau);
    std::vector<Complex> pp(N + 1), qp(N + 1);
    pp[0] = qp[0] = 1.0;
    for (int e = 1; e <= N; ++e) {
      pp[e] = pp[e - 1] * p;
      qp[e] = qp[e - 1] * q;
    }
    for (std::size_t r = 0; r < basis->size(); ++r) {
      const FockTriple& n = (*basis)[r];
      const double c = std::exp(log_rotation_prefactor(n));
      for (int i = 0; i < 3; ++i) k.terms_[i](static_cast<Eigen::Index>(r)) = c * pp[n[i]] * qp[N - n[i]];
    }
    return k;
  }

  /// Branches taken from the columns of exp(-i H t) at |e_i>.
  static RotatedNoonKernel from_propagator(const Propagator& u, const BasisPtr& basis, double t,
                                           double tau, bool singular) {
    RotatedNoonKernel k(basis, tau);
    k.singular_ = singular;
    for (int i = 0; i < 3; ++i) k.terms_[i] = u.column(t, basis->extreme_index(i)) / std::sqrt(3.0);
    return k;
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  int particles() const { return basis_->particles(); }
  double tau() const { return tau_; }
  bool singular() const { return singular_; }
  const CVector& branch(int i) const { return terms_[i]; }

  CVector amplitudes_effective(double eff1, double eff2) const {
    return std::polar(1.0, -eff1) * terms_[0] + std::polar(1.0, -eff2) * terms_[1] + terms_[2];
  }

  StateVector final_state(const PhasePair& theta) const {
    const int N = particles();
    return StateVector(basis_, amplitudes_effective(N * theta.theta1, N * theta.theta2));
  }

  OutcomeDistribution probabilities(const PhasePair& theta) const {
    const int N = particles();
    Eigen::VectorXd p = amplitudes_effective(N * theta.theta1, N * theta.theta2).cwiseAbs2();
    for (auto& x : p) x = x < 0.0 ? 0.0 : x;
    return {basis_, std::move(p)};
  }

  /// d P(n) / d theta_mu. Mathematically 2 Re[conj(A) dA] with dA = -i N a_mu;
  /// evaluated as 2N Im[a_mu conj(A - a_mu)] because the dropped |a_mu|^2 term is
  /// real, and keeping it would leave rounding noise of order |a_mu|^2 eps.
  Eigen::VectorXd gradient(const PhasePair& theta, int mu) const {
    check_parameter(mu);
    const int N = particles();
    const auto ph = encoding_phases(theta, N);
    Eigen::VectorXd g(static_cast<Eigen::Index>(basis_->size()));
    for (Eigen::Index r = 0; r < g.size(); ++r) {
      std::array<Complex, 3> a;
      for (int i = 0; i < 3; ++i) a[i] = ph[i] * terms_[i](r);
      const Complex rest = a[0] + a[1] + a[2] - a[mu];
      g(r) = 2.0 * N * (a[mu] * std::conj(rest)).imag();
    }
    return g;
  }

  FisherMatrix cfim_effective(double eff1, double eff2, double guard = kProbabilityGuard) const {
    FisherMatrix f;
    f.kind = FisherKind::kClassical;
    if (singular_) {
      f.singular = true;
      return f;
    }
    const double twice_n = 2.0 * particles();
    const double c1 = std::cos(eff1), s1 = -std::sin(eff1);
    const double c2 = std::cos(eff2), s2 = -std::sin(eff2);
    const Complex* t1 = terms_[0].data();
    const Complex* t2 = terms_[1].data();
    const Complex* t3 = terms_[2].data();
    double f11 = 0.0, f12 = 0.0, f22 = 0.0;
    std::size_t guarded = 0;
    const auto dim = terms_[0].size();
    for (Eigen::Index r = 0; r < dim; ++r) {
      const double a1r = c1 * t1[r].real() - s1 * t1[r].imag();
      const double a1i = c1 * t1[r].imag() + s1 * t1[r].real();
      const double a2r = c2 * t2[r].real() - s2 * t2[r].imag();
      const double a2i = c2 * t2[r].imag() + s2 * t2[r].real();
      const double a3r = t3[r].real();
      const double a3i = t3[r].imag();
      const double ar = a1r + a2r + a3r;
      const double ai = a1i + a2i + a3i;
      const double p = ar * ar + ai * ai;
      if (!(p > guard)) {
        ++guarded;
        continue;
      }
      // Im[a conj(b)] = a_i b_r - a_r b_i
      const double d1 = twice_n * (a1i * (a2r + a3r) - a1r * (a2i + a3i));
      const double d2 = twice_n * (a2i * (a1r + a3r) - a2r * (a1i + a3i));
      const double inv = 1.0 / p;
      f11 += d1 * d1 * inv;
      f12 += d1 * d2 * inv;
      f22 += d2 * d2 * inv;
    }
    f.f11 = f11;
    f.f12 = f12;
    f.f22 = f22;
    f.guarded = guarded;
    const double n = particles();
    f.singular = !(f11 + f22 > kNullInformationFraction * n * n);
    return f;
  }

  FisherMatrix cfim(const PhasePair& theta, double guard = kProbabilityGuard) const {
    const int N = particles();
    return cfim_effective(N * theta.theta1, N * theta.theta2, guard);
  }

 private:
  RotatedNoonKernel(BasisPtr basis, double tau) : basis_(std::move(basis)), tau_(tau) {
    for (auto& t : terms_) t = CVector::Zero(static_cast<Eigen::Index>(basis_->size()));
  }

  BasisPtr basis_;
  double tau_;
  bool singular_ = false;
  std::array<CVector, 3> terms_;
};

inline StateVector final_state_analytic(const PhasePair& theta, double tau, const BasisPtr& basis) {
  return RotatedNoonKernel::ideal(basis, tau).final_state(theta);
}

inline OutcomeDistribution outcome_probabilities(const PhasePair& theta, double tau,
                                                 const BasisPtr& basis) {
  return RotatedNoonKernel::ideal(basis, tau).probabilities(theta);
}

inline Eigen::VectorXd probability_gradient(const PhasePair& theta, double tau,
                                            const BasisPtr& basis, int mu) {
  return RotatedNoonKernel::ideal(basis, tau).gradient(theta, mu);
}

inline FisherMatrix cfim(const PhasePair& theta, double tau, int N,
                         double guard = kProbabilityGuard) {
  return RotatedNoonKernel::ideal(make_basis(N), tau).cfim(theta, guard);
}

/// Delta = tr[(F^c)^-1] - tr[(F^q)^-1]; +inf when the CFIM is singular.
inline double precision_gap(const FisherMatrix& classical, int N) {
  return precision(classical) - qfim_bound(N);
}

inline double precision_gap(const PhasePair& theta, double tau, int N) {
  return precision_gap(cfim(theta, tau, N), N);
}

// ---------------------------------------------------------------------------

/// Rotation exp(-i H'_R tau / J) with residual interaction U_res. The dense
/// eigendecomposition is done once; kernels for any tau reuse it.
class ImperfectRotation {
 public:
  ImperfectRotation(const BasisPtr& basis, double J, double U_res)
      : basis_(basis), J_(J), U_res_(U_res), propagator_(build_imperfect_rotation(basis, J, U_res)) {}

  double coupling() const { return J_; }
  double residual() const { return U_res_; }

  RotatedNoonKernel kernel(double tau) const {
    const bool singular = U_res_ == 0.0 && is_singular_tau(tau);
    return RotatedNoonKernel::from_propagator(propagator_, basis_, tau / J_, tau, singular);
  }

 private:
  BasisPtr basis_;
  double J_;
  double U_res_;
  Propagator propagator_;
};

inline FisherMatrix cfim_imperfect(const PhasePair& theta, double tau, int N, double J,
                                   double U_res, double guard = kProbabilityGuard) {
  return ImperfectRotation(make_basis(N), J, U_res).kernel(tau).cfim(theta, guard);
}

// ---------------------------------------------------------------------------

struct FTableEntry {
  double f11 = 0.0;
  double f12 = 0.0;
  double f22 = 0.0;
};

/// f_mn(n) = 3^{N+1} n1! n2! n3! / (N! N^2) * d_m P d_n P / P at N theta = 2 pi / 3
/// for both phases and tau = 2 pi / 9. Defined for N divisible by 3 and the
/// residue classes {0,0,0}, {1,1,1} and permutations of {0,1,2}.
inline FTableEntry appendix_b_f_table(const FockTriple& n) {
  const int N = n.total();
  if (n.n1 < 0 || n.n2 < 0 || n.n3 < 0 || N < 3 || N % 3 != 0) {
    throw std::invalid_argument("f table needs non-negative occupations with N divisible by 3");
  }
  const FockTriple res{n.n1 % 3, n.n2 % 3, n.n3 % 3};
  const bool uniform = res.n1 == res.n2 && res.n2 == res.n3;
  if (uniform && res.n1 == 2) {
    throw std::invalid_argument("residue class (2,2,2) is outside the f table");
  }
  const BasisPtr basis = make_basis(N);
  const auto kernel = RotatedNoonKernel::ideal(basis, kOptimalTau);
  const double eff = kTwoPi / 3.0;
  const PhasePair theta = PhasePair::from_effective(eff, eff, N);
  const auto r = static_cast<Eigen::Index>(basis->index(n));
  const double p = kernel.probabilities(theta).probabilities(r);
  const double d1 = kernel.gradient(theta, 0)(r);
  const double d2 = kernel.gradient(theta, 1)(r);
  const double scale =
      std::exp((N + 1.0) * std::log(3.0) + std::lgamma(n.n1 + 1.0) + std::lgamma(n.n2 + 1.0) +
               std::lgamma(n.n3 + 1.0) - std::lgamma(N + 1.0)) /
      (static_cast<double>(N) * N * p);
  return {scale * d1 * d1, scale * d1 * d2, scale * d2 * d2};
}

}  // namespace tripwell

#endif  // TRIPWELL_METROLOGY_HPP
