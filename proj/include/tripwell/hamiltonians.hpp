#ifndef TRIPWELL_HAMILTONIANS_HPP
#define TRIPWELL_HAMILTONIANS_HPP

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tripwell/fock.hpp"

namespace tripwell {

struct ModelParams {
  double J = 1.0;  // tunneling strength
  double U = 0.0;  // on-site interaction; attractive for U < 0
};

struct EnergyShifts {
  double E1 = 0.0;
  double E2 = 0.0;
  double E3 = 0.0;
  double operator[](int mode) const { return mode == 0 ? E1 : (mode == 1 ? E2 : E3); }
};

using SparseCMatrix = Eigen::SparseMatrix<Complex>;

/// Dense Hermitian matrix on a Fock basis. The dense form is authoritative; the
/// sparse form is derived from it once for repeated mat-vec in time stepping.
class HermitianOperator {
 public:
  HermitianOperator(BasisPtr basis, CMatrix dense)
      : basis_(std::move(basis)), dense_(std::move(dense)) {
    const auto d = static_cast<Eigen::Index>(basis_->size());
    if (dense_.rows() != d || dense_.cols() != d) {
      throw std::invalid_argument("operator dimension does not match basis");
    }
    sparse_ = dense_.sparseView(Complex(0.0), 0.0);
    sparse_.makeCompressed();
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const CMatrix& dense() const { return dense_; }
  const SparseCMatrix& sparse() const { return sparse_; }
  Eigen::Index dimension() const { return dense_.rows(); }

  StateVector apply(const StateVector& psi) const {
    if (!(psi.basis() == *basis_)) {
      throw std::invalid_argument("state and operator live on different bases");
    }
    return StateVector(basis_, sparse_ * psi.amplitudes());
  }

  // <psi|H|psi>
  double expectation(const StateVector& psi) const {
    return psi.amplitudes().dot(sparse_ * psi.amplitudes()).real();
  }

  double hermiticity_error() const {
    return (dense_ - dense_.adjoint()).cwiseAbs().maxCoeff();
  }

  bool is_real() const { return dense_.imag().cwiseAbs().maxCoeff() == 0.0; }

  double max_abs_entry() const { return dense_.cwiseAbs().maxCoeff(); }

 private:
  BasisPtr basis_;
  CMatrix dense_;
  SparseCMatrix sparse_;
};

namespace detail {

// The ring rule j = (i+1) mod 3 + 1 (1-based) pairs 1->3, 2->1, 3->2.
inline constexpr std::array<std::pair<int, int>, 3> kRingPairs{{{0, 2}, {1, 0}, {2, 1}}};

// Sum over the three ring bonds of (a_i^dag a_j + h.c.). Each term is written
// together with its adjoint so the result is Hermitian by construction.
inline CMatrix ring_hopping(const FockBasis& b) {
  const auto d = static_cast<Eigen::Index>(b.size());
  CMatrix m = CMatrix::Zero(d, d);
  for (const auto& [i, j] : kRingPairs) {
    for (std::size_t k = 0; k < b.size(); ++k) {
      FockTriple t = b[k];
      if (t[j] == 0) continue;
      const double c = std::sqrt(static_cast<double>((t[i] + 1) * t[j]));
      t[i] += 1;
      t[j] -= 1;
      const auto row = static_cast<Eigen::Index>(b.index(t));
      const auto col = static_cast<Eigen::Index>(k);
      m(row, col) += c;
      m(col, row) += c;
    }
  }
  return m;
}

inline Eigen::VectorXd pair_interaction_diagonal(const FockBasis& b) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(b.size()));
  for (std::size_t k = 0; k < b.size(); ++k) {
    double s = 0.0;
    for (int i = 0; i < kNumModes; ++i) {
      const double n = b[k][i];
      s += n * (n - 1.0);
    }
    d(static_cast<Eigen::Index>(k)) = s;
  }
  return d;
}

}  // namespace detail

/// H = -J sum_ring (a_i^dag a_j + h.c.) + U sum_i n_i (n_i - 1)
inline HermitianOperator build_bose_hubbard(const BasisPtr& basis, const ModelParams& p) {
  CMatrix m = -p.J * detail::ring_hopping(*basis);
  m.diagonal() += (p.U * detail::pair_interaction_diagonal(*basis)).cast<Complex>();
  return HermitianOperator(basis, std::move(m));
}

/// Diagonal sum_i E_i n_i.
inline HermitianOperator build_phase_encoding(const BasisPtr& basis, const EnergyShifts& e) {
  const auto d = static_cast<Eigen::Index>(basis->size());
  CMatrix m = CMatrix::Zero(d, d);
  for (std::size_t k = 0; k < basis->size(); ++k) {
    const FockTriple& t = (*basis)[k];
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) =
        e.E1 * t.n1 + e.E2 * t.n2 + e.E3 * t.n3;
  }
  return HermitianOperator(basis, std::move(m));
}

inline HermitianOperator build_rotation_generator(const BasisPtr& basis, double J) {
  if (!(J > 0.0)) throw std::invalid_argument("rotation generator requires J > 0");
  return build_bose_hubbard(basis, {J, 0.0});
}

inline HermitianOperator build_imperfect_rotation(const BasisPtr& basis, double J, double U_res) {
  if (!(J > 0.0)) throw std::invalid_argument("imperfect rotation requires J > 0");
  return build_bose_hubbard(basis, {J, U_res});
}

namespace detail {

template <typename Map>
CMatrix permutation_matrix(const FockBasis& b, Map&& map) {
  const auto d = static_cast<Eigen::Index>(b.size());
  CMatrix p = CMatrix::Zero(d, d);
  for (std::size_t k = 0; k < b.size(); ++k) {
    p(static_cast<Eigen::Index>(b.index(map(b[k]))), static_cast<Eigen::Index>(k)) = 1.0;
  }
  return p;
}

}  // namespace detail

/// Cyclic well permutation |n1,n2,n3> -> |n3,n1,n2>.
inline CMatrix cyclic_permutation(const FockBasis& b) {
  return detail::permutation_matrix(b, [](const FockTriple& t) {
    return FockTriple{t.n3, t.n1, t.n2};
  });
}

/// Mirror permutation |n1,n2,n3> -> |n2,n1,n3> (swap of wells 1 and 2).
inline CMatrix mirror_permutation(const FockBasis& b) {
  return detail::permutation_matrix(b, [](const FockTriple& t) {
    return FockTriple{t.n2, t.n1, t.n3};
  });
}

inline double commutator_norm(const CMatrix& a, const CMatrix& b) {
  return (a * b - b * a).cwiseAbs().maxCoeff();
}

}  // namespace tripwell

#endif  // TRIPWELL_HAMILTONIANS_HPP
