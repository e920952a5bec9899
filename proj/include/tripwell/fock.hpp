#ifndef TRIPWELL_FOCK_HPP
#define TRIPWELL_FOCK_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <compare>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tripwell {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline constexpr int kNumModes = 3;
inline constexpr int kDefaultMaxParticles = 200;

// Occupations of the three wells. Modes are 0-based throughout the library.
struct FockTriple {
  int n1 = 0;
  int n2 = 0;
  int n3 = 0;

  constexpr int operator[](int mode) const {
    return mode == 0 ? n1 : (mode == 1 ? n2 : n3);
  }
  constexpr int& operator[](int mode) {
    return mode == 0 ? n1 : (mode == 1 ? n2 : n3);
  }
  constexpr int total() const { return n1 + n2 + n3; }

  friend constexpr auto operator<=>(const FockTriple&, const FockTriple&) = default;
};

inline std::string to_string(const FockTriple& t) {
  return "(" + std::to_string(t.n1) + "," + std::to_string(t.n2) + "," +
         std::to_string(t.n3) + ")";
}

inline void check_mode(int mode) {
  if (mode < 0 || mode >= kNumModes) {
    throw std::out_of_range("mode index " + std::to_string(mode) +
                            " outside [0, 3)");
  }
}

/// N-particle three-mode Fock basis.
///
/// States are ordered by n1 descending, then n2 descending, with n3 = N - n1 - n2.
/// The ordering is part of every exported file's row layout, so it must not change.
/// The index map is closed form: index(n) = m(m+1)/2 + (m - n2) with m = N - n1.
class FockBasis {
 public:
  explicit FockBasis(int particles, int max_particles = kDefaultMaxParticles)
      : particles_(particles) {
    if (particles < 1) {
      throw std::invalid_argument("particle number must be >= 1, got " +
                                  std::to_string(particles));
    }
    if (particles > max_particles) {
      throw std::invalid_argument("particle number " + std::to_string(particles) +
                                  " exceeds the cap of " +
                                  std::to_string(max_particles));
    }
    states_.reserve(dimension(particles));
    for (int a = particles; a >= 0; --a) {
      for (int b = particles - a; b >= 0; --b) {
        states_.push_back({a, b, particles - a - b});
      }
    }
  }

  static constexpr std::size_t dimension(int particles) {
    const auto n = static_cast<std::size_t>(particles);
    return (n + 1) * (n + 2) / 2;
  }

  int particles() const { return particles_; }
  std::size_t size() const { return states_.size(); }
  const std::vector<FockTriple>& states() const { return states_; }
  const FockTriple& operator[](std::size_t k) const { return states_[k]; }

  bool contains(const FockTriple& t) const {
    return t.n1 >= 0 && t.n2 >= 0 && t.n3 >= 0 && t.total() == particles_;
  }

  std::optional<std::size_t> find(const FockTriple& t) const {
    if (!contains(t)) return std::nullopt;
    const auto m = static_cast<std::size_t>(particles_ - t.n1);
    return m * (m + 1) / 2 + (m - static_cast<std::size_t>(t.n2));
  }

  std::size_t index(const FockTriple& t) const {
    if (auto k = find(t)) return *k;
    throw std::out_of_range("Fock state " + to_string(t) + " not in N=" +
                            std::to_string(particles_) + " basis");
  }

  // Position of |N,0,0>, |0,N,0>, |0,0,N>.
  std::size_t extreme_index(int mode) const {
    check_mode(mode);
    FockTriple t;
    t[mode] = particles_;
    return index(t);
  }

  friend bool operator==(const FockBasis& a, const FockBasis& b) {
    return a.particles_ == b.particles_;
  }

 private:
  int particles_;
  std::vector<FockTriple> states_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr make_basis(int particles, int max_particles = kDefaultMaxParticles) {
  return std::make_shared<const FockBasis>(particles, max_particles);
}

/// Complex amplitudes over a FockBasis. Normalization is not enforced; derivative
/// states and ladder-operator images are legitimately unnormalized.
class StateVector {
 public:
  explicit StateVector(BasisPtr basis)
      : basis_(std::move(basis)), amps_(CVector::Zero(static_cast<Eigen::Index>(basis_->size()))) {}

  StateVector(BasisPtr basis, CVector amplitudes)
      : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amps_.size()) != basis_->size()) {
      throw std::invalid_argument("amplitude vector length does not match basis size");
    }
  }

  static StateVector basis_ket(BasisPtr basis, const FockTriple& t) {
    StateVector s(basis);
    s.amps_(static_cast<Eigen::Index>(basis->index(t))) = 1.0;
    return s;
  }

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const CVector& amplitudes() const { return amps_; }
  CVector& amplitudes() { return amps_; }
  std::size_t size() const { return basis_->size(); }

  Complex operator[](std::size_t k) const { return amps_(static_cast<Eigen::Index>(k)); }
  Complex& operator[](std::size_t k) { return amps_(static_cast<Eigen::Index>(k)); }
  Complex amplitude(const FockTriple& t) const { return (*this)[basis_->index(t)]; }

  double norm() const { return amps_.norm(); }
  double squared_norm() const { return amps_.squaredNorm(); }

  StateVector& normalize() {
    const double n = norm();
    if (n == 0.0) throw std::domain_error("cannot normalize the zero vector");
    amps_ /= n;
    return *this;
  }

  // <this|other>
  Complex inner(const StateVector& other) const {
    require_same_basis(other);
    return amps_.dot(other.amps_);
  }

  void require_same_basis(const StateVector& other) const {
    if (!(*basis_ == *other.basis_)) {
      throw std::invalid_argument("states live on different Fock bases");
    }
  }

 private:
  BasisPtr basis_;
  CVector amps_;
};

/// a_i^dagger a_j applied to a state. The result is unnormalized.
inline StateVector apply_hop(const StateVector& state, int i, int j) {
  check_mode(i);
  check_mode(j);
  if (i == j) throw std::invalid_argument("apply_hop requires distinct modes");
  const FockBasis& b = state.basis();
  StateVector out(state.basis_ptr());
  for (std::size_t k = 0; k < b.size(); ++k) {
    FockTriple t = b[k];
    if (t[j] == 0) continue;
    const double c = std::sqrt(static_cast<double>((t[i] + 1) * t[j]));
    t[i] += 1;
    t[j] -= 1;
    out[b.index(t)] += c * state[k];
  }
  return out;
}

enum class NumberPower { kLinear, kPair };

/// n_i (kLinear) or n_i(n_i - 1) (kPair), a diagonal scaling.
inline StateVector apply_number(const StateVector& state, int i, NumberPower power) {
  check_mode(i);
  const FockBasis& b = state.basis();
  StateVector out(state.basis_ptr());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double n = b[k][i];
    const double w = power == NumberPower::kLinear ? n : n * (n - 1.0);
    out[k] = w * state[k];
  }
  return out;
}

}  // namespace tripwell

#endif  // TRIPWELL_FOCK_HPP
