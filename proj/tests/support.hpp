#ifndef TRIPWELL_TESTS_SUPPORT_HPP
#define TRIPWELL_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <random>

#include "tripwell/fock.hpp"

namespace tripwell::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240607);
  return g;
}

inline double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline StateVector random_state(const BasisPtr& b) {
  std::normal_distribution<double> n;
  CVector v(static_cast<Eigen::Index>(b->size()));
  for (auto& x : v) x = Complex(n(rng()), n(rng()));
  return StateVector(b, v / v.norm());
}

inline double rel(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace tripwell::testing

#endif
