#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"
#include "tripwell/dynamics.hpp"

using namespace tripwell;
using tripwell::testing::random_state;
using tripwell::testing::uniform;

TEST(Eigensystem, SingleParticleCirculant) {
  for (double u : {-1.0, 0.0, 3.0}) {
    const auto s = eigensystem(build_bose_hubbard(make_basis(1), {2.0, u}), 3);
    EXPECT_NEAR(s.values(0), -4.0, 1e-13);
    EXPECT_NEAR(s.values(1), 2.0, 1e-13);
    EXPECT_NEAR(s.values(2), 2.0, 1e-13);
  }
}

TEST(Eigensystem, DecoupledWellsHaveTripletGround) {
  for (int n : {2, 5, 30}) {
    const auto s = eigensystem(build_bose_hubbard(make_basis(n), {0.0, -0.5}), 4);
    const double want = -0.5 * n * (n - 1);
    EXPECT_NEAR(s.values(0), want, 1e-12);
    EXPECT_NEAR(s.values(2), want, 1e-12);
    EXPECT_GT(s.values(3) - want, 1e-3);
  }
}

TEST(Eigensystem, OrthonormalVectorsAndResiduals) {
  const auto h = build_bose_hubbard(make_basis(8), {1.3, -0.7});
  const auto s = eigensystem(h, 10);
  const CMatrix gram = s.vectors.adjoint() * s.vectors;
  EXPECT_LE((gram - CMatrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
  const CMatrix res = h.dense() * s.vectors - s.vectors * s.values.cast<Complex>().asDiagonal();
  EXPECT_LE(res.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(eigensystem(h, 0), std::invalid_argument);
  EXPECT_THROW(eigensystem(h, 1000), std::invalid_argument);
}

TEST(Propagator, IdentityAtZeroAndNormPreserved) {
  const auto b = make_basis(5);
  const auto h = build_bose_hubbard(b, {1.0, -0.3});
  const StateVector psi = random_state(b);
  const Propagator u(h);
  EXPECT_LE((u.apply(0.0, psi).amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(u.apply(37.1, psi).norm(), 1.0, 1e-12);
}

TEST(Propagator, GroupProperty) {
  const auto b = make_basis(6);
  const Propagator u(build_bose_hubbard(b, {0.9, -0.4}));
  for (int rep = 0; rep < 5; ++rep) {
    const double t1 = uniform(0, 3), t2 = uniform(0, 3);
    const StateVector psi = random_state(b);
    const CVector once = u.apply(t1 + t2, psi).amplitudes();
    const CVector twice = u.apply(t2, u.apply(t1, psi)).amplitudes();
    EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Propagator, ColumnsMatchUnitary) {
  const auto b = make_basis(3);
  const Propagator u(build_bose_hubbard(b, {1.0, 0.2}));
  const CMatrix m = u.unitary(0.8);
  for (std::size_t k = 0; k < b->size(); ++k) {
    EXPECT_LE((m.col(static_cast<Eigen::Index>(k)) - u.column(0.8, k)).cwiseAbs().maxCoeff(), 1e-14);
  }
  EXPECT_LE((m.adjoint() * m - CMatrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rk4, AgreesWithExactPropagation) {
  for (int n = 1; n <= 4; ++n) {
    const auto b = make_basis(n);
    for (int rep = 0; rep < 3; ++rep) {
      const auto h = build_bose_hubbard(b, {uniform(0.2, 2.0), uniform(-1.0, 1.0)});
      const StateVector psi = random_state(b);
      const double t = uniform(0.5, 2.0);
      const StateVector exact = propagate_const(h, t, psi);
      const StateVector rk = evolve_rk4(h, t, 4000, psi);
      EXPECT_LE((exact.amplitudes() - rk.amplitudes()).cwiseAbs().maxCoeff(), 1e-8) << "N=" << n;
    }
  }
}

TEST(Rk4, ConservesEnergyUnderConstantH) {
  const auto b = make_basis(4);
  const auto h = build_bose_hubbard(b, {1.1, -0.6});
  const auto sp = eigensystem(h, b->size(), false);
  const double norm = std::max(std::abs(sp.values(0)), std::abs(sp.values(sp.values.size() - 1)));
  const StateVector psi = random_state(b);
  const double e0 = h.expectation(psi);
  for (int steps : {200, 1000, 4000}) {
    const StateVector out = evolve_rk4(h, 10.0 / norm, static_cast<std::size_t>(steps), psi);
    EXPECT_LE(std::abs(h.expectation(out) - e0), 1e-8 * norm) << steps;
  }
}

TEST(NoonTriple, OrthonormalWithExpectedAmplitudes) {
  for (int n : {1, 2, 5, 30}) {
    const auto b = make_basis(n);
    const NoonTriple t = make_noon_triple(b);
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(std::abs(t[a].inner(t[c]) - Complex(a == c ? 1.0 : 0.0)), 0.0, 1e-14);
      }
    for (std::size_t k = 0; k < b->size(); ++k) {
      const bool extreme = k == b->extreme_index(0) || k == b->extreme_index(1) || k == b->extreme_index(2);
      EXPECT_NEAR(std::abs(t[0][k] - Complex(extreme ? 1.0 / std::sqrt(3.0) : 0.0)), 0.0, 1e-15);
    }
  }
}

TEST(Fidelity, BasicProperties) {
  const auto b = make_basis(4);
  const NoonTriple t = make_noon_triple(b);
  EXPECT_NEAR(fidelity(t[0], t[0]), 1.0, 1e-15);
  EXPECT_NEAR(fidelity(t[0], t[1]), 0.0, 1e-15);
  const StateVector psi = random_state(b), phi = random_state(b);
  StateVector rotated(b, std::polar(1.0, 0.77) * phi.amplitudes());
  EXPECT_NEAR(fidelity(psi, phi), fidelity(psi, rotated), 1e-15);
  EXPECT_NEAR(fidelity(psi, phi), fidelity(phi, psi), 1e-15);
  EXPECT_GE(fidelity(psi, phi), 0.0);
  EXPECT_LE(fidelity(psi, phi), 1.0);
}

TEST(AdiabaticSweep, SmallSystemStaysInSymmetricSector) {
  SweepSchedule s;
  s.record_stride = 10;
  const Trajectory tr = adiabatic_sweep(s, 6);
  EXPECT_NEAR(tr.last().J, 0.0, 0.0);
  EXPECT_NEAR(tr.last().t, 50.0, 1e-12);
  EXPECT_GE(tr.last().fid[0], 0.95);
  for (const auto& x : tr.samples) {
    EXPECT_LE(x.fid[1], 1e-4);
    EXPECT_LE(x.fid[2], 1e-4);
    EXPECT_LE(x.norm_drift, 1e-8);
  }
}

TEST(AdiabaticSweep, SuddenLimitKeepsTheStaticOverlap) {
  const int n = 6;
  const auto b = make_basis(n);
  const auto g = eigensystem(build_bose_hubbard(b, {10.0, -0.5}), 1);
  const double overlap = fidelity(StateVector(b, CVector(g.vectors.col(0))), make_noon_triple(b)[0]);
  double previous = 1.0;
  for (double v : {2e2, 2e3, 2e4}) {
    SweepSchedule s;
    s.v = v;
    s.dt = 10.0 / v / 200.0;
    const double diff = std::abs(adiabatic_sweep(s, n).last().fid[0] - overlap);
    EXPECT_LT(diff, previous / 20.0) << v;
    previous = diff;
  }
  EXPECT_LE(previous, 1e-6);
}

TEST(AdiabaticSweep, ReportsBadSchedules) {
  SweepSchedule tiny;
  tiny.J0 = 1e-4;
  tiny.v = 1e-3;
  EXPECT_THROW(adiabatic_sweep(tiny, 30), NumericalError);

  SweepSchedule coarse;
  coarse.v = 10.0;
  coarse.dt = 0.05;
  EXPECT_THROW(adiabatic_sweep(coarse, 12), NumericalError);

  SweepSchedule bad;
  bad.v = 0.0;
  EXPECT_THROW(adiabatic_sweep(bad, 3), std::invalid_argument);
}

TEST(RampStudy, RowsAreIndependentAndDeterministic) {
  const auto rows = ramp_speed_study(10.0, -0.5, 4, {1.0, 1.0, 0.5}, 1e-3, 2);
  ASSERT_EQ(rows.size(), 3u);
  ASSERT_TRUE(rows[0].final_fid0 && rows[1].final_fid0 && rows[2].final_fid0);
  EXPECT_EQ(*rows[0].final_fid0, *rows[1].final_fid0);
  EXPECT_GE(*rows[2].final_fid0 + 0.01, *rows[0].final_fid0);

  const auto mixed = ramp_speed_study(10.0, -0.5, 12, {10.0, 0.2}, 0.05);
  EXPECT_FALSE(mixed[0].final_fid0.has_value());
  EXPECT_FALSE(mixed[0].error.empty());
  EXPECT_TRUE(mixed[1].final_fid0.has_value());
  EXPECT_THROW(ramp_speed_study(10.0, -0.5, 4, {}, 1e-3), std::invalid_argument);
}

TEST(Sectors, PartitionTheBasis) {
  const FockBasis b(6);
  Eigen::Index total = 0;
  const CMatrix p = cyclic_permutation(b);
  for (int k = 0; k < 3; ++k) {
    const CMatrix s = cyclic_sector_basis(b, k);
    total += s.cols();
    EXPECT_LE((s.adjoint() * s - CMatrix::Identity(s.cols(), s.cols())).cwiseAbs().maxCoeff(), 1e-14);
    const Complex w = std::polar(1.0, 2.0 * std::numbers::pi * k / 3.0);
    EXPECT_LE((p * s - w * s).cwiseAbs().maxCoeff(), 1e-14) << k;
  }
  EXPECT_EQ(static_cast<std::size_t>(total), b.size());
}

TEST(Sectors, SpectrumIsTheUnionOfSectorSpectra) {
  const auto b = make_basis(5);
  const auto h = build_bose_hubbard(b, {0.8, -0.5});
  std::vector<double> merged;
  for (int k = 0; k < 3; ++k) {
    const auto d = static_cast<std::size_t>(cyclic_sector_basis(*b, k).cols());
    const auto v = sector_spectrum(h, k, d);
    merged.insert(merged.end(), v.data(), v.data() + v.size());
  }
  std::sort(merged.begin(), merged.end());
  const auto full = eigensystem(h, b->size(), false).values;
  for (std::size_t i = 0; i < merged.size(); ++i) EXPECT_NEAR(merged[i], full(static_cast<Eigen::Index>(i)), 1e-11);
}

TEST(Sectors, GroundStructureAcrossCouplings) {
  const auto b = make_basis(9);
  for (double J : {0.01, 0.5, 3.0, 10.0}) {
    const SectorStructure s = sector_structure(build_bose_hubbard(b, {J, -0.5}));
    EXPECT_TRUE(s.unique_ground());
    EXPECT_LE(s.pair_splitting(), 1e-9);
    EXPECT_LE(s.sector0_ground, s.sector1_ground + 1e-9);
  }
  EXPECT_FALSE(sector_structure(build_bose_hubbard(b, {0.0, -0.5})).connected);
}

TEST(SpectrumScan, IndependentOfWorkerCount) {
  const std::vector<double> js{0.0, 0.5, 1.0, 2.0, 4.0};
  const auto a = spectrum_scan(7, -0.5, js, 6, 1);
  const auto c = spectrum_scan(7, -0.5, js, 6, 3);
  EXPECT_EQ(a.levels, c.levels);
  EXPECT_EQ(a.levels.cols(), 6);
}
