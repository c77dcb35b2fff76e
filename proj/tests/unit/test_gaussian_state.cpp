#include "spopo/errors.hpp"
#include "spopo/gaussian_state.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace spopo {
namespace {

constexpr double kCarrier = 3.77e14;

// Supermodes given directly: columns of an orthonormal basis whose first
// column is `lead`.
SupermodeSet basis_with_leading(const FrequencyGrid& grid, const Eigen::VectorXd& lead,
                                const Eigen::VectorXd& eigenvalues) {
  const int n = grid.size();
  Eigen::MatrixXd seed = Eigen::MatrixXd::Identity(n, n);
  seed.col(0) = lead.normalized();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.col(0).dot(lead) < 0) q.col(0) *= -1.0;
  return SupermodeSet(grid, q, eigenvalues);
}

TEST(CovarianceState, RejectsAsymmetricAndNonFinite) {
  Eigen::Matrix2d a;
  a << 1, 0.5, 0.4, 1;
  EXPECT_THROW(CovarianceState(a, Eigen::Matrix2d::Identity()), DataError);
  Eigen::Matrix2d b = Eigen::Matrix2d::Identity();
  b(0, 0) = std::nan("");
  EXPECT_THROW(CovarianceState(Eigen::Matrix2d::Identity(), b), DataError);
  EXPECT_THROW(CovarianceState(Eigen::Matrix2d::Identity(), Eigen::Matrix3d::Identity()), ConfigError);
}

TEST(CovarianceState, SymplecticEigenvaluesMatchFullMatrixOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 7;
    const auto state = testing::random_physical_state(n, rng);
    const Eigen::VectorXd nu = state.symplectic_eigenvalues();
    const Eigen::VectorXd oracle = testing::symplectic_oracle(state.cx(), state.cp());
    ASSERT_EQ(oracle.size(), n);
    EXPECT_LT((nu - oracle).cwiseAbs().maxCoeff(), 1e-8 * oracle.maxCoeff());
    EXPECT_GE(nu.minCoeff(), 1.0 - 1e-9);
    EXPECT_TRUE(state.is_physical());
  }
}

TEST(CovarianceState, UnphysicalAndIndefiniteStates) {
  const auto squeezed_both = CovarianceState(Eigen::Matrix2d::Identity() * 0.5, Eigen::Matrix2d::Identity());
  EXPECT_FALSE(squeezed_both.is_physical());
  EXPECT_NEAR(squeezed_both.min_symplectic_eigenvalue(), std::sqrt(0.5), 1e-12);
  Eigen::Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  const CovarianceState bad(indefinite, Eigen::Matrix2d::Identity());
  EXPECT_FALSE(bad.blocks_positive_definite());
  EXPECT_FALSE(bad.is_physical());
  EXPECT_THROW((void)bad.symplectic_eigenvalues(), PhysicalityError);
}

TEST(SqueezingFromEigenvalues, ClosedFormAtOneThird) {
  const FrequencyGrid grid(kCarrier, 1e11, 1);
  const SupermodeSet modes(grid, Eigen::Matrix3d::Identity(), Eigen::Vector3d(1.0, -0.5, 0.25));
  const auto s = squeezing_from_eigenvalues(modes, 1.0 / 3.0, 1.0);
  EXPECT_NEAR(s.modes[0].v_minus, 0.25, 1e-15);
  EXPECT_NEAR(s.modes[0].v_plus, 4.0, 1e-14);
  EXPECT_NEAR(linear_to_db(s.modes[0].v_minus), -6.0206, 1e-4);
  EXPECT_EQ(s.modes[0].squeezed, Quadrature::x);
  EXPECT_EQ(s.modes[1].squeezed, Quadrature::p);
  // sigma = 1/6 for the second mode
  EXPECT_NEAR(s.modes[1].v_minus, std::pow(5.0 / 7.0, 2), 1e-15);
}

TEST(SqueezingFromEigenvalues, ZeroPumpIsVacuum) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const auto s = squeezing_from_eigenvalues(sim.modes, 0.0, 0.7);
  for (const auto& m : s.modes) {
    EXPECT_EQ(m.v_minus, 1.0);
    EXPECT_EQ(m.v_plus, 1.0);
  }
  const auto state = project_to_bands(sim.modes, s, sim.partition);
  const int n = state.n_bands();
  EXPECT_LT((state.cx() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((state.cp() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SqueezingFromEigenvalues, RefusesThresholdAndBadEfficiency) {
  const auto& modes = testing::simulated("exchange_small.json").modes;
  EXPECT_THROW((void)squeezing_from_eigenvalues(modes, 1.0, 1.0), AboveThresholdError);
  EXPECT_THROW((void)squeezing_from_eigenvalues(modes, 1.2, 1.0), AboveThresholdError);
  EXPECT_THROW((void)squeezing_from_eigenvalues(modes, 0.5, 0.0), ConfigError);
  EXPECT_THROW((void)squeezing_from_eigenvalues(modes, 0.5, 1.1), ConfigError);
  EXPECT_THROW((void)squeezing_from_eigenvalues(modes, -0.1, 1.0), ConfigError);
}

TEST(SqueezingFromEigenvalues, UncertaintyProductProperty) {
  const auto& modes = testing::simulated("reference_geometry.json").modes;
  for (double r : {0.05, 0.3, 0.7, 0.95}) {
    for (const auto& m : squeezing_from_eigenvalues(modes, r, 1.0).modes) {
      EXPECT_NEAR(m.v_minus * m.v_plus, 1.0, 1e-12);
      EXPECT_LE(m.v_minus, 1.0);
      EXPECT_GE(m.v_plus, 1.0);
    }
    for (double eta : {0.3, 0.75, 0.99}) {
      for (const auto& m : squeezing_from_eigenvalues(modes, r, eta).modes) {
        if (m.v_minus < 1.0 - 1e-3) EXPECT_GT(m.v_minus * m.v_plus, 1.0);
        EXPECT_GE(m.v_minus * m.v_plus, 1.0 - 1e-12);
      }
    }
  }
}

TEST(ProjectToBands, SymmetricTwoBandSplitOfOneMode) {
  const FrequencyGrid grid(kCarrier, 1e11, 2);
  const Eigen::VectorXd lead = (Eigen::VectorXd(5) << 1, 1, 0, 1, 1).finished() / 2.0;
  const auto modes = basis_with_leading(grid, lead, (Eigen::VectorXd(5) << 1, 0, 0, 0, 0).finished());
  const auto spectrum = squeezing_from_eigenvalues(modes, 0.4, 1.0);
  const auto partition = BandPartition::from_ranges(grid, Eigen::VectorXd::Ones(5), {{0, 1}, {3, 4}});
  const auto state = project_to_bands(modes, spectrum, partition);
  const double v = spectrum.modes[0].v_minus;
  EXPECT_NEAR(state.cx()(0, 0), state.cx()(1, 1), 1e-14);
  EXPECT_NEAR(state.cx()(0, 0), 1.0 + (v - 1.0) / 2.0, 1e-14);
  EXPECT_NEAR(state.cx()(0, 1), (v - 1.0) / 2.0, 1e-14);
  EXPECT_LT(state.cx()(0, 1), 0.0);
  const double sum = 0.5 * (state.cx()(0, 0) + state.cx()(1, 1) + 2.0 * state.cx()(0, 1));
  EXPECT_NEAR(sum, v, 1e-14);
  EXPECT_GT(state.cp()(0, 1), 0.0);
}

TEST(ProjectToBands, TraceIdentityAndOverlapBound) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const Eigen::MatrixXd o = band_overlaps(sim.modes, sim.partition);
  for (auto q : {Quadrature::x, Quadrature::p}) {
    const Eigen::VectorXd excess = (sim.spectrum.variances(q).array() - 1.0).matrix();
    const double lhs = (sim.state.block(q).diagonal().array() - 1.0).sum();
    const double rhs = excess.dot(o.colwise().squaredNorm().transpose());
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
  }
  EXPECT_LE(o.colwise().squaredNorm().maxCoeff(), 1.0 + 1e-12);
}

TEST(ProjectToBands, PairSumMatchesMergedLoHomodyne) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const auto& part = sim.partition;
  for (auto [i, j] : {std::pair{4, 5}, std::pair{0, 9}, std::pair{2, 6}}) {
    const Eigen::VectorXd merged = (part.amplitudes().row(i) + part.amplitudes().row(j)).transpose();
    Eigen::VectorXd l = Eigen::VectorXd::Zero(part.n_bands());
    l(i) = std::sqrt(part.band_energy(i));
    l(j) = std::sqrt(part.band_energy(j));
    l.normalize();
    for (auto q : {Quadrature::x, Quadrature::p}) {
      const double direct = homodyne_variance(sim.modes, sim.spectrum, merged, q);
      EXPECT_NEAR(l.dot(sim.state.block(q) * l), direct, 1e-12) << i << "," << j;
    }
  }
}

TEST(ProjectToBands, ReferenceCorrelationStructure) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const Eigen::MatrixXd cx = correlation_matrix(sim.state, Quadrature::x);
  const int n = sim.state.n_bands();
  // excess noise in the wings, squeezing in the middle
  EXPECT_GT(cx(0, 0), cx(n / 2, n / 2));
  EXPECT_GT(cx(n - 1, n - 1), cx(n / 2 - 1, n / 2 - 1));
  EXPECT_GT(cx(0, 0), 0.0);
  // strongest anticorrelation links mirror-image wing bands
  int bi = 0;
  int bj = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (cx(i, j) < cx(bi, bj)) {
        bi = i;
        bj = j;
      }
  EXPECT_LT(cx(bi, bj), 0.0);
  EXPECT_EQ(bi + bj, n - 1);
  EXPECT_LT(bi, 2);
}

TEST(Calibration, ReproducesRequestedLoLevels) {
  const auto& sim = testing::simulated("reference_geometry.json");
  EXPECT_TRUE(sim.calibrated);
  EXPECT_NEAR(sim.lo_squeezing_db, -5.9, 1e-6);
  EXPECT_NEAR(sim.lo_antisqueezing_db, 7.8, 1e-6);
  EXPECT_GT(sim.spectrum.pump_ratio, 0.0);
  EXPECT_LT(sim.spectrum.pump_ratio, 1.0);
  EXPECT_GT(sim.spectrum.efficiency, 0.0);
  EXPECT_LE(sim.spectrum.efficiency, 1.0);
}

TEST(Calibration, RecoversKnownPumpAndEfficiency) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const Eigen::VectorXd lo = gaussian_lo_amplitude(sim.modes.grid(), sim.config.lo_fwhm_hz());
  const auto truth = squeezing_from_eigenvalues(sim.modes, 0.42, 0.8);
  const double sq = linear_to_db(homodyne_variance(sim.modes, truth, lo, Quadrature::x));
  const double anti = linear_to_db(homodyne_variance(sim.modes, truth, lo, Quadrature::p));
  const auto cal = calibrate_pump(sim.modes, lo, sq, anti);
  EXPECT_NEAR(cal.pump_ratio, 0.42, 1e-9);
  EXPECT_NEAR(cal.efficiency, 0.8, 1e-9);
}

TEST(Calibration, RejectsUnreachableLevels) {
  const auto& sim = testing::simulated("reference_geometry.json");
  const Eigen::VectorXd lo = gaussian_lo_amplitude(sim.modes.grid(), sim.config.lo_fwhm_hz());
  EXPECT_THROW((void)calibrate_pump(sim.modes, lo, 3.0, 7.0), ConfigError);
  EXPECT_THROW((void)calibrate_pump(sim.modes, lo, -6.0, 5.0), ConfigError);
  // pure-state squeezing beyond the eta <= 1 limit
  EXPECT_THROW((void)calibrate_pump(sim.modes, lo, -20.0, 20.5), ConfigError);
}

TEST(BandPartition, EqualEnergyInvariants) {
  for (double gap : {0.0, 0.05, 0.2}) {
    for (int count : {2, 5, 10}) {
      RunConfig c;
      c.bands.count = count;
      const FrequencyGrid grid = c.grid();
      const Eigen::VectorXd lo = gaussian_lo_amplitude(grid, c.lo_fwhm_hz());
      const auto part = BandPartition::equal_energy(grid, lo, count, gap);
      const Eigen::VectorXd e = part.band_energies();
      EXPECT_LT((e.maxCoeff() - e.minCoeff()) / e.maxCoeff(), 1e-6);
      EXPECT_GT(e.minCoeff(), 0.0);
      EXPECT_LE(e.sum(), 1.0 + 1e-12);
      for (int i = 1; i < count; ++i) EXPECT_GT(part.bands()[i].first, part.bands()[i - 1].last);
      for (int i = 0; i < count; ++i) {
        // mirror symmetric about the carrier
        EXPECT_EQ(part.bands()[i].first, grid.size() - 1 - part.bands()[count - 1 - i].last);
        EXPECT_NEAR(part.band_vector(i).norm(), 1.0, 1e-12);
      }
      // band amplitudes never exceed the LO
      EXPECT_LE((part.amplitudes().array().abs().rowwise() - lo.transpose().array().abs()).maxCoeff(), 1e-15);
    }
  }
}

TEST(BandPartition, GapTrimRemovesEdgeEnergy) {
  RunConfig c;
  const FrequencyGrid grid = c.grid();
  const Eigen::VectorXd lo = gaussian_lo_amplitude(grid, c.lo_fwhm_hz());
  const auto tight = BandPartition::equal_energy(grid, lo, 10, 0.0);
  const auto gapped = BandPartition::equal_energy(grid, lo, 10, 0.05);
  EXPECT_NEAR(gapped.band_energy(3) / tight.band_energy(3), 0.9, 1e-3);
}

TEST(BandPartition, RejectsBadInput) {
  const FrequencyGrid grid(kCarrier, 1e11, 2);
  const Eigen::VectorXd lo = Eigen::VectorXd::Ones(5);
  EXPECT_THROW((void)BandPartition::equal_energy(grid, lo, 12, 0.0), ConfigError);
  EXPECT_THROW((void)BandPartition::equal_energy(grid, lo, 2, 0.6), ConfigError);
  EXPECT_THROW((void)BandPartition::from_ranges(grid, lo, {{0, 2}, {2, 4}}), ConfigError);
  EXPECT_THROW((void)BandPartition::from_ranges(grid, lo, {{0, 7}}), ConfigError);
}

TEST(CorrelationMatrix, VacuumIsZero) {
  const auto c = correlation_matrix(CovarianceState::vacuum(4), Quadrature::x);
  EXPECT_EQ(c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CorrelationMatrix, ExcessNoiseDiagonal) {
  const double v = db_to_linear(3.4);
  EXPECT_NEAR(v, 2.19, 0.005);
  const CovarianceState s(Eigen::MatrixXd::Identity(1, 1) * v, Eigen::MatrixXd::Identity(1, 1) / v);
  EXPECT_NEAR(correlation_matrix(s, Quadrature::x)(0, 0), 0.543, 0.001);
}

TEST(CorrelationMatrix, TwoBandStateFromDbValues) {
  // V = 10^0.34 per band; the sum quadrature sits at -3.2 dB, so
  // <x_i x_j> = s - V and the correlation is (s - V) / V.
  const double v = std::pow(10.0, 0.34);
  const double s = std::pow(10.0, -0.32);
  const auto state = testing::two_band_from_db(3.4, -3.2, -3.3);
  EXPECT_NEAR(state.cx()(0, 1), s - v, 1e-12);
  const double r = correlation_matrix(state, Quadrature::x)(0, 1);
  EXPECT_NEAR(r, (s - v) / v, 1e-12);
  EXPECT_NEAR(r, -0.78, 0.005);
}

TEST(CorrelationMatrix, NonPositiveDiagonalIsDataError) {
  Eigen::Matrix2d c;
  c << 0.0, 0.0, 0.0, 1.0;
  EXPECT_THROW((void)correlation_matrix(CovarianceState(c, Eigen::Matrix2d::Identity()), Quadrature::x),
               DataError);
}

TEST(ApplyLoss, UnitEfficiencyIsIdentity) {
  std::mt19937_64 rng(3);
  const auto s = testing::random_physical_state(5, rng);
  const auto out = apply_loss(s, Eigen::VectorXd::Ones(5));
  EXPECT_EQ((out.cx() - s.cx()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((out.cp() - s.cp()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyLoss, RejectsOutOfRangeEfficiency) {
  const auto s = CovarianceState::vacuum(2);
  EXPECT_THROW((void)apply_loss(s, Eigen::Vector2d(1.0, 0.0)), ConfigError);
  EXPECT_THROW((void)apply_loss(s, Eigen::Vector2d(1.01, 0.5)), ConfigError);
  EXPECT_THROW((void)apply_loss(s, Eigen::Vector3d(1.0, 1.0, 1.0)), ConfigError);
}

TEST(ApplyLoss, PreservesPhysicalityOnRandomStates) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> eta_dist(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    const auto s = testing::random_physical_state(n, rng, 1.2);
    Eigen::VectorXd eta(n);
    for (int i = 0; i < n; ++i) eta(i) = eta_dist(rng);
    const auto out = apply_loss(s, eta);
    EXPECT_GE(testing::symplectic_oracle(out.cx(), out.cp()).minCoeff(), 1.0 - 1e-9) << trial;
  }
}

TEST(ApplyLoss, MatchesTwoModeClosedForm) {
  const double r = 0.6;
  const auto s = apply_loss(testing::two_mode_squeezed(r), Eigen::Vector2d(1.0, 0.5));
  const double c = std::cosh(2 * r);
  const double sh = std::sinh(2 * r);
  EXPECT_NEAR(s.cx()(0, 0), c, 1e-14);
  EXPECT_NEAR(s.cx()(1, 1), 0.5 * c + 0.5, 1e-14);
  EXPECT_NEAR(s.cx()(0, 1), -std::sqrt(0.5) * sh, 1e-14);
}

TEST(BlockCommutator, ZeroForVacuumAndPureDiagonalisableStates) {
  EXPECT_EQ(block_commutator(CovarianceState::vacuum(5)).max_abs, 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    const Eigen::MatrixXd cx = a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
    const CovarianceState pure(cx, cx.inverse());
    EXPECT_LT(block_commutator(pure).max_abs, 1e-10 * cx.norm());
  }
}

TEST(BlockCommutator, UniformLossKeepsBlocksCommuting) {
  for (double r : {0.1, 0.5, 1.0}) {
    for (double eta : {0.2, 0.75, 1.0}) {
      const auto s = apply_loss(testing::two_mode_squeezed(r), Eigen::Vector2d::Constant(eta));
      EXPECT_LT(block_commutator(s).max_abs, 1e-12);
    }
  }
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a(i, j) = normal(rng);
  const Eigen::MatrixXd o = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const Eigen::VectorXd dx = (Eigen::VectorXd(6) << 0.3, 0.5, 1.0, 2.0, 1.4, 1.1).finished();
  const Eigen::VectorXd dp = (Eigen::VectorXd(6) << 4.0, 2.5, 1.2, 0.6, 0.9, 1.3).finished();
  const CovarianceState shared(o * dx.asDiagonal() * o.transpose(), o * dp.asDiagonal() * o.transpose());
  ASSERT_LT(block_commutator(shared).max_abs, 1e-12);
  EXPECT_LT(block_commutator(apply_loss(shared, Eigen::VectorXd::Constant(6, 0.6))).max_abs, 1e-12);
  EXPECT_GT(block_commutator(apply_loss(shared, Eigen::VectorXd::LinSpaced(6, 0.4, 1.0))).max_abs, 1e-3);
  // a state that already fails to commute only scales by eta^2
  const auto& sim = testing::simulated("reference_geometry.json");
  const double before = block_commutator(sim.state).max_abs;
  const auto lossy = apply_loss(sim.state, Eigen::VectorXd::Constant(sim.state.n_bands(), 0.6));
  EXPECT_NEAR(block_commutator(lossy).max_abs, 0.36 * before, 1e-12);
}

TEST(BlockCommutator, AsymmetricLossBreaksCommutation) {
  const auto s = apply_loss(testing::two_mode_squeezed(0.5), Eigen::Vector2d(1.0, 0.5));
  EXPECT_GT(block_commutator(s).max_abs, 1e-3);
}

TEST(BlockCommutator, GrowsWithLossAsymmetryAtFixedMeanEfficiency) {
  for (double r : {0.2, 0.5, 1.0, 1.5}) {
    double previous = -1.0;
    for (int step = 0; step <= 20; ++step) {
      const double delta = 0.5 * step / 20.0;
      const auto s =
          apply_loss(testing::two_mode_squeezed(r), Eigen::Vector2d(0.75 + delta / 2, 0.75 - delta / 2));
      const double m = block_commutator(s).max_abs;
      if (step == 0) {
        EXPECT_LT(m, 1e-12);
      } else {
        EXPECT_GT(m, previous) << "r " << r << " delta " << delta;
      }
      previous = m;
    }
  }
}

}  // namespace
}  // namespace spopo
