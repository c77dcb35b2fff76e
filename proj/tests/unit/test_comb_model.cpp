#include "spopo/comb_model.hpp"
#include "spopo/config.hpp"
#include "spopo/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace spopo {
namespace {

constexpr double kCarrier = 3.77e14;
constexpr double kFsr = 76e6;

// Physicists' Hermite polynomial by the textbook recurrence, independent of
// the library's normalized-function recurrence.
double hermite(int k, double x) {
  double h0 = 1.0;
  if (k == 0) return h0;
  double h1 = 2.0 * x;
  for (int n = 1; n < k; ++n) {
    const double h2 = 2.0 * x * h1 - 2.0 * n * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

Eigen::VectorXd hermite_gauss_direct(int k, double width, const FrequencyGrid& grid) {
  Eigen::VectorXd v(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid.detuning(grid.offset(i)) / width;
    v(i) = hermite(k, x) * std::exp(-0.5 * x * x);
  }
  return v.normalized();
}

// Gaussian kernel exp(-(x+y)^2/(2 s^2) - (x-y)^2/(2 w^2)) has Hermite-Gauss
// eigenfunctions of width W with W^2 = s w / 2.
double mehler_width(const RunConfig& config) {
  const double s = config.pump_spectrum().fwhm() / (2.0 * std::sqrt(std::log(2.0)));
  return std::sqrt(s * config.phase_matching.width_hz / 2.0);
}

const RunConfig& reference_config() {
  static const RunConfig config = load_config(testing::source_path("configs/reference_geometry.json"));
  return config;
}

const SupermodeSet& reference_modes() {
  static const SupermodeSet modes = [] {
    const RunConfig& c = reference_config();
    return diagonalize(build_coupling(c.grid(), c.pump_spectrum(), c.phase_matching_envelope()));
  }();
  return modes;
}

TEST(FrequencyGrid, ModeFrequenciesAreExactMultiples) {
  const FrequencyGrid grid(kCarrier, kFsr, 7);
  EXPECT_EQ(grid.size(), 15);
  for (int p = -7; p <= 7; ++p) {
    EXPECT_EQ(grid.frequency(p), kCarrier + p * kFsr);
    EXPECT_EQ(grid.offset(grid.position(p)), p);
  }
}

TEST(FrequencyGrid, RejectsBadParameters) {
  EXPECT_THROW(FrequencyGrid(kCarrier, 0.0, 3), ConfigError);
  EXPECT_THROW(FrequencyGrid(kCarrier, -1.0, 3), ConfigError);
  EXPECT_THROW(FrequencyGrid(kCarrier, kFsr, 0), ConfigError);
}

TEST(BuildCoupling, SingleLinePumpGivesExchangeMatrix) {
  const FrequencyGrid grid(kCarrier, kFsr, 2);
  const auto L = build_coupling(grid, PumpSpectrum::single_line(2 * kCarrier), PhaseMatching::flat());
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_EQ(L.entries(i, j), i + j == 4 ? 1.0 : 0.0) << i << "," << j;
}

TEST(BuildCoupling, GaussianPumpFlatMatchingFormula) {
  const FrequencyGrid grid(kCarrier, 1e11, 10);
  const double fwhm = 1.3e12;
  const auto L = build_coupling(grid, PumpSpectrum::gaussian(2 * kCarrier, fwhm), PhaseMatching::flat());
  const double s = fwhm / (2.0 * std::sqrt(std::log(2.0)));
  for (int i = 0; i < grid.size(); ++i) {
    for (int j = 0; j < grid.size(); ++j) {
      const double d = (grid.offset(i) + grid.offset(j)) * 1e11;
      EXPECT_NEAR(L.entries(i, j), std::exp(-d * d / (2 * s * s)), 1e-15);
    }
  }
  EXPECT_EQ(L.entries(10, 10), 1.0);
  // power spectrum (amplitude squared) is half maximum at fwhm / 2
  const auto pump = PumpSpectrum::gaussian(2 * kCarrier, fwhm);
  EXPECT_NEAR(std::pow(pump.amplitude_at_detuning(fwhm / 2), 2), 0.5, 1e-12);
}

TEST(BuildCoupling, ExactlySymmetric) {
  const RunConfig& c = reference_config();
  const FrequencyGrid grid(c.center_frequency_hz(), c.mode_spacing_hz(), 60);
  for (const auto& pm : {PhaseMatching::flat(), PhaseMatching::gaussian(2.9e13), PhaseMatching::sinc(2e13)}) {
    const auto L = build_coupling(grid, c.pump_spectrum(), pm);
    EXPECT_EQ((L.entries - L.entries.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(BuildCoupling, MismatchedPumpCenterIsConfigError) {
  const FrequencyGrid grid(kCarrier, kFsr, 2);
  EXPECT_THROW((void)build_coupling(grid, PumpSpectrum::single_line(2 * kCarrier + kFsr), PhaseMatching::flat()),
               ConfigError);
}

TEST(PhaseMatching, FlatIsOneAndShapesAreSymmetric) {
  EXPECT_EQ(PhaseMatching::flat().value(1e14, 3e14), 1.0);
  for (const auto& pm : {PhaseMatching::gaussian(1e12), PhaseMatching::sinc(1e12)}) {
    for (double d : {0.0, 3e11, 1e12, 4.7e12}) {
      EXPECT_EQ(pm.value(kCarrier + d, kCarrier), pm.value(kCarrier, kCarrier + d));
      EXPECT_LE(std::abs(pm.value_at_difference(d)), 1.0);
    }
  }
}

TEST(Diagonalize, ExchangeMatrixEigenpairs) {
  const FrequencyGrid grid(kCarrier, kFsr, 2);
  const auto modes = diagonalize(build_coupling(grid, PumpSpectrum::single_line(2 * kCarrier), PhaseMatching::flat()));
  ASSERT_EQ(modes.size(), 5);
  int plus = 0;
  int minus = 0;
  for (int k = 0; k < 5; ++k) {
    const double lambda = modes.eigenvalue(k);
    EXPECT_NEAR(std::abs(lambda), 1.0, 1e-12);
    (lambda > 0 ? plus : minus)++;
    const auto v = modes.vector(k);
    // support on one {+p, -p} pair, symmetric for +1 and antisymmetric for -1
    int support = 0;
    for (int i = 0; i < 5; ++i) support += std::abs(v(i)) > 1e-12;
    int p = -1;
    for (int i = 0; i < 5; ++i)
      if (std::abs(v(i)) > 1e-12) p = std::abs(grid.offset(i));
    if (p == 0) {
      EXPECT_EQ(support, 1);
      EXPECT_NEAR(v(2), 1.0, 1e-12);
      EXPECT_GT(lambda, 0.0);
    } else {
      EXPECT_EQ(support, 2);
      const double a = v(grid.position(p));
      const double b = v(grid.position(-p));
      EXPECT_NEAR(std::abs(a), 1.0 / std::numbers::sqrt2, 1e-12);
      EXPECT_NEAR(b, lambda > 0 ? a : -a, 1e-12);
    }
  }
  EXPECT_EQ(plus, 3);
  EXPECT_EQ(minus, 2);
}

TEST(Diagonalize, SingleLinePumpPairStructureOnLargerGrid) {
  const FrequencyGrid grid(kCarrier, kFsr, 30);
  const auto modes = diagonalize(
      build_coupling(grid, PumpSpectrum::single_line(2 * kCarrier), PhaseMatching::gaussian(1e9)));
  for (int k = 0; k < modes.size(); ++k) {
    int lo = grid.size();
    int hi = -1;
    for (int i = 0; i < grid.size(); ++i) {
      if (std::abs(modes.vector(k)(i)) > 1e-10) {
        lo = std::min(lo, grid.offset(i));
        hi = std::max(hi, grid.offset(i));
      }
    }
    EXPECT_EQ(lo, -hi) << "mode " << k;
  }
  // eigenvalues come in +-lambda pairs apart from the carrier
  std::vector<double> positive;
  std::vector<double> negative;
  for (int k = 0; k < modes.size(); ++k)
    (modes.eigenvalue(k) > 0 ? positive : negative).push_back(std::abs(modes.eigenvalue(k)));
  EXPECT_EQ(positive.size(), negative.size() + 1);
  std::sort(positive.begin(), positive.end());
  std::sort(negative.begin(), negative.end());
  for (std::size_t i = 0; i < negative.size(); ++i) {
    EXPECT_TRUE(std::any_of(positive.begin(), positive.end(),
                            [&](double x) { return std::abs(x - negative[i]) < 1e-12; }));
  }
}

TEST(Diagonalize, OrthonormalAndReconstructs) {
  const RunConfig c = [] {
    RunConfig r;
    r.phase_matching.shape = PhaseMatchingShape::gaussian;
    r.phase_matching.width_hz = 2.9e13;
    return r;
  }();
  const auto L = build_coupling(c.grid(), c.pump_spectrum(), c.phase_matching_envelope());
  const auto modes = diagonalize(L);
  const Eigen::MatrixXd& v = modes.vectors();
  const Eigen::MatrixXd gram = v.transpose() * v;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((L.entries - modes.reconstruct()).norm() / L.entries.norm(), 1e-10);
  for (int k = 1; k < modes.size(); ++k)
    EXPECT_GE(std::abs(modes.eigenvalue(k - 1)), std::abs(modes.eigenvalue(k)) - 1e-14);
}

TEST(Diagonalize, SignConventionLargestComponentPositive) {
  const auto& modes = reference_modes();
  for (int k = 0; k < 20; ++k) {
    const auto v = modes.vector(k);
    // mirror-image modes tie in magnitude; the first of the tied entries counts
    const double largest = v.cwiseAbs().maxCoeff();
    Eigen::Index arg = 0;
    while (std::abs(v(arg)) < largest * (1.0 - 1e-9)) ++arg;
    EXPECT_GT(v(arg), 0.0) << "mode " << k;
  }
}

TEST(Diagonalize, LeadingEigenvaluesAlternateInSign) {
  const auto& modes = reference_modes();
  for (int k = 0; k < 10; ++k) EXPECT_EQ(modes.eigenvalue(k) > 0, k % 2 == 0) << "mode " << k;
}

TEST(Diagonalize, LeadingParitiesAlternate) {
  const auto& modes = reference_modes();
  const int n = modes.grid().size();
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd v = modes.vector(k);
    const Eigen::VectorXd mirrored = v.reverse();
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    EXPECT_LT((mirrored - sign * v).cwiseAbs().maxCoeff(), 1e-8) << "mode " << k << " n " << n;
  }
}

TEST(Diagonalize, ReferenceGeometryMatchesHermiteGauss) {
  const auto& modes = reference_modes();
  const double w = mehler_width(reference_config());
  for (int k = 0; k <= 5; ++k) {
    const Eigen::VectorXd ref = hermite_gauss_direct(k, w, modes.grid());
    EXPECT_GT(std::abs(ref.dot(modes.vector(k))), 0.99) << "mode " << k;
  }
}

TEST(Diagonalize, ReferenceGeometryWidthLaw) {
  const auto& modes = reference_modes();
  const double w0 = spectral_rms_width(modes.vector(0), modes.grid());
  for (int k = 1; k <= 5; ++k) {
    const double ratio = spectral_rms_width(modes.vector(k), modes.grid()) / w0;
    EXPECT_NEAR(ratio / std::sqrt(2.0 * k + 1), 1.0, 0.05) << "mode " << k;
  }
}

TEST(Diagonalize, CoarseGridLeadingModeMatchesFineSolve) {
  // 201 modes over the same span as the 801-mode grid: every fourth fine
  // mode sits on a coarse mode.
  RunConfig coarse = reference_config();
  coarse.n_modes = 201;
  coarse.lines_per_mode = reference_config().lines_per_mode * 4;
  const auto coarse_modes =
      diagonalize(build_coupling(coarse.grid(), coarse.pump_spectrum(), coarse.phase_matching_envelope()));
  const auto& fine = reference_modes();
  Eigen::VectorXd sub(201);
  for (int p = -100; p <= 100; ++p) sub(p + 100) = fine.vector(0)(fine.grid().position(4 * p));
  EXPECT_GT(std::abs(sub.normalized().dot(coarse_modes.vector(0))), 0.99);
  const Eigen::VectorXd gaussian = hermite_gauss_direct(0, mehler_width(coarse), coarse.grid());
  EXPECT_GT(gaussian.dot(coarse_modes.vector(0)), 0.99);
}

TEST(HermiteGaussReference, MatchesExplicitPolynomials) {
  const FrequencyGrid grid(kCarrier, 1e11, 200);
  for (int k = 0; k <= 8; ++k) {
    const Eigen::VectorXd a = hermite_gauss_reference(k, 2e12, grid);
    const Eigen::VectorXd b = hermite_gauss_direct(k, 2e12, grid);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10) << k;
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  }
}

TEST(HermiteGaussReference, OrderZeroIsPositiveSymmetricGaussian) {
  const FrequencyGrid grid(kCarrier, 1e11, 50);
  const Eigen::VectorXd v = hermite_gauss_reference(0, 1e12, grid);
  EXPECT_GT(v.minCoeff(), 0.0);
  EXPECT_LT((v - v.reverse()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HermiteGaussReference, OrderOneIsOddAndZeroAtCarrier) {
  const FrequencyGrid grid(kCarrier, 1e11, 50);
  const Eigen::VectorXd v = hermite_gauss_reference(1, 1e12, grid);
  EXPECT_EQ(v(grid.position(0)), 0.0);
  EXPECT_LT((v + v.reverse()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HermiteGaussReference, RmsWidthGrowsAsSqrtTwoKPlusOne) {
  const FrequencyGrid grid(kCarrier, 2e10, 1000);
  const double w0 = spectral_rms_width(hermite_gauss_reference(0, 1e12, grid), grid);
  EXPECT_NEAR(fitted_gaussian_width(hermite_gauss_reference(0, 1e12, grid), grid), 1e12, 1e12 * 1e-3);
  for (int k = 1; k <= 10; ++k) {
    const double wk = spectral_rms_width(hermite_gauss_reference(k, 1e12, grid), grid);
    EXPECT_NEAR(wk / w0, std::sqrt(2.0 * k + 1), 0.01 * std::sqrt(2.0 * k + 1)) << k;
  }
}

TEST(HermiteGaussReference, RejectsBadArguments) {
  const FrequencyGrid grid(kCarrier, 1e11, 5);
  EXPECT_THROW((void)hermite_gauss_reference(-1, 1e12, grid), ConfigError);
  EXPECT_THROW((void)hermite_gauss_reference(0, 0.0, grid), ConfigError);
}

}  // namespace
}  // namespace spopo
