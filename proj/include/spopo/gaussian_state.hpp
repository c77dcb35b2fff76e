#pragma once

// Vacuum-normalized quadrature covariance states over measurement bands.
//
// Conventions: vacuum variance is 1 for both quadratures, there is no x-p
// cross block, and dB values are 10 log10 of linear variances.

#include "spopo/comb_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spopo {

enum class Quadrature { x, p };

[[nodiscard]] const char* to_string(Quadrature q);

[[nodiscard]] double db_to_linear(double db);
[[nodiscard]] double linear_to_db(double linear);

class CovarianceState {
 public:
  /// Validates shapes, finiteness and symmetry (relative 1e-9), then
  /// symmetrizes both blocks exactly. Positive definiteness and physicality
  /// are checked separately, since measured states may violate them.
  CovarianceState(Eigen::MatrixXd cx, Eigen::MatrixXd cp);

  static CovarianceState vacuum(int n_bands);

  [[nodiscard]] int n_bands() const { return static_cast<int>(cx_.rows()); }
  [[nodiscard]] const Eigen::MatrixXd& cx() const { return cx_; }
  [[nodiscard]] const Eigen::MatrixXd& cp() const { return cp_; }
  [[nodiscard]] const Eigen::MatrixXd& block(Quadrature q) const {
    return q == Quadrature::x ? cx_ : cp_;
  }

  [[nodiscard]] bool blocks_positive_definite() const;

  /// sqrt(eig(Cx Cp)) in ascending order. Throws PhysicalityError if a block
  /// is not positive definite.
  [[nodiscard]] Eigen::VectorXd symplectic_eigenvalues() const;
  [[nodiscard]] double min_symplectic_eigenvalue() const;

  /// Both blocks positive definite and every nu >= 1 - tol.
  [[nodiscard]] bool is_physical(double tol = 1e-9) const;

 private:
  Eigen::MatrixXd cx_;
  Eigen::MatrixXd cp_;
};

/// Symplectic eigenvalues of the block-diagonal state (Cx, Cp): sqrt(eig(Cx Cp)),
/// computed from the symmetric form L^T Cp L with Cx = L L^T.
[[nodiscard]] Eigen::VectorXd symplectic_spectrum(const Eigen::MatrixXd& cx,
                                                  const Eigen::MatrixXd& cp);

/// Unit-norm Gaussian local-oscillator amplitude with the given power FWHM (Hz).
[[nodiscard]] Eigen::VectorXd gaussian_lo_amplitude(const FrequencyGrid& grid, double power_fwhm);

/// A set of disjoint spectral bands carved out of a local-oscillator spectrum.
///
/// Each band is the LO amplitude restricted to a contiguous run of grid
/// modes; amplitudes in the gaps between bands are zero. Band edge modes may
/// carry a reduced amplitude so that band energies come out exactly equal.
class BandPartition {
 public:
  struct Band {
    int first;  ///< first grid position with nonzero amplitude
    int last;   ///< last grid position with nonzero amplitude
  };

  /// Splits `lo_amplitude` into `n_bands` bands of equal LO energy, then
  /// trims `gap_fraction` of the smallest band energy from each edge of every
  /// band and equalizes all bands to the same energy.
  static BandPartition equal_energy(const FrequencyGrid& grid, const Eigen::VectorXd& lo_amplitude,
                                    int n_bands, double gap_fraction);

  /// Bands given explicitly as inclusive grid-position ranges, LO untrimmed.
  static BandPartition from_ranges(const FrequencyGrid& grid, const Eigen::VectorXd& lo_amplitude,
                                   const std::vector<Band>& ranges);

  [[nodiscard]] const FrequencyGrid& grid() const { return grid_; }
  [[nodiscard]] int n_bands() const { return static_cast<int>(bands_.size()); }
  [[nodiscard]] const std::vector<Band>& bands() const { return bands_; }
  [[nodiscard]] const Eigen::VectorXd& lo_amplitude() const { return lo_; }
  [[nodiscard]] double gap_fraction() const { return gap_fraction_; }

  /// Band amplitudes as rows (not normalized).
  [[nodiscard]] const Eigen::MatrixXd& amplitudes() const { return amplitudes_; }
  /// Row i normalized to unit norm: the LO mode that measures band i.
  [[nodiscard]] Eigen::VectorXd band_vector(int i) const;
  /// Fraction of the LO energy that lands in band i.
  [[nodiscard]] double band_energy(int i) const;
  [[nodiscard]] Eigen::VectorXd band_energies() const;

 private:
  BandPartition(FrequencyGrid grid, Eigen::VectorXd lo, Eigen::MatrixXd amplitudes,
                double gap_fraction);

  FrequencyGrid grid_;
  Eigen::VectorXd lo_;
  Eigen::MatrixXd amplitudes_;
  std::vector<Band> bands_;
  double gap_fraction_;
};

struct ModeSqueezing {
  double v_minus = 1.0;  ///< variance of the squeezed quadrature
  double v_plus = 1.0;   ///< variance of the anti-squeezed quadrature
  Quadrature squeezed = Quadrature::x;

  [[nodiscard]] double variance(Quadrature q) const { return q == squeezed ? v_minus : v_plus; }
};

struct SqueezingSpectrum {
  double pump_ratio = 0.0;
  double efficiency = 1.0;
  std::vector<ModeSqueezing> modes;

  [[nodiscard]] Eigen::VectorXd variances(Quadrature q) const;
};

/// Per supermode: sigma_k = pump_ratio |L_k| / max|L|, ideal variances
/// ((1 -+ sigma)/(1 +- sigma))^2, then V -> eta V + 1 - eta. Modes with a
/// positive eigenvalue are squeezed in x, the others in p.
[[nodiscard]] SqueezingSpectrum squeezing_from_eigenvalues(const SupermodeSet& modes,
                                                           double pump_ratio, double efficiency);

struct PumpCalibration {
  double pump_ratio;
  double efficiency;
};

/// Finds the (pump_ratio, efficiency) pair for which homodyne detection with
/// `lo` shows the requested squeezing and anti-squeezing levels (dB).
[[nodiscard]] PumpCalibration calibrate_pump(const SupermodeSet& modes, const Eigen::VectorXd& lo,
                                             double squeezing_db, double antisqueezing_db);

/// Variance of quadrature q measured by a local oscillator with spectral
/// amplitude `lo` (normalized internally).
[[nodiscard]] double homodyne_variance(const SupermodeSet& modes, const SqueezingSpectrum& spectrum,
                                       const Eigen::VectorXd& lo, Quadrature q);

/// O[i][k] = <band_i, v_k> for normalized band vectors.
[[nodiscard]] Eigen::MatrixXd band_overlaps(const SupermodeSet& modes, const BandPartition& partition);

/// C_q = I + sum_k (V_k^q - 1) O[:,k] O[:,k]^T.
[[nodiscard]] CovarianceState project_to_bands(const SupermodeSet& modes,
                                               const SqueezingSpectrum& spectrum,
                                               const BandPartition& partition);

/// Off-diagonal: Pearson-normalized covariance. Diagonal: 1 - 1/V_i.
[[nodiscard]] Eigen::MatrixXd correlation_matrix(const CovarianceState& state, Quadrature q);

/// C -> D^1/2 C D^1/2 + (I - D), D = diag(eta), on both blocks.
[[nodiscard]] CovarianceState apply_loss(const CovarianceState& state, const Eigen::VectorXd& eta);

struct BlockCommutator {
  Eigen::MatrixXd commutator;
  double max_abs;
};

[[nodiscard]] BlockCommutator block_commutator(const CovarianceState& state);

}  // namespace spopo
