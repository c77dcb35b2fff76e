#pragma once

// Frequency-comb coupling model of a synchronously pumped OPO.
//
// The comb is a grid of signal modes w_p = w0 + p * spacing, p in [-P, P].
// Down-conversion couples modes m and n with strength
//
//   L[m][n] = f(w_m, w_n) * pump(w_m + w_n)
//
// where f is the phase-matching envelope and pump the max-normalized pump
// spectral amplitude. The eigenvectors of L are the supermodes; each one is
// squeezed independently, with a strength proportional to its eigenvalue.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace spopo {

class FrequencyGrid {
 public:
  /// `spacing` is the frequency step between neighbouring model modes (Hz),
  /// `half_width` the number of modes on each side of the carrier.
  FrequencyGrid(double center_frequency, double spacing, int half_width);

  [[nodiscard]] double center_frequency() const { return center_; }
  [[nodiscard]] double spacing() const { return spacing_; }
  [[nodiscard]] int half_width() const { return half_width_; }
  [[nodiscard]] int size() const { return 2 * half_width_ + 1; }

  /// Grid index p of storage position i.
  [[nodiscard]] int offset(int i) const { return i - half_width_; }
  /// Storage position of grid index p.
  [[nodiscard]] int position(int p) const { return p + half_width_; }

  [[nodiscard]] double frequency(int p) const { return center_ + p * spacing_; }
  [[nodiscard]] double detuning(int p) const { return p * spacing_; }

  /// Detunings w_p - w0 of every mode, in storage order.
  [[nodiscard]] Eigen::VectorXd detunings() const;
  [[nodiscard]] Eigen::VectorXd frequencies() const;

 private:
  double center_;
  double spacing_;
  int half_width_;
};

enum class PumpShape { single_line, gaussian };

class PumpSpectrum {
 public:
  static PumpSpectrum single_line(double center);
  /// `fwhm` is the full width at half maximum of the pump power spectrum (Hz).
  static PumpSpectrum gaussian(double center, double fwhm);

  [[nodiscard]] PumpShape shape() const { return shape_; }
  [[nodiscard]] double center() const { return center_; }
  [[nodiscard]] double fwhm() const { return fwhm_; }

  /// Standard deviation s of the amplitude envelope exp(-d^2 / (2 s^2)).
  [[nodiscard]] double amplitude_sigma() const;

  /// Max-normalized amplitude at detuning d = w - center.
  [[nodiscard]] double amplitude_at_detuning(double d) const;
  [[nodiscard]] double amplitude(double omega) const {
    return amplitude_at_detuning(omega - center_);
  }

 private:
  PumpSpectrum(PumpShape shape, double center, double fwhm)
      : shape_(shape), center_(center), fwhm_(fwhm) {}

  PumpShape shape_;
  double center_;
  double fwhm_;
};

enum class PhaseMatchingShape { flat, gaussian, sinc };

/// Phase-matching envelope as a function of the signal-idler frequency
/// difference w_m - w_n. Flat returns 1; gaussian is exp(-d^2 / (2 w^2));
/// sinc is sin(d / w) / (d / w).
class PhaseMatching {
 public:
  static PhaseMatching flat();
  static PhaseMatching gaussian(double width);
  static PhaseMatching sinc(double width);

  [[nodiscard]] PhaseMatchingShape shape() const { return shape_; }
  [[nodiscard]] double width() const { return width_; }

  [[nodiscard]] double value_at_difference(double difference) const;
  [[nodiscard]] double value(double omega_m, double omega_n) const {
    return value_at_difference(omega_m - omega_n);
  }

 private:
  PhaseMatching(PhaseMatchingShape shape, double width)
      : shape_(shape), width_(width) {}

  PhaseMatchingShape shape_;
  double width_;
};

struct CouplingMatrix {
  FrequencyGrid grid;
  Eigen::MatrixXd entries;
};

/// Orthonormal eigenvectors (columns) of a coupling matrix with their signed
/// eigenvalues, ordered by descending |eigenvalue|.
class SupermodeSet {
 public:
  SupermodeSet(FrequencyGrid grid, Eigen::MatrixXd vectors, Eigen::VectorXd eigenvalues);

  [[nodiscard]] const FrequencyGrid& grid() const { return grid_; }
  [[nodiscard]] int size() const { return static_cast<int>(eigenvalues_.size()); }
  [[nodiscard]] const Eigen::MatrixXd& vectors() const { return vectors_; }
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  [[nodiscard]] auto vector(int k) const { return vectors_.col(k); }
  [[nodiscard]] double eigenvalue(int k) const { return eigenvalues_(k); }

  /// V diag(lambda) V^T.
  [[nodiscard]] Eigen::MatrixXd reconstruct() const;

 private:
  FrequencyGrid grid_;
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd eigenvalues_;
};

/// Throws ConfigError unless the pump is centred on twice the carrier.
[[nodiscard]] CouplingMatrix build_coupling(const FrequencyGrid& grid, const PumpSpectrum& pump,
                                            const PhaseMatching& pm);

/// Full eigendecomposition of L.
///
/// Degenerate eigenspaces are resolved by diagonalizing the squared detuning
/// inside each eigenspace, so that e.g. a single-line pump yields the
/// pair-localized vectors (e_p +- e_-p)/sqrt(2). Each vector's largest
/// component (the first one, on ties) is made positive.
[[nodiscard]] SupermodeSet diagonalize(const CouplingMatrix& coupling);

/// Unit-norm Hermite-Gauss function H_k(d/w) exp(-d^2/(2 w^2)) sampled on
/// the grid detunings d, with `width` w in Hz.
[[nodiscard]] Eigen::VectorXd hermite_gauss_reference(int order, double width,
                                                      const FrequencyGrid& grid);

/// RMS spread of |v|^2 about the carrier (Hz).
[[nodiscard]] double spectral_rms_width(const Eigen::Ref<const Eigen::VectorXd>& v,
                                        const FrequencyGrid& grid);

/// Gaussian width w of the order-0 Hermite-Gauss function with the same RMS
/// spread as `v`, i.e. sqrt(2) * rms.
[[nodiscard]] double fitted_gaussian_width(const Eigen::Ref<const Eigen::VectorXd>& v,
                                           const FrequencyGrid& grid);

}  // namespace spopo
