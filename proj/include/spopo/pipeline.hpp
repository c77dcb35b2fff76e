#pragma once

// Reduction of phase-scanned homodyne traces to covariance states and
// squeezed-mode spectra.
//
// Trace shapes index the LO settings: shape {i, i} measures band i alone,
// shape {i, j} (i < j) the two bands together. Ids run {0,0}, {0,1}, ...,
// {0,n-1}, {1,1}, ... so there are n(n+1)/2 of them. Phases are LO phases in
// radians; the noise oscillates with period pi.

#include "spopo/gaussian_state.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace spopo {

[[nodiscard]] int shape_count(int n_bands);
[[nodiscard]] int shape_id(int n_bands, int band_i, int band_j);
[[nodiscard]] std::pair<int, int> shape_bands(int n_bands, int id);

struct NoiseTrace {
  int shape_id = 0;
  int band_i = 0;
  int band_j = 0;
  std::vector<double> phase;
  std::vector<double> power_db;  ///< relative to shot noise
};

struct ExtremaOptions {
  double smoothing_fraction = 0.01;
  double min_prominence_db = 0.5;
};

struct ExtremaStats {
  double mean_peak_db = 0.0;
  double var_peak = 0.0;
  double mean_valley_db = 0.0;
  double var_valley = 0.0;
  std::vector<double> peak_db;
  std::vector<double> valley_db;
  std::vector<double> valley_phase;
};

/// Moving average with a window of `window` samples (odd, >= 1) that
/// shrinks symmetrically near the ends.
[[nodiscard]] std::vector<double> moving_average(const std::vector<double>& values, int window);

/// Peaks and valleys of a trace: candidates from a hysteresis walk over the
/// smoothed trace, refined to the raw extremum within half a window. End
/// samples never count. Variances are population variances.
[[nodiscard]] ExtremaStats extract_extrema(const NoiseTrace& trace, const ExtremaOptions& options = {});

struct TraceBundle {
  int n_bands = 0;
  std::vector<NoiseTrace> traces;
  Eigen::VectorXd band_powers;

  /// Shape ids without a trace, ascending.
  [[nodiscard]] std::vector<int> missing_shapes() const;
  /// Throws DataError naming missing or duplicate shapes and bad powers.
  void validate() const;
};

/// Extrema of every shape, indexed by shape id.
struct BundleStats {
  int n_bands = 0;
  Eigen::VectorXd band_powers;
  std::vector<ExtremaStats> shapes;
  std::vector<double> valley_offset_deg;  ///< minimum-noise phase relative to the reference
};

/// Extrema per trace plus the phase-alignment check: a trace whose mean
/// valley phase (mod pi) is more than `phase_tolerance_deg` from the circular
/// mean over all traces is rejected with a DataError.
[[nodiscard]] BundleStats analyze_bundle(const TraceBundle& bundle, const ExtremaOptions& options = {},
                                         double phase_tolerance_deg = 10.0);

/// Pairwise assembly from linear noise levels per shape id.
/// Diagonal: single-band level. Off-diagonal:
///   C_ij = [S_ij - P_i/(P_i+P_j) V_i - P_j/(P_i+P_j) V_j] (P_i+P_j) / (2 sqrt(P_i P_j)).
[[nodiscard]] CovarianceState assemble_covariance(int n_bands, const Eigen::VectorXd& band_powers,
                                                  const Eigen::VectorXd& levels_x,
                                                  const Eigen::VectorXd& levels_p);

/// Assembly from mean valley (x) and peak (p) levels.
[[nodiscard]] CovarianceState assemble_covariance(const BundleStats& stats);

/// Forward model: the level a shape measures on a state, l^T C l with
/// l proportional to sqrt(P_i) e_i + sqrt(P_j) e_j.
[[nodiscard]] Eigen::VectorXd shape_levels(const CovarianceState& state, const Eigen::VectorXd& band_powers,
                                           Quadrature q);

/// Each sample draws all 2 n(n+1)/2 dB levels from Normal(mean, var) and
/// assembles them. Sample s uses its own generator seeded from (seed, s).
[[nodiscard]] std::vector<CovarianceState> monte_carlo_covariances(const BundleStats& stats, int n_samples,
                                                                   std::uint64_t seed);

struct ModeStatistic {
  Quadrature quadrature = Quadrature::x;  ///< the squeezed one
  double mean = 1.0;                      ///< squeezing, linear
  double sigma = 0.0;
  double anti_mean = 1.0;
  double anti_sigma = 0.0;
  double robustness = 0.0;
};

struct ModeExtraction {
  Eigen::MatrixXd modes;  ///< n_bands x k, orthonormal columns
  std::vector<ModeStatistic> squeezing;  ///< ascending squeezing mean
  int nonclassical_count = 0;
};

/// Gram-Schmidt basis of the k most noise-robust eigenvectors of the sample
/// blocks, and the per-mode variance statistics of every sample in it.
///
/// Candidates are the eigenvectors of the mean Cx and Cp; in every sample a
/// candidate follows the eigenvector it overlaps most. Robustness is the
/// sample mean of |eigenvalue - 1| over the eigenvalue standard deviation.
[[nodiscard]] ModeExtraction extract_modes(const std::vector<CovarianceState>& samples, int k);

/// Modes with mean + 2 sigma < 1.
[[nodiscard]] int count_nonclassical(const ModeExtraction& extraction);

/// A trace that walks through the given valley and peak levels (dB) with
/// half-cosine segments: valley v at phase v*pi, peak v at v*pi + pi/2,
/// from -pi/4 to m*pi - pi/4. `samples_per_period` must be a multiple of 4.
[[nodiscard]] NoiseTrace synthesize_trace(int n_bands, int band_i, int band_j,
                                          const std::vector<double>& valleys_db,
                                          const std::vector<double>& peaks_db, int samples_per_period);

/// Noise-free bundle for a state: every shape oscillates between its x and
/// p levels for `periods` periods.
[[nodiscard]] TraceBundle synthesize_bundle(const CovarianceState& state, const Eigen::VectorXd& band_powers,
                                            int periods = 4, int samples_per_period = 400);

}  // namespace spopo
