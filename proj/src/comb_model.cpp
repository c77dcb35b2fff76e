#include "spopo/comb_model.hpp"

#include "spopo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace spopo {

FrequencyGrid::FrequencyGrid(double center_frequency, double spacing, int half_width)
    : center_(center_frequency), spacing_(spacing), half_width_(half_width) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ConfigError("frequency grid spacing must be positive");
  }
  if (half_width < 1) {
    throw ConfigError("frequency grid needs at least one mode on each side of the carrier");
  }
  if (!std::isfinite(center_frequency)) {
    throw ConfigError("frequency grid center must be finite");
  }
}

Eigen::VectorXd FrequencyGrid::detunings() const {
  Eigen::VectorXd d(size());
  for (int i = 0; i < size(); ++i) d(i) = detuning(offset(i));
  return d;
}

Eigen::VectorXd FrequencyGrid::frequencies() const {
  Eigen::VectorXd f(size());
  for (int i = 0; i < size(); ++i) f(i) = frequency(offset(i));
  return f;
}

PumpSpectrum PumpSpectrum::single_line(double center) {
  return PumpSpectrum(PumpShape::single_line, center, 0.0);
}

PumpSpectrum PumpSpectrum::gaussian(double center, double fwhm) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) {
    throw ConfigError("gaussian pump needs a positive FWHM");
  }
  return PumpSpectrum(PumpShape::gaussian, center, fwhm);
}

double PumpSpectrum::amplitude_sigma() const {
  // Power FWHM = 2 sigma_I sqrt(2 ln 2); the amplitude is the square root of
  // the power, so its sigma is sqrt(2) sigma_I.
  return fwhm_ / (2.0 * std::sqrt(std::numbers::ln2));
}

double PumpSpectrum::amplitude_at_detuning(double d) const {
  switch (shape_) {
    case PumpShape::single_line:
      return d == 0.0 ? 1.0 : 0.0;
    case PumpShape::gaussian: {
      const double s = amplitude_sigma();
      return std::exp(-d * d / (2.0 * s * s));
    }
  }
  return 0.0;
}

PhaseMatching PhaseMatching::flat() { return PhaseMatching(PhaseMatchingShape::flat, 0.0); }

PhaseMatching PhaseMatching::gaussian(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ConfigError("gaussian phase matching needs a positive width");
  }
  return PhaseMatching(PhaseMatchingShape::gaussian, width);
}

PhaseMatching PhaseMatching::sinc(double width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ConfigError("sinc phase matching needs a positive width");
  }
  return PhaseMatching(PhaseMatchingShape::sinc, width);
}

double PhaseMatching::value_at_difference(double difference) const {
  switch (shape_) {
    case PhaseMatchingShape::flat:
      return 1.0;
    case PhaseMatchingShape::gaussian:
      return std::exp(-difference * difference / (2.0 * width_ * width_));
    case PhaseMatchingShape::sinc: {
      const double u = difference / width_;
      return u == 0.0 ? 1.0 : std::sin(u) / u;
    }
  }
  return 0.0;
}

SupermodeSet::SupermodeSet(FrequencyGrid grid, Eigen::MatrixXd vectors,
                           Eigen::VectorXd eigenvalues)
    : grid_(grid), vectors_(std::move(vectors)), eigenvalues_(std::move(eigenvalues)) {
  if (vectors_.rows() != grid_.size() || vectors_.cols() != eigenvalues_.size()) {
    throw ConfigError("supermode set dimensions do not match the frequency grid");
  }
}

Eigen::MatrixXd SupermodeSet::reconstruct() const {
  return vectors_ * eigenvalues_.asDiagonal() * vectors_.transpose();
}

CouplingMatrix build_coupling(const FrequencyGrid& grid, const PumpSpectrum& pump,
                              const PhaseMatching& pm) {
  const double two_photon = 2.0 * grid.center_frequency();
  const double tol = 1e-12 * std::max(1.0, std::abs(two_photon));
  if (std::abs(pump.center() - two_photon) > tol) {
    throw ConfigError("pump center " + std::to_string(pump.center()) +
                      " Hz is not twice the comb carrier " + std::to_string(two_photon) + " Hz");
  }

  const int n = grid.size();
  Eigen::MatrixXd L(n, n);
  for (int i = 0; i < n; ++i) {
    const int m = grid.offset(i);
    for (int j = i; j < n; ++j) {
      const int k = grid.offset(j);
      // Integer index arithmetic keeps the two-photon detuning exact.
      const double value =
          pm.value_at_difference(grid.detuning(m - k)) * pump.amplitude_at_detuning(grid.detuning(m + k));
      L(i, j) = value;
      L(j, i) = value;
    }
  }
  return CouplingMatrix{grid, std::move(L)};
}

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double largest = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= largest * (1.0 - 1e-9)) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

SupermodeSet diagonalize(const CouplingMatrix& coupling) {
  const auto& grid = coupling.grid;
  const int n = grid.size();
  if (coupling.entries.rows() != n || coupling.entries.cols() != n) {
    throw ConfigError("coupling matrix size does not match its grid");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(coupling.entries);
  if (solver.info() != Eigen::Success) {
    throw ConfigError("eigendecomposition of the coupling matrix failed");
  }
  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();

  const double scale = values.cwiseAbs().maxCoeff();
  const double tol = 1e-10 * std::max(scale, 1e-300);

  // Tie-break operator: squared detuning plus a small irrational-ratio odd
  // term so that +p and -p stay distinguishable.
  const double alpha = 1.0 / (std::numbers::pi * (grid.half_width() + 1));
  Eigen::VectorXd tie(n);
  for (int i = 0; i < n; ++i) {
    const double p = grid.offset(i);
    tie(i) = p * p + alpha * p;
  }

  Eigen::VectorXd secondary(n);
  for (int start = 0; start < n;) {
    int end = start + 1;
    while (end < n && values(end) - values(end - 1) <= tol) ++end;
    const int width = end - start;
    if (width == 1) {
      secondary(start) = vectors.col(start).cwiseAbs2().dot(tie);
    } else {
      Eigen::MatrixXd block = vectors.middleCols(start, width);
      Eigen::MatrixXd restricted = block.transpose() * tie.asDiagonal() * block;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> inner(restricted);
      vectors.middleCols(start, width) = block * inner.eigenvectors();
      secondary.segment(start, width) = inner.eigenvalues();
      // The cluster shares one eigenvalue; use the mean to remove jitter.
      values.segment(start, width).setConstant(values.segment(start, width).mean());
    }
    start = end;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(values(a)) > std::abs(values(b));
  });
  for (int start = 0; start < n;) {
    int end = start + 1;
    while (end < n &&
           std::abs(values(order[start])) - std::abs(values(order[end])) <= tol) {
      ++end;
    }
    std::stable_sort(order.begin() + start, order.begin() + end, [&](int a, int b) {
      if (secondary(a) != secondary(b)) return secondary(a) < secondary(b);
      return values(a) > values(b);
    });
    start = end;
  }

  Eigen::MatrixXd sorted_vectors(n, n);
  Eigen::VectorXd sorted_values(n);
  for (int k = 0; k < n; ++k) {
    sorted_vectors.col(k) = vectors.col(order[k]);
    sorted_values(k) = values(order[k]);
    fix_sign(sorted_vectors.col(k));
  }
  return SupermodeSet(grid, std::move(sorted_vectors), std::move(sorted_values));
}

Eigen::VectorXd hermite_gauss_reference(int order, double width, const FrequencyGrid& grid) {
  if (order < 0) throw ConfigError("Hermite-Gauss order must be non-negative");
  if (!(width > 0.0)) throw ConfigError("Hermite-Gauss width must be positive");

  // Normalized Hermite functions by recurrence; avoids overflow of H_k.
  const Eigen::VectorXd xi = grid.detunings() / width;
  Eigen::VectorXd previous = Eigen::VectorXd::Zero(xi.size());
  Eigen::VectorXd current = (-0.5 * xi.array().square()).exp().matrix();
  for (int k = 0; k < order; ++k) {
    Eigen::VectorXd next = std::sqrt(2.0 / (k + 1)) * xi.cwiseProduct(current) -
                           std::sqrt(static_cast<double>(k) / (k + 1)) * previous;
    previous = std::move(current);
    current = std::move(next);
  }
  const double norm = current.norm();
  if (norm == 0.0) throw ConfigError("Hermite-Gauss reference vanishes on the grid");
  return current / norm;
}

double spectral_rms_width(const Eigen::Ref<const Eigen::VectorXd>& v, const FrequencyGrid& grid) {
  const Eigen::VectorXd d = grid.detunings();
  const double weight = v.squaredNorm();
  if (weight == 0.0) throw ConfigError("RMS width of a zero vector");
  return std::sqrt(v.cwiseAbs2().dot(d.cwiseAbs2()) / weight);
}

double fitted_gaussian_width(const Eigen::Ref<const Eigen::VectorXd>& v, const FrequencyGrid& grid) {
  return std::numbers::sqrt2 * spectral_rms_width(v, grid);
}

}  // namespace spopo
