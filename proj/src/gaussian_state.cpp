#include "spopo/gaussian_state.hpp"

#include "spopo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace spopo {

const char* to_string(Quadrature q) { return q == Quadrature::x ? "x" : "p"; }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

namespace {

void check_block(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ConfigError(std::string("covariance block ") + name + " must be square and non-empty");
  }
  if (!m.allFinite()) {
    throw DataError(std::string("covariance block ") + name + " has non-finite entries");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw DataError(std::string("covariance block ") + name + " is not symmetric");
  }
}

}  // namespace

CovarianceState::CovarianceState(Eigen::MatrixXd cx, Eigen::MatrixXd cp) {
  check_block(cx, "Cx");
  check_block(cp, "Cp");
  if (cx.rows() != cp.rows()) throw ConfigError("Cx and Cp must have the same size");
  cx_ = 0.5 * (cx + cx.transpose());
  cp_ = 0.5 * (cp + cp.transpose());
}

CovarianceState CovarianceState::vacuum(int n_bands) {
  if (n_bands < 1) throw ConfigError("a state needs at least one band");
  return CovarianceState(Eigen::MatrixXd::Identity(n_bands, n_bands),
                         Eigen::MatrixXd::Identity(n_bands, n_bands));
}

bool CovarianceState::blocks_positive_definite() const {
  return Eigen::LLT<Eigen::MatrixXd>(cx_).info() == Eigen::Success &&
         Eigen::LLT<Eigen::MatrixXd>(cp_).info() == Eigen::Success;
}

Eigen::VectorXd symplectic_spectrum(const Eigen::MatrixXd& cx, const Eigen::MatrixXd& cp) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::LLT<Eigen::MatrixXd> chol(cx);
  if (chol.info() != Eigen::Success) {
    throw PhysicalityError("x covariance block is not positive definite", nan);
  }
  const Eigen::MatrixXd lower = chol.matrixL();
  const Eigen::MatrixXd sym = lower.transpose() * cp * lower;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& values = solver.eigenvalues();
  if (values(0) <= 0.0) {
    throw PhysicalityError("p covariance block is not positive definite", nan);
  }
  return values.cwiseSqrt();
}

Eigen::VectorXd CovarianceState::symplectic_eigenvalues() const {
  return symplectic_spectrum(cx_, cp_);
}

double CovarianceState::min_symplectic_eigenvalue() const { return symplectic_eigenvalues()(0); }

bool CovarianceState::is_physical(double tol) const {
  try {
    return min_symplectic_eigenvalue() >= 1.0 - tol;
  } catch (const PhysicalityError&) {
    return false;
  }
}

Eigen::VectorXd gaussian_lo_amplitude(const FrequencyGrid& grid, double power_fwhm) {
  if (!(power_fwhm > 0.0)) throw ConfigError("local oscillator FWHM must be positive");
  const double sigma = power_fwhm / (2.0 * std::sqrt(std::numbers::ln2));
  const Eigen::VectorXd d = grid.detunings();
  Eigen::VectorXd lo = (-(d.array().square()) / (2.0 * sigma * sigma)).exp().matrix();
  const double norm = lo.norm();
  if (norm == 0.0) throw ConfigError("local oscillator vanishes on the grid");
  return lo / norm;
}

BandPartition::BandPartition(FrequencyGrid grid, Eigen::VectorXd lo, Eigen::MatrixXd amplitudes,
                             double gap_fraction)
    : grid_(grid), lo_(std::move(lo)), amplitudes_(std::move(amplitudes)), gap_fraction_(gap_fraction) {
  const int n = static_cast<int>(amplitudes_.rows());
  if (n < 1) throw ConfigError("a band partition needs at least one band");
  int previous_last = -1;
  for (int i = 0; i < n; ++i) {
    int first = -1;
    int last = -1;
    for (int j = 0; j < amplitudes_.cols(); ++j) {
      if (amplitudes_(i, j) != 0.0) {
        if (first < 0) first = j;
        last = j;
      }
    }
    if (first < 0) throw ConfigError("band " + std::to_string(i) + " has no local-oscillator energy");
    if (first <= previous_last) throw ConfigError("bands must be disjoint and ordered by frequency");
    bands_.push_back({first, last});
    previous_last = last;
  }
}

BandPartition BandPartition::equal_energy(const FrequencyGrid& grid, const Eigen::VectorXd& lo_amplitude,
                                          int n_bands, double gap_fraction) {
  const int size = grid.size();
  if (lo_amplitude.size() != size) throw ConfigError("LO amplitude does not match the grid");
  if (n_bands < 1) throw ConfigError("band count must be positive");
  if (!(gap_fraction >= 0.0 && gap_fraction < 0.5)) {
    throw ConfigError("gap_fraction must lie in [0, 0.5)");
  }
  const double lo_norm = lo_amplitude.norm();
  if (lo_norm == 0.0) throw ConfigError("LO amplitude is zero");
  const Eigen::VectorXd lo = lo_amplitude / lo_norm;
  const Eigen::VectorXd energy = lo.cwiseAbs2();

  // Prefix and suffix sums run in opposite directions so that a mirror
  // symmetric LO gives exactly mirror symmetric positions.
  Eigen::VectorXd prefix(size);
  Eigen::VectorXd suffix(size);
  double acc = 0.0;
  for (int j = 0; j < size; ++j) {
    prefix(j) = acc;
    acc += energy(j);
  }
  acc = 0.0;
  for (int j = size - 1; j >= 0; --j) {
    suffix(j) = acc;
    acc += energy(j);
  }
  const double total = acc;

  Eigen::MatrixXd amplitudes = Eigen::MatrixXd::Zero(n_bands, size);
  for (int j = 0; j < size; ++j) {
    if (energy(j) == 0.0) continue;
    const double t = (prefix(j) - suffix(j)) / total;  // in (-1, 1)
    const double u = 0.5 * n_bands * (1.0 + t);
    const double nearest = std::round(u);
    // Modes sitting on an internal boundary go into the gap.
    if (std::abs(u - nearest) < 1e-9 && nearest > 0 && nearest < n_bands) continue;
    const int band = std::clamp(static_cast<int>(std::floor(u)), 0, n_bands - 1);
    amplitudes(band, j) = lo(j);
  }

  const Eigen::VectorXd energies = amplitudes.rowwise().squaredNorm();
  if (energies.minCoeff() <= 0.0) {
    throw ConfigError("grid too coarse: a band received no local-oscillator mode");
  }
  const double target = (1.0 - 2.0 * gap_fraction) * energies.minCoeff();

  for (int i = 0; i < n_bands; ++i) {
    const double excess = energies(i) - target;
    // rounding-level excess would strip far-wing modes from one side only
    if (excess <= 1e-12 * target) continue;
    auto trim = [&](int start, int stop, int step) {
      double remaining = 0.5 * excess;
      for (int j = start; j != stop && remaining > 0.0; j += step) {
        const double e = amplitudes(i, j) * amplitudes(i, j);
        if (e == 0.0) continue;
        if (e <= remaining) {
          amplitudes(i, j) = 0.0;
          remaining -= e;
        } else {
          amplitudes(i, j) = std::copysign(std::sqrt(e - remaining), amplitudes(i, j));
          remaining = 0.0;
        }
      }
    };
    trim(0, size, 1);
    trim(size - 1, -1, -1);
  }
  return BandPartition(grid, lo, std::move(amplitudes), gap_fraction);
}

BandPartition BandPartition::from_ranges(const FrequencyGrid& grid, const Eigen::VectorXd& lo_amplitude,
                                         const std::vector<Band>& ranges) {
  const int size = grid.size();
  if (lo_amplitude.size() != size) throw ConfigError("LO amplitude does not match the grid");
  const double lo_norm = lo_amplitude.norm();
  if (lo_norm == 0.0) throw ConfigError("LO amplitude is zero");
  const Eigen::VectorXd lo = lo_amplitude / lo_norm;
  Eigen::MatrixXd amplitudes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ranges.size()), size);
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i];
    if (r.first < 0 || r.last >= size || r.first > r.last) {
      throw ConfigError("band " + std::to_string(i) + " lies outside the grid");
    }
    for (int j = r.first; j <= r.last; ++j) amplitudes(static_cast<Eigen::Index>(i), j) = lo(j);
  }
  return BandPartition(grid, lo, std::move(amplitudes), 0.0);
}

Eigen::VectorXd BandPartition::band_vector(int i) const {
  Eigen::VectorXd row = amplitudes_.row(i).transpose();
  return row / row.norm();
}

double BandPartition::band_energy(int i) const { return amplitudes_.row(i).squaredNorm(); }

Eigen::VectorXd BandPartition::band_energies() const { return amplitudes_.rowwise().squaredNorm(); }

Eigen::VectorXd SqueezingSpectrum::variances(Quadrature q) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k) v(static_cast<Eigen::Index>(k)) = modes[k].variance(q);
  return v;
}

namespace {

void check_pump(double pump_ratio, double efficiency) {
  if (!(pump_ratio >= 0.0)) throw ConfigError("pump_ratio must be non-negative");
  if (pump_ratio >= 1.0) {
    throw AboveThresholdError("pump_ratio " + std::to_string(pump_ratio) +
                              " is at or above the oscillation threshold (must be < 1)");
  }
  if (!(efficiency > 0.0 && efficiency <= 1.0)) {
    throw ConfigError("efficiency must lie in (0, 1]");
  }
}

// Ideal (lossless) variances for every mode at the given pump ratio.
SqueezingSpectrum ideal_spectrum(const SupermodeSet& modes, double pump_ratio) {
  SqueezingSpectrum spectrum;
  spectrum.pump_ratio = pump_ratio;
  const double largest = modes.eigenvalues().cwiseAbs().maxCoeff();
  spectrum.modes.reserve(static_cast<std::size_t>(modes.size()));
  for (int k = 0; k < modes.size(); ++k) {
    const double lambda = modes.eigenvalue(k);
    const double sigma = largest > 0.0 ? pump_ratio * std::abs(lambda) / largest : 0.0;
    const double ratio = (1.0 - sigma) / (1.0 + sigma);
    ModeSqueezing m;
    m.v_minus = ratio * ratio;
    m.v_plus = 1.0 / (ratio * ratio);
    m.squeezed = lambda > 0.0 ? Quadrature::x : Quadrature::p;
    spectrum.modes.push_back(m);
  }
  return spectrum;
}

}  // namespace

SqueezingSpectrum squeezing_from_eigenvalues(const SupermodeSet& modes, double pump_ratio,
                                             double efficiency) {
  check_pump(pump_ratio, efficiency);
  SqueezingSpectrum spectrum = ideal_spectrum(modes, pump_ratio);
  spectrum.efficiency = efficiency;
  for (auto& m : spectrum.modes) {
    m.v_minus = efficiency * m.v_minus + (1.0 - efficiency);
    m.v_plus = efficiency * m.v_plus + (1.0 - efficiency);
  }
  return spectrum;
}

double homodyne_variance(const SupermodeSet& modes, const SqueezingSpectrum& spectrum,
                         const Eigen::VectorXd& lo, Quadrature q) {
  if (lo.size() != modes.grid().size()) throw ConfigError("LO does not match the mode grid");
  if (static_cast<int>(spectrum.modes.size()) != modes.size()) {
    throw ConfigError("squeezing spectrum does not match the supermode set");
  }
  const double norm = lo.norm();
  if (norm == 0.0) throw ConfigError("LO amplitude is zero");
  const Eigen::VectorXd overlaps = modes.vectors().transpose() * (lo / norm);
  const Eigen::VectorXd v = spectrum.variances(q);
  return 1.0 + (v.array() - 1.0).matrix().dot(overlaps.cwiseAbs2());
}

PumpCalibration calibrate_pump(const SupermodeSet& modes, const Eigen::VectorXd& lo,
                               double squeezing_db, double antisqueezing_db) {
  if (!(squeezing_db < 0.0) || !(antisqueezing_db > 0.0)) {
    throw ConfigError("calibration needs a negative squeezing and positive anti-squeezing level");
  }
  const double v_sq = db_to_linear(squeezing_db);
  const double v_anti = db_to_linear(antisqueezing_db);
  const double target_ratio = (v_anti - 1.0) / (1.0 - v_sq);
  if (!(target_ratio > 1.0)) {
    throw ConfigError("anti-squeezing must exceed squeezing in magnitude for a lossy OPO");
  }

  // With loss eta: V_x = 1 + eta A(r), V_p = 1 + eta B(r); B/(-A) fixes r.
  auto excess = [&](double r) {
    const SqueezingSpectrum ideal = ideal_spectrum(modes, r);
    const double a = homodyne_variance(modes, ideal, lo, Quadrature::x) - 1.0;
    const double b = homodyne_variance(modes, ideal, lo, Quadrature::p) - 1.0;
    return std::pair{a, b};
  };
  auto mismatch = [&](double r) {
    const auto [a, b] = excess(r);
    if (!(a < 0.0)) return -std::numeric_limits<double>::infinity();
    return b / (-a) - target_ratio;
  };

  double lo_r = 1e-9;
  double hi_r = 1.0 - 1e-12;
  if (!(mismatch(hi_r) > 0.0) || excess(lo_r).first >= 0.0) {
    throw ConfigError("requested squeezing levels are not reachable with this local oscillator");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo_r + hi_r);
    if (mismatch(mid) < 0.0) {
      lo_r = mid;
    } else {
      hi_r = mid;
    }
  }
  const double r = 0.5 * (lo_r + hi_r);
  const double eta = (1.0 - v_sq) / (-excess(r).first);
  if (eta > 1.0 + 1e-12) {
    throw ConfigError("requested squeezing needs an efficiency above 1 with this local oscillator");
  }
  return {r, std::min(eta, 1.0)};
}

Eigen::MatrixXd band_overlaps(const SupermodeSet& modes, const BandPartition& partition) {
  if (partition.grid().size() != modes.grid().size()) {
    throw ConfigError("band partition grid does not match the supermode grid");
  }
  Eigen::MatrixXd bands(partition.n_bands(), modes.grid().size());
  for (int i = 0; i < partition.n_bands(); ++i) bands.row(i) = partition.band_vector(i).transpose();
  return bands * modes.vectors();
}

CovarianceState project_to_bands(const SupermodeSet& modes, const SqueezingSpectrum& spectrum,
                                 const BandPartition& partition) {
  if (static_cast<int>(spectrum.modes.size()) != modes.size()) {
    throw ConfigError("squeezing spectrum does not match the supermode set");
  }
  const Eigen::MatrixXd overlaps = band_overlaps(modes, partition);
  const int n = partition.n_bands();
  auto block = [&](Quadrature q) {
    const Eigen::VectorXd excess = (spectrum.variances(q).array() - 1.0).matrix();
    Eigen::MatrixXd c = overlaps * excess.asDiagonal() * overlaps.transpose();
    c += Eigen::MatrixXd::Identity(n, n);
    return c;
  };
  return CovarianceState(block(Quadrature::x), block(Quadrature::p));
}

Eigen::MatrixXd correlation_matrix(const CovarianceState& state, Quadrature q) {
  const Eigen::MatrixXd& c = state.block(q);
  const int n = state.n_bands();
  for (int i = 0; i < n; ++i) {
    if (!(c(i, i) > 0.0)) {
      throw DataError("band " + std::to_string(i) + " has a non-positive variance");
    }
  }
  Eigen::MatrixXd r(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      r(i, j) = i == j ? 1.0 - 1.0 / c(i, i) : c(i, j) / std::sqrt(c(i, i) * c(j, j));
    }
  }
  return r;
}

CovarianceState apply_loss(const CovarianceState& state, const Eigen::VectorXd& eta) {
  const int n = state.n_bands();
  if (eta.size() != n) throw ConfigError("efficiency vector does not match the band count");
  for (int i = 0; i < n; ++i) {
    if (!(eta(i) > 0.0 && eta(i) <= 1.0)) {
      throw ConfigError("band efficiency " + std::to_string(i) + " must lie in (0, 1]");
    }
  }
  const Eigen::VectorXd root = eta.cwiseSqrt();
  const Eigen::MatrixXd vacuum_part = (Eigen::VectorXd::Ones(n) - eta).asDiagonal();
  auto lossy = [&](const Eigen::MatrixXd& c) -> Eigen::MatrixXd {
    Eigen::MatrixXd out = root.asDiagonal() * c * root.asDiagonal();
    out += vacuum_part;
    return out;
  };
  return CovarianceState(lossy(state.cx()), lossy(state.cp()));
}

BlockCommutator block_commutator(const CovarianceState& state) {
  Eigen::MatrixXd comm = state.cx() * state.cp() - state.cp() * state.cx();
  const double max_abs = comm.size() > 0 ? comm.cwiseAbs().maxCoeff() : 0.0;
  return {std::move(comm), max_abs};
}

}  // namespace spopo
