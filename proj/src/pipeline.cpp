#include "spopo/pipeline.hpp"

#include "spopo/errors.hpp"
#include "spopo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace spopo {

int shape_count(int n_bands) { return n_bands * (n_bands + 1) / 2; }

int shape_id(int n_bands, int band_i, int band_j) {
  if (band_i > band_j) std::swap(band_i, band_j);
  if (band_i < 0 || band_j >= n_bands) {
    throw DataError("band pair {" + std::to_string(band_i) + "," + std::to_string(band_j) +
                    "} is outside " + std::to_string(n_bands) + " bands");
  }
  return band_i * n_bands - band_i * (band_i - 1) / 2 + (band_j - band_i);
}

std::pair<int, int> shape_bands(int n_bands, int id) {
  if (id < 0 || id >= shape_count(n_bands)) throw DataError("shape id " + std::to_string(id) + " out of range");
  int i = 0;
  while (id >= n_bands - i) {
    id -= n_bands - i;
    ++i;
  }
  return {i, i + id};
}

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  const int n = static_cast<int>(values.size());
  const int half = std::max(0, window / 2);
  std::vector<double> prefix(values.size() + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + values[i];
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    out[i] = (prefix[i + h + 1] - prefix[i - h]) / (2 * h + 1);
  }
  return out;
}

namespace {

std::pair<double, double> mean_and_population_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(v.size())};
}

std::string shape_label(const NoiseTrace& t) {
  return "shape " + std::to_string(t.shape_id) + " {" + std::to_string(t.band_i) + "," +
         std::to_string(t.band_j) + "}";
}

}  // namespace

ExtremaStats extract_extrema(const NoiseTrace& trace, const ExtremaOptions& options) {
  const auto& y = trace.power_db;
  const int n = static_cast<int>(y.size());
  if (trace.phase.size() != y.size()) throw DataError(shape_label(trace) + ": phase and power lengths differ");
  if (n < 5) throw DataError(shape_label(trace) + ": too few samples");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError(shape_label(trace) + ": non-finite power value");
  }
  if (!(options.smoothing_fraction >= 0.0 && options.smoothing_fraction < 0.5) ||
      !(options.min_prominence_db > 0.0)) {
    throw ConfigError("invalid extrema options");
  }

  int window = std::max(1, static_cast<int>(std::lround(options.smoothing_fraction * n)));
  if (window % 2 == 0) ++window;
  const int half = window / 2;
  const std::vector<double> s = moving_average(y, window);
  const double prom = options.min_prominence_db;

  // Hysteresis walk: an extremum is confirmed once the trace has moved away
  // from it by at least the prominence.
  std::vector<int> peaks;
  std::vector<int> valleys;
  int trend = 0;
  int hi = 0;
  int lo = 0;
  for (int i = 1; i < n; ++i) {
    if (trend == 0) {
      if (s[i] > s[hi]) hi = i;
      if (s[i] < s[lo]) lo = i;
      if (s[i] >= s[lo] + prom) {
        valleys.push_back(lo);
        trend = 1;
        hi = i;
      } else if (s[i] <= s[hi] - prom) {
        peaks.push_back(hi);
        trend = -1;
        lo = i;
      }
    } else if (trend > 0) {
      if (s[i] > s[hi]) {
        hi = i;
      } else if (s[i] <= s[hi] - prom) {
        peaks.push_back(hi);
        trend = -1;
        lo = i;
      }
    } else {
      if (s[i] < s[lo]) {
        lo = i;
      } else if (s[i] >= s[lo] + prom) {
        valleys.push_back(lo);
        trend = 1;
        hi = i;
      }
    }
  }

  ExtremaStats stats;
  auto refine = [&](int idx, bool peak) {
    const int a = std::max(0, idx - half);
    const int b = std::min(n - 1, idx + half);
    int best = idx;
    for (int i = a; i <= b; ++i) {
      if (peak ? y[i] > y[best] : y[i] < y[best]) best = i;
    }
    return best;
  };
  for (int idx : peaks) {
    if (idx == 0 || idx == n - 1) continue;
    stats.peak_db.push_back(y[refine(idx, true)]);
  }
  for (int idx : valleys) {
    if (idx == 0 || idx == n - 1) continue;
    const int best = refine(idx, false);
    stats.valley_db.push_back(y[best]);
    stats.valley_phase.push_back(trace.phase[best]);
  }
  if (stats.peak_db.size() < 2 || stats.valley_db.size() < 2) {
    throw DataError(shape_label(trace) + ": found " + std::to_string(stats.peak_db.size()) + " peaks and " +
                    std::to_string(stats.valley_db.size()) + " valleys, need at least 2 of each");
  }
  std::tie(stats.mean_peak_db, stats.var_peak) = mean_and_population_variance(stats.peak_db);
  std::tie(stats.mean_valley_db, stats.var_valley) = mean_and_population_variance(stats.valley_db);
  return stats;
}

std::vector<int> TraceBundle::missing_shapes() const {
  std::vector<bool> seen(static_cast<std::size_t>(std::max(0, shape_count(n_bands))), false);
  for (const auto& t : traces) {
    if (t.shape_id >= 0 && t.shape_id < static_cast<int>(seen.size())) seen[t.shape_id] = true;
  }
  std::vector<int> missing;
  for (std::size_t id = 0; id < seen.size(); ++id)
    if (!seen[id]) missing.push_back(static_cast<int>(id));
  return missing;
}

void TraceBundle::validate() const {
  if (n_bands < 1) throw DataError("trace bundle has no bands");
  if (band_powers.size() != n_bands) {
    throw DataError("expected " + std::to_string(n_bands) + " band powers, got " +
                    std::to_string(band_powers.size()));
  }
  for (int i = 0; i < n_bands; ++i) {
    if (!(band_powers(i) > 0.0) || !std::isfinite(band_powers(i))) {
      throw DataError("band power " + std::to_string(i) + " must be positive");
    }
  }
  std::vector<int> count(static_cast<std::size_t>(shape_count(n_bands)), 0);
  for (const auto& t : traces) {
    if (t.shape_id < 0 || t.shape_id >= shape_count(n_bands)) {
      throw DataError("unknown shape id " + std::to_string(t.shape_id));
    }
    if (shape_id(n_bands, t.band_i, t.band_j) != t.shape_id) {
      throw DataError(shape_label(t) + ": band indices do not match the shape id");
    }
    ++count[t.shape_id];
  }
  std::string duplicates;
  for (std::size_t id = 0; id < count.size(); ++id) {
    if (count[id] > 1) duplicates += (duplicates.empty() ? "" : ", ") + std::to_string(id);
  }
  if (!duplicates.empty()) throw DataError("duplicate traces for shape ids: " + duplicates);
  const auto missing = missing_shapes();
  if (!missing.empty()) {
    std::string list;
    for (int id : missing) {
      const auto [i, j] = shape_bands(n_bands, id);
      list += (list.empty() ? "" : ", ") + std::to_string(id) + " {" + std::to_string(i) + "," +
              std::to_string(j) + "}";
    }
    throw DataError("incomplete trace bundle, missing shape ids: " + list);
  }
}

BundleStats analyze_bundle(const TraceBundle& bundle, const ExtremaOptions& options,
                           double phase_tolerance_deg) {
  bundle.validate();
  const int shapes = shape_count(bundle.n_bands);
  std::vector<const NoiseTrace*> by_id(static_cast<std::size_t>(shapes), nullptr);
  for (const auto& t : bundle.traces) by_id[t.shape_id] = &t;

  BundleStats stats;
  stats.n_bands = bundle.n_bands;
  stats.band_powers = bundle.band_powers;
  stats.shapes.resize(static_cast<std::size_t>(shapes));
  parallel_for(static_cast<std::size_t>(shapes),
               [&](std::size_t id) { stats.shapes[id] = extract_extrema(*by_id[id], options); });

  // The noise has period pi in the LO phase, so valley phases are compared
  // as angles 2*phi.
  std::vector<double> angle(static_cast<std::size_t>(shapes));
  double sx = 0.0;
  double sy = 0.0;
  for (int id = 0; id < shapes; ++id) {
    double cx = 0.0;
    double cy = 0.0;
    for (double phi : stats.shapes[id].valley_phase) {
      cx += std::cos(2.0 * phi);
      cy += std::sin(2.0 * phi);
    }
    angle[id] = std::atan2(cy, cx);
    sx += std::cos(angle[id]);
    sy += std::sin(angle[id]);
  }
  const double reference = std::atan2(sy, sx);
  stats.valley_offset_deg.resize(static_cast<std::size_t>(shapes));
  std::string rejected;
  for (int id = 0; id < shapes; ++id) {
    const double diff = std::remainder(angle[id] - reference, 2.0 * std::numbers::pi);
    const double offset = 0.5 * diff * 180.0 / std::numbers::pi;
    stats.valley_offset_deg[id] = offset;
    if (std::abs(offset) > phase_tolerance_deg) {
      rejected += (rejected.empty() ? "" : ", ") + std::to_string(id);
    }
  }
  if (!rejected.empty()) {
    throw DataError("minimum-noise phase drifts beyond " + std::to_string(phase_tolerance_deg) +
                    " deg for shape ids: " + rejected);
  }
  return stats;
}

CovarianceState assemble_covariance(int n, const Eigen::VectorXd& powers, const Eigen::VectorXd& levels_x,
                                    const Eigen::VectorXd& levels_p) {
  const int shapes = shape_count(n);
  if (powers.size() != n || levels_x.size() != shapes || levels_p.size() != shapes) {
    throw DataError("assembly input sizes do not match " + std::to_string(n) + " bands");
  }
  auto block = [&](const Eigen::VectorXd& levels) {
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i) c(i, i) = levels(shape_id(n, i, i));
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double pi = powers(i);
        const double pj = powers(j);
        const double total = pi + pj;
        const double s = levels(shape_id(n, i, j));
        const double value =
            (s - pi / total * c(i, i) - pj / total * c(j, j)) * total / (2.0 * std::sqrt(pi * pj));
        c(i, j) = value;
        c(j, i) = value;
      }
    }
    return c;
  };
  return CovarianceState(block(levels_x), block(levels_p));
}

CovarianceState assemble_covariance(const BundleStats& stats) {
  const int shapes = shape_count(stats.n_bands);
  Eigen::VectorXd lx(shapes);
  Eigen::VectorXd lp(shapes);
  for (int id = 0; id < shapes; ++id) {
    lx(id) = db_to_linear(stats.shapes[id].mean_valley_db);
    lp(id) = db_to_linear(stats.shapes[id].mean_peak_db);
  }
  return assemble_covariance(stats.n_bands, stats.band_powers, lx, lp);
}

Eigen::VectorXd shape_levels(const CovarianceState& state, const Eigen::VectorXd& powers, Quadrature q) {
  const int n = state.n_bands();
  if (powers.size() != n) throw DataError("band powers do not match the state");
  const Eigen::MatrixXd& c = state.block(q);
  Eigen::VectorXd out(shape_count(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
      l(i) += std::sqrt(powers(i));
      if (j != i) l(j) += std::sqrt(powers(j));
      l /= l.norm();
      out(shape_id(n, i, j)) = l.dot(c * l);
    }
  }
  return out;
}

std::vector<CovarianceState> monte_carlo_covariances(const BundleStats& stats, int n_samples,
                                                     std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("Monte Carlo needs at least one sample");
  const int n = stats.n_bands;
  const int shapes = shape_count(n);
  std::vector<CovarianceState> out(static_cast<std::size_t>(n_samples), CovarianceState::vacuum(n));
  parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd lx(shapes);
    Eigen::VectorXd lp(shapes);
    for (int id = 0; id < shapes; ++id) {
      const auto& e = stats.shapes[id];
      lx(id) = db_to_linear(e.mean_valley_db + std::sqrt(e.var_valley) * normal(rng));
      lp(id) = db_to_linear(e.mean_peak_db + std::sqrt(e.var_peak) * normal(rng));
    }
    out[s] = assemble_covariance(n, stats.band_powers, lx, lp);
  });
  return out;
}

namespace {

struct Candidate {
  Quadrature block;
  Eigen::VectorXd vector;
  double robustness = 0.0;
  double deviation = 0.0;  // |mean eigenvalue - 1|
  int dominant = 0;
};

int dominant_index(const Eigen::VectorXd& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  return static_cast<int>(idx);
}

void fix_sign(Eigen::VectorXd& v) {
  const double largest = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) >= largest * (1.0 - 1e-9)) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

ModeExtraction extract_modes(const std::vector<CovarianceState>& samples, int k) {
  if (samples.empty()) throw DataError("mode extraction needs at least one sample");
  const int n = samples.front().n_bands();
  if (k < 1 || k > n) {
    throw ConfigError("k_modes = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  const std::size_t count = samples.size();
  Eigen::MatrixXd mean_x = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd mean_p = Eigen::MatrixXd::Zero(n, n);
  for (const auto& s : samples) {
    if (s.n_bands() != n) throw DataError("samples have different band counts");
    mean_x += s.cx();
    mean_p += s.cp();
  }
  mean_x /= static_cast<double>(count);
  mean_p /= static_cast<double>(count);

  std::vector<Candidate> candidates;
  for (Quadrature q : {Quadrature::x, Quadrature::p}) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(q == Quadrature::x ? mean_x : mean_p);
    for (int c = 0; c < n; ++c) {
      Candidate cand;
      cand.block = q;
      cand.vector = solver.eigenvectors().col(c);
      cand.dominant = dominant_index(cand.vector);
      candidates.push_back(std::move(cand));
    }
  }

  // Eigenvalue tracked by each candidate in each sample.
  const int n_cand = static_cast<int>(candidates.size());
  Eigen::MatrixXd tracked(static_cast<Eigen::Index>(count), n_cand);
  parallel_for(count, [&](std::size_t s) {
    for (Quadrature q : {Quadrature::x, Quadrature::p}) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(samples[s].block(q));
      for (int c = 0; c < n_cand; ++c) {
        if (candidates[c].block != q) continue;
        Eigen::Index best = 0;
        (solver.eigenvectors().transpose() * candidates[c].vector).cwiseAbs().maxCoeff(&best);
        tracked(static_cast<Eigen::Index>(s), c) = solver.eigenvalues()(best);
      }
    }
  });
  for (int c = 0; c < n_cand; ++c) {
    const Eigen::VectorXd col = tracked.col(c);
    const double mean = col.mean();
    const double mean_abs = (col.array() - 1.0).abs().mean();
    const double sd =
        count > 1 ? std::sqrt((col.array() - mean).square().sum() / static_cast<double>(count - 1)) : 0.0;
    candidates[c].deviation = std::abs(mean - 1.0);
    if (sd > 0.0) {
      candidates[c].robustness = mean_abs / sd;
    } else {
      candidates[c].robustness = mean_abs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n_cand));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = candidates[a];
    const auto& cb = candidates[b];
    if (ca.robustness != cb.robustness) return ca.robustness > cb.robustness;
    if (ca.deviation != cb.deviation) return ca.deviation > cb.deviation;
    if (ca.block != cb.block) return ca.block == Quadrature::x;
    return ca.dominant < cb.dominant;
  });

  // Gram-Schmidt in rank order. Candidates mostly inside the span already
  // accepted are skipped; the twice-applied projection keeps the basis
  // orthonormal to rounding.
  std::vector<Eigen::VectorXd> basis;
  std::vector<bool> used(static_cast<std::size_t>(n_cand), false);
  auto residual = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) r -= b.dot(r) * b;
    return r;
  };
  for (int idx : order) {
    if (static_cast<int>(basis.size()) == k) break;
    const Eigen::VectorXd r = residual(candidates[idx].vector);
    if (r.norm() >= 0.5) {
      basis.push_back(r / r.norm());
      used[idx] = true;
    }
  }
  while (static_cast<int>(basis.size()) < k) {
    int best = -1;
    double best_norm = 0.0;
    for (int idx : order) {
      if (used[idx]) continue;
      const double norm = residual(candidates[idx].vector).norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = idx;
      }
    }
    if (best < 0 || best_norm < 1e-8) throw DataError("Gram-Schmidt basis is rank deficient");
    const Eigen::VectorXd r = residual(candidates[best].vector);
    basis.push_back(r / r.norm());
    used[best] = true;
  }
  std::vector<double> robustness_of_basis;
  for (int idx : order)
    if (used[idx]) robustness_of_basis.push_back(candidates[idx].robustness);

  Eigen::MatrixXd modes(n, k);
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd v = basis[static_cast<std::size_t>(c)];
    fix_sign(v);
    modes.col(c) = v;
  }

  Eigen::MatrixXd dx(static_cast<Eigen::Index>(count), k);
  Eigen::MatrixXd dp(static_cast<Eigen::Index>(count), k);
  for (std::size_t s = 0; s < count; ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    dx.row(row) = (modes.transpose() * samples[s].cx() * modes).diagonal().transpose();
    dp.row(row) = (modes.transpose() * samples[s].cp() * modes).diagonal().transpose();
  }
  auto stat = [&](const Eigen::VectorXd& col) {
    const double mean = col.mean();
    const double sd =
        count > 1 ? std::sqrt((col.array() - mean).square().sum() / static_cast<double>(count - 1)) : 0.0;
    return std::pair{mean, sd};
  };

  std::vector<ModeStatistic> stats(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto [mx, sx] = stat(dx.col(c));
    const auto [mp, sp] = stat(dp.col(c));
    ModeStatistic& m = stats[static_cast<std::size_t>(c)];
    const bool x_squeezed = mx <= mp;
    m.quadrature = x_squeezed ? Quadrature::x : Quadrature::p;
    m.mean = x_squeezed ? mx : mp;
    m.sigma = x_squeezed ? sx : sp;
    m.anti_mean = x_squeezed ? mp : mx;
    m.anti_sigma = x_squeezed ? sp : sx;
    m.robustness = robustness_of_basis[static_cast<std::size_t>(c)];
  }

  std::vector<int> by_squeezing(static_cast<std::size_t>(k));
  std::iota(by_squeezing.begin(), by_squeezing.end(), 0);
  std::stable_sort(by_squeezing.begin(), by_squeezing.end(),
                   [&](int a, int b) { return stats[a].mean < stats[b].mean; });

  ModeExtraction out;
  out.modes.resize(n, k);
  for (int c = 0; c < k; ++c) {
    out.modes.col(c) = modes.col(by_squeezing[c]);
    out.squeezing.push_back(stats[by_squeezing[c]]);
  }
  out.nonclassical_count = count_nonclassical(out);
  return out;
}

int count_nonclassical(const ModeExtraction& extraction) {
  return static_cast<int>(std::count_if(extraction.squeezing.begin(), extraction.squeezing.end(),
                                        [](const ModeStatistic& m) { return m.mean + 2.0 * m.sigma < 1.0; }));
}

NoiseTrace synthesize_trace(int n_bands, int band_i, int band_j, const std::vector<double>& valleys_db,
                            const std::vector<double>& peaks_db, int samples_per_period) {
  if (samples_per_period < 4 || samples_per_period % 4 != 0) {
    throw ConfigError("samples_per_period must be a positive multiple of 4");
  }
  if (valleys_db.empty() || valleys_db.size() != peaks_db.size()) {
    throw ConfigError("need the same nonzero number of valley and peak levels");
  }
  const int periods = static_cast<int>(valleys_db.size());
  const int quarter = samples_per_period / 4;

  // Extremum e sits at sample quarter * (2e + 1); a virtual peak before the
  // start and a virtual valley after the end shape the two end segments.
  std::vector<double> levels;
  levels.push_back(peaks_db.front());
  for (int v = 0; v < periods; ++v) {
    levels.push_back(valleys_db[v]);
    levels.push_back(peaks_db[v]);
  }
  levels.push_back(valleys_db.back());

  NoiseTrace t;
  t.band_i = std::min(band_i, band_j);
  t.band_j = std::max(band_i, band_j);
  t.shape_id = shape_id(n_bands, t.band_i, t.band_j);
  const int total = periods * samples_per_period + 1;
  t.phase.resize(static_cast<std::size_t>(total));
  t.power_db.resize(static_cast<std::size_t>(total));
  for (int s = 0; s < total; ++s) {
    // Virtual extremum -1 sits at sample -quarter.
    const int shifted = s + quarter;
    const int seg = shifted / (2 * quarter);
    const double u = static_cast<double>(shifted - seg * 2 * quarter) / (2 * quarter);
    const double a = levels[static_cast<std::size_t>(seg)];
    const double b = levels[std::min(levels.size() - 1, static_cast<std::size_t>(seg) + 1)];
    t.power_db[s] = a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * u));
    t.phase[s] = -0.25 * std::numbers::pi + std::numbers::pi * s / samples_per_period;
  }
  return t;
}

TraceBundle synthesize_bundle(const CovarianceState& state, const Eigen::VectorXd& band_powers, int periods,
                              int samples_per_period) {
  const int n = state.n_bands();
  const Eigen::VectorXd lx = shape_levels(state, band_powers, Quadrature::x);
  const Eigen::VectorXd lp = shape_levels(state, band_powers, Quadrature::p);
  TraceBundle bundle;
  bundle.n_bands = n;
  bundle.band_powers = band_powers;
  for (int id = 0; id < shape_count(n); ++id) {
    if (!(lx(id) > 0.0) || !(lp(id) > lx(id))) {
      throw DataError("shape " + std::to_string(id) +
                      " has no x < p noise ordering; valley/peak traces cannot encode it");
    }
    const auto [i, j] = shape_bands(n, id);
    bundle.traces.push_back(synthesize_trace(n, i, j, std::vector<double>(periods, linear_to_db(lx(id))),
                                             std::vector<double>(periods, linear_to_db(lp(id))),
                                             samples_per_period));
  }
  return bundle;
}

}  // namespace spopo
