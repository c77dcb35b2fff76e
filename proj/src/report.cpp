#include "spopo/report.hpp"

#include "spopo/errors.hpp"
#include "spopo/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <limits>
#include <sstream>

namespace spopo {

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

Simulation simulate(const RunConfig& config) {
  config.validate();
  const FrequencyGrid grid = config.grid();
  SupermodeSet modes = diagonalize(build_coupling(grid, config.pump_spectrum(), config.phase_matching_envelope()));
  const Eigen::VectorXd lo = gaussian_lo_amplitude(grid, config.lo_fwhm_hz());

  double pump_ratio = config.opo.pump_ratio;
  double efficiency = config.opo.efficiency;
  if (config.opo.calibrate) {
    const PumpCalibration cal = calibrate_pump(modes, lo, config.opo.squeezing_db, config.opo.antisqueezing_db);
    pump_ratio = cal.pump_ratio;
    efficiency = cal.efficiency;
  }
  SqueezingSpectrum spectrum = squeezing_from_eigenvalues(modes, pump_ratio, efficiency);
  BandPartition partition =
      BandPartition::equal_energy(grid, lo, config.bands.count, config.bands.gap_fraction);
  CovarianceState state = project_to_bands(modes, spectrum, partition);
  if (!config.bands.band_efficiency.empty()) {
    const Eigen::VectorXd eta = Eigen::Map<const Eigen::VectorXd>(
        config.bands.band_efficiency.data(), static_cast<Eigen::Index>(config.bands.band_efficiency.size()));
    state = apply_loss(state, eta);
  }
  const double vx = homodyne_variance(modes, spectrum, lo, Quadrature::x);
  const double vp = homodyne_variance(modes, spectrum, lo, Quadrature::p);
  return Simulation{config,
                    std::move(modes),
                    std::move(spectrum),
                    std::move(partition),
                    std::move(state),
                    config.opo.calibrate,
                    linear_to_db(std::min(vx, vp)),
                    linear_to_db(std::max(vx, vp))};
}

Json write_simulation(const Simulation& sim, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int k_csv = std::min(sim.modes.size(), 20);
  write_supermodes_csv(join_path(dir, "supermodes.csv"), sim.modes, k_csv);
  write_text(join_path(dir, "eigenvalues.json"), eigenvalues_json(sim.modes).dump(2) + "\n");

  Json meta;
  meta["source"] = "simulation";
  meta["config_hash"] = config_hash(sim.config);
  meta["pump_ratio"] = sim.spectrum.pump_ratio;
  meta["efficiency"] = sim.spectrum.efficiency;
  meta["band_energies"] = vector_to_json(sim.partition.band_energies());
  meta["gap_fraction"] = sim.partition.gap_fraction();
  meta["gap_loss"] = "modelled: LO amplitude is zero in the gaps; not corrected";
  write_state(join_path(dir, "state.json"), sim.state, meta);
  write_matrix_csv(join_path(dir, "state_cx.csv"), sim.state.cx());
  write_matrix_csv(join_path(dir, "state_cp.csv"), sim.state.cp());
  write_matrix_csv(join_path(dir, "correlation_x.csv"), correlation_matrix(sim.state, Quadrature::x));
  write_matrix_csv(join_path(dir, "correlation_p.csv"), correlation_matrix(sim.state, Quadrature::p));

  Json sq;
  sq["pump_ratio"] = sim.spectrum.pump_ratio;
  sq["efficiency"] = sim.spectrum.efficiency;
  sq["calibrated"] = sim.calibrated;
  sq["unshaped_lo_squeezing_db"] = sim.lo_squeezing_db;
  sq["unshaped_lo_antisqueezing_db"] = sim.lo_antisqueezing_db;
  Json modes = Json::array();
  for (int k = 0; k < k_csv; ++k) {
    const auto& m = sim.spectrum.modes[static_cast<std::size_t>(k)];
    modes.push_back({{"index", k},
                     {"eigenvalue", sim.modes.eigenvalue(k)},
                     {"quadrature", to_string(m.squeezed)},
                     {"v_minus", m.v_minus},
                     {"v_plus", m.v_plus},
                     {"squeezing_db", linear_to_db(m.v_minus)},
                     {"antisqueezing_db", linear_to_db(m.v_plus)}});
  }
  sq["modes"] = modes;
  write_text(join_path(dir, "squeezing.json"), sq.dump(2) + "\n");

  Json summary;
  summary["n_bands"] = sim.state.n_bands();
  summary["pump_ratio"] = sim.spectrum.pump_ratio;
  summary["efficiency"] = sim.spectrum.efficiency;
  const Eigen::VectorXd powers = sim.partition.band_energies();
  try {
    const TraceBundle bundle = synthesize_bundle(sim.state, powers, sim.config.analysis.trace_periods,
                                                 sim.config.analysis.samples_per_period);
    write_traces_csv(join_path(dir, "traces.csv"), bundle);
    write_band_powers(join_path(dir, "band_powers.json"), powers, Json{{"source", "simulation"}});
    summary["traces"] = "written";
  } catch (const DataError& e) {
    summary["traces"] = std::string("skipped: ") + e.what();
  }
  return summary;
}

BipartitionScan run_witness(const CovarianceState& state, double epsilon, const std::string& dir) {
  double min_nu = nan();
  try {
    min_nu = state.min_symplectic_eigenvalue();
  } catch (const PhysicalityError&) {
    throw PhysicalityError("state is unphysical: a covariance block is not positive definite", nan());
  }
  if (min_nu < 1.0 - 1e-9) {
    std::ostringstream msg;
    msg << "state is unphysical: smallest symplectic eigenvalue " << min_nu << " < 1";
    throw PhysicalityError(msg.str(), min_nu);
  }
  BipartitionScan scan = scan_bipartitions(state, epsilon);
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    write_text(join_path(dir, "scan.json"), scan_to_json(scan).dump(2) + "\n");
    write_scan_csv(join_path(dir, "scan.csv"), scan);
    Json summary = scan_summary_json(scan);
    summary["min_symplectic_eigenvalue"] = min_nu;
    write_text(join_path(dir, "scan_summary.json"), summary.dump(2) + "\n");
  }
  return scan;
}

IngestOptions IngestOptions::from_config(const RunConfig& config) {
  const auto& a = config.analysis;
  IngestOptions o;
  o.extrema.smoothing_fraction = a.smoothing_fraction;
  o.extrema.min_prominence_db = a.min_prominence_db;
  o.phase_tolerance_deg = a.phase_tolerance_deg;
  o.mc_samples = a.mc_samples;
  o.seed = a.seed;
  o.k_modes = a.k_modes;
  o.epsilon = a.entanglement_epsilon;
  o.witness_samples = a.witness_samples;
  o.detection_efficiency = a.detection_efficiency;
  return o;
}

namespace {

// Nearest-rank percentile; NaN entries count as +infinity.
double percentile(std::vector<double> v, double q) {
  for (double& x : v)
    if (std::isnan(x)) x = std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

template <typename F>
double guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception&) {
    return nan();
  }
}

}  // namespace

MeasuredScan measured_scan(const CovarianceState& mean_state, const std::vector<CovarianceState>& samples,
                           double epsilon) {
  MeasuredScan out;
  out.scan = scan_bipartitions(mean_state, epsilon);
  const std::size_t rows = out.scan.reports.size();
  out.ppt_nu_p95.resize(rows);
  out.epr_p95.resize(rows);
  out.duan_p95.resize(rows);
  const int n = mean_state.n_bands();
  parallel_for(rows, [&](std::size_t r) {
    const Bipartition part(n, out.scan.reports[r].partition_mask);
    std::vector<double> nu(samples.size());
    std::vector<double> epr(samples.size());
    std::vector<double> du(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
      nu[s] = guarded([&] { return ppt_min_symplectic(samples[s], part); });
      epr[s] = guarded([&] { return epr_product(samples[s], part); });
      du[s] = guarded([&] { return duan(samples[s], part); });
    }
    out.ppt_nu_p95[r] = percentile(std::move(nu), 0.95);
    out.epr_p95[r] = percentile(std::move(epr), 0.95);
    out.duan_p95[r] = percentile(std::move(du), 0.95);
    out.scan.reports[r].flags = witness_flags(out.duan_p95[r], out.epr_p95[r], out.ppt_nu_p95[r], epsilon);
  });
  out.scan.recount();
  return out;
}

IngestResult ingest(const TraceBundle& bundle, const IngestOptions& options) {
  BundleStats stats = analyze_bundle(bundle, options.extrema, options.phase_tolerance_deg);
  CovarianceState mean_state = assemble_covariance(stats);
  std::vector<std::string> warnings;

  double min_nu = nan();
  try {
    min_nu = mean_state.min_symplectic_eigenvalue();
  } catch (const PhysicalityError&) {
    warnings.push_back("assembled state has a covariance block that is not positive definite");
  }
  if (!std::isnan(min_nu) && min_nu < 1.0 - 0.2) {
    std::ostringstream msg;
    msg << "assembled state is strongly unphysical: smallest symplectic eigenvalue " << min_nu;
    warnings.push_back(msg.str());
  }

  const std::vector<CovarianceState> samples = monte_carlo_covariances(stats, options.mc_samples, options.seed);
  ModeExtraction extraction = extract_modes(samples, options.k_modes);

  const std::size_t n_witness = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(options.witness_samples));
  const std::vector<CovarianceState> witness_samples(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_witness));
  MeasuredScan scan = measured_scan(mean_state, witness_samples, options.epsilon);

  const double p = purity(mean_state);
  std::vector<double> ps;
  for (const auto& s : samples) {
    const double v = guarded([&] { return purity(s); });
    if (!std::isnan(v)) ps.push_back(v);
  }
  double p_sigma = 0.0;
  if (ps.size() > 1) {
    double m = 0.0;
    for (double v : ps) m += v;
    m /= static_cast<double>(ps.size());
    double ss = 0.0;
    for (double v : ps) ss += (v - m) * (v - m);
    p_sigma = std::sqrt(ss / static_cast<double>(ps.size() - 1));
  }

  BlockCommutator comm = block_commutator(mean_state);
  return IngestResult{std::move(stats), std::move(mean_state), std::move(extraction), std::move(scan),
                      p, p_sigma, min_nu, std::move(comm), std::move(warnings)};
}

CovarianceState correct_detection_loss(const CovarianceState& state, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("detection efficiency must lie in (0, 1]");
  const int n = state.n_bands();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  return CovarianceState((state.cx() - (1.0 - eta) * id) / eta, (state.cp() - (1.0 - eta) * id) / eta);
}

namespace {

Json witness_summary(const BipartitionScan& scan) {
  Json j = scan_summary_json(scan);
  if (!scan.reports.empty()) {
    const auto& best = scan.reports.front();
    j["best_bipartition"] = {{"partition_mask", best.partition_mask},
                             {"duan", best.duan},
                             {"epr", best.epr},
                             {"ppt_nu_min", best.ppt_nu_min}};
  }
  return j;
}

Json spectrum_json(const ModeExtraction& e, double eta) {
  Json arr = Json::array();
  for (const auto& m : e.squeezing) {
    const double mean = (m.mean - (1.0 - eta)) / eta;
    const double anti = (m.anti_mean - (1.0 - eta)) / eta;
    arr.push_back({{"quadrature", to_string(m.quadrature)},
                   {"mean", mean},
                   {"sigma", m.sigma / eta},
                   {"antisqueezing_mean", anti},
                   {"antisqueezing_sigma", m.anti_sigma / eta}});
  }
  return arr;
}

Json state_block(const CovarianceState& state, double epsilon) {
  Json j;
  double min_nu = nan();
  try {
    min_nu = state.min_symplectic_eigenvalue();
    j["min_symplectic_eigenvalue"] = min_nu;
    j["physical"] = min_nu >= 1.0 - 1e-9;
  } catch (const PhysicalityError&) {
    j["min_symplectic_eigenvalue"] = nullptr;
    j["physical"] = false;
  }
  j["commutator_max_abs"] = block_commutator(state).max_abs;
  try {
    j["purity"] = purity(state);
    j["witnesses"] = witness_summary(scan_bipartitions(state, epsilon));
  } catch (const PhysicalityError& e) {
    j["purity"] = nullptr;
    j["witnesses"] = {{"error", e.what()}};
  }
  return j;
}

}  // namespace

Json ingest_report(const IngestResult& r, const IngestOptions& o, const std::string& hash,
                   const std::string& timestamp) {
  Json report;
  Json prov;
  prov["tool"] = "spopo";
  prov["version"] = kToolVersion;
  prov["config_hash"] = hash;
  prov["seed"] = o.seed;
  prov["mc_samples"] = o.mc_samples;
  prov["witness_samples"] = std::min(o.mc_samples, o.witness_samples);
  prov["k_modes"] = o.k_modes;
  prov["detection_efficiency"] = o.detection_efficiency;
  prov["sigma_convention"] = "standard deviation over Monte Carlo samples (ddof = 1)";
  prov["witness_flag_rule"] = "95th percentile over Monte Carlo samples below the bound";
  prov["gap_loss"] = "spectral gaps between bands are not corrected";
  if (!timestamp.empty()) prov["timestamp"] = timestamp;
  report["provenance"] = prov;

  Json unc;
  unc["label"] = "uncorrected: as measured";
  unc["min_symplectic_eigenvalue"] = std::isnan(r.min_nu) ? Json(nullptr) : Json(r.min_nu);
  unc["purity"] = r.purity;
  unc["purity_sigma"] = r.purity_sigma;
  unc["commutator_max_abs"] = r.commutator.max_abs;
  Json w = witness_summary(r.witnesses.scan);
  w["flag_rule"] = "95th percentile";
  unc["witnesses"] = w;
  unc["squeezing"] = spectrum_json(r.extraction, 1.0);
  unc["nonclassical_count"] = r.extraction.nonclassical_count;
  report["uncorrected"] = unc;

  const double eta = o.detection_efficiency;
  Json cor = state_block(correct_detection_loss(r.mean_state, eta), o.epsilon);
  cor["label"] = "corrected: uniform detection efficiency removed";
  cor["detection_efficiency"] = eta;
  cor["witness_flag_rule"] = "point values of the corrected mean state";
  cor["squeezing"] = spectrum_json(r.extraction, eta);
  cor["nonclassical_count"] = r.extraction.nonclassical_count;
  report["corrected"] = cor;

  report["warnings"] = r.warnings;
  return report;
}

void write_ingest_outputs(const IngestResult& r, const Json& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_text(join_path(dir, "report.json"), report.dump(2) + "\n");
  write_text(join_path(dir, "extraction.json"), extraction_to_json(r.extraction).dump(2) + "\n");
  write_state(join_path(dir, "state.json"), r.mean_state, Json{{"source", "assembled from mean trace levels"}});
  try {
    write_matrix_csv(join_path(dir, "correlation_x.csv"), correlation_matrix(r.mean_state, Quadrature::x));
    write_matrix_csv(join_path(dir, "correlation_p.csv"), correlation_matrix(r.mean_state, Quadrature::p));
  } catch (const DataError&) {
    // degenerate diagonal; the report already carries the state
  }

  std::ostringstream spec;
  spec << "mode,quadrature,mean,sigma,antisqueezing_mean,antisqueezing_sigma\n";
  for (std::size_t k = 0; k < r.extraction.squeezing.size(); ++k) {
    const auto& m = r.extraction.squeezing[k];
    spec << k + 1 << ',' << to_string(m.quadrature) << ',' << m.mean << ',' << m.sigma << ',' << m.anti_mean
         << ',' << m.anti_sigma << '\n';
  }
  write_text(join_path(dir, "spectrum.csv"), spec.str());

  std::ostringstream levels;
  levels << "shape_id,band_i,band_j,mean_valley_db,var_valley,mean_peak_db,var_peak,valley_offset_deg\n";
  for (std::size_t id = 0; id < r.stats.shapes.size(); ++id) {
    const auto [i, j] = shape_bands(r.stats.n_bands, static_cast<int>(id));
    const auto& s = r.stats.shapes[id];
    levels << id << ',' << i << ',' << j << ',' << s.mean_valley_db << ',' << s.var_valley << ','
           << s.mean_peak_db << ',' << s.var_peak << ',' << r.stats.valley_offset_deg[id] << '\n';
  }
  write_text(join_path(dir, "levels.csv"), levels.str());

  std::ostringstream scan;
  scan << "rank,partition_mask,duan,epr,ppt_nu_min,duan_p95,epr_p95,ppt_nu_p95,entangled_ppt,entangled_epr\n";
  for (std::size_t k = 0; k < r.witnesses.scan.reports.size(); ++k) {
    const auto& rep = r.witnesses.scan.reports[k];
    scan << k << ',' << rep.partition_mask << ',' << rep.duan << ',' << rep.epr << ',' << rep.ppt_nu_min << ','
         << r.witnesses.duan_p95[k] << ',' << r.witnesses.epr_p95[k] << ',' << r.witnesses.ppt_nu_p95[k] << ','
         << rep.flags.entangled_ppt << ',' << rep.flags.entangled_epr << '\n';
  }
  write_text(join_path(dir, "scan.csv"), scan.str());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace spopo
