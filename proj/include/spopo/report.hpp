#pragma once

// End-to-end runs behind the command-line subcommands.

#include "spopo/config.hpp"
#include "spopo/gaussian_state.hpp"
#include "spopo/io.hpp"
#include "spopo/pipeline.hpp"
#include "spopo/witnesses.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spopo {

struct Simulation {
  RunConfig config;
  SupermodeSet modes;
  SqueezingSpectrum spectrum;
  BandPartition partition;
  CovarianceState state;  ///< band state, including optional per-band loss
  bool calibrated = false;
  /// Unshaped-LO levels of the simulated OPO (dB).
  double lo_squeezing_db = 0.0;
  double lo_antisqueezing_db = 0.0;
};

[[nodiscard]] Simulation simulate(const RunConfig& config);

/// Writes supermodes.csv, eigenvalues.json, state.json, state_cx.csv,
/// state_cp.csv, squeezing.json, correlation_x.csv, correlation_p.csv,
/// traces.csv and band_powers.json into `dir`. Returns a summary.
Json write_simulation(const Simulation& sim, const std::string& dir);

/// Scan plus the files scan.json, scan.csv and scan_summary.json.
/// Refuses unphysical states with a PhysicalityError carrying nu_min.
BipartitionScan run_witness(const CovarianceState& state, double epsilon, const std::string& dir);

struct IngestOptions {
  ExtremaOptions extrema;
  double phase_tolerance_deg = 10.0;
  int mc_samples = 10000;
  std::uint64_t seed = 1;
  int k_modes = 10;
  double epsilon = 1e-9;
  int witness_samples = 1000;
  double detection_efficiency = 0.75;

  static IngestOptions from_config(const RunConfig& config);
};

/// Witness values from the mean-level state, with flags decided on the
/// 95th percentile of each value over Monte Carlo samples.
struct MeasuredScan {
  BipartitionScan scan;
  std::vector<double> ppt_nu_p95;  ///< aligned with scan.reports
  std::vector<double> epr_p95;
  std::vector<double> duan_p95;
};

struct IngestResult {
  BundleStats stats;
  CovarianceState mean_state;
  ModeExtraction extraction;
  MeasuredScan witnesses;
  double purity = 0.0;
  double purity_sigma = 0.0;
  double min_nu = 0.0;  ///< NaN when a block is not positive definite
  BlockCommutator commutator;
  std::vector<std::string> warnings;
};

[[nodiscard]] MeasuredScan measured_scan(const CovarianceState& mean_state,
                                         const std::vector<CovarianceState>& samples, double epsilon);

[[nodiscard]] IngestResult ingest(const TraceBundle& bundle, const IngestOptions& options);

/// Undoes a uniform detection efficiency: (C - (1 - eta) I) / eta.
[[nodiscard]] CovarianceState correct_detection_loss(const CovarianceState& state, double eta);

/// Report JSON with labelled "uncorrected" and "corrected" blocks and a
/// provenance block. `timestamp` may be empty to omit it.
[[nodiscard]] Json ingest_report(const IngestResult& result, const IngestOptions& options,
                                 const std::string& config_hash, const std::string& timestamp);

/// Writes report.json, extraction.json and the plot CSVs into `dir`.
void write_ingest_outputs(const IngestResult& result, const Json& report, const std::string& dir);

[[nodiscard]] std::string utc_timestamp();

}  // namespace spopo
