#pragma once

// Run configuration: model, band partition and analysis options.

#include "spopo/comb_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spopo {

inline constexpr double kSpeedOfLight = 299792458.0;

struct PumpConfig {
  PumpShape shape = PumpShape::gaussian;
  double fwhm_nm = 2.12;  ///< power FWHM at the pump wavelength
};

struct PhaseMatchingConfig {
  PhaseMatchingShape shape = PhaseMatchingShape::flat;
  double width_hz = 0.0;  ///< in the signal-idler frequency difference
};

struct OpoConfig {
  bool calibrate = false;
  double pump_ratio = 0.5;
  double efficiency = 0.75;
  double squeezing_db = -5.9;
  double antisqueezing_db = 7.8;
};

struct BandsConfig {
  int count = 10;
  double lo_fwhm_nm = 6.0;
  double gap_fraction = 0.05;
  std::vector<double> band_efficiency;  ///< extra per-band loss; empty means none
};

struct AnalysisConfig {
  int mc_samples = 10000;
  std::uint64_t seed = 1;
  int k_modes = 10;
  double min_prominence_db = 0.5;
  double smoothing_fraction = 0.01;
  double phase_tolerance_deg = 10.0;
  double entanglement_epsilon = 1e-9;
  int witness_samples = 1000;
  double detection_efficiency = 0.75;  ///< used for the loss-corrected report block
  int trace_periods = 4;
  int samples_per_period = 400;
};

struct RunConfig {
  double center_wavelength_nm = 795.0;
  double fsr_hz = 76e6;
  int lines_per_mode = 1168;  ///< comb lines merged into one model mode
  int n_modes = 201;
  PumpConfig pump;
  PhaseMatchingConfig phase_matching;
  OpoConfig opo;
  BandsConfig bands;
  AnalysisConfig analysis;
  std::string output_dir = "out";

  [[nodiscard]] double center_frequency_hz() const;
  [[nodiscard]] double mode_spacing_hz() const;
  [[nodiscard]] FrequencyGrid grid() const;
  [[nodiscard]] PumpSpectrum pump_spectrum() const;
  [[nodiscard]] PhaseMatching phase_matching_envelope() const;
  /// Power FWHM of the LO in Hz.
  [[nodiscard]] double lo_fwhm_hz() const;

  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

/// Wavelength FWHM (nm) at `wavelength_nm` to frequency FWHM (Hz).
[[nodiscard]] double nm_width_to_hz(double width_nm, double wavelength_nm);

/// Parses and validates a JSON config. Unknown keys and bad values raise
/// ConfigError with "<source>:<line>: " in front of the message.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& source = "config");
[[nodiscard]] RunConfig load_config(const std::string& path);

/// The configuration as canonical JSON text (all fields, fixed key order).
[[nodiscard]] std::string config_to_json(const RunConfig& config);

/// FNV-1a 64-bit hash of the canonical JSON (output_dir excluded), as 16 hex digits.
[[nodiscard]] std::string config_hash(const RunConfig& config);

}  // namespace spopo
