#include "spopo/config.hpp"

#include "spopo/errors.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace spopo {

using nlohmann::json;

double nm_width_to_hz(double width_nm, double wavelength_nm) {
  return kSpeedOfLight * width_nm * 1e-9 / (wavelength_nm * 1e-9 * wavelength_nm * 1e-9);
}

double RunConfig::center_frequency_hz() const { return kSpeedOfLight / (center_wavelength_nm * 1e-9); }

double RunConfig::mode_spacing_hz() const { return fsr_hz * lines_per_mode; }

FrequencyGrid RunConfig::grid() const {
  return FrequencyGrid(center_frequency_hz(), mode_spacing_hz(), (n_modes - 1) / 2);
}

PumpSpectrum RunConfig::pump_spectrum() const {
  const double center = 2.0 * center_frequency_hz();
  if (pump.shape == PumpShape::single_line) return PumpSpectrum::single_line(center);
  return PumpSpectrum::gaussian(center, nm_width_to_hz(pump.fwhm_nm, 0.5 * center_wavelength_nm));
}

PhaseMatching RunConfig::phase_matching_envelope() const {
  switch (phase_matching.shape) {
    case PhaseMatchingShape::gaussian:
      return PhaseMatching::gaussian(phase_matching.width_hz);
    case PhaseMatchingShape::sinc:
      return PhaseMatching::sinc(phase_matching.width_hz);
    case PhaseMatchingShape::flat:
      break;
  }
  return PhaseMatching::flat();
}

double RunConfig::lo_fwhm_hz() const { return nm_width_to_hz(bands.lo_fwhm_nm, center_wavelength_nm); }

namespace {

struct Problem {
  std::vector<std::string> path;
  std::string message;
  bool above_threshold = false;
};

bool positive(double v) { return v > 0.0 && std::isfinite(v); }

std::optional<Problem> first_problem(const RunConfig& c) {
  using P = std::vector<std::string>;
  if (!positive(c.center_wavelength_nm)) return Problem{P{"center_wavelength_nm"}, "must be positive"};
  if (!positive(c.fsr_hz)) return Problem{P{"fsr_hz"}, "must be positive"};
  if (c.lines_per_mode < 1) return Problem{P{"lines_per_mode"}, "must be at least 1"};
  if (c.n_modes < 3 || c.n_modes % 2 == 0) {
    return Problem{P{"n_modes"}, "must be an odd number >= 3 (grid symmetric about the carrier)"};
  }
  if (c.n_modes > 4001) return Problem{P{"n_modes"}, "must not exceed 4001 (dense eigensolve)"};
  if (c.pump.shape == PumpShape::gaussian && !positive(c.pump.fwhm_nm)) {
    return Problem{P{"pump", "fwhm_nm"}, "must be positive for a gaussian pump"};
  }
  if (c.phase_matching.shape != PhaseMatchingShape::flat && !positive(c.phase_matching.width_hz)) {
    return Problem{P{"phase_matching", "width"}, "must be positive for gaussian or sinc phase matching"};
  }
  if (c.opo.calibrate) {
    if (!(c.opo.squeezing_db < 0.0)) return Problem{P{"opo", "calibrate", "squeezing_db"}, "must be negative"};
    if (!(c.opo.antisqueezing_db > -c.opo.squeezing_db)) {
      return Problem{P{"opo", "calibrate", "antisqueezing_db"},
                     "must be positive and larger in magnitude than squeezing_db"};
    }
  } else {
    if (!(c.opo.pump_ratio >= 0.0)) return Problem{P{"opo", "pump_ratio"}, "must be non-negative"};
    if (c.opo.pump_ratio >= 1.0) {
      return Problem{P{"opo", "pump_ratio"},
                     "must be below 1: the OPO would be at or above threshold", true};
    }
    if (!(c.opo.efficiency > 0.0 && c.opo.efficiency <= 1.0)) {
      return Problem{P{"opo", "efficiency"}, "must lie in (0, 1]"};
    }
  }
  if (c.bands.count < 1 || c.bands.count > 31) return Problem{P{"bands", "count"}, "must lie in [1, 31]"};
  if (!positive(c.bands.lo_fwhm_nm)) return Problem{P{"bands", "lo_fwhm_nm"}, "must be positive"};
  if (!(c.bands.gap_fraction >= 0.0 && c.bands.gap_fraction < 0.5)) {
    return Problem{P{"bands", "gap_fraction"}, "must lie in [0, 0.5)"};
  }
  if (!c.bands.band_efficiency.empty()) {
    if (static_cast<int>(c.bands.band_efficiency.size()) != c.bands.count) {
      return Problem{P{"bands", "band_efficiency"}, "needs one entry per band"};
    }
    for (double e : c.bands.band_efficiency) {
      if (!(e > 0.0 && e <= 1.0)) return Problem{P{"bands", "band_efficiency"}, "entries must lie in (0, 1]"};
    }
  }
  const auto& a = c.analysis;
  if (a.mc_samples < 1) return Problem{P{"analysis", "mc_samples"}, "must be at least 1"};
  if (a.k_modes < 1 || a.k_modes > c.bands.count) {
    return Problem{P{"analysis", "k_modes"}, "must lie in [1, bands.count]"};
  }
  if (!positive(a.min_prominence_db)) return Problem{P{"analysis", "min_prominence_db"}, "must be positive"};
  if (!(a.smoothing_fraction >= 0.0 && a.smoothing_fraction < 0.5)) {
    return Problem{P{"analysis", "smoothing_fraction"}, "must lie in [0, 0.5)"};
  }
  if (!(a.phase_tolerance_deg > 0.0 && a.phase_tolerance_deg <= 90.0)) {
    return Problem{P{"analysis", "phase_tolerance_deg"}, "must lie in (0, 90]"};
  }
  if (!(a.entanglement_epsilon >= 0.0 && a.entanglement_epsilon < 0.5)) {
    return Problem{P{"analysis", "entanglement_epsilon"}, "must lie in [0, 0.5)"};
  }
  if (a.witness_samples < 1) return Problem{P{"analysis", "witness_samples"}, "must be at least 1"};
  if (!(a.detection_efficiency > 0.0 && a.detection_efficiency <= 1.0)) {
    return Problem{P{"analysis", "detection_efficiency"}, "must lie in (0, 1]"};
  }
  if (a.trace_periods < 2) return Problem{P{"analysis", "trace_periods"}, "must be at least 2"};
  if (a.samples_per_period < 8 || a.samples_per_period % 4 != 0) {
    return Problem{P{"analysis", "samples_per_period"}, "must be a multiple of 4, at least 8"};
  }
  if (c.output_dir.empty()) return Problem{P{"output_dir"}, "must not be empty"};
  return std::nullopt;
}

std::string join(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

[[noreturn]] void raise(const Problem& p, const std::string& prefix) {
  const std::string msg = prefix + (p.path.empty() ? "" : join(p.path) + ": ") + p.message;
  if (p.above_threshold) throw AboveThresholdError(msg);
  throw ConfigError(msg);
}

// Maps key paths to source lines by walking the raw text key by key.
class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[nodiscard]] int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    std::size_t found_at = 0;
    for (const auto& key : path) {
      const std::string token = "\"" + key + "\"";
      std::size_t p = pos;
      while (true) {
        p = text_.find(token, p);
        if (p == std::string::npos) break;
        std::size_t q = p + token.size();
        while (q < text_.size() && std::isspace(static_cast<unsigned char>(text_[q]))) ++q;
        if (q < text_.size() && text_[q] == ':') break;
        p += token.size();
      }
      if (p == std::string::npos) break;
      found_at = p;
      pos = p + token.size();
    }
    return line_at(found_at);
  }

  [[nodiscard]] int line_at(std::size_t byte) const {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text_.size(); ++i) line += text_[i] == '\n';
    return line;
  }

  [[nodiscard]] std::string prefix(const std::vector<std::string>& path) const {
    return source_ + ":" + std::to_string(line_of(path)) + ": ";
  }

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    throw ConfigError(prefix(path) + join(path) + ": " + msg);
  }

  void check_keys(const json& obj, const std::vector<std::string>& path,
                  const std::set<std::string>& allowed) const {
    if (!obj.is_object()) {
      if (path.empty()) throw ConfigError(source_ + ":1: top level must be a JSON object");
      fail(path, "must be an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) {
        auto p = path;
        p.push_back(it.key());
        fail(p, "unknown key");
      }
    }
  }

  double number(const json& obj, const std::vector<std::string>& path, const std::string& key,
                double fallback) const {
    if (!obj.contains(key)) return fallback;
    auto p = path;
    p.push_back(key);
    if (!obj.at(key).is_number()) fail(p, "must be a number");
    return obj.at(key).get<double>();
  }

  std::int64_t integer(const json& obj, const std::vector<std::string>& path, const std::string& key,
                       std::int64_t fallback) const {
    if (!obj.contains(key)) return fallback;
    auto p = path;
    p.push_back(key);
    const json& v = obj.at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail(p, "must be an integer");
  }

  std::string string(const json& obj, const std::vector<std::string>& path, const std::string& key,
                     const std::string& fallback) const {
    if (!obj.contains(key)) return fallback;
    auto p = path;
    p.push_back(key);
    if (!obj.at(key).is_string()) fail(p, "must be a string");
    return obj.at(key).get<std::string>();
  }

 private:
  const std::string& text_;
  std::string source_;
};

}  // namespace

void RunConfig::validate() const {
  if (auto p = first_problem(*this)) raise(*p, "");
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  Reader r(text, source);
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(r.line_at(e.byte > 0 ? e.byte - 1 : 0)) +
                      ": invalid JSON (" + e.what() + ")");
  }

  RunConfig c;
  r.check_keys(root, {},
               {"center_wavelength_nm", "fsr_hz", "lines_per_mode", "n_modes", "pump", "phase_matching",
                "opo", "bands", "analysis", "output_dir"});
  c.center_wavelength_nm = r.number(root, {}, "center_wavelength_nm", c.center_wavelength_nm);
  c.fsr_hz = r.number(root, {}, "fsr_hz", c.fsr_hz);
  c.lines_per_mode = static_cast<int>(r.integer(root, {}, "lines_per_mode", c.lines_per_mode));
  c.n_modes = static_cast<int>(r.integer(root, {}, "n_modes", c.n_modes));
  c.output_dir = r.string(root, {}, "output_dir", c.output_dir);

  if (root.contains("pump")) {
    const json& p = root.at("pump");
    r.check_keys(p, {"pump"}, {"shape", "fwhm_nm"});
    const std::string shape = r.string(p, {"pump"}, "shape", "gaussian");
    if (shape == "gaussian") {
      c.pump.shape = PumpShape::gaussian;
    } else if (shape == "single_line" || shape == "single-line") {
      c.pump.shape = PumpShape::single_line;
    } else {
      r.fail({"pump", "shape"}, "must be \"single_line\" or \"gaussian\", got \"" + shape + "\"");
    }
    c.pump.fwhm_nm = r.number(p, {"pump"}, "fwhm_nm", c.pump.fwhm_nm);
  }

  if (root.contains("phase_matching")) {
    const json& p = root.at("phase_matching");
    r.check_keys(p, {"phase_matching"}, {"shape", "width"});
    const std::string shape = r.string(p, {"phase_matching"}, "shape", "flat");
    if (shape == "flat") {
      c.phase_matching.shape = PhaseMatchingShape::flat;
    } else if (shape == "gaussian") {
      c.phase_matching.shape = PhaseMatchingShape::gaussian;
    } else if (shape == "sinc") {
      c.phase_matching.shape = PhaseMatchingShape::sinc;
    } else {
      r.fail({"phase_matching", "shape"}, "must be \"flat\", \"gaussian\" or \"sinc\", got \"" + shape + "\"");
    }
    c.phase_matching.width_hz = r.number(p, {"phase_matching"}, "width", c.phase_matching.width_hz);
  }

  if (root.contains("opo")) {
    const json& o = root.at("opo");
    r.check_keys(o, {"opo"}, {"pump_ratio", "efficiency", "calibrate"});
    if (o.contains("calibrate")) {
      if (o.contains("pump_ratio") || o.contains("efficiency")) {
        r.fail({"opo", "calibrate"}, "cannot be combined with pump_ratio or efficiency");
      }
      const json& cal = o.at("calibrate");
      r.check_keys(cal, {"opo", "calibrate"}, {"squeezing_db", "antisqueezing_db"});
      c.opo.calibrate = true;
      c.opo.squeezing_db = r.number(cal, {"opo", "calibrate"}, "squeezing_db", c.opo.squeezing_db);
      c.opo.antisqueezing_db = r.number(cal, {"opo", "calibrate"}, "antisqueezing_db", c.opo.antisqueezing_db);
    } else {
      c.opo.pump_ratio = r.number(o, {"opo"}, "pump_ratio", c.opo.pump_ratio);
      c.opo.efficiency = r.number(o, {"opo"}, "efficiency", c.opo.efficiency);
    }
  }

  if (root.contains("bands")) {
    const json& b = root.at("bands");
    r.check_keys(b, {"bands"}, {"count", "lo_fwhm_nm", "gap_fraction", "band_efficiency"});
    c.bands.count = static_cast<int>(r.integer(b, {"bands"}, "count", c.bands.count));
    c.bands.lo_fwhm_nm = r.number(b, {"bands"}, "lo_fwhm_nm", c.bands.lo_fwhm_nm);
    c.bands.gap_fraction = r.number(b, {"bands"}, "gap_fraction", c.bands.gap_fraction);
    if (b.contains("band_efficiency")) {
      const json& e = b.at("band_efficiency");
      if (!e.is_array()) r.fail({"bands", "band_efficiency"}, "must be an array of numbers");
      for (const auto& v : e) {
        if (!v.is_number()) r.fail({"bands", "band_efficiency"}, "must be an array of numbers");
        c.bands.band_efficiency.push_back(v.get<double>());
      }
    }
  }

  if (root.contains("analysis")) {
    const json& a = root.at("analysis");
    const std::vector<std::string> p{"analysis"};
    r.check_keys(a, p,
                 {"mc_samples", "seed", "k_modes", "min_prominence_db", "smoothing_fraction",
                  "phase_tolerance_deg", "entanglement_epsilon", "witness_samples", "detection_efficiency",
                  "trace_periods", "samples_per_period"});
    auto& an = c.analysis;
    an.mc_samples = static_cast<int>(r.integer(a, p, "mc_samples", an.mc_samples));
    const std::int64_t seed = r.integer(a, p, "seed", static_cast<std::int64_t>(an.seed));
    if (seed < 0) r.fail({"analysis", "seed"}, "must be non-negative");
    an.seed = static_cast<std::uint64_t>(seed);
    an.k_modes = static_cast<int>(r.integer(a, p, "k_modes", an.k_modes));
    an.min_prominence_db = r.number(a, p, "min_prominence_db", an.min_prominence_db);
    an.smoothing_fraction = r.number(a, p, "smoothing_fraction", an.smoothing_fraction);
    an.phase_tolerance_deg = r.number(a, p, "phase_tolerance_deg", an.phase_tolerance_deg);
    an.entanglement_epsilon = r.number(a, p, "entanglement_epsilon", an.entanglement_epsilon);
    an.witness_samples = static_cast<int>(r.integer(a, p, "witness_samples", an.witness_samples));
    an.detection_efficiency = r.number(a, p, "detection_efficiency", an.detection_efficiency);
    an.trace_periods = static_cast<int>(r.integer(a, p, "trace_periods", an.trace_periods));
    an.samples_per_period = static_cast<int>(r.integer(a, p, "samples_per_period", an.samples_per_period));
  }

  if (auto problem = first_problem(c)) raise(*problem, r.prefix(problem->path));
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["center_wavelength_nm"] = c.center_wavelength_nm;
  j["fsr_hz"] = c.fsr_hz;
  j["lines_per_mode"] = c.lines_per_mode;
  j["n_modes"] = c.n_modes;
  j["pump"]["shape"] = c.pump.shape == PumpShape::gaussian ? "gaussian" : "single_line";
  j["pump"]["fwhm_nm"] = c.pump.fwhm_nm;
  const char* pm = c.phase_matching.shape == PhaseMatchingShape::flat       ? "flat"
                   : c.phase_matching.shape == PhaseMatchingShape::gaussian ? "gaussian"
                                                                            : "sinc";
  j["phase_matching"]["shape"] = pm;
  j["phase_matching"]["width"] = c.phase_matching.width_hz;
  if (c.opo.calibrate) {
    j["opo"]["calibrate"]["squeezing_db"] = c.opo.squeezing_db;
    j["opo"]["calibrate"]["antisqueezing_db"] = c.opo.antisqueezing_db;
  } else {
    j["opo"]["pump_ratio"] = c.opo.pump_ratio;
    j["opo"]["efficiency"] = c.opo.efficiency;
  }
  j["bands"]["count"] = c.bands.count;
  j["bands"]["lo_fwhm_nm"] = c.bands.lo_fwhm_nm;
  j["bands"]["gap_fraction"] = c.bands.gap_fraction;
  if (!c.bands.band_efficiency.empty()) j["bands"]["band_efficiency"] = c.bands.band_efficiency;
  const auto& a = c.analysis;
  j["analysis"] = {{"mc_samples", a.mc_samples},
                   {"seed", a.seed},
                   {"k_modes", a.k_modes},
                   {"min_prominence_db", a.min_prominence_db},
                   {"smoothing_fraction", a.smoothing_fraction},
                   {"phase_tolerance_deg", a.phase_tolerance_deg},
                   {"entanglement_epsilon", a.entanglement_epsilon},
                   {"witness_samples", a.witness_samples},
                   {"detection_efficiency", a.detection_efficiency},
                   {"trace_periods", a.trace_periods},
                   {"samples_per_period", a.samples_per_period}};
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

std::string config_hash(const RunConfig& config) {
  // Where results go does not change them.
  RunConfig hashed = config;
  hashed.output_dir = "-";
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : config_to_json(hashed)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spopo
