#include "spopo/io.hpp"

#include "spopo/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace spopo {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void write_supermodes_csv(const std::string& path, const SupermodeSet& modes, int k) {
  k = std::min(k, modes.size());
  std::ostringstream out;
  out << "frequency_hz";
  for (int c = 0; c < k; ++c) out << ",mode_" << c;
  out << '\n';
  const auto& grid = modes.grid();
  for (int i = 0; i < grid.size(); ++i) {
    out << fmt(grid.frequency(grid.offset(i)));
    for (int c = 0; c < k; ++c) out << ',' << fmt(modes.vectors()(i, c));
    out << '\n';
  }
  write_text(path, out.str());
}

Json eigenvalues_json(const SupermodeSet& modes) {
  Json j;
  j["eigenvalues"] = vector_to_json(modes.eigenvalues());
  j["center_frequency_hz"] = modes.grid().center_frequency();
  j["mode_spacing_hz"] = modes.grid().spacing();
  j["half_width"] = modes.grid().half_width();
  return j;
}

Json state_to_json(const CovarianceState& state, const Json& meta) {
  Json j;
  j["n"] = state.n_bands();
  j["Cx"] = matrix_to_json(state.cx());
  j["Cp"] = matrix_to_json(state.cp());
  j["meta"] = meta;
  return j;
}

namespace {

Eigen::MatrixXd matrix_from_json(const Json& j, int n, const char* name) {
  Eigen::MatrixXd m(n, n);
  if (!j.is_array()) throw DataError(std::string("state field ") + name + " must be an array");
  if (static_cast<int>(j.size()) == n * n && (n == 1 || !j.front().is_array())) {
    for (int i = 0; i < n * n; ++i) {
      if (!j[i].is_number()) throw DataError(std::string("state field ") + name + " has a non-number");
      m(i / n, i % n) = j[i].get<double>();
    }
    return m;
  }
  if (static_cast<int>(j.size()) != n) throw DataError(std::string("state field ") + name + " has wrong size");
  for (int i = 0; i < n; ++i) {
    const Json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw DataError(std::string("state field ") + name + " row " + std::to_string(i) + " has wrong size");
    }
    for (int k = 0; k < n; ++k) {
      if (!row[k].is_number()) throw DataError(std::string("state field ") + name + " has a non-number");
      m(i, k) = row[k].get<double>();
    }
  }
  return m;
}

}  // namespace

CovarianceState state_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("Cx") || !j.contains("Cp")) {
    throw DataError("state JSON needs Cx and Cp");
  }
  int n = 0;
  if (j.contains("n")) {
    if (!j["n"].is_number_integer()) throw DataError("state field n must be an integer");
    n = j["n"].get<int>();
  } else {
    n = static_cast<int>(j["Cx"].size());
  }
  if (n < 1) throw DataError("state needs at least one band");
  try {
    return CovarianceState(matrix_from_json(j["Cx"], n, "Cx"), matrix_from_json(j["Cp"], n, "Cp"));
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

void write_state(const std::string& path, const CovarianceState& state, const Json& meta) {
  write_text(path, state_to_json(state, meta).dump(2) + "\n");
}

CovarianceState read_state(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": invalid JSON (" + e.what() + ")");
  }
  return state_from_json(j);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

void write_traces_csv(const std::string& path, const TraceBundle& bundle) {
  std::ostringstream out;
  out << "shape_id,band_i,band_j,phase,power_db\n";
  for (const auto& t : bundle.traces) {
    for (std::size_t s = 0; s < t.phase.size(); ++s) {
      out << t.shape_id << ',' << t.band_i << ',' << t.band_j << ',' << fmt(t.phase[s]) << ','
          << fmt(t.power_db[s]) << '\n';
    }
  }
  write_text(path, out.str());
}

TraceBundle read_traces_csv(const std::string& path, const Eigen::VectorXd& band_powers) {
  std::istringstream in(read_text(path));
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw DataError(path + ": empty trace file");
  ++line_no;
  if (line.find("shape_id") == std::string::npos) {
    throw DataError(path + ":1: expected header shape_id,band_i,band_j,phase,power_db");
  }
  TraceBundle bundle;
  bundle.n_bands = static_cast<int>(band_powers.size());
  bundle.band_powers = band_powers;
  std::map<int, std::size_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw DataError(path + ":" + std::to_string(line_no) + ": expected 5 columns");
    int id = 0;
    int bi = 0;
    int bj = 0;
    double phase = 0.0;
    double power = 0.0;
    try {
      std::size_t used = 0;
      id = std::stoi(cells[0]);
      bi = std::stoi(cells[1]);
      bj = std::stoi(cells[2]);
      phase = std::stod(cells[3], &used);
      power = std::stod(cells[4], &used);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
    auto it = index.find(id);
    if (it == index.end()) {
      NoiseTrace t;
      t.shape_id = id;
      t.band_i = bi;
      t.band_j = bj;
      it = index.emplace(id, bundle.traces.size()).first;
      bundle.traces.push_back(std::move(t));
    }
    NoiseTrace& t = bundle.traces[it->second];
    if (t.band_i != bi || t.band_j != bj) {
      throw DataError(path + ":" + std::to_string(line_no) + ": band indices change within shape " +
                      std::to_string(id));
    }
    t.phase.push_back(phase);
    t.power_db.push_back(power);
  }
  return bundle;
}

void write_band_powers(const std::string& path, const Eigen::VectorXd& powers, const Json& meta) {
  Json j;
  j["band_powers"] = vector_to_json(powers);
  for (auto it = meta.begin(); it != meta.end(); ++it) j[it.key()] = it.value();
  write_text(path, j.dump(2) + "\n");
}

Eigen::VectorXd read_band_powers(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError(path + ": invalid JSON (" + e.what() + ")");
  }
  const Json& arr = j.is_array() ? j : (j.contains("band_powers") ? j["band_powers"] : Json());
  if (!arr.is_array() || arr.empty()) throw DataError(path + ": expected a band_powers array");
  Eigen::VectorXd p(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw DataError(path + ": band power " + std::to_string(i) + " is not a number");
    p(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return p;
}

Json scan_to_json(const BipartitionScan& scan) {
  Json rows = Json::array();
  for (const auto& r : scan.reports) {
    Json row;
    row["partition_mask"] = r.partition_mask;
    row["duan"] = r.duan;
    row["epr"] = r.epr;
    row["ppt_nu_min"] = r.ppt_nu_min;
    row["flags"] = {{"entangled_ppt", r.flags.entangled_ppt},
                    {"entangled_epr", r.flags.entangled_epr},
                    {"duan_violated", r.flags.duan_violated}};
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_scan_csv(const std::string& path, const BipartitionScan& scan) {
  std::ostringstream out;
  out << "rank,partition_mask,duan,epr,ppt_nu_min,entangled_ppt,entangled_epr,duan_violated\n";
  int rank = 0;
  for (const auto& r : scan.reports) {
    out << rank++ << ',' << r.partition_mask << ',' << fmt(r.duan) << ',' << fmt(r.epr) << ','
        << fmt(r.ppt_nu_min) << ',' << r.flags.entangled_ppt << ',' << r.flags.entangled_epr << ','
        << r.flags.duan_violated << '\n';
  }
  write_text(path, out.str());
}

Json scan_summary_json(const BipartitionScan& scan) {
  Json j;
  j["n_bands"] = scan.n_bands;
  j["bipartitions"] = scan.reports.size();
  j["ppt_entangled"] = scan.ppt_entangled;
  j["epr_entangled"] = scan.epr_entangled;
  j["duan_violated"] = scan.duan_violated;
  double min_nu = std::numeric_limits<double>::infinity();
  double max_nu = -std::numeric_limits<double>::infinity();
  for (const auto& r : scan.reports) {
    min_nu = std::min(min_nu, r.ppt_nu_min);
    max_nu = std::max(max_nu, r.ppt_nu_min);
  }
  if (!scan.reports.empty()) {
    j["min_epr"] = scan.reports.front().epr;
    j["max_epr"] = scan.reports.back().epr;
    j["min_ppt_nu"] = min_nu;
    j["max_ppt_nu"] = max_nu;
  }
  return j;
}

Json extraction_to_json(const ModeExtraction& extraction) {
  Json j;
  Json modes = Json::array();
  for (Eigen::Index c = 0; c < extraction.modes.cols(); ++c) {
    modes.push_back(vector_to_json(extraction.modes.col(c)));
  }
  j["modes"] = modes;
  Json sq = Json::array();
  for (const auto& m : extraction.squeezing) {
    sq.push_back({{"mean", m.mean},
                  {"sigma", m.sigma},
                  {"quadrature", to_string(m.quadrature)},
                  {"antisqueezing_mean", m.anti_mean},
                  {"antisqueezing_sigma", m.anti_sigma},
                  {"robustness", m.robustness}});
  }
  j["squeezing"] = sq;
  j["nonclassical_count"] = extraction.nonclassical_count;
  j["sigma_convention"] = "standard deviation over Monte Carlo samples (ddof = 1)";
  return j;
}

}  // namespace spopo
