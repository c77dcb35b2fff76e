#pragma once

// File formats: CSV and JSON readers and writers for every artifact the
// command-line tool exchanges.

#include "spopo/comb_model.hpp"
#include "spopo/gaussian_state.hpp"
#include "spopo/pipeline.hpp"
#include "spopo/witnesses.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace spopo {

using Json = nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text);
[[nodiscard]] std::string read_text(const std::string& path);

/// Column 0 mode frequency (Hz), columns 1..k eigenvector amplitudes.
void write_supermodes_csv(const std::string& path, const SupermodeSet& modes, int k);
[[nodiscard]] Json eigenvalues_json(const SupermodeSet& modes);

/// {n, Cx, Cp, meta}; blocks are lists of rows.
[[nodiscard]] Json state_to_json(const CovarianceState& state, const Json& meta = Json::object());
/// Accepts blocks as lists of rows or as flat row-major lists of n*n numbers.
[[nodiscard]] CovarianceState state_from_json(const Json& j);
void write_state(const std::string& path, const CovarianceState& state, const Json& meta = Json::object());
[[nodiscard]] CovarianceState read_state(const std::string& path);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

/// Columns shape_id, band_i, band_j, phase, power_db; a header line is required.
void write_traces_csv(const std::string& path, const TraceBundle& bundle);
/// `band_powers` gives n; rows are grouped into traces by shape id.
[[nodiscard]] TraceBundle read_traces_csv(const std::string& path, const Eigen::VectorXd& band_powers);

/// {"band_powers": [...], ...} or a bare array.
void write_band_powers(const std::string& path, const Eigen::VectorXd& powers, const Json& meta = Json::object());
[[nodiscard]] Eigen::VectorXd read_band_powers(const std::string& path);

[[nodiscard]] Json scan_to_json(const BipartitionScan& scan);
void write_scan_csv(const std::string& path, const BipartitionScan& scan);
[[nodiscard]] Json scan_summary_json(const BipartitionScan& scan);

[[nodiscard]] Json extraction_to_json(const ModeExtraction& extraction);

[[nodiscard]] Json matrix_to_json(const Eigen::MatrixXd& m);
[[nodiscard]] Json vector_to_json(const Eigen::VectorXd& v);

}  // namespace spopo
