#include "spopo/config.hpp"
#include "spopo/errors.hpp"
#include "spopo/io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace spopo {
namespace {

std::string error_of(const std::string& text) {
  try {
    (void)parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spopo_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Config, DefaultsAreValid) {
  const RunConfig c = parse_config("{}");
  EXPECT_EQ(c.n_modes, 201);
  EXPECT_EQ(c.bands.count, 10);
  EXPECT_EQ(c.pump.shape, PumpShape::gaussian);
  EXPECT_EQ(c.phase_matching.shape, PhaseMatchingShape::flat);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"reference_geometry.json", "single_line.json", "exchange_small.json"}) {
    EXPECT_NO_THROW((void)load_config(testing::source_path(std::string("configs/") + name))) << name;
  }
  const auto c = load_config(testing::source_path("configs/reference_geometry.json"));
  EXPECT_TRUE(c.opo.calibrate);
  EXPECT_EQ(c.n_modes, 801);
  EXPECT_EQ(c.analysis.seed, 2012u);
}

TEST(Config, PumpWidthIsConvertedAtHalfWavelength) {
  RunConfig c;
  const double expected = kSpeedOfLight * 2.12e-9 / std::pow(397.5e-9, 2);
  EXPECT_NEAR(c.pump_spectrum().fwhm(), expected, expected * 1e-12);
  EXPECT_NEAR(c.pump_spectrum().center(), 2.0 * c.center_frequency_hz(), 1.0);
}

TEST(Config, UnknownKeyNamesLine) {
  const std::string text = "{\n  \"n_modes\": 101,\n  \"bands\": {\n    \"count\": 4,\n    \"colour\": 3\n  }\n}\n";
  EXPECT_EQ(error_of(text), "cfg.json:5: bands.colour: unknown key");
}

TEST(Config, BadValueNamesLine) {
  const std::string text = "{\n  \"n_modes\": 100\n}\n";
  const std::string err = error_of(text);
  EXPECT_EQ(err.rfind("cfg.json:2: n_modes:", 0), 0u) << err;
  EXPECT_EQ(error_of("{\n\"analysis\": {\n\"seed\": \"x\"}}").rfind("cfg.json:3: analysis.seed:", 0), 0u);
  EXPECT_EQ(error_of("{\n\n\"pump\": {\"shape\": \"square\"}}").rfind("cfg.json:3: pump.shape:", 0), 0u);
}

TEST(Config, SyntaxErrorNamesLine) {
  const std::string err = error_of("{\n  \"n_modes\": 101,\n  oops\n}");
  EXPECT_EQ(err.rfind("cfg.json:3:", 0), 0u) << err;
}

TEST(Config, AboveThresholdIsItsOwnError) {
  EXPECT_THROW((void)parse_config("{\"opo\": {\"pump_ratio\": 1.2}}"), AboveThresholdError);
  EXPECT_THROW((void)parse_config("{\"opo\": {\"pump_ratio\": 1.0}}"), AboveThresholdError);
  EXPECT_THROW((void)parse_config("{\"opo\": {\"efficiency\": 0}}"), ConfigError);
  EXPECT_THROW((void)parse_config("{\"opo\": {\"pump_ratio\": 0.5, \"calibrate\": {}}}"), ConfigError);
}

TEST(Config, RangeChecks) {
  EXPECT_THROW((void)parse_config("{\"n_modes\": 1}"), ConfigError);
  EXPECT_THROW((void)parse_config("{\"n_modes\": 4003}"), ConfigError);
  EXPECT_THROW((void)parse_config("{\"analysis\": {\"k_modes\": 11}}"), ConfigError);
  EXPECT_THROW((void)parse_config("{\"phase_matching\": {\"shape\": \"gaussian\"}}"), ConfigError);
  EXPECT_THROW((void)parse_config("{\"bands\": {\"band_efficiency\": [1, 1]}}"), ConfigError);
  EXPECT_THROW((void)parse_config("[1, 2]"), ConfigError);
  EXPECT_THROW((void)load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, CanonicalJsonRoundTripAndHash) {
  const auto c = load_config(testing::source_path("configs/reference_geometry.json"));
  const std::string text = config_to_json(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  RunConfig changed = c;
  changed.analysis.seed += 1;
  EXPECT_NE(config_hash(changed), config_hash(c));
  RunConfig moved = c;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(moved), config_hash(c));
}

TEST(StateIo, JsonRoundTripIsExact) {
  std::mt19937_64 rng(3);
  const auto s = testing::random_physical_state(6, rng);
  const auto dir = temp_dir("state");
  write_state((dir / "s.json").string(), s, Json{{"note", "x"}});
  const auto back = read_state((dir / "s.json").string());
  EXPECT_EQ(back.cx(), s.cx());
  EXPECT_EQ(back.cp(), s.cp());
}

TEST(StateIo, AcceptsFlatRowMajorBlocks) {
  const Json j = Json::parse(R"({"n": 2, "Cx": [2, 0.5, 0.5, 1], "Cp": [[1, 0], [0, 3]]})");
  const auto s = state_from_json(j);
  EXPECT_EQ(s.cx()(0, 1), 0.5);
  EXPECT_EQ(s.cp()(1, 1), 3.0);
  EXPECT_THROW((void)state_from_json(Json::parse(R"({"n": 2, "Cx": [1, 2, 3], "Cp": [1, 0, 0, 1]})")), DataError);
  EXPECT_THROW((void)state_from_json(Json::parse(R"({"n": 2, "Cx": [1, 2, 3, 4], "Cp": [1, 0, 0, 1]})")), DataError);
}

TEST(TraceIo, CsvRoundTrip) {
  Eigen::Matrix2d cx;
  cx << 0.6, -0.2, -0.2, 0.7;
  Eigen::Matrix2d cp;
  cp << 2.0, 0.3, 0.3, 1.8;
  const Eigen::Vector2d powers(1.0, 1.5);
  const auto bundle = synthesize_bundle(CovarianceState(cx, cp), powers, 3, 40);
  const auto dir = temp_dir("traces");
  write_traces_csv((dir / "t.csv").string(), bundle);
  write_band_powers((dir / "p.json").string(), powers);
  const Eigen::VectorXd p_back = read_band_powers((dir / "p.json").string());
  EXPECT_EQ(p_back, Eigen::VectorXd(powers));
  const auto back = read_traces_csv((dir / "t.csv").string(), p_back);
  ASSERT_EQ(back.traces.size(), bundle.traces.size());
  for (std::size_t i = 0; i < back.traces.size(); ++i) {
    EXPECT_EQ(back.traces[i].shape_id, bundle.traces[i].shape_id);
    EXPECT_EQ(back.traces[i].phase, bundle.traces[i].phase);
    EXPECT_EQ(back.traces[i].power_db, bundle.traces[i].power_db);
  }
}

TEST(TraceIo, MalformedRowsNameTheLine) {
  const auto dir = temp_dir("bad_traces");
  write_text((dir / "t.csv").string(), "shape_id,band_i,band_j,phase,power_db\n0,0,0,0.1,1.0\n0,0,0,abc,1.0\n");
  try {
    (void)read_traces_csv((dir / "t.csv").string(), Eigen::VectorXd::Ones(1));
    FAIL() << "expected a DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  write_text((dir / "p.json").string(), "[1.0, 2.0]");
  EXPECT_EQ(read_band_powers((dir / "p.json").string()).size(), 2);
  EXPECT_THROW((void)read_traces_csv((dir / "missing.csv").string(), Eigen::VectorXd::Ones(1)), DataError);
}

TEST(ScanIo, SummaryCountsMatch) {
  std::mt19937_64 rng(9);
  const auto scan = scan_bipartitions(testing::random_physical_state(5, rng, 1.2));
  const Json j = scan_to_json(scan);
  EXPECT_EQ(j.size(), 15u);
  const Json summary = scan_summary_json(scan);
  EXPECT_EQ(summary["ppt_entangled"], scan.ppt_entangled);
  EXPECT_EQ(summary["epr_entangled"], scan.epr_entangled);
}

}  // namespace
}  // namespace spopo
