// spopo: simulate, witness and analyze multimode SPOPO states.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 physicality refusal. SPOPO_NUM_WORKERS overrides the thread count.

#include "spopo/errors.hpp"
#include "spopo/report.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace spopo;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> mc_samples;
  std::optional<std::string> out;
};

RunConfig load_with_overrides(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  if (o.seed) c.analysis.seed = *o.seed;
  if (o.mc_samples) c.analysis.mc_samples = *o.mc_samples;
  if (o.out) c.output_dir = *o.out;
  c.validate();
  return c;
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_simulate(const RunConfig& c) {
  const Simulation sim = simulate(c);
  Json summary = write_simulation(sim, c.output_dir);
  summary["output_dir"] = c.output_dir;
  summary["leading_eigenvalues"] = Json::array();
  for (int k = 0; k < std::min(6, sim.modes.size()); ++k) summary["leading_eigenvalues"].push_back(sim.modes.eigenvalue(k));
  summary["unshaped_lo_squeezing_db"] = sim.lo_squeezing_db;
  summary["unshaped_lo_antisqueezing_db"] = sim.lo_antisqueezing_db;
  print_json(summary);
  return 0;
}

int cmd_witness(const std::string& state_path, double epsilon, const std::string& out) {
  const CovarianceState state = read_state(state_path);
  const BipartitionScan scan = run_witness(state, epsilon, out);
  Json summary = scan_summary_json(scan);
  summary["output_dir"] = out;
  print_json(summary);
  return 0;
}

int cmd_ingest(const std::string& traces, const std::string& powers, const RunConfig& c) {
  const IngestOptions options = IngestOptions::from_config(c);
  const Eigen::VectorXd p = read_band_powers(powers);
  const IngestResult r = ingest(read_traces_csv(traces, p), options);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  Json report = ingest_report(r, options, config_hash(c), utc_timestamp());
  report["provenance"]["inputs"] = {{"traces", traces}, {"band_powers", powers}};
  write_ingest_outputs(r, report, c.output_dir);
  Json summary;
  summary["output_dir"] = c.output_dir;
  summary["nonclassical_count"] = r.extraction.nonclassical_count;
  summary["purity"] = r.purity;
  summary["ppt_entangled"] = r.witnesses.scan.ppt_entangled;
  summary["epr_entangled"] = r.witnesses.scan.epr_entangled;
  print_json(summary);
  return 0;
}

int cmd_modes(const std::string& traces, const std::string& powers, const RunConfig& c) {
  const IngestOptions options = IngestOptions::from_config(c);
  const Eigen::VectorXd p = read_band_powers(powers);
  const TraceBundle bundle = read_traces_csv(traces, p);
  const BundleStats stats = analyze_bundle(bundle, options.extrema, options.phase_tolerance_deg);
  const auto samples = monte_carlo_covariances(stats, options.mc_samples, options.seed);
  const ModeExtraction e = extract_modes(samples, options.k_modes);
  const Json j = extraction_to_json(e);
  std::filesystem::create_directories(c.output_dir);
  write_text((std::filesystem::path(c.output_dir) / "extraction.json").string(), j.dump(2) + "\n");
  print_json(j);
  return 0;
}

int cmd_report(const RunConfig& c) {
  const Simulation sim = simulate(c);
  const std::string sim_dir = (std::filesystem::path(c.output_dir) / "simulation").string();
  const Json sim_summary = write_simulation(sim, sim_dir);
  const BipartitionScan scan =
      run_witness(sim.state, c.analysis.entanglement_epsilon, (std::filesystem::path(c.output_dir) / "witness").string());

  const Eigen::VectorXd powers = sim.partition.band_energies();
  const TraceBundle bundle =
      synthesize_bundle(sim.state, powers, c.analysis.trace_periods, c.analysis.samples_per_period);
  const IngestOptions options = IngestOptions::from_config(c);
  const IngestResult r = ingest(bundle, options);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

  Json report = ingest_report(r, options, config_hash(c), utc_timestamp());
  Json s;
  s["pump_ratio"] = sim.spectrum.pump_ratio;
  s["efficiency"] = sim.spectrum.efficiency;
  s["calibrated"] = sim.calibrated;
  s["unshaped_lo_squeezing_db"] = sim.lo_squeezing_db;
  s["unshaped_lo_antisqueezing_db"] = sim.lo_antisqueezing_db;
  s["purity"] = purity(sim.state);
  s["commutator_max_abs"] = block_commutator(sim.state).max_abs;
  s["witnesses"] = scan_summary_json(scan);
  s["traces"] = sim_summary["traces"];
  report["simulation"] = s;
  report["provenance"]["inputs"] = {{"traces", "synthesized from the simulated state (noise-free)"}};
  write_ingest_outputs(r, report, (std::filesystem::path(c.output_dir) / "analysis").string());

  Json summary;
  summary["output_dir"] = c.output_dir;
  summary["simulation_ppt_entangled"] = scan.ppt_entangled;
  summary["simulation_epr_entangled"] = scan.epr_entangled;
  summary["analysis_nonclassical_count"] = r.extraction.nonclassical_count;
  summary["analysis_ppt_entangled"] = r.witnesses.scan.ppt_entangled;
  print_json(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode SPOPO simulation and homodyne-data analysis"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides over;
  auto add_common = [&](CLI::App* sub, bool with_mc) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { over.out = v; },
                                          "output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { over.seed = v; },
                                            "Monte Carlo seed");
    if (with_mc) {
      sub->add_option_function<int>("--mc-samples", [&](const int& v) { over.mc_samples = v; },
                                    "Monte Carlo sample count");
    }
  };

  auto* sim = app.add_subcommand("simulate", "coupling matrix, supermodes and band state");
  add_common(sim, false);

  std::string state_path;
  auto* wit = app.add_subcommand("witness", "Duan, EPR and PPT over all bipartitions of a state");
  wit->add_option("state", state_path, "state JSON")->required()->check(CLI::ExistingFile);
  add_common(wit, false);

  std::string traces_path;
  std::string powers_path;
  auto* ing = app.add_subcommand("ingest", "full analysis of homodyne traces");
  ing->add_option("traces", traces_path, "trace CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("powers", powers_path, "band power JSON")->required()->check(CLI::ExistingFile);
  add_common(ing, true);

  auto* mod = app.add_subcommand("modes", "Monte Carlo mode extraction only");
  mod->add_option("traces", traces_path, "trace CSV")->required()->check(CLI::ExistingFile);
  mod->add_option("powers", powers_path, "band power JSON")->required()->check(CLI::ExistingFile);
  add_common(mod, true);

  auto* rep = app.add_subcommand("report", "simulate, witness, synthesize traces and analyze them");
  add_common(rep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig c = load_with_overrides(config_path, over);
    if (*sim) return cmd_simulate(c);
    if (*wit) return cmd_witness(state_path, c.analysis.entanglement_epsilon, c.output_dir);
    if (*ing) return cmd_ingest(traces_path, powers_path, c);
    if (*mod) return cmd_modes(traces_path, powers_path, c);
    if (*rep) return cmd_report(c);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const PhysicalityError& e) {
    std::cerr << "physicality refusal: " << e.what();
    if (!std::isnan(e.min_nu())) std::cerr << " (nu_min = " << e.min_nu() << ")";
    std::cerr << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
