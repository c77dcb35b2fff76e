#include "spopo/comb_model.hpp"
#include "spopo/config.hpp"
#include "spopo/errors.hpp"
#include "spopo/gaussian_state.hpp"
#include "spopo/io.hpp"
#include "spopo/pipeline.hpp"
#include "spopo/report.hpp"
#include "spopo/witnesses.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)

namespace py = pybind11;
using namespace spopo;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
py::object to_python(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::dict scan_dict(const BipartitionScan& scan) {
  py::dict d;
  d["reports"] = to_python(scan_to_json(scan));
  d["ppt_entangled"] = scan.ppt_entangled;
  d["epr_entangled"] = scan.epr_entangled;
  d["duan_violated"] = scan.duan_violated;
  return d;
}

Bipartition make_part(const CovarianceState& s, std::uint32_t mask) { return Bipartition(s.n_bands(), mask); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multimode SPOPO simulation, entanglement witnesses and homodyne-data analysis.";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<PhysicalityError>(m, "PhysicalityError", PyExc_RuntimeError);
  (void)config_error;

  py::class_<FrequencyGrid>(m, "FrequencyGrid")
      .def(py::init<double, double, int>(), py::arg("center_frequency"), py::arg("spacing"),
           py::arg("half_width"))
      .def_property_readonly("center_frequency", &FrequencyGrid::center_frequency)
      .def_property_readonly("spacing", &FrequencyGrid::spacing)
      .def_property_readonly("half_width", &FrequencyGrid::half_width)
      .def_property_readonly("size", &FrequencyGrid::size)
      .def("detunings", &FrequencyGrid::detunings)
      .def("frequencies", &FrequencyGrid::frequencies);

  py::class_<PumpSpectrum>(m, "PumpSpectrum")
      .def_static("single_line", &PumpSpectrum::single_line, py::arg("center"))
      .def_static("gaussian", &PumpSpectrum::gaussian, py::arg("center"), py::arg("fwhm"))
      .def_property_readonly("amplitude_sigma", &PumpSpectrum::amplitude_sigma)
      .def("amplitude", &PumpSpectrum::amplitude);

  py::class_<PhaseMatching>(m, "PhaseMatching")
      .def_static("flat", &PhaseMatching::flat)
      .def_static("gaussian", &PhaseMatching::gaussian, py::arg("width"))
      .def_static("sinc", &PhaseMatching::sinc, py::arg("width"))
      .def("value", &PhaseMatching::value);

  m.def(
      "build_coupling",
      [](const FrequencyGrid& g, const PumpSpectrum& p, const PhaseMatching& f) {
        return build_coupling(g, p, f).entries;
      },
      py::arg("grid"), py::arg("pump"), py::arg("phase_matching"), "Coupling matrix L as a dense array.");

  m.def(
      "diagonalize",
      [](const FrequencyGrid& g, const Eigen::MatrixXd& L) {
        const SupermodeSet s = diagonalize(CouplingMatrix{g, L});
        return py::make_tuple(s.eigenvalues(), s.vectors());
      },
      py::arg("grid"), py::arg("coupling"), "(eigenvalues, vectors) sorted by descending |eigenvalue|.");

  m.def("hermite_gauss_reference", &hermite_gauss_reference, py::arg("order"), py::arg("width"), py::arg("grid"));

  py::class_<CovarianceState>(m, "CovarianceState")
      .def(py::init<Eigen::MatrixXd, Eigen::MatrixXd>(), py::arg("cx"), py::arg("cp"))
      .def_static("vacuum", &CovarianceState::vacuum, py::arg("n_bands"))
      .def_property_readonly("n_bands", &CovarianceState::n_bands)
      .def_property_readonly("cx", &CovarianceState::cx)
      .def_property_readonly("cp", &CovarianceState::cp)
      .def("symplectic_eigenvalues", &CovarianceState::symplectic_eigenvalues)
      .def("is_physical", &CovarianceState::is_physical, py::arg("tol") = 1e-9);

  m.def(
      "correlation_matrix",
      [](const CovarianceState& s, const std::string& q) {
        return correlation_matrix(s, q == "p" ? Quadrature::p : Quadrature::x);
      },
      py::arg("state"), py::arg("quadrature") = "x");
  m.def("apply_loss", &apply_loss, py::arg("state"), py::arg("eta"));
  m.def(
      "block_commutator_max_abs", [](const CovarianceState& s) { return block_commutator(s).max_abs; },
      py::arg("state"));

  m.def(
      "duan",
      [](const CovarianceState& s, std::uint32_t mask, const Eigen::VectorXd& w) {
        return duan(s, make_part(s, mask), w);
      },
      py::arg("state"), py::arg("mask"), py::arg("weights") = Eigen::VectorXd());
  m.def(
      "epr_product",
      [](const CovarianceState& s, std::uint32_t mask, const Eigen::VectorXd& w) {
        return epr_product(s, make_part(s, mask), w);
      },
      py::arg("state"), py::arg("mask"), py::arg("weights") = Eigen::VectorXd());
  m.def(
      "ppt_min_symplectic",
      [](const CovarianceState& s, std::uint32_t mask) { return ppt_min_symplectic(s, make_part(s, mask)); },
      py::arg("state"), py::arg("mask"));
  m.def("purity", &purity, py::arg("state"));
  m.def(
      "scan_bipartitions",
      // same refusal as the witness command: unphysical input raises PhysicalityError
      [](const CovarianceState& s, double eps) { return scan_dict(run_witness(s, eps, "")); },
      py::arg("state"), py::arg("epsilon") = 1e-9);

  m.def("shape_id", &shape_id, py::arg("n_bands"), py::arg("band_i"), py::arg("band_j"));
  m.def(
      "assemble_covariance",
      [](int n, const Eigen::VectorXd& p, const Eigen::VectorXd& lx, const Eigen::VectorXd& lp) {
        return assemble_covariance(n, p, lx, lp);
      },
      py::arg("n_bands"), py::arg("band_powers"), py::arg("levels_x"), py::arg("levels_p"));
  m.def(
      "shape_levels",
      [](const CovarianceState& s, const Eigen::VectorXd& p, const std::string& q) {
        return shape_levels(s, p, q == "p" ? Quadrature::p : Quadrature::x);
      },
      py::arg("state"), py::arg("band_powers"), py::arg("quadrature") = "x");
  m.def(
      "synthesize_trace",
      [](int n, int i, int j, const std::vector<double>& valleys, const std::vector<double>& peaks, int spp) {
        const NoiseTrace t = synthesize_trace(n, i, j, valleys, peaks, spp);
        return py::make_tuple(t.shape_id, t.phase, t.power_db);
      },
      py::arg("n_bands"), py::arg("band_i"), py::arg("band_j"), py::arg("valleys_db"), py::arg("peaks_db"),
      py::arg("samples_per_period") = 400, "(shape_id, phase, power_db) of a synthetic trace.");
  m.def(
      "extract_extrema",
      [](const std::vector<double>& phase, const std::vector<double>& power, double smoothing, double prom) {
        NoiseTrace t;
        t.phase = phase;
        t.power_db = power;
        const ExtremaStats e = extract_extrema(t, ExtremaOptions{smoothing, prom});
        py::dict d;
        d["mean_peak_db"] = e.mean_peak_db;
        d["var_peak"] = e.var_peak;
        d["mean_valley_db"] = e.mean_valley_db;
        d["var_valley"] = e.var_valley;
        d["n_peaks"] = e.peak_db.size();
        d["n_valleys"] = e.valley_db.size();
        return d;
      },
      py::arg("phase"), py::arg("power_db"), py::arg("smoothing_fraction") = 0.01,
      py::arg("min_prominence_db") = 0.5);

  m.def(
      "simulate",
      [](const std::string& config_json) {
        const Simulation sim = simulate(parse_config(config_json, "config"));
        py::dict d;
        d["eigenvalues"] = sim.modes.eigenvalues();
        d["state"] = sim.state;
        d["band_powers"] = sim.partition.band_energies();
        d["pump_ratio"] = sim.spectrum.pump_ratio;
        d["efficiency"] = sim.spectrum.efficiency;
        d["unshaped_lo_squeezing_db"] = sim.lo_squeezing_db;
        d["unshaped_lo_antisqueezing_db"] = sim.lo_antisqueezing_db;
        return d;
      },
      py::arg("config_json"), "Run the model from a JSON configuration string.");

  m.def(
      "analyze_traces",
      [](const std::string& traces_csv, const std::string& powers_json, int mc_samples, std::uint64_t seed,
         int k_modes, int witness_samples) {
        IngestOptions o;
        o.mc_samples = mc_samples;
        o.seed = seed;
        o.k_modes = k_modes;
        o.witness_samples = witness_samples;
        const Eigen::VectorXd p = read_band_powers(powers_json);
        std::optional<IngestResult> r;
        {
          py::gil_scoped_release release;
          r.emplace(ingest(read_traces_csv(traces_csv, p), o));
        }
        return to_python(ingest_report(*r, o, "", ""));
      },
      py::arg("traces_csv"), py::arg("band_powers_json"), py::arg("mc_samples") = 10000, py::arg("seed") = 1,
      py::arg("k_modes") = 10, py::arg("witness_samples") = 1000,
      "Full trace analysis; returns the report as a dict.");

#ifdef VERSION_INFO
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
