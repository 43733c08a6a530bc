#include "elmlink/benchmarks.hpp"
#include "elmlink/channel.hpp"
#include "elmlink/errors.hpp"
#include "elmlink/experiment.hpp"
#include "elmlink/readout.hpp"
#include "elmlink/transmitter.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace elmlink;

namespace {

py::dict row_dict(const ExperimentConfig& cfg, const ResultRow& r) {
    py::dict d;
    d["point_index"] = r.point_index;
    d["seed"] = r.seed;
    d["mode"] = to_string(r.mode);
    for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
        const auto& v = r.sweep_values[i];
        d[py::str(cfg.sweep[i].path)] = v.is_number ? py::object(py::float_(v.number)) : py::object(py::str(v.text));
    }
    d["mask_seed"] = r.mask_seed;
    d["log10_ber"] = r.ber.log10_ber;
    d["log10_ber_bound"] = r.ber.log10_ber_bound;
    d["bit_errors"] = r.ber.bit_errors;
    d["bits"] = r.ber.bits;
    d["hd_fec_pass"] = r.ber.hd_fec_pass;
    d["selected_taps"] = r.selected_taps;
    d["mc"] = r.mc;
    d["error"] = r.error;
    return d;
}

RunOptions options(int threads, std::uint64_t seed_offset, const std::filesystem::path& out) {
    RunOptions o;
    o.threads = threads;
    o.seed_offset = seed_offset;
    o.out_dir = out;
    o.quiet = true;
    return o;
}

ExperimentConfig checked(const std::string& text) {
    auto cfg = parse_config(text, "<string>");
    validate_config(cfg, "<string>");
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_elmlink, m) {
    m.doc() = "PAM-4 SSB link simulator with a photonic ELM/TDRC readout";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

    m.attr("RESULTS_SCHEMA") = kResultsSchema;
    m.attr("HD_FEC_LOG10_BER") = kHdFecLog10Ber;

    m.def("config_keys", &config_keys, "Every settable config key.");

    m.def(
        "validate_config",
        [](const std::string& text) {
            const auto cfg = checked(text);
            return cfg.grid_size() * cfg.seeds.size();
        },
        py::arg("text"), "Parses and checks a config; returns the number of runs.");

    m.def(
        "run_rows",
        [](const std::string& text, int threads, std::uint64_t seed_offset) {
            const auto cfg = checked(text);
            std::vector<ResultRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_rows(cfg, options(threads, seed_offset, "."));
            }
            py::list out;
            for (const auto& r : rows) out.append(row_dict(cfg, r));
            return out;
        },
        py::arg("text"), py::arg("threads") = 1, py::arg("seed_offset") = 0,
        "Runs every point x seed and returns one dict per row.");

    m.def(
        "run",
        [](const std::string& text, const std::filesystem::path& out_dir, int threads, std::uint64_t seed_offset) {
            const auto cfg = checked(text);
            py::gil_scoped_release release;
            return run_experiment(cfg, options(threads, seed_offset, out_dir));
        },
        py::arg("text"), py::arg("out_dir"), py::arg("threads") = 1, py::arg("seed_offset") = 0,
        "Runs a config and writes results.csv into out_dir; returns its path.");

    m.def(
        "summarize",
        [](const std::string& csv_text, const std::vector<std::string>& group_by) {
            const auto s = summarize(csv_text, group_by);
            py::list rows;
            for (const auto& r : s.rows) {
                py::dict d;
                for (std::size_t i = 0; i < group_by.size(); ++i) d[py::str(group_by[i])] = r.key[i];
                d["count"] = r.count;
                d["median"] = r.median;
                d["p25"] = r.p25;
                d["p75"] = r.p75;
                d["min"] = r.min;
                d["max"] = r.max;
                rows.append(d);
            }
            return py::make_tuple(rows, s.warnings);
        },
        py::arg("csv_text"), py::arg("group_by"), "Per-group log10 BER statistics and warnings.");

    m.def("read_dump", &read_dump, py::arg("path"));
    m.def(
        "write_dump", [](const std::filesystem::path& p, const Eigen::MatrixXd& v) { write_dump(p, v); },
        py::arg("path"), py::arg("values"));

    m.def(
        "pam4_symbols",
        [](std::size_t count, std::uint64_t seed) { return gray_encode_pam4(random_bits(2 * count, seed)).levels; },
        py::arg("count"), py::arg("seed"));

    m.def(
        "propagate",
        [](const std::vector<cplx>& field, double sample_rate, double length_km, double beta2_ps2_per_km,
           double gamma_per_w_km, double alpha_db_per_km, double step_km) {
            FiberParams fp;
            fp.length_km = length_km;
            fp.beta2_ps2_per_km = beta2_ps2_per_km;
            fp.gamma_per_w_km = gamma_per_w_km;
            fp.alpha_db_per_km = alpha_db_per_km;
            fp.step_km = step_km;
            const auto out = propagate_ssmf(ComplexEnvelope(field, sample_rate), fp);
            return py::array_t<cplx>(static_cast<py::ssize_t>(out.samples.size()), out.samples.data());
        },
        py::arg("field"), py::arg("sample_rate"), py::arg("length_km") = 100.0, py::arg("beta2_ps2_per_km") = -21.7,
        py::arg("gamma_per_w_km") = 1.3, py::arg("alpha_db_per_km") = 0.2, py::arg("step_km") = 0.1,
        "Split-step solution of the scalar fiber equation (periodic grid).");

    m.def(
        "kk_reconstruct",
        [](const std::vector<double>& intensity, double sample_rate, double carrier_detune, int upsample_factor) {
            KkConfig cfg;
            cfg.carrier_detune = carrier_detune;
            cfg.upsample_factor = upsample_factor;
            const auto env = kk_reconstruct(SampledSignal(intensity, sample_rate), cfg);
            return py::make_tuple(py::array_t<cplx>(static_cast<py::ssize_t>(env.samples.size()), env.samples.data()),
                                  env.sample_rate, env.warnings);
        },
        py::arg("intensity"), py::arg("sample_rate"), py::arg("carrier_detune") = 24.5e9,
        py::arg("upsample_factor") = 4, "Field in the carrier frame, its sample rate, warnings.");

    m.def(
        "train_ridge",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, bool has_bias) {
            FeatureMatrix fm;
            fm.values = x;
            fm.has_bias = has_bias;
            return train_ridge(fm, y, lambda).weights;
        },
        py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("has_bias") = false,
        "Ridge weights; with has_bias the last column is not penalized.");

    m.def(
        "memory_capacity",
        [](const std::string& text, int m_max, std::size_t record, std::uint64_t mask_seed) {
            const auto cfg = checked(text);
            McOptions o;
            o.record = record;
            o.mask_seed = mask_seed;
            McReport r;
            {
                py::gil_scoped_release release;
                r = memory_capacity(cfg.node, cfg.laser, m_max, o);
            }
            return py::make_tuple(r.mc, r.per_step_correlation);
        },
        py::arg("text") = "", py::arg("m_max") = 10, py::arg("record") = 6000, py::arg("mask_seed") = 1,
        "Linear memory capacity of the node described by a config; returns (mc, per-step correlations).");
}
