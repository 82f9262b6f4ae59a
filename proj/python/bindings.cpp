// Python bindings: config-driven runs, oracles and metrics.

#include "mfke/app/config.hpp"
#include "mfke/app/runner.hpp"
#include "mfke/engine.hpp"
#include "mfke/errors.hpp"
#include "mfke/oracle.hpp"
#include "mfke/parallel.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mfke;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::dict snapshots_dict(const std::vector<DensitySnapshot>& snaps) {
    py::dict out;
    std::vector<double> times, masses;
    const std::size_t m = snaps.empty() ? 0 : snaps.front().grid.size();
    py::array_t<double> values({snaps.size(), m});
    auto view = values.mutable_unchecked<2>();
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        times.push_back(snaps[k].time);
        masses.push_back(snaps[k].mass);
        for (std::size_t i = 0; i < m; ++i) view(k, i) = snaps[k].values[i];
    }
    out["times"] = to_array(times);
    out["grid"] = snaps.empty() ? to_array({}) : to_array(snaps.front().grid);
    out["values"] = values;
    out["masses"] = to_array(masses);
    return out;
}

py::dict simulate_config(const std::string& text) {
    const auto cfg = app::parse_config(text);
    Trajectory traj;
    {
        py::gil_scoped_release release;
        traj = simulate(app::build_problem(cfg), cfg.sim);
    }
    py::dict out = snapshots_dict(traj.snapshots);
    std::vector<double> t, mass;
    for (const auto& [a, b] : traj.diagnostics.mass_curve) {
        t.push_back(a);
        mass.push_back(b);
    }
    out["mass_curve_t"] = to_array(t);
    out["mass_curve"] = to_array(mass);
    const auto pos = traj.final_ensemble.positions();
    const auto lw = traj.final_ensemble.log_weights();
    out["positions"] = to_array({pos.begin(), pos.end()});
    out["log_weights"] = to_array({lw.begin(), lw.end()});
    out["lambda_clips"] = traj.diagnostics.lambda_clips;
    return out;
}

}  // namespace

PYBIND11_MODULE(_mfke, m) {
    m.doc() = "Particle solvers for McKean and McKean Feynman-Kac equations";

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<NumericalAbort> numerical_abort(m, "NumericalAbort", PyExc_RuntimeError);
    static py::exception<OracleInstability> oracle_instability(m, "OracleInstability", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(config_error.ptr(), e.what());
        } catch (const NumericalAbort& e) {
            PyErr_SetString(numerical_abort.ptr(), e.what());
        } catch (const OracleInstability& e) {
            PyErr_SetString(oracle_instability.ptr(), e.what());
        }
    });

    m.def("problem_names", &builtin_problem_names, "Names of the builtin problems.");
    m.def("echo_config", [](const std::string& text) { return app::echo(app::parse_config(text)).dump(); },
          py::arg("text"), "Parses a TOML or JSON config and returns it with every default filled in, as JSON.");
    m.def("simulate", &simulate_config, py::arg("text"),
          "Runs the particle engine for a TOML or JSON config; returns snapshots, mass curve and final ensemble.");
    m.def(
        "run",
        [](const std::string& mode, const std::string& text, const std::string& out_dir) {
            const auto cfg = app::parse_config(text);
            app::RunOptions opts;
            opts.out_dir = out_dir;
            py::gil_scoped_release release;
            app::run(mode, cfg, opts);
        },
        py::arg("mode"), py::arg("text"), py::arg("out_dir"), "Runs a CLI mode and writes its artifacts to out_dir.");
    m.def(
        "oracle",
        [](const std::string& kind, const std::string& text) {
            const auto cfg = text.empty() ? app::default_oracle_config(kind) : app::parse_config(text);
            return snapshots_dict(app::oracle_reference(kind, cfg));
        },
        py::arg("kind"), py::arg("text") = "", "Reference snapshots (burgers, heat, fd, hjb) on the config's grid.");
    m.def(
        "cole_hopf_burgers",
        [](double mean, double sd, double nu, const std::vector<double>& grid, double t) {
            return to_array(cole_hopf_burgers(Sampler::gaussian(mean, sd), nu, grid, t).values);
        },
        py::arg("mean"), py::arg("sd"), py::arg("nu"), py::arg("grid"), py::arg("t"),
        "Exact viscous Burgers solution from a Gaussian initial density.");
    m.def(
        "wasserstein1_to_normal",
        [](const std::vector<double>& points, double mean, double sd) {
            return wasserstein1_to_normal(WeightedSample{points}, mean, sd);
        },
        py::arg("points"), py::arg("mean"), py::arg("sd"), "W1 between an equally weighted sample and N(mean, sd^2).");
    m.def("worker_count", &worker_count);
    m.def("set_worker_count", &set_worker_count, py::arg("workers"), "0 restores the default (MFKE_THREADS or hardware).");
}
