#include "mfke/app/runner.hpp"

#include "mfke/csv.hpp"
#include "mfke/engine.hpp"
#include "mfke/errors.hpp"
#include "mfke/jumps.hpp"
#include "mfke/oracle.hpp"
#include "mfke/reversal.hpp"

#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace mfke::app {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_json(const fs::path& path, const ojson& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_series(const fs::path& dir, const std::string& stem, const std::vector<DensitySnapshot>& snaps) {
    for (std::size_t i = 0; i < snaps.size(); ++i) write_snapshots_csv(dir / artifact_name(stem, i), {snaps[i]});
}

ojson curve_json(const std::vector<std::pair<double, double>>& curve) {
    ojson a = ojson::array();
    for (const auto& [t, m] : curve) a.push_back(ojson::array({t, m}));
    return a;
}

ojson validation_json(const ProblemSpec& spec) {
    ojson a = ojson::array();
    for (const auto& d : validate(spec)) {
        a.push_back({{"severity", d.severity == Severity::note ? "note" : "warning"}, {"message", d.message}});
    }
    return a;
}

void log_line(const RunOptions& o, const std::string& s) {
    if (o.log) *o.log << s << '\n';
}

void prepare(const RunConfig& config, const RunOptions& options) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + options.out_dir.string() + ": " + ec.message());
    write_json(options.out_dir / "run_config.json", echo(config));
}

void write_timing(const RunOptions& options, double seconds) {
    write_json(options.out_dir / "timing.json", ojson{{"wall_seconds", seconds}});
    log_line(options, "wall time " + std::to_string(seconds) + " s");
}

double elapsed(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ProblemSpec forward_problem(const RunConfig& config) {
    ProblemSpec spec = build_problem(config);
    if (!spec.initial_law) throw ConfigError("problem: mode '" + config.mode + "' needs an initial law");
    return spec;
}

std::vector<double> output_times(const SimConfig& sim) {
    if (sim.snapshot_times.empty()) return {sim.horizon};
    return sim.snapshot_times;
}

DensitySnapshot on_grid(const DensitySnapshot& s, const std::vector<double>& grid) {
    DensitySnapshot out;
    out.time = s.time;
    out.grid = grid;
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out.values[i] = s.interpolate(grid[i]);
    out.mass = s.mass;
    return out;
}

double param_or(const ProblemSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

void run_simulate(const RunConfig& config, const RunOptions& options) {
    const ProblemSpec spec = forward_problem(config);
    const auto traj = simulate(spec, config.sim);
    write_series(options.out_dir, "snapshot", traj.snapshots);
    const auto& d = traj.diagnostics;
    ojson j;
    j["mode"] = "simulate";
    j["problem"] = spec.name;
    j["seed"] = config.sim.seed;
    j["N"] = config.sim.particles;
    j["dt"] = config.sim.dt;
    j["T"] = config.sim.horizon;
    j["steps"] = d.steps;
    j["lambda_max"] = d.lambda_max;
    j["lambda_evaluations"] = d.lambda_evaluations;
    j["lambda_clips"] = d.lambda_clips;
    j["min_log_weight"] = d.min_log_weight;
    j["max_log_weight"] = d.max_log_weight;
    j["snapshot_bandwidths"] = d.snapshot_bandwidths;
    j["final_mass"] = d.mass_curve.back().second;
    j["mass_curve"] = curve_json(d.mass_curve);
    j["validation"] = validation_json(spec);
    write_json(options.out_dir / "diagnostics.json", j);
    log_line(options, "simulate: " + std::to_string(traj.snapshots.size()) + " snapshots, final mass " +
                          format_double(d.mass_curve.back().second));
}

void run_jump(const RunConfig& config, const RunOptions& options) {
    const ProblemSpec spec = forward_problem(config);
    JumpTrajectory traj;
    try {
        traj = simulate_jumps(spec, config.sim);
    } catch (const std::domain_error& e) {
        throw ConfigError(std::string("jump: ") + e.what());
    }
    write_series(options.out_dir, "eta", traj.eta);
    write_series(options.out_dir, "gamma", traj.gamma);
    const auto& d = traj.diagnostics;
    ojson j;
    j["mode"] = "jump";
    j["problem"] = spec.name;
    j["seed"] = config.sim.seed;
    j["N"] = config.sim.particles;
    j["total_jumps"] = d.total_jumps;
    j["jumps_per_unit_time"] = d.jumps_per_unit_time;
    j["mass_curve"] = curve_json(d.mass_curve);
    write_json(options.out_dir / "jump_diagnostics.json", j);
    log_line(options, "jump: " + std::to_string(d.total_jumps) + " jumps, final mass " +
                          format_double(d.mass_curve.back().second));
}

void run_reverse(const RunConfig& config, const RunOptions& options) {
    const ProblemSpec spec = build_problem(config);
    if (!spec.terminal_law) throw ConfigError("problem: reverse needs a terminal law");
    BackwardSolution sol;
    try {
        sol = solve_backward(spec, config.sim);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("reverse: ") + e.what());
    }
    write_series(options.out_dir, "v", sol.v);
    write_series(options.out_dir, "u", sol.u);
    const auto& d = sol.diagnostics;
    ojson j;
    j["mode"] = "reverse";
    j["problem"] = spec.name;
    j["seed"] = config.sim.seed;
    j["N"] = config.sim.particles;
    j["drift_evaluations"] = d.drift_evaluations;
    j["floor_activations"] = d.floor_activations;
    j["floor_fraction"] = d.floor_fraction;
    j["warnings"] = d.warnings;
    write_json(options.out_dir / "diagnostics.json", j);
    for (const auto& w : d.warnings) log_line(options, "warning: " + w);
    log_line(options, "reverse: floor fraction " + format_double(d.floor_fraction));
}

void run_randomenv(const RunConfig& config, const RunOptions& options) {
    const ProblemSpec spec = forward_problem(config);
    const std::size_t n_env = options.environments.value_or(config.environment.environments);
    if (n_env == 0) throw ConfigError("--environments: need at least one");
    EnvironmentSweep sweep;
    try {
        sweep = environment_sweep(spec, config.environment.drift, config.environment.modes, config.sim, n_env,
                                  config.environment.seed);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("randomenv: ") + e.what());
    }
    {
        std::ofstream out(options.out_dir / "mass_curves.csv", std::ios::binary);
        out << "env_seed,t,mass\n";
        for (std::size_t e = 0; e < sweep.mass_curves.size(); ++e) {
            for (const auto& [t, m] : sweep.mass_curves[e]) {
                out << sweep.environment_seeds[e] << ',' << format_double(t) << ',' << format_double(m) << '\n';
            }
        }
    }
    {
        std::ofstream out(options.out_dir / "mass_table.csv", std::ios::binary);
        out << "t,mean,variance\n";
        const std::size_t steps = sweep.mass_curves.front().size();
        const double n = static_cast<double>(n_env);
        for (std::size_t k = 0; k < steps; ++k) {
            double s = 0.0;
            for (const auto& c : sweep.mass_curves) s += c[k].second;
            const double mean = s / n;
            double ss = 0.0;
            for (const auto& c : sweep.mass_curves) ss += (c[k].second - mean) * (c[k].second - mean);
            out << format_double(sweep.mass_curves.front()[k].first) << ',' << format_double(mean) << ','
                << format_double(n_env > 1 ? ss / (n - 1.0) : 0.0) << '\n';
        }
    }
    ojson j;
    j["mode"] = "randomenv";
    j["problem"] = spec.name;
    j["particle_seed"] = config.sim.seed;
    j["environment_seed"] = config.environment.seed;
    j["environments"] = n_env;
    j["mean_final_mass"] = sweep.mean;
    j["variance_final_mass"] = sweep.variance;
    j["standard_error"] = sweep.standard_error;
    j["final_mass"] = sweep.final_mass;
    write_json(options.out_dir / "summary.json", j);
    log_line(options, "randomenv: mean final mass " + format_double(sweep.mean) + " +- " +
                          format_double(sweep.standard_error));
}

void run_control(const RunConfig& config, const RunOptions& options) {
    const auto res = control_pipeline(config);
    write_series(options.out_dir, "v", res.v);
    write_series(options.out_dir, "alpha", res.alpha);
    write_series(options.out_dir, "oracle_v", res.oracle_v);
    write_series(options.out_dir, "oracle_alpha", res.oracle_alpha);
    ojson j;
    j["mode"] = "control";
    j["seed"] = config.sim.seed;
    j["N"] = config.sim.particles;
    j["D"] = res.drift_speed;
    j["rows"] = ojson::array();
    for (const auto& r : res.rows) {
        j["rows"].push_back({{"t", r.time}, {"l1_v", r.l1_v}, {"linf_v", r.linf_v}, {"identity_max", r.identity_max}});
    }
    write_json(options.out_dir / "control_report.json", j);
    for (const auto& r : res.rows) {
        log_line(options, "control: t=" + format_double(r.time) + " L1(v) " + format_double(r.l1_v));
    }
}

void run_compare_config(const RunConfig& config, const RunOptions& options) {
    if (config.compare.reference == "none") throw ConfigError("compare.reference: set cole_hopf or fd for config mode");
    const ProblemSpec spec = forward_problem(config);
    const auto traj = simulate(spec, config.sim);
    const fs::path run_dir = options.out_dir / "run";
    fs::create_directories(run_dir);
    write_series(run_dir, "snapshot", traj.snapshots);
    const std::string kind = config.compare.reference == "cole_hopf" ? "burgers" : "fd";
    const auto ref = oracle_reference(kind, config);
    write_snapshots_csv(options.out_dir / "reference.csv", ref);
    auto report = compare_snapshots(traj.snapshots, ref, config.compare.interpolate);
    report.metadata["run"] = "run";
    report.metadata["reference"] = config.compare.reference;
    report.metadata["config"] = echo(config);
    write_json(options.out_dir / "report.json", report.to_json());
    std::ofstream(options.out_dir / "report.txt", std::ios::binary) << report.to_text();
    if (options.log) *options.log << report.to_text();
}

}  // namespace

std::string artifact_name(const std::string& stem, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%03zu.csv", index);
    return stem + buf;
}

void run(const std::string& mode, const RunConfig& config_in, const RunOptions& options) {
    RunConfig config = config_in;
    config.mode = mode;
    const auto start = std::chrono::steady_clock::now();
    prepare(config, options);
    if (mode == "simulate") {
        run_simulate(config, options);
    } else if (mode == "jump") {
        run_jump(config, options);
    } else if (mode == "reverse") {
        run_reverse(config, options);
    } else if (mode == "randomenv") {
        run_randomenv(config, options);
    } else if (mode == "control") {
        run_control(config, options);
    } else if (mode == "compare") {
        run_compare_config(config, options);
    } else {
        throw ConfigError("unknown mode '" + mode + "'");
    }
    write_timing(options, elapsed(start));
}

ControlResult control_pipeline(const RunConfig& config_in) {
    RunConfig config = config_in;
    const ProblemSpec spec = forward_problem(config);
    if (spec.name != "inventory_kpz") throw ConfigError("problem.name: control needs inventory_kpz");
    if (!spec.initial_law->has_density()) throw ConfigError("problem.initial: g must have a positive density");
    const double T = config.sim.horizon;
    const double drift_speed = param_or(spec, "D", 0.0);

    // v(t) = u(T - t): snapshot u at the mirrored times.
    const auto v_times = output_times(config.sim);
    std::vector<double> u_times;
    for (auto it = v_times.rbegin(); it != v_times.rend(); ++it) {
        double t = T - *it;
        if (std::abs(t) < 1e-12 * T) t = 0.0;
        u_times.push_back(t);
    }
    SimConfig sim = config.sim;
    sim.snapshot_times = u_times;
    sim.snapshot_gradients = true;
    try {
        sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto traj = simulate(spec, sim);

    ControlResult res;
    res.drift_speed = drift_speed;
    for (std::size_t k = traj.snapshots.size(); k-- > 0;) {
        DensitySnapshot v = traj.snapshots[k];
        v.time = v_times[traj.snapshots.size() - 1 - k];
        DensitySnapshot a = traj.gradient_snapshots[k];
        a.time = v.time;
        for (double& x : a.values) x = drift_speed + 0.5 * x;
        a.mass = a.integral();
        res.v.push_back(std::move(v));
        res.alpha.push_back(std::move(a));
    }

    FdOptions fo;
    fo.grid = config.oracle.grid;
    fo.dt = config.oracle.dt;
    fo.horizon = T;
    fo.output_times = u_times;
    const auto hjb = hjb_fd_solve(spec, fo);
    const auto grid = config.sim.grid.nodes();
    for (std::size_t k = 0; k < hjb.v.size(); ++k) {
        res.oracle_v.push_back(on_grid(hjb.v[k], grid));
        res.oracle_alpha.push_back(on_grid(hjb.alpha[k], grid));
    }
    for (std::size_t k = 0; k < res.v.size(); ++k) {
        ControlRow row;
        row.time = res.v[k].time;
        std::vector<double> diff(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            diff[i] = std::abs(res.v[k].values[i] - res.oracle_v[k].values[i]);
            row.linf_v = std::max(row.linf_v, diff[i]);
            const double g = traj.gradient_snapshots[traj.snapshots.size() - 1 - k].values[i];
            row.identity_max = std::max(row.identity_max, std::abs(res.alpha[k].values[i] - drift_speed - 0.5 * g));
        }
        row.l1_v = trapezoid(grid, diff);
        res.rows.push_back(row);
    }
    return res;
}

std::vector<DensitySnapshot> oracle_reference(const std::string& kind, const RunConfig& config) {
    const auto times = output_times(config.sim);
    const auto grid = config.sim.grid.nodes();
    std::vector<DensitySnapshot> out;
    if (kind == "burgers") {
        const ProblemSpec spec = forward_problem(config);
        if (spec.name != "burgers_flux" && spec.name != "burgers_fk") {
            throw ConfigError("problem.name: the burgers oracle needs burgers_flux or burgers_fk");
        }
        if (!spec.initial_law->has_density()) throw ConfigError("problem.initial: needs a density");
        const double nu = spec.params.at("nu");
        const Sampler law = *spec.initial_law;
        const double m0 = spec.initial_mass;
        for (double t : times) {
            if (t == 0.0) {
                DensitySnapshot s{0.0, grid, std::vector<double>(grid.size()), m0};
                for (std::size_t i = 0; i < grid.size(); ++i) s.values[i] = m0 * law.density(grid[i]);
                out.push_back(std::move(s));
                continue;
            }
            auto s = cole_hopf_burgers([&](double y) { return m0 * law.cdf(y); }, nu, grid, t);
            s.mass = m0;
            out.push_back(std::move(s));
        }
    } else if (kind == "heat") {
        const ProblemSpec spec = forward_problem(config);
        if (spec.name != "linear_fp" || spec.dimension != 1 || spec.traits.has_lambda) {
            throw ConfigError("problem.name: the heat oracle needs a one-dimensional linear_fp with Lambda = 0");
        }
        const auto& law = *spec.initial_law;
        if (law.kind() != SamplerKind::dirac && law.kind() != SamplerKind::gaussian) {
            throw ConfigError("problem.initial: the heat oracle needs a dirac or gaussian initial law");
        }
        const double sigma = param_or(spec, "sigma", 1.0);
        const double drift = param_or(spec, "drift", 0.0);
        for (double t : times) {
            const double var = law.variance() + sigma * sigma * t;
            if (!(var > 0.0)) throw ConfigError("sim.snapshot_times: the heat oracle has no density at t = 0 for a dirac law");
            const boost::math::normal_distribution<double> n(law.mean() + drift * t, std::sqrt(var));
            DensitySnapshot s{t, grid, std::vector<double>(grid.size()), 1.0};
            for (std::size_t i = 0; i < grid.size(); ++i) s.values[i] = boost::math::pdf(n, grid[i]);
            out.push_back(std::move(s));
        }
    } else if (kind == "fd") {
        const ProblemSpec spec = forward_problem(config);
        FdOptions fo;
        fo.grid = config.oracle.grid;
        fo.dt = config.oracle.dt;
        fo.horizon = config.sim.horizon;
        fo.output_times = times;
        std::vector<DensitySnapshot> fd;
        try {
            fd = fd_solve(spec, fo);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("oracle: ") + e.what());
        }
        for (const auto& s : fd) out.push_back(on_grid(s, grid));
    } else if (kind == "hjb") {
        const ProblemSpec spec = forward_problem(config);
        if (spec.name != "inventory_kpz") throw ConfigError("problem.name: the hjb oracle needs inventory_kpz");
        FdOptions fo;
        fo.grid = config.oracle.grid;
        fo.dt = config.oracle.dt;
        fo.horizon = config.sim.horizon;
        for (double t : times) fo.output_times.push_back(config.sim.horizon - t);
        std::sort(fo.output_times.begin(), fo.output_times.end());
        const auto sol = hjb_fd_solve(spec, fo);
        for (const auto& v : sol.v) out.push_back(on_grid(v, grid));
    } else {
        throw ConfigError("--problem: unknown oracle '" + kind + "' (burgers, heat, fd, hjb)");
    }
    return out;
}

RunConfig default_oracle_config(const std::string& kind) {
    RunConfig c;
    c.mode = "oracle";
    c.sim.grid = UniformGrid{-5.0, 5.0, 2000};
    if (kind == "burgers" || kind == "fd") {
        c.problem.name = "burgers_flux";
        c.problem.params = {{"nu", 1.0}};
        c.problem.initial = LawConfig{"gaussian", 0.0, 0.0, 0.5, 0.0, 1.0, ""};
        c.sim.horizon = 0.5;
        c.sim.dt = 1e-3;
        c.oracle.grid = UniformGrid{-8.0, 8.0, 2000};
    } else if (kind == "heat") {
        c.problem.name = "linear_fp";
        c.problem.initial = LawConfig{"gaussian", 0.0, 0.0, 0.5, 0.0, 1.0, ""};
        c.sim.horizon = 0.5;
        c.sim.dt = 1e-3;
    } else if (kind == "hjb") {
        c.problem.name = "inventory_kpz";
        c.problem.params = {{"sigma", 1.0}, {"D", 0.1}, {"h2", 1.0}};
        c.problem.initial = LawConfig{"gaussian", 0.0, 0.0, 1.0, 0.0, 1.0, ""};
        c.sim.horizon = 0.5;
        c.sim.dt = 1e-3;
        c.sim.snapshot_times = {0.0};
        c.oracle.dt = 5e-4;
    } else {
        throw ConfigError("--problem: unknown oracle '" + kind + "' (burgers, heat, fd, hjb)");
    }
    return c;
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const NumericalAbort*>(&e)) return 3;
    if (dynamic_cast<const OracleInstability*>(&e)) return 4;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 1;
}

}  // namespace mfke::app
