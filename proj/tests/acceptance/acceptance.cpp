// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [--criterion N]... [--mfke PATH]
//
// With no --criterion every criterion runs. Exit status 1 if any fails.

#include "mfke/app/config.hpp"
#include "mfke/app/runner.hpp"
#include "mfke/engine.hpp"
#include "mfke/jumps.hpp"
#include "mfke/oracle.hpp"
#include "mfke/parallel.hpp"
#include "mfke/randomenv.hpp"
#include "mfke/reversal.hpp"

#include <CLI11.hpp>
#include <boost/math/distributions/normal.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using namespace mfke;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

double l1_between(const DensitySnapshot& a, const DensitySnapshot& b) {
    std::vector<double> d(a.grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(a.values[i] - b.values[i]);
    return trapezoid(a.grid, d);
}

// W1 between a grid density (normalised) and N(m, sd^2), trapezoid CDF.
double w1_grid_normal(const DensitySnapshot& s, double m, double sd) {
    const auto [n, mass] = normalize(s);
    const boost::math::normal_distribution<double> law(m, sd);
    double F = 0.0, w = 0.0;
    for (std::size_t i = 1; i < n.grid.size(); ++i) {
        const double h = n.grid[i] - n.grid[i - 1];
        const double F_prev = F;
        F += 0.5 * h * (n.values[i] + n.values[i - 1]);
        const double a = std::abs(F_prev - boost::math::cdf(law, n.grid[i - 1]));
        const double b = std::abs(F - boost::math::cdf(law, n.grid[i]));
        w += 0.5 * h * (a + b);
    }
    return w;
}

SimConfig base_config(std::size_t n, double dt, double horizon, std::uint64_t seed) {
    SimConfig c;
    c.particles = n;
    c.dt = dt;
    c.horizon = horizon;
    c.seed = seed;
    return c;
}

// ---------------------------------------------------------------------------

Outcome linear_baseline() {
    const auto spec = builtin_problem("linear_fp", {{"sigma", 1.0}});
    set_worker_count(1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto traj = simulate(spec, base_config(100000, 1e-3, 1.0, 1));
    const double wall = seconds_since(t0);
    const double w1 = wasserstein1_to_normal(WeightedSample{traj.final_ensemble.positions()}, 0.0, 1.0);

    // Monte Carlo rate: the Brownian marginal does not depend on dt, so the
    // seed study uses 100 steps.
    std::vector<double> small, large;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (std::size_t n : {10000u, 100000u}) {
            const auto t = simulate(spec, base_config(n, 1e-2, 1.0, seed));
            (n == 10000 ? small : large).push_back(wasserstein1_to_normal(WeightedSample{t.final_ensemble.positions()}, 0.0, 1.0));
        }
    }
    set_worker_count(0);
    const double ratio = mean(small) / mean(large);
    Outcome o;
    o.pass = w1 <= 0.02 && wall <= 60.0 && ratio >= 2.5 && ratio <= 4.0;
    o.detail = "W1 " + fmt("%.4g", w1) + " (<= 0.02), wall " + fmt("%.1f", wall) + " s (<= 60), error ratio N=1e4/1e5 " +
               fmt("%.3f", ratio) + " over 10 seeds (in [2.5, 4])";
    return o;
}

Outcome mass_identities() {
    bool ok = true;
    std::size_t checked = 0;
    // Lambda = 0: every mass on the curve is exactly 1.
    for (const char* name : {"linear_fp", "burgers_flux"}) {
        ParamMap p;
        if (std::string(name) == "burgers_flux") p["nu"] = 1.0;
        const auto spec = builtin_problem(name, p);
        for (std::uint64_t seed : {1u, 2u}) {
            const auto traj = simulate(spec, base_config(5000, 1e-2, 1.0, seed));
            for (const auto& [t, m] : traj.diagnostics.mass_curve) {
                ok = ok && m == 1.0;
                ++checked;
            }
            ok = ok && traj.snapshots.back().mass == 1.0;
        }
    }
    // Lambda = lambda(t): mass is the left Riemann exponential, bit for bit.
    const double l0 = -0.7, slope = 0.3, dt = 1e-2;
    const auto spec = builtin_problem("linear_fp", {{"lambda", l0}, {"lambda_slope", slope}});
    std::vector<double> expected{1.0};
    double s = 0.0;
    for (std::size_t k = 0; k < 100; ++k) {
        s += (l0 + slope * (static_cast<double>(k) * dt) - 0.0) * dt;
        expected.push_back(std::exp(s));
    }
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto traj = simulate(spec, base_config(5000, dt, 1.0, seed));
        const auto& curve = traj.diagnostics.mass_curve;
        ok = ok && curve.size() == expected.size();
        for (std::size_t k = 0; k < curve.size() && k < expected.size(); ++k) {
            ok = ok && curve[k].second == expected[k];
            ++checked;
        }
    }
    return {ok, std::to_string(checked) + " step masses compared bitwise (Lambda = 0 and Lambda = lambda(t), 3 seeds)"};
}

Outcome burgers_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto flux = builtin_problem("burgers_flux", {{"nu", 1.0}, {"T", 0.5}});
    const auto fk = builtin_problem("burgers_fk", {{"nu", 1.0}, {"T", 0.5}});
    SimConfig cfg = base_config(100000, 2e-3, 0.5, 1);
    cfg.grid = UniformGrid{-5.0, 5.0, 2000};
    const auto exact = cole_hopf_burgers(*flux.initial_law, 1.0, cfg.grid.nodes(), 0.5);
    std::vector<double> e_flux, e_fk, e_pair;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.seed = seed;
        const auto a = simulate(flux, cfg).snapshots.back();
        const auto b = simulate(fk, cfg).snapshots.back();
        e_flux.push_back(l1_between(a, exact));
        e_fk.push_back(l1_between(b, exact));
        e_pair.push_back(l1_between(a, b));
    }
    const double wall = seconds_since(t0);
    Outcome o;
    o.pass = mean(e_flux) <= 0.05 && mean(e_fk) <= 0.05 && mean(e_pair) <= 0.03 && wall <= 600.0;
    o.detail = "10-seed mean L1 vs Cole-Hopf: flux " + fmt("%.4f", mean(e_flux)) + ", fk " + fmt("%.4f", mean(e_fk)) +
               " (<= 0.05); flux vs fk " + fmt("%.4f", mean(e_pair)) + " (<= 0.03); wall " + fmt("%.0f", wall) +
               " s (<= 600)";
    return o;
}

Outcome jump_weight_equivalence() {
    const auto spec = builtin_problem("linear_fp", {{"lambda_quadratic", 1.0}, {"lambda_cap", 10.0}, {"T", 0.5}});
    const std::vector<std::pair<std::string, std::function<double(std::span<const double>)>>> phis = {
        {"1", [](std::span<const double>) { return 1.0; }},
        {"x", [](std::span<const double> x) { return x[0]; }},
        {"x^2", [](std::span<const double> x) { return x[0] * x[0]; }},
        {"1{x>0}", [](std::span<const double> x) { return x[0] > 0.0 ? 1.0 : 0.0; }},
    };
    std::vector<std::vector<double>> w(phis.size()), j(phis.size());
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto weighted = simulate(spec, base_config(100000, 1e-3, 0.5, seed));
        const auto jumped = simulate_jumps(spec, base_config(100000, 1e-3, 0.5, 100 + seed));
        const double mass = jumped.diagnostics.mass_curve.back().second;
        for (std::size_t f = 0; f < phis.size(); ++f) {
            w[f].push_back(empirical_test_functional(weighted.final_ensemble, phis[f].second));
            j[f].push_back(mass * empirical_test_functional(jumped.final_ensemble, phis[f].second));
        }
    }
    Outcome o{true, ""};
    for (std::size_t f = 0; f < phis.size(); ++f) {
        const double diff = std::abs(mean(w[f]) - mean(j[f]));
        const double se = std::hypot(standard_error(w[f]), standard_error(j[f]));
        const bool ok = diff <= 2.0 * se;
        o.pass = o.pass && ok;
        o.detail += (f ? "; " : "") + phis[f].first + ": |diff| " + fmt("%.2e", diff) + " vs 2 SE " + fmt("%.2e", 2.0 * se);
    }
    return o;
}

Outcome reversal_round_trip() {
    // OU b = -x, sigma = 1 from N(1, 0.5^2) over T = 0.5.
    const double a = 1.0, sigma = 1.0, m0 = 1.0, sd0 = 0.5, T = 0.5;
    auto forward = builtin_problem("terminal_fp", {{"sigma", sigma}, {"a", a}, {"T", T}});
    forward.terminal_law.reset();
    forward.initial_law = Sampler::gaussian(m0, sd0);
    SimConfig cfg = base_config(100000, 1e-2, T, 1);
    cfg.grid = UniformGrid{-5.0, 6.0, 2201};
    for (int k = 0; k <= 50; ++k) cfg.snapshot_times.push_back(0.01 * k);
    const auto fwd = forward_reference(forward, cfg);

    const double mT = m0 * std::exp(-a * T);
    const double vT = sd0 * sd0 * std::exp(-2 * a * T) + sigma * sigma / (2 * a) * (1 - std::exp(-2 * a * T));
    const double forward_error = w1_grid_normal(fwd.snapshots.back(), mT, std::sqrt(vT));

    auto backward = forward;
    backward.initial_law.reset();
    backward.terminal_law = Sampler::from_snapshot(fwd.snapshots.back());
    SimConfig bcfg = cfg;
    bcfg.seed = 2;
    const auto sol = solve_backward(backward, bcfg);
    const double recovered = w1_grid_normal(sol.u.front(), m0, sd0);

    bool weak_ok = true;
    std::string weak;
    const double floor = 3.0 * std::exp(-1.0) / std::sqrt(static_cast<double>(cfg.particles));
    for (double c : {-0.5, 0.0, 0.5, 1.0, 1.5}) {
        const BumpFunction phi{c, 1.0};
        const double r_back = weak_form_residual(sol.u, forward, phi);
        const double tol = std::max(2.0 * weak_form_residual(fwd.snapshots, forward, phi), floor);
        weak_ok = weak_ok && r_back <= tol;
        weak += (weak.empty() ? "" : ", ") + fmt("%.1e", r_back) + "/" + fmt("%.1e", tol);
    }
    Outcome o;
    o.pass = recovered <= 2.0 * forward_error && weak_ok;
    o.detail = "W1(recovered u0) " + fmt("%.4f", recovered) + " vs 2x forward KDE error " + fmt("%.4f", 2.0 * forward_error) +
               "; weak-form residual/tolerance on 5 bumps: " + weak;
    return o;
}

Outcome environment_conservativity() {
    const auto spec = builtin_problem("linear_fp", {});
    const SimConfig cfg = base_config(10000, 1e-2, 1.0, 1);
    const NoiseMode mode{ModeKind::cosine, 1.0, 1.0, 0.0};
    const auto sweep = environment_sweep(spec, std::nullopt, {mode}, cfg, 200, 1000);
    const bool mean_ok = std::abs(sweep.mean - 1.0) <= 3.0 * sweep.standard_error;

    const auto burgers = builtin_problem("burgers_flux", {{"nu", 1.0}, {"T", 0.5}});
    const SimConfig bcfg = base_config(10000, 1e-2, 0.5, 3);
    const auto env = sample_environment(std::nullopt, {}, bcfg, 7);
    const auto q = quenched_simulate(burgers, env, bcfg);
    const auto d = simulate(burgers, bcfg);
    const bool bitwise = copy(q.final_ensemble.positions()) == copy(d.final_ensemble.positions()) &&
                         copy(q.final_ensemble.log_weights()) == copy(d.final_ensemble.log_weights()) &&
                         q.snapshots.back().values == d.snapshots.back().values &&
                         q.diagnostics.mass_curve == d.diagnostics.mass_curve;
    Outcome o;
    o.pass = mean_ok && bitwise;
    o.detail = "mean final mass " + fmt("%.4f", sweep.mean) + " +- 3 SE " + fmt("%.4f", 3.0 * sweep.standard_error) +
               " over 200 environments; zero-mode run " + (bitwise ? "bitwise identical" : "DIFFERS") + " to the engine";
    return o;
}

Outcome hjb_toy_problem() {
    const auto cfg = app::parse_config(R"(
mode = "control"
[problem]
name = "inventory_kpz"
[problem.params]
sigma = 1.0
D = 0.1
h2 = 1.0
h0 = 0.0
[problem.initial]
kind = "gaussian"
mean = 0.0
sd = 1.0
[sim]
N = 100000
dt = 1e-3
T = 0.5
seed = 1
snapshot_times = [0.0, 0.25]
[sim.grid]
min = -5.0
max = 5.0
points = 2000
[oracle]
dt = 5e-4
)");
    const auto res = app::control_pipeline(cfg);
    double identity = 0.0;
    for (const auto& r : res.rows) identity = std::max(identity, r.identity_max);
    const double l1 = res.rows.front().l1_v;
    Outcome o;
    o.pass = l1 <= 0.1 && identity <= 1e-12;
    o.detail = "L1(v(0)) vs grid HJB " + fmt("%.4g", l1) + " (<= 0.1); max |alpha - D - v'/2| " + fmt("%.1e", identity);
    return o;
}

Outcome oracle_consistency() {
    const auto burgers = builtin_problem("burgers_flux", {{"nu", 1.0}, {"T", 0.5}});
    const FdOptions bo{UniformGrid{-8.0, 8.0, 2000}, 1e-3, 0.5, {}};
    const auto fd = fd_solve(burgers, bo).back();
    const auto ch = cole_hopf_burgers(*burgers.initial_law, 1.0, fd.grid, 0.5);
    double e_ch = 0.0;
    for (std::size_t i = 0; i < fd.grid.size(); ++i) e_ch = std::max(e_ch, std::abs(fd.values[i] - ch.values[i]));

    auto heat = builtin_problem("linear_fp", {{"T", 0.5}});
    heat.initial_law = Sampler::gaussian(0.0, 0.5);
    const auto h = fd_solve(heat, bo).back();
    double e_heat = 0.0;
    for (std::size_t i = 0; i < h.grid.size(); ++i) {
        const double x = h.grid[i];
        e_heat = std::max(e_heat, std::abs(h.values[i] - std::exp(-x * x / 1.5) / std::sqrt(1.5 * std::numbers::pi)));
    }

    const auto hjb = builtin_problem("inventory_kpz", {{"sigma", 1.0}, {"D", 0.0}, {"h2", 0.0}, {"h0", 0.0}, {"T", 0.5}});
    const double e_lin = hjb_linearization_error(hjb, FdOptions{UniformGrid{-8.0, 8.0, 1601}, 1e-3, 0.5, {0.1, 0.25, 0.5}});
    Outcome o;
    o.pass = e_ch <= 1e-3 && e_heat <= 1e-4 && e_lin <= 1e-3;
    o.detail = "Cole-Hopf vs fd Linf " + fmt("%.2e", e_ch) + " (<= 1e-3); heat vs exact " + fmt("%.2e", e_heat) +
               " (<= 1e-4); HJB linearization " + fmt("%.2e", e_lin) + " (<= 1e-3)";
    return o;
}

// --- determinism across MFKE_THREADS, through the CLI ---

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> artifacts(const fs::path& root) {
    std::map<std::string, std::string> out;
    if (fs::is_regular_file(root)) {
        out["."] = slurp(root);
        return out;
    }
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
        out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return out;
}

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::map<std::string, std::string> kConfigs = {
    {"simulate", R"(
[problem]
name = "burgers_fk"
[problem.params]
nu = 1.0
[sim]
N = 20000
dt = 0.01
T = 0.3
snapshot_times = [0.1, 0.3]
)"},
    {"jump", R"(
[problem]
name = "linear_fp"
[problem.params]
lambda_quadratic = 1.0
lambda_cap = 10.0
[sim]
N = 20000
dt = 0.01
T = 0.5
snapshot_times = [0.25, 0.5]
)"},
    {"reverse", R"(
[problem]
name = "terminal_fp"
[problem.params]
a = 1.0
[sim]
N = 20000
dt = 0.01
T = 0.2
snapshot_times = [0.0, 0.1, 0.2]
)"},
    {"randomenv", R"(
[problem]
name = "linear_fp"
[sim]
N = 5000
dt = 0.02
T = 0.5
[environment]
environments = 5
seed = 3
[[environment.modes]]
kind = "cosine"
)"},
    {"control", R"(
[problem]
name = "inventory_kpz"
[problem.params]
sigma = 1.0
D = 0.1
[sim]
N = 20000
dt = 0.01
T = 0.2
snapshot_times = [0.0, 0.1]
[oracle]
dt = 1e-3
)"},
    {"compare", R"(
[problem]
name = "burgers_flux"
[problem.params]
nu = 1.0
[sim]
N = 20000
dt = 0.01
T = 0.2
[oracle]
dt = 1e-3
[compare]
reference = "cole_hopf"
)"},
    {"oracle", R"(
[problem]
name = "burgers_flux"
[problem.params]
nu = 1.0
[sim]
T = 0.5
snapshot_times = [0.25, 0.5]
)"},
};

Outcome determinism(const std::string& mfke) {
    if (mfke.empty() || !fs::exists(mfke)) return {false, "mfke binary not found (pass --mfke)"};
    const fs::path root = fs::temp_directory_path() / ("mfke_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    bool ok = true;
    std::vector<std::string> bad;
    std::size_t files = 0;
    for (const auto& [cmd, text] : kConfigs) {
        const fs::path cfg = root / (cmd + ".toml");
        std::ofstream(cfg, std::ios::binary) << text;
        std::vector<std::map<std::string, std::string>> runs;
        for (const char* threads : {"1", "4", "4"}) {
            const fs::path out = root / (cmd + "_" + threads + "_" + std::to_string(runs.size()));
            std::string line = "MFKE_THREADS=" + std::string(threads) + " " + mfke + " ";
            if (cmd == "oracle") {
                line += "oracle --problem burgers --config " + cfg.string() + " --out " + out.string() + ".csv";
            } else {
                line += cmd + " --config " + cfg.string() + " --out " + out.string();
            }
            const int rc = shell(line);
            runs.push_back(rc == 0 ? artifacts(cmd == "oracle" ? fs::path(out.string() + ".csv") : out)
                                   : std::map<std::string, std::string>{});
        }
        const bool same = !runs[0].empty() && runs[0] == runs[1] && runs[1] == runs[2];
        if (!same) bad.push_back(cmd);
        ok = ok && same;
        files += runs[0].size();
    }
    // path form of compare
    std::vector<std::string> reports;
    for (const char* threads : {"1", "4"}) {
        const fs::path out = root / (std::string("cmp_paths_") + threads);
        const int rc = shell(std::string("MFKE_THREADS=") + threads + " " + mfke + " compare " + (root / "simulate_1_0").string() +
                             " " + (root / "simulate_4_1").string() + " --out " + out.string());
        reports.push_back(rc == 0 ? slurp(out / "report.json") : "");
    }
    if (reports[0].empty() || reports[0] != reports[1]) {
        ok = false;
        bad.push_back("compare(paths)");
    }
    fs::remove_all(root);
    std::string detail = std::to_string(kConfigs.size()) + " config runs x MFKE_THREADS {1, 4, 4} plus path-mode compare x {1, 4}: " +
                         std::to_string(files) + " artifacts byte-identical";
    if (!bad.empty()) {
        detail = "differs or failed:";
        for (const auto& b : bad) detail += " " + b;
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> selected;
    std::string mfke;
    app.add_option("--criterion", selected, "criterion number (repeatable)")->check(CLI::Range(1, 9));
    app.add_option("--mfke", mfke, "path to the mfke binary");
    CLI11_PARSE(app, argc, argv);
    if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
        {1, {"linear Fokker-Planck baseline", linear_baseline}},
        {2, {"exact mass identities", mass_identities}},
        {3, {"Burgers two-representation equivalence", burgers_equivalence}},
        {4, {"jump/weight equivalence", jump_weight_equivalence}},
        {5, {"time-reversal round trip", reversal_round_trip}},
        {6, {"random environment conservativity", environment_conservativity}},
        {7, {"HJB toy problem", hjb_toy_problem}},
        {8, {"oracle self-consistency", oracle_consistency}},
        {9, {"determinism across MFKE_THREADS", [&] { return determinism(mfke); }}},
    };
    int failures = 0;
    for (int id : selected) {
        const auto& [name, fn] = criteria.at(id);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
