#include "mfke/reversal.hpp"

#include "mfke/errors.hpp"
#include "mfke/parallel.hpp"
#include "mfke/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfke {

namespace {

double sigma_at(const ProblemSpec& spec, double t, double y, double v) {
    PointState p{t, std::span<const double>(&y, 1), v};
    return spec.eval_sigma(p);
}

double sigma_squared_dx(const ProblemSpec& spec, double t, double y, double v) {
    if (spec.sigma_squared_dx) return spec.sigma_squared_dx(t, y);
    const double h = 1e-5;
    const double sp = sigma_at(spec, t, y + h, v);
    const double sm = sigma_at(spec, t, y - h, v);
    return (sp * sp - sm * sm) / (2.0 * h);
}

void require_conservative(const ProblemSpec& spec, const char* what) {
    if (spec.traits.has_lambda) throw std::invalid_argument(std::string(what) + " needs Lambda = 0");
}

}  // namespace

double reversed_drift(double y, double s, double v, double dv, const ProblemSpec& spec, double horizon, double v_min,
                      bool* floored) {
    const double t = horizon - s;
    const double sig = sigma_at(spec, t, y, v);
    const double denom = std::max(v, v_min);
    if (floored) *floored = v < v_min;
    double b = 0.0;
    PointState p{t, std::span<const double>(&y, 1), v};
    spec.eval_drift(p, std::span<double>(&b, 1));
    return (sig * sig * dv + sigma_squared_dx(spec, t, y, v) * v) / denom - b;
}

double reversed_drift(double y, double s, const DensitySnapshot& density, const ProblemSpec& spec, double horizon) {
    density.validate();
    const double peak = *std::max_element(density.values.begin(), density.values.end());
    const double h = 0.5 * (density.grid[1] - density.grid[0]);
    const double v = density.interpolate(y);
    const double dv = (density.interpolate(y + h) - density.interpolate(y - h)) / (2.0 * h);
    return reversed_drift(y, s, v, dv, spec, horizon, 1e-6 * peak);
}

BackwardSolution solve_backward(const ProblemSpec& spec, const SimConfig& cfg) {
    cfg.validate();
    require_conservative(spec, "solve_backward");
    if (!spec.terminal_law) throw std::invalid_argument("solve_backward needs a terminal law");
    if (spec.dimension != 1) throw std::invalid_argument("solve_backward is one-dimensional");
    const auto start = std::chrono::steady_clock::now();

    BackwardSolution out;
    const double T = cfg.horizon;
    const double dt = cfg.dt;
    const double sqdt = std::sqrt(dt);
    ParticleEnsemble ens = sample_initial(*spec.terminal_law, cfg.particles, 1, cfg.seed);
    const std::size_t n = ens.size();
    const std::size_t steps = cfg.steps();
    const auto snap_steps = cfg.snapshot_steps();
    std::size_t next_snap = 0;
    auto& diag = out.diagnostics;

    auto take_snapshot = [&](std::size_t k) {
        while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
            out.v.push_back(snapshot(ens, cfg, 1.0));
            ++next_snap;
        }
    };

    std::vector<char> floored(n, 0);
    for (std::size_t k = 0; k < steps; ++k) {
        take_snapshot(k);
        const double s = static_cast<double>(k) * dt;
        const Mollifier kernel(cfg.kernel, cfg.bandwidth.select(ens), 1);
        const auto kde = evaluate_kde(ens, kernel, ens.positions(), true, cfg.kde);
        const double peak = *std::max_element(kde.values.begin(), kde.values.end());
        const double v_min = 1e-6 * peak;
        const auto src = ens.positions();
        std::vector<double> next(src.begin(), src.end());
        std::vector<char> bad(n, 0);
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double y = src[i];
                bool fl = false;
                const double bt = reversed_drift(y, s, kde.values[i], kde.gradients[i], spec, T, v_min, &fl);
                floored[i] = fl ? 1 : 0;
                const double sig = sigma_at(spec, T - s, y, kde.values[i]);
                double x = y + bt * dt;
                if (sig != 0.0) x += sig * sqdt * standard_normal(cfg.seed, static_cast<std::uint32_t>(i),
                                                                  static_cast<std::uint32_t>(k), StreamTag::diffusion);
                next[i] = x;
                if (!std::isfinite(x)) bad[i] = 1;
            }
        });
        for (std::size_t i = 0; i < n; ++i) {
            if (bad[i]) {
                throw NumericalAbort("non-finite position for particle " + std::to_string(i) + " at reversed step " +
                                         std::to_string(k),
                                     i, k);
            }
            diag.floor_activations += static_cast<std::size_t>(floored[i]);
        }
        diag.drift_evaluations += n;
        ens = ParticleEnsemble(1, std::move(next), static_cast<double>(k + 1) * dt);
    }
    take_snapshot(steps);

    diag.floor_fraction = diag.drift_evaluations
                              ? static_cast<double>(diag.floor_activations) / static_cast<double>(diag.drift_evaluations)
                              : 0.0;
    if (diag.floor_fraction > 0.1) diag.warnings.emplace_back("reversed drift unreliable in vacuum");

    for (auto it = out.v.rbegin(); it != out.v.rend(); ++it) {
        DensitySnapshot u = *it;
        u.time = T - it->time;
        if (std::abs(u.time) < 1e-12 * T) u.time = 0.0;
        out.u.push_back(std::move(u));
    }
    out.final_ensemble = std::move(ens);
    diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

Trajectory forward_reference(const ProblemSpec& spec, const SimConfig& cfg) {
    require_conservative(spec, "forward_reference");
    return simulate(spec, cfg);
}

double BumpFunction::value(double x) const {
    const double s = (x - center) / radius;
    if (std::abs(s) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

double BumpFunction::first(double x) const {
    const double s = (x - center) / radius;
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    const double g = -2.0 * s / (radius * q * q);
    return value(x) * g;
}

double BumpFunction::second(double x) const {
    const double s = (x - center) / radius;
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    const double r2 = radius * radius;
    const double g = -2.0 * s / (radius * q * q);
    const double dg = -2.0 / (r2 * q * q) - 8.0 * s * s / (r2 * q * q * q);
    return value(x) * (g * g + dg);
}

std::vector<double> weak_form_residuals(const std::vector<DensitySnapshot>& u, const ProblemSpec& spec,
                                       const BumpFunction& phi) {
    if (u.empty()) throw std::invalid_argument("weak form needs at least one snapshot");
    const std::size_t m = u.size();
    std::vector<double> pairing(m), generator(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& snap = u[k];
        snap.validate();
        if (k > 0 && !(snap.time > u[k - 1].time)) throw std::invalid_argument("snapshots must be ordered by time");
        std::vector<double> a(snap.grid.size()), l(snap.grid.size());
        for (std::size_t i = 0; i < snap.grid.size(); ++i) {
            const double x = snap.grid[i];
            const double val = snap.values[i];
            const double sig = sigma_at(spec, snap.time, x, val);
            double b = 0.0;
            PointState p{snap.time, std::span<const double>(&x, 1), val};
            spec.eval_drift(p, std::span<double>(&b, 1));
            a[i] = phi.value(x) * val;
            l[i] = (0.5 * sig * sig * phi.second(x) + b * phi.first(x)) * val;
        }
        pairing[k] = trapezoid(snap.grid, a);
        generator[k] = trapezoid(snap.grid, l);
    }
    std::vector<double> out(m, 0.0);
    double tail = 0.0;  // int_{t_k}^T <L phi, u>
    out[m - 1] = 0.0;
    for (std::size_t k = m - 1; k-- > 0;) {
        tail += 0.5 * (generator[k] + generator[k + 1]) * (u[k + 1].time - u[k].time);
        out[k] = pairing[k] - pairing[m - 1] + tail;
    }
    return out;
}

double weak_form_residual(const std::vector<DensitySnapshot>& u, const ProblemSpec& spec, const BumpFunction& phi) {
    double worst = 0.0;
    for (double r : weak_form_residuals(u, spec, phi)) worst = std::max(worst, std::abs(r));
    return worst;
}

}  // namespace mfke
