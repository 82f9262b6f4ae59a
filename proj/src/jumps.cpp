#include "mfke/jumps.hpp"

#include "mfke/parallel.hpp"
#include "mfke/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfke {

namespace {

double clipped_lambda(const ProblemSpec& spec, const PointState& p, double cap) {
    const double l = spec.eval_lambda(p);
    return std::clamp(l, -cap, cap);
}

}  // namespace

JumpStepResult jump_step(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg,
                         std::size_t step_index) {
    const std::size_t n = ensemble.size();
    const std::size_t d = ensemble.dim();
    const double t = ensemble.time();
    const double cap = spec.effective_lambda_max(spec.horizon);
    const FieldValues field = evaluate_field(ensemble, spec, cfg);

    std::vector<double> lambda(n, 0.0);
    if (spec.lambda) {
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                PointState p{t, ensemble.position(i), field.u.empty() ? 0.0 : field.u[i],
                             field.grad.empty() ? std::span<const double>()
                                                : std::span<const double>(field.grad.data() + i * d, d)};
                lambda[i] = clipped_lambda(spec, p, cap);
            }
        });
        for (std::size_t i = 0; i < n; ++i) {
            if (lambda[i] > 0.0 || std::isnan(lambda[i])) {
                throw std::domain_error("jump representation needs Lambda <= 0; got " + std::to_string(lambda[i]) +
                                        " at particle " + std::to_string(i));
            }
        }
    }

    JumpStepResult out{step(ensemble, spec, cfg, step_index, &field), 0, 0.0};
    double sum = 0.0;
    for (double l : lambda) sum += l;
    out.mean_lambda = sum / static_cast<double>(n);
    if (!spec.lambda) return out;

    const auto pre = ensemble.positions();
    auto pos = out.ensemble.positions();
    std::vector<char> jumped(n, 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (lambda[i] == 0.0) continue;
            CounterStream s(cfg.seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(step_index), StreamTag::jump);
            const double p = -std::expm1(lambda[i] * cfg.dt);
            if (s.uniform() >= p) continue;
            const auto j = std::min(n - 1, static_cast<std::size_t>(s.uniform() * static_cast<double>(n)));
            std::copy_n(pre.begin() + static_cast<std::ptrdiff_t>(j * d), d, pos.begin() + static_cast<std::ptrdiff_t>(i * d));
            jumped[i] = 1;
        }
    });
    for (char c : jumped) out.jumps += static_cast<std::size_t>(c);
    return out;
}

JumpTrajectory simulate_jumps(const ProblemSpec& spec, const SimConfig& cfg) {
    cfg.validate();
    if (!spec.initial_law) throw std::invalid_argument("jump run needs an initial law");
    JumpTrajectory traj;
    ParticleEnsemble ens = sample_initial(*spec.initial_law, cfg.particles, spec.dimension, cfg.seed);
    const std::size_t steps = cfg.steps();
    const auto snap_steps = cfg.snapshot_steps();
    std::size_t next_snap = 0;
    double log_mass = std::log(spec.initial_mass);
    auto& diag = traj.diagnostics;
    diag.mass_curve.emplace_back(0.0, std::exp(log_mass));

    auto take_snapshot = [&](std::size_t k) {
        while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
            traj.eta.push_back(snapshot(ens, cfg, 1.0));
            ++next_snap;
        }
    };
    for (std::size_t k = 0; k < steps; ++k) {
        take_snapshot(k);
        auto r = jump_step(ens, spec, cfg, k);
        ens = std::move(r.ensemble);
        diag.total_jumps += r.jumps;
        log_mass += r.mean_lambda * cfg.dt;
        diag.mass_curve.emplace_back(ens.time(), std::exp(log_mass));
    }
    take_snapshot(steps);
    diag.jumps_per_unit_time = static_cast<double>(diag.total_jumps) / cfg.horizon;
    traj.gamma = reconstruct_gamma(traj.eta, diag);
    traj.final_ensemble = std::move(ens);
    return traj;
}

std::vector<DensitySnapshot> reconstruct_gamma(const std::vector<DensitySnapshot>& eta, const ProblemSpec& spec) {
    std::vector<DensitySnapshot> out;
    out.reserve(eta.size());
    const double cap = spec.effective_lambda_max(spec.horizon);
    double integral = 0.0;
    double prev_t = 0.0;
    double prev_mean = 0.0;
    for (std::size_t s = 0; s < eta.size(); ++s) {
        const auto& e = eta[s];
        e.validate();
        std::vector<double> lu(e.grid.size(), 0.0);
        std::vector<double> grad(e.grid.size(), 0.0);
        if (spec.traits.uses_gradient) {
            for (std::size_t i = 0; i < e.grid.size(); ++i) {
                const std::size_t a = i == 0 ? 0 : i - 1;
                const std::size_t b = std::min(i + 1, e.grid.size() - 1);
                grad[i] = (e.values[b] - e.values[a]) / (e.grid[b] - e.grid[a]);
            }
        }
        for (std::size_t i = 0; i < e.grid.size(); ++i) {
            const double x = e.grid[i];
            PointState p{e.time, std::span<const double>(&x, 1), e.values[i],
                         spec.traits.uses_gradient ? std::span<const double>(&grad[i], 1) : std::span<const double>()};
            lu[i] = std::clamp(spec.eval_lambda(p), -cap, cap) * e.values[i];
        }
        const double norm = e.integral();
        const double mean = norm > 0.0 ? trapezoid(e.grid, lu) / norm : 0.0;
        // Left Riemann sum; a first snapshot after t = 0 extends its own value back to 0.
        integral += (s == 0 ? mean : prev_mean) * (e.time - prev_t);
        prev_t = e.time;
        prev_mean = mean;

        DensitySnapshot g = e;
        const double m = std::exp(integral);
        for (double& v : g.values) v *= m;
        g.mass = m * e.mass;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<DensitySnapshot> reconstruct_gamma(const std::vector<DensitySnapshot>& eta, const JumpDiagnostics& diagnostics) {
    std::vector<DensitySnapshot> out;
    out.reserve(eta.size());
    for (const auto& e : eta) {
        // Mass curve entries sit on the step grid; take the nearest one.
        auto it = std::lower_bound(diagnostics.mass_curve.begin(), diagnostics.mass_curve.end(), e.time,
                                   [](const auto& a, double t) { return a.first < t; });
        double m = 1.0;
        if (it == diagnostics.mass_curve.end()) {
            if (!diagnostics.mass_curve.empty()) m = diagnostics.mass_curve.back().second;
        } else if (it != diagnostics.mass_curve.begin() &&
                   std::abs(std::prev(it)->first - e.time) < std::abs(it->first - e.time)) {
            m = std::prev(it)->second;
        } else {
            m = it->second;
        }
        DensitySnapshot g = e;
        for (double& v : g.values) v *= m;
        g.mass = m * e.mass;
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace mfke
