#include "mfke/engine.hpp"

#include "mfke/errors.hpp"
#include "mfke/parallel.hpp"
#include "mfke/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mfke {

namespace {

// exp() overflows just above 709.
constexpr double kLogWeightLimit = 700.0;

std::uint32_t index32(std::size_t i) { return static_cast<std::uint32_t>(i); }

}  // namespace

double BandwidthConfig::select(const ParticleEnsemble& ensemble) const {
    if (policy == BandwidthPolicy::fixed) return value;
    return silverman_bandwidth(ensemble, factor, floor);
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

std::vector<std::size_t> SimConfig::snapshot_steps() const {
    std::vector<std::size_t> out;
    if (snapshot_times.empty()) {
        out.push_back(steps());
        return out;
    }
    for (double t : snapshot_times) out.push_back(static_cast<std::size_t>(std::llround(t / dt)));
    return out;
}

void SimConfig::validate() const {
    if (particles == 0) throw std::invalid_argument("sim.N: need at least one particle");
    if (particles > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("sim.N: too many particles");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sim.dt: must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("sim.T: must be positive");
    const double ratio = horizon / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio)) {
        throw std::invalid_argument("sim.dt: T / dt must be an integer");
    }
    if (grid.points < 2) throw std::invalid_argument("sim.grid.points: need at least 2");
    if (!(grid.max > grid.min)) throw std::invalid_argument("sim.grid: max must exceed min");
    if (bandwidth.policy == BandwidthPolicy::fixed && !(bandwidth.value > 0.0)) {
        throw std::invalid_argument("sim.bandwidth.value: must be positive");
    }
    if (!(bandwidth.factor > 0.0)) throw std::invalid_argument("sim.bandwidth.factor: must be positive");
    if (!(bandwidth.floor > 0.0)) throw std::invalid_argument("sim.bandwidth.floor: must be positive");
    double prev = -1.0;
    for (double t : snapshot_times) {
        if (t < 0.0 || t > horizon * (1.0 + 1e-12)) throw std::invalid_argument("sim.snapshot_times: outside [0, T]");
        const double r = t / dt;
        if (std::abs(r - std::round(r)) > 1e-6 * std::max(1.0, r)) {
            throw std::invalid_argument("sim.snapshot_times: " + std::to_string(t) + " is not on the step grid");
        }
        if (t <= prev) throw std::invalid_argument("sim.snapshot_times: must be strictly increasing");
        prev = t;
    }
}

ParticleEnsemble sample_initial(const Sampler& law, std::size_t particles, std::size_t dim, std::uint64_t seed) {
    std::vector<double> pos(particles * dim);
    parallel_for(particles, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CounterStream s(seed, index32(i), 0, StreamTag::initial_law);
            for (std::size_t k = 0; k < dim; ++k) pos[i * dim + k] = law.draw(s);
        }
    });
    return ParticleEnsemble(dim, std::move(pos), 0.0);
}

FieldValues evaluate_field(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg) {
    FieldValues f;
    const bool need_u = spec.traits.uses_density || spec.traits.uses_gradient;
    if (!need_u || spec.interaction.mode == InteractionMode::none) return f;

    const bool conv = spec.interaction.mode == InteractionMode::convolution;
    if (conv && !spec.interaction.kernel) throw std::invalid_argument("convolution interaction without a kernel");
    const Mollifier kernel = conv ? *spec.interaction.kernel
                                  : Mollifier(cfg.kernel, cfg.bandwidth.select(ensemble), ensemble.dim());
    f.bandwidth = kernel.bandwidth();
    auto eval = evaluate_kde(ensemble, kernel, ensemble.positions(), spec.traits.uses_gradient, cfg.kde);
    f.u = std::move(eval.values);
    f.grad = std::move(eval.gradients);
    if (spec.initial_mass != 1.0) {
        for (double& v : f.u) v *= spec.initial_mass;
        for (double& g : f.grad) g *= spec.initial_mass;
    }
    return f;
}

ParticleEnsemble step(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg,
                      std::size_t step_index, const FieldValues* field) {
    FieldValues local;
    if (!field) {
        local = evaluate_field(ensemble, spec, cfg);
        field = &local;
    }
    const std::size_t n = ensemble.size();
    const std::size_t d = ensemble.dim();
    const double t = ensemble.time();
    const double dt = cfg.dt;
    const double sqdt = std::sqrt(dt);
    const auto src = ensemble.positions();
    std::vector<double> next(src.begin(), src.end());
    std::vector<char> bad(n, 0);

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> b(d);
        for (std::size_t i = begin; i < end; ++i) {
            PointState p{t, ensemble.position(i), field->u.empty() ? 0.0 : field->u[i],
                         field->grad.empty() ? std::span<const double>() : std::span<const double>(field->grad.data() + i * d, d)};
            spec.eval_drift(p, b);
            const double s = spec.eval_sigma(p);
            CounterStream z(cfg.seed, index32(i), index32(step_index), StreamTag::diffusion);
            for (std::size_t k = 0; k < d; ++k) {
                double& x = next[i * d + k];
                x += b[k] * dt;
                if (s != 0.0) x += s * sqdt * z.normal();
                if (!std::isfinite(x)) bad[i] = 1;
            }
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (bad[i]) {
            throw NumericalAbort("non-finite position for particle " + std::to_string(i) + " at step " +
                                     std::to_string(step_index),
                                 i, step_index);
        }
    }
    std::vector<double> logw(ensemble.log_weights().begin(), ensemble.log_weights().end());
    ParticleEnsemble out(d, std::move(next), std::move(logw), 0.0);
    // Multiplying keeps t_k = k dt exact instead of accumulating rounding.
    out.set_time(static_cast<double>(step_index + 1) * dt);
    return out;
}

namespace {

void check_log_weights(std::span<const double> logw, std::size_t step_index) {
    for (std::size_t i = 0; i < logw.size(); ++i) {
        if (!std::isfinite(logw[i]) || std::abs(logw[i]) > kLogWeightLimit) {
            throw NumericalAbort("weight overflow for particle " + std::to_string(i) + " at step " +
                                     std::to_string(step_index) + " (check lambda_max)",
                                 i, step_index);
        }
    }
}

}  // namespace

ParticleEnsemble update_weights(const ParticleEnsemble& ensemble, const ProblemSpec& spec, double dt,
                                const FieldValues& field, std::size_t step_index, WeightStats* stats) {
    ParticleEnsemble out = ensemble;
    if (!spec.lambda) return out;
    const std::size_t n = ensemble.size();
    const std::size_t d = ensemble.dim();
    const double t = ensemble.time();
    const double cap = spec.effective_lambda_max(spec.horizon);
    auto logw = out.log_weights();
    std::vector<char> clipped(n, 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            PointState p{t, ensemble.position(i), field.u.empty() ? 0.0 : field.u[i],
                         field.grad.empty() ? std::span<const double>() : std::span<const double>(field.grad.data() + i * d, d)};
            double l = spec.lambda(p);
            if (std::isnan(l)) {
                logw[i] = l;
                continue;
            }
            if (l > cap) {
                l = cap;
                clipped[i] = 1;
            } else if (l < -cap) {
                l = -cap;
                clipped[i] = 1;
            }
            logw[i] += l * dt;
        }
    });
    check_log_weights(logw, step_index);
    if (stats) {
        stats->evaluations += n;
        for (char c : clipped) stats->clipped += static_cast<std::size_t>(c);
    }
    return out;
}

DensitySnapshot snapshot(const ParticleEnsemble& ensemble, const SimConfig& cfg, double mass_factor,
                         DensitySnapshot* gradient) {
    DensitySnapshot s;
    s.time = ensemble.time();
    s.grid = cfg.grid.nodes();
    const Mollifier kernel(cfg.kernel, cfg.bandwidth.select(ensemble), 1);
    KdeEvaluation eval;
    if (ensemble.dim() == 1) {
        eval = evaluate_kde(ensemble, kernel, s.grid, gradient != nullptr, cfg.kde);
    } else {
        // Marginal of the first coordinate.
        std::vector<double> first(ensemble.size());
        for (std::size_t i = 0; i < ensemble.size(); ++i) first[i] = ensemble.position(i)[0];
        std::vector<double> logw(ensemble.log_weights().begin(), ensemble.log_weights().end());
        ParticleEnsemble marginal(1, std::move(first), std::move(logw), ensemble.time());
        eval = evaluate_kde(marginal, kernel, s.grid, gradient != nullptr, cfg.kde);
    }
    s.values = std::move(eval.values);
    if (mass_factor != 1.0) {
        for (double& v : s.values) v *= mass_factor;
        for (double& g : eval.gradients) g *= mass_factor;
    }
    s.mass = mass_factor * ensemble.mass();
    if (gradient) {
        gradient->time = s.time;
        gradient->grid = s.grid;
        gradient->values = std::move(eval.gradients);
        gradient->mass = 0.0;
    }
    return s;
}

namespace {

Trajectory run(const ProblemSpec& spec, const SimConfig& cfg, const LogIncrementHook* hook) {
    cfg.validate();
    if (!spec.initial_law) throw std::invalid_argument("simulate needs an initial law");
    const auto start = std::chrono::steady_clock::now();

    Trajectory traj;
    ParticleEnsemble ens = sample_initial(*spec.initial_law, cfg.particles, spec.dimension, cfg.seed);
    const std::size_t steps = cfg.steps();
    const auto snap_steps = cfg.snapshot_steps();
    std::size_t next_snap = 0;
    WeightStats stats;
    auto& diag = traj.diagnostics;
    diag.steps = steps;
    diag.lambda_max = spec.effective_lambda_max(spec.horizon);
    diag.mass_curve.reserve(steps + 1);
    diag.mass_curve.emplace_back(0.0, spec.initial_mass * ens.mass());
    double lo = 0.0, hi = 0.0;

    auto take_snapshot = [&](std::size_t k) {
        while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
            DensitySnapshot grad;
            traj.snapshots.push_back(snapshot(ens, cfg, spec.initial_mass, cfg.snapshot_gradients ? &grad : nullptr));
            if (cfg.snapshot_gradients) traj.gradient_snapshots.push_back(std::move(grad));
            diag.snapshot_bandwidths.push_back(cfg.bandwidth.select(ens));
            ++next_snap;
        }
    };

    std::vector<double> incr(hook ? ens.size() : 0);
    for (std::size_t k = 0; k < steps; ++k) {
        take_snapshot(k);
        const FieldValues field = evaluate_field(ens, spec, cfg);
        if (hook) {
            (*hook)(ens, k, incr);
            auto logw = ens.log_weights();
            for (std::size_t i = 0; i < incr.size(); ++i) logw[i] += incr[i];
            check_log_weights(logw, k);
        } else {
            ens = update_weights(ens, spec, cfg.dt, field, k, &stats);
        }
        ens = step(ens, spec, cfg, k, &field);
        const auto logw = ens.log_weights();
        const auto [mn, mx] = std::minmax_element(logw.begin(), logw.end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
        diag.mass_curve.emplace_back(ens.time(), spec.initial_mass * ens.mass());
    }
    take_snapshot(steps);

    diag.lambda_evaluations = stats.evaluations;
    diag.lambda_clips = stats.clipped;
    diag.min_log_weight = lo;
    diag.max_log_weight = hi;
    traj.final_ensemble = std::move(ens);
    diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return traj;
}

}  // namespace

Trajectory simulate(const ProblemSpec& spec, const SimConfig& cfg) { return run(spec, cfg, nullptr); }

Trajectory simulate(const ProblemSpec& spec, const SimConfig& cfg, const LogIncrementHook& hook) {
    return run(spec, cfg, &hook);
}

double empirical_test_functional(const ParticleEnsemble& ensemble,
                                 const std::function<double(std::span<const double>)>& phi) {
    if (ensemble.empty()) return 0.0;
    const double m = ensemble.max_log_weight();
    const auto logw = ensemble.log_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) s += std::exp(logw[i] - m) * phi(ensemble.position(i));
    return std::exp(m) * (s / static_cast<double>(ensemble.size()));
}

}  // namespace mfke
