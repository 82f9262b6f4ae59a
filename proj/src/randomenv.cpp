#include "mfke/randomenv.hpp"

#include "mfke/errors.hpp"
#include "mfke/parallel.hpp"
#include "mfke/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfke {

double NoiseMode::operator()(double x) const {
    switch (kind) {
        case ModeKind::constant: return amplitude;
        case ModeKind::cosine: return amplitude * std::cos(frequency * x + phase);
        case ModeKind::gaussian_bump: {
            const double z = (x - center) / width;
            return amplitude * std::exp(-0.5 * z * z);
        }
    }
    return 0.0;
}

NoiseEnvironment sample_environment(std::optional<NoiseMode> drift_mode, std::vector<NoiseMode> modes,
                                    const SimConfig& cfg, std::uint64_t seed_env) {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("sim.dt: must be positive");
    for (const auto& m : modes) {
        if (m.kind == ModeKind::gaussian_bump && !(m.width > 0.0)) throw std::invalid_argument("gaussian bump width must be positive");
    }
    NoiseEnvironment env;
    env.drift_mode = drift_mode;
    env.modes = std::move(modes);
    env.dt = cfg.dt;
    env.seed = seed_env;
    const std::size_t steps = cfg.steps();
    const double sqdt = std::sqrt(cfg.dt);
    env.increments.assign(env.modes.size(), std::vector<double>(steps));
    for (std::size_t i = 0; i < env.modes.size(); ++i) {
        for (std::size_t k = 0; k < steps; ++k) {
            env.increments[i][k] = sqdt * standard_normal(seed_env, static_cast<std::uint32_t>(i + 1),
                                                          static_cast<std::uint32_t>(k), StreamTag::environment);
        }
    }
    return env;
}

double doleans_log_increment(double x, const NoiseEnvironment& env, std::size_t step_index) {
    double l = 0.0;
    if (env.drift_mode) l += (*env.drift_mode)(x) * env.dt;
    for (std::size_t i = 0; i < env.modes.size(); ++i) {
        const double e = env.modes[i](x);
        l += e * env.increments[i].at(step_index) - 0.5 * e * e * env.dt;
    }
    return l;
}

double doleans_increment(double x, const NoiseEnvironment& env, std::size_t step_index) {
    const double r = std::exp(doleans_log_increment(x, env, step_index));
    if (!std::isfinite(r)) throw NumericalAbort("Doleans factor overflow (mode magnitudes too large)", 0, step_index);
    return r;
}

Trajectory quenched_simulate(const ProblemSpec& spec, const NoiseEnvironment& env, const SimConfig& cfg) {
    if (spec.traits.has_lambda) throw std::invalid_argument("quenched_simulate needs Lambda = 0");
    if (spec.dimension != 1) throw std::invalid_argument("random environment is one-dimensional");
    if (std::abs(env.dt - cfg.dt) > 1e-15 * cfg.dt) throw std::invalid_argument("environment dt differs from sim.dt");
    for (const auto& inc : env.increments) {
        if (inc.size() < cfg.steps()) throw std::invalid_argument("environment shorter than the run");
    }
    if (!env.drift_mode && env.modes.empty()) return simulate(spec, cfg);
    const LogIncrementHook hook = [&env](const ParticleEnsemble& ens, std::size_t k, std::span<double> out) {
        const auto pos = ens.positions();
        parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) out[i] = doleans_log_increment(pos[i], env, k);
        });
    };
    return simulate(spec, cfg, hook);
}

EnvironmentSweep environment_sweep(const ProblemSpec& spec, const std::optional<NoiseMode>& drift_mode,
                                   const std::vector<NoiseMode>& modes, const SimConfig& cfg,
                                   std::size_t environments, std::uint64_t seed_env) {
    if (environments == 0) throw std::invalid_argument("need at least one environment");
    EnvironmentSweep out;
    for (std::size_t e = 0; e < environments; ++e) {
        const std::uint64_t s = seed_env + e;
        const auto env = sample_environment(drift_mode, modes, cfg, s);
        auto traj = quenched_simulate(spec, env, cfg);
        out.environment_seeds.push_back(s);
        out.final_mass.push_back(traj.diagnostics.mass_curve.back().second);
        out.mass_curves.push_back(std::move(traj.diagnostics.mass_curve));
    }
    const double n = static_cast<double>(environments);
    double sum = 0.0;
    for (double m : out.final_mass) sum += m;
    out.mean = sum / n;
    double ss = 0.0;
    for (double m : out.final_mass) ss += (m - out.mean) * (m - out.mean);
    out.variance = environments > 1 ? ss / (n - 1.0) : 0.0;
    out.standard_error = std::sqrt(out.variance / n);
    return out;
}

}  // namespace mfke
