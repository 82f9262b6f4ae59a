#pragma once

#include "mfke/engine.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace mfke {

enum class ModeKind { constant, cosine, gaussian_bump };

/// Spatial mode e(x):
///   constant       amplitude
///   cosine         amplitude cos(frequency x + phase)
///   gaussian_bump  amplitude exp(-(x - center)^2 / (2 width^2))
struct NoiseMode {
    ModeKind kind = ModeKind::constant;
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;
    double center = 0.0;
    double width = 1.0;

    double operator()(double x) const;
};

/// One realisation of xi(t, x) = e0(x) t + sum_i e_i(x) B^i_t on the step grid.
struct NoiseEnvironment {
    std::optional<NoiseMode> drift_mode;           // e0, paired with B^0_t = t
    std::vector<NoiseMode> modes;                  // e1 .. eM
    std::vector<std::vector<double>> increments;   // increments[i][k] = B^{i+1}_{(k+1)dt} - B^{i+1}_{k dt}
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/// Draws all mode increments from the environment substream of `seed_env`,
/// independent of the particle seed.
NoiseEnvironment sample_environment(std::optional<NoiseMode> drift_mode, std::vector<NoiseMode> modes,
                                    const SimConfig& cfg, std::uint64_t seed_env);

/// e0(x) dt + sum_i e_i(x) dB^i_k - 1/2 sum_i e_i(x)^2 dt.
double doleans_log_increment(double x, const NoiseEnvironment& env, std::size_t step_index);

/// exp(doleans_log_increment). Throws NumericalAbort on overflow.
double doleans_increment(double x, const NoiseEnvironment& env, std::size_t step_index);

/// Engine run for the frozen environment: the exp(Lambda dt) weight factor is
/// replaced by the Doleans increment at the start-of-step position.
/// Requires Lambda = 0 in `spec`.
Trajectory quenched_simulate(const ProblemSpec& spec, const NoiseEnvironment& env, const SimConfig& cfg);

struct EnvironmentSweep {
    std::vector<std::uint64_t> environment_seeds;
    std::vector<std::vector<std::pair<double, double>>> mass_curves;
    std::vector<double> final_mass;
    double mean = 0.0;
    double variance = 0.0;        // unbiased sample variance over environments
    double standard_error = 0.0;  // sqrt(variance / environments)
};

/// Quenched runs over `environments` environment seeds seed_env, seed_env+1, ...;
/// the particle seed stays cfg.seed.
EnvironmentSweep environment_sweep(const ProblemSpec& spec, const std::optional<NoiseMode>& drift_mode,
                                   const std::vector<NoiseMode>& modes, const SimConfig& cfg,
                                   std::size_t environments, std::uint64_t seed_env);

}  // namespace mfke
