#pragma once

#include "mfke/kde_evaluator.hpp"
#include "mfke/measures.hpp"
#include "mfke/problems.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace mfke {

enum class BandwidthPolicy { silverman, fixed };

struct BandwidthConfig {
    BandwidthPolicy policy = BandwidthPolicy::silverman;
    double value = 0.1;  // eps for the fixed policy
    double factor = 1.06;
    double floor = 1e-3;

    /// eps for the given ensemble under this policy.
    double select(const ParticleEnsemble& ensemble) const;
};

struct SimConfig {
    std::size_t particles = 10'000;
    double dt = 1e-2;
    double horizon = 1.0;
    BandwidthConfig bandwidth;
    KernelFamily kernel = KernelFamily::gaussian;
    std::vector<double> snapshot_times;  // empty means {horizon}
    std::uint64_t seed = 1;
    UniformGrid grid;
    KdeOptions kde;
    bool snapshot_gradients = false;  // also store d/dx of each grid snapshot

    /// Number of Euler steps, round(horizon / dt).
    std::size_t steps() const;
    /// Step index of each snapshot time, in increasing order.
    std::vector<std::size_t> snapshot_steps() const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// u (and grad u) seen by each particle, from the frozen pre-step ensemble.
/// Empty vectors when the problem does not need them.
struct FieldValues {
    std::vector<double> u;
    std::vector<double> grad;  // d per particle
    double bandwidth = 0.0;
};

struct WeightStats {
    std::size_t evaluations = 0;
    std::size_t clipped = 0;
};

struct RunDiagnostics {
    std::size_t steps = 0;
    std::size_t lambda_evaluations = 0;
    std::size_t lambda_clips = 0;
    double lambda_max = 0.0;
    double min_log_weight = 0.0;
    double max_log_weight = 0.0;
    std::vector<std::pair<double, double>> mass_curve;  // (t, mass) at every step boundary
    std::vector<double> snapshot_bandwidths;
    double wall_seconds = 0.0;
};

struct Trajectory {
    std::vector<DensitySnapshot> snapshots;
    std::vector<DensitySnapshot> gradient_snapshots;  // only with cfg.snapshot_gradients
    ParticleEnsemble final_ensemble;
    RunDiagnostics diagnostics;
};

/// Samples N particles from `law` with the initial-law substream of `seed`.
ParticleEnsemble sample_initial(const Sampler& law, std::size_t particles, std::size_t dim, std::uint64_t seed);

/// u and grad u at every particle, per the problem's interaction mode. u
/// includes the problem's initial mass.
FieldValues evaluate_field(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg);

/// One Euler-Maruyama move from `ensemble.time()`. Coefficients read `field`
/// (computed from `ensemble` if null). Weights are carried over unchanged.
/// Throws NumericalAbort on a non-finite position.
ParticleEnsemble step(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg,
                      std::size_t step_index, const FieldValues* field = nullptr);

/// log w_j += clip(Lambda(t, xi_j, u_j, g_j)) dt at t = ensemble.time().
/// Throws NumericalAbort when a log-weight leaves the representable range.
ParticleEnsemble update_weights(const ParticleEnsemble& ensemble, const ProblemSpec& spec, double dt,
                                const FieldValues& field, std::size_t step_index = 0, WeightStats* stats = nullptr);

/// Replaces the Lambda dt log-increment of each particle. Called with the
/// pre-step ensemble; writes one increment per particle.
using LogIncrementHook = std::function<void(const ParticleEnsemble&, std::size_t step_index, std::span<double> out)>;

/// Forward run from the initial law: weights, then move, once per step, with
/// grid snapshots at the configured times.
Trajectory simulate(const ProblemSpec& spec, const SimConfig& cfg);
Trajectory simulate(const ProblemSpec& spec, const SimConfig& cfg, const LogIncrementHook& hook);

/// Grid KDE snapshot of an ensemble (values and mass scaled by `mass_factor`).
/// In d > 1 the first-coordinate marginal is used. `gradient`, if given,
/// receives the exact KDE derivative on the same grid.
DensitySnapshot snapshot(const ParticleEnsemble& ensemble, const SimConfig& cfg, double mass_factor = 1.0,
                         DensitySnapshot* gradient = nullptr);

/// (1/N) sum_j w_j phi(xi_j).
double empirical_test_functional(const ParticleEnsemble& ensemble,
                                 const std::function<double(std::span<const double>)>& phi);

}  // namespace mfke
