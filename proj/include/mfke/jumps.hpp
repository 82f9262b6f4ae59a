#pragma once

#include "mfke/engine.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace mfke {

struct JumpDiagnostics {
    std::size_t total_jumps = 0;
    double jumps_per_unit_time = 0.0;
    std::vector<std::pair<double, double>> mass_curve;  // (t, exp of the integrated mean Lambda)
};

struct JumpTrajectory {
    std::vector<DensitySnapshot> eta;    // normalised particle law
    std::vector<DensitySnapshot> gamma;  // eta rescaled by the particle mass curve
    ParticleEnsemble final_ensemble;
    JumpDiagnostics diagnostics;
};

struct JumpStepResult {
    ParticleEnsemble ensemble;
    std::size_t jumps = 0;
    double mean_lambda = 0.0;  // empirical mean of Lambda at the pre-step positions
};

/// Diffusion move followed by killing-and-relocation: particle i jumps with
/// probability 1 - exp(Lambda dt) to a uniformly chosen pre-step position.
/// Throws std::domain_error if Lambda > 0 anywhere on the ensemble.
JumpStepResult jump_step(const ParticleEnsemble& ensemble, const ProblemSpec& spec, const SimConfig& cfg,
                         std::size_t step_index);

JumpTrajectory simulate_jumps(const ProblemSpec& spec, const SimConfig& cfg);

/// gamma(t) = exp(int_0^t <eta_s, Lambda> ds) eta(t), the time integral a
/// left Riemann sum over the snapshot times and <eta_s, Lambda> a grid
/// quadrature.
std::vector<DensitySnapshot> reconstruct_gamma(const std::vector<DensitySnapshot>& eta, const ProblemSpec& spec);

/// Same rescaling, using the per-step particle mass curve of a jump run.
std::vector<DensitySnapshot> reconstruct_gamma(const std::vector<DensitySnapshot>& eta, const JumpDiagnostics& diagnostics);

}  // namespace mfke
