#pragma once

#include "mfke/engine.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace mfke {

/// Drift of the time-reversed diffusion at reversed time s,
///   (sigma^2 v' + (d/dy sigma^2) v) / max(v, v_min) - b(T - s, y),
/// from the density value v and slope dv at y. `floored` reports whether
/// v < v_min.
double reversed_drift(double y, double s, double v, double dv, const ProblemSpec& spec, double horizon, double v_min,
                      bool* floored = nullptr);

/// Same, reading v and v' off a grid snapshot (linear interpolation, central
/// differences). v_min defaults to 1e-6 times the snapshot peak.
double reversed_drift(double y, double s, const DensitySnapshot& density, const ProblemSpec& spec, double horizon);

struct ReversalDiagnostics {
    std::size_t drift_evaluations = 0;
    std::size_t floor_activations = 0;
    double floor_fraction = 0.0;
    std::vector<std::string> warnings;
    double wall_seconds = 0.0;
};

struct BackwardSolution {
    std::vector<DensitySnapshot> v;  // at reversed times s, increasing
    std::vector<DensitySnapshot> u;  // u(t) = v(T - t), increasing t
    ParticleEnsemble final_ensemble;
    ReversalDiagnostics diagnostics;
};

/// Terminal-value problem: particles start from the terminal law and follow
///   dY = btilde(s, Y; v_s) ds + sigma(T - s, Y) dbeta,
/// v_s the KDE of the current ensemble. Snapshot times are reversed times s.
/// Requires Lambda = 0 and a terminal law.
BackwardSolution solve_backward(const ProblemSpec& spec, const SimConfig& cfg);

/// Plain forward run from the initial law (the process that the backward
/// solver reverses). Requires Lambda = 0.
Trajectory forward_reference(const ProblemSpec& spec, const SimConfig& cfg);

/// Smooth bump exp(-1 / (1 - s^2)), s = (x - center) / radius, zero outside.
struct BumpFunction {
    double center = 0.0;
    double radius = 1.0;

    double value(double x) const;
    double first(double x) const;
    double second(double x) const;
};

/// Weak-form defect of d_t u = 1/2 (sigma^2 u)'' - (b u)' at each snapshot time t:
///   <phi, u(t)> - <phi, u(T)> + int_t^T <L_s phi, u(s)> ds,
/// L_s phi = 1/2 sigma^2 phi'' + b phi'. `u` must be ordered by time and end
/// at T; space and time integrals use the trapezoid rule.
std::vector<double> weak_form_residuals(const std::vector<DensitySnapshot>& u, const ProblemSpec& spec,
                                        const BumpFunction& phi);

/// Largest absolute entry of weak_form_residuals.
double weak_form_residual(const std::vector<DensitySnapshot>& u, const ProblemSpec& spec, const BumpFunction& phi);

}  // namespace mfke
