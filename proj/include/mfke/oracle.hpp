#pragma once

#include "mfke/measures.hpp"
#include "mfke/problems.hpp"

#include <functional>
#include <vector>

namespace mfke {

struct FdOptions {
    UniformGrid grid;
    double dt = 1e-3;
    double horizon = 1.0;
    std::vector<double> output_times;  // empty means {horizon}
};

/// Grid solution of d_t u = 1/2 (sigma^2 u)'' - (b u)' + Lambda u on a
/// finite-volume grid with zero-flux ends. Crank-Nicolson in time; the
/// coefficients are evaluated on the extrapolated state (3 u^n - u^{n-1}) / 2.
/// Throws OracleInstability (with a suggested dt) when the explicit parts
/// violate their step limit.
std::vector<DensitySnapshot> fd_solve(const ProblemSpec& spec, const std::vector<double>& initial, const FdOptions& options);

/// Initial values initial_mass * density of the spec's initial law on the grid.
std::vector<DensitySnapshot> fd_solve(const ProblemSpec& spec, const FdOptions& options);

/// Exact viscous Burgers solution d_t u = nu^2/2 u'' - u u' by Cole-Hopf:
///   u(t, x) = int (x - y)/t G phi0 dy / int G phi0 dy,  phi0 = exp(-U0 / nu^2),
/// G the heat kernel of variance nu^2 t and U0 an antiderivative of u0.
/// Throws std::runtime_error when the quadrature does not converge.
DensitySnapshot cole_hopf_burgers(const std::function<double(double)>& antiderivative, double nu,
                                  const std::vector<double>& grid, double t);

/// Same for u0 = the density of `law` (antiderivative = its CDF).
DensitySnapshot cole_hopf_burgers(const Sampler& law, double nu, const std::vector<double>& grid, double t);

/// Control problem behind inventory_kpz: value function of
///   d_t u = 1/4 (u')^2 + sigma^2/2 u'' + D u' - h,  u(0) = g,
/// returned in backward time v(t) = u(T - t), and the optimal feedback
/// alpha*(t, x) = D + 1/2 v'(t, x).
struct HjbSolution {
    std::vector<DensitySnapshot> u;      // forward (reversed-time) solution, increasing time
    std::vector<DensitySnapshot> v;      // v(t) = u(T - t), increasing t
    std::vector<DensitySnapshot> alpha;  // alpha*(t), aligned with v
};

/// `spec` must be an inventory_kpz problem. Boundary nodes are extrapolated
/// linearly (zero curvature).
HjbSolution hjb_fd_solve(const ProblemSpec& spec, const FdOptions& options);

/// With h = 0, w = exp(u / (2 sigma^2)) solves the linear equation
/// d_t w = sigma^2/2 w'' + D w'. Solves that with fd_solve and returns the
/// largest |u - 2 sigma^2 log w| over the output times. Requires h2 = h0 = 0.
double hjb_linearization_error(const ProblemSpec& spec, const FdOptions& options);

/// alpha* = D + 1/2 dv/dx by central differences (one-sided at the ends).
DensitySnapshot optimal_control(const DensitySnapshot& v, double drift_speed);

}  // namespace mfke
