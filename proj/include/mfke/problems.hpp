#pragma once

#include "mfke/measures.hpp"
#include "mfke/rng.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfke {

/// Arguments shared by every coefficient evaluation.
///
/// `u` is the pointwise density estimate at x, or (K*u)(x) when the problem
/// uses convolution interaction. `grad` is its spatial gradient; it is empty
/// unless the problem declares `uses_gradient`.
struct PointState {
    double t = 0.0;
    std::span<const double> x;
    double u = 0.0;
    std::span<const double> grad = {};
};

using ScalarCoefficient = std::function<double(const PointState&)>;
using VectorCoefficient = std::function<void(const PointState&, std::span<double>)>;

enum class InteractionMode { none, convolution, pointwise };

struct Interaction {
    InteractionMode mode = InteractionMode::none;
    /// Fixed kernel K for convolution mode; pointwise mode takes its
    /// mollifier from the simulation's bandwidth policy.
    std::optional<Mollifier> kernel;
};

enum class SamplerKind { dirac, gaussian, uniform, grid_density };

/// One-dimensional law used for initial and terminal conditions. In d > 1 it
/// is applied to each coordinate independently.
class Sampler {
public:
    static Sampler dirac(double x0);
    static Sampler gaussian(double mean, double sd);
    static Sampler uniform(double a, double b);
    /// Piecewise-linear density on `grid`; renormalised to unit mass.
    /// Throws std::invalid_argument for negative values or zero mass.
    static Sampler grid_density(std::vector<double> grid, std::vector<double> values);
    static Sampler from_snapshot(const DensitySnapshot& snapshot);

    SamplerKind kind() const noexcept { return kind_; }
    double draw(CounterStream& stream) const;

    bool has_density() const noexcept { return kind_ != SamplerKind::dirac; }
    double density(double x) const;
    double cdf(double x) const;
    double mean() const;
    double variance() const;

    // Parameters as given (a = x0 / mean / lower bound, b = sd / upper bound).
    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    const std::vector<double>& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    SamplerKind kind_ = SamplerKind::dirac;
    double a_ = 0.0;
    double b_ = 0.0;
    std::vector<double> grid_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

/// Structural facts about a problem, used by the engine to skip work and by
/// `validate` to report hypothesis violations.
struct CoefficientTraits {
    bool uses_density = false;        // sigma, b or Lambda read u
    bool uses_gradient = false;       // Lambda reads grad u
    bool has_lambda = false;          // Lambda not identically zero
    bool lambda_state_dependent = false;
    bool sigma_smoothed = false;      // a discontinuous sigma was regularised
    bool lambda_unbounded_in_gradient = false;
    bool lambda_singular_in_density = false;
};

using ParamMap = std::map<std::string, double>;

/// Coefficients (sigma, b, Lambda) of
///   d_t u = 1/2 sum_ij d_ij((sigma sigma^T) u) - div(b u) + Lambda u
/// with isotropic sigma, plus the laws that drive a run. Immutable once built.
struct ProblemSpec {
    std::string name;
    std::size_t dimension = 1;
    ScalarCoefficient sigma;
    VectorCoefficient drift;
    ScalarCoefficient lambda;  // empty means Lambda = 0
    /// d/dx sigma^2(t, x) for state-only diffusions (time reversal).
    std::function<double(double, double)> sigma_squared_dx;
    std::optional<Sampler> initial_law;
    std::optional<Sampler> terminal_law;
    Interaction interaction;
    double horizon = 1.0;
    /// |Lambda| cap; defaults to 50 / T.
    std::optional<double> lambda_max;
    /// Total mass of the initial condition (the density is sampled normalised).
    double initial_mass = 1.0;
    CoefficientTraits traits;
    ParamMap params;

    double effective_lambda_max(double horizon_used) const;
    double eval_sigma(const PointState& p) const { return sigma ? sigma(p) : 0.0; }
    double eval_lambda(const PointState& p) const { return lambda ? lambda(p) : 0.0; }
    void eval_drift(const PointState& p, std::span<double> out) const;
};

/// Names accepted by builtin_problem.
std::vector<std::string> builtin_problem_names();

/// Builds one of the library problems:
///   linear_fp       sigma, drift, lambda, lambda_slope, lambda_quadratic, lambda_cap, dim
///   burgers_flux    nu                      (sigma = nu, b = u/2, Lambda = 0)
///   burgers_fk      nu                      (sigma = nu, b = 0, Lambda = -du/dx)
///   burgers_huxley  nu, alpha, beta, gamma, n
///   porous_media    q                       (sigma = u^q)
///   soc_heaviside   gamma, ec, delta        (sigma = gamma H_delta(u - ec))
///   inventory_kpz   sigma, D, h2, h0, u_min, g_mass
///   terminal_fp     sigma, a, drift         (b = drift - a x, terminal law)
/// Every problem also accepts T (horizon) and lambda_max.
/// Throws std::invalid_argument for unknown names, unknown or missing
/// parameters, and out-of-range values.
ProblemSpec builtin_problem(const std::string& name, const ParamMap& params);

/// Smoothed Heaviside 1/2 (1 + tanh(r / delta)).
double smoothed_heaviside(double r, double delta);

enum class Severity { note, warning };

struct Diagnostic {
    Severity severity;
    std::string message;
};

/// Probes the coefficients on a sample box and reports hypothesis problems
/// (boundedness of Lambda, degeneracy or regularisation of sigma). Never throws
/// for a well-formed spec.
std::vector<Diagnostic> validate(const ProblemSpec& spec);

}  // namespace mfke
