#include "mfke/problems.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mfke {

// ---------------------------------------------------------------------------
// Sampler

Sampler Sampler::dirac(double x0) {
    Sampler s;
    s.kind_ = SamplerKind::dirac;
    s.a_ = x0;
    return s;
}

Sampler Sampler::gaussian(double mean, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("gaussian law needs sd > 0");
    Sampler s;
    s.kind_ = SamplerKind::gaussian;
    s.a_ = mean;
    s.b_ = sd;
    return s;
}

Sampler Sampler::uniform(double a, double b) {
    if (!(b > a)) throw std::invalid_argument("uniform law needs a < b");
    Sampler s;
    s.kind_ = SamplerKind::uniform;
    s.a_ = a;
    s.b_ = b;
    return s;
}

Sampler Sampler::grid_density(std::vector<double> grid, std::vector<double> values) {
    DensitySnapshot check{0.0, grid, values, 1.0};
    check.validate();
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("grid density values must be nonnegative");
    }
    Sampler s;
    s.kind_ = SamplerKind::grid_density;
    s.cumulative_.assign(grid.size(), 0.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        s.cumulative_[i] = s.cumulative_[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    }
    const double total = s.cumulative_.back();
    if (!(total > 0.0)) throw std::invalid_argument("grid density has zero mass");
    for (double& v : values) v /= total;
    for (double& c : s.cumulative_) c /= total;
    s.cumulative_.back() = 1.0;
    s.grid_ = std::move(grid);
    s.values_ = std::move(values);
    s.a_ = s.grid_.front();
    s.b_ = s.grid_.back();
    return s;
}

Sampler Sampler::from_snapshot(const DensitySnapshot& snapshot) {
    std::vector<double> v = snapshot.values;
    for (double& x : v) x = std::max(x, 0.0);
    return grid_density(snapshot.grid, std::move(v));
}

double Sampler::draw(CounterStream& stream) const {
    switch (kind_) {
        case SamplerKind::dirac: return a_;
        case SamplerKind::gaussian: return a_ + b_ * stream.normal();
        case SamplerKind::uniform: return a_ + (b_ - a_) * stream.uniform();
        case SamplerKind::grid_density: {
            const double r = stream.uniform();
            auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
            std::size_t k = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
            k = std::min(k, grid_.size() - 2);
            const double h = grid_[k + 1] - grid_[k];
            const double f0 = values_[k];
            const double f1 = values_[k + 1];
            const double m = r - cumulative_[k];
            // f0 s + (f1 - f0) s^2 / (2h) = m
            const double qa = (f1 - f0) / (2.0 * h);
            const double disc = std::max(f0 * f0 + 4.0 * qa * m, 0.0);
            const double denom = f0 + std::sqrt(disc);
            double s = denom > 0.0 ? 2.0 * m / denom : 0.0;
            s = std::clamp(s, 0.0, h);
            return grid_[k] + s;
        }
    }
    return a_;
}

double Sampler::density(double x) const {
    switch (kind_) {
        case SamplerKind::dirac: return 0.0;
        case SamplerKind::gaussian: {
            const double z = (x - a_) / b_;
            return std::exp(-0.5 * z * z) / (b_ * std::sqrt(2.0 * std::numbers::pi));
        }
        case SamplerKind::uniform: return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
        case SamplerKind::grid_density: {
            DensitySnapshot s{0.0, grid_, values_, 1.0};
            return s.interpolate(x);
        }
    }
    return 0.0;
}

double Sampler::cdf(double x) const {
    switch (kind_) {
        case SamplerKind::dirac: return x >= a_ ? 1.0 : 0.0;
        case SamplerKind::gaussian: return boost::math::cdf(boost::math::normal_distribution<double>(a_, b_), x);
        case SamplerKind::uniform: return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
        case SamplerKind::grid_density: {
            if (x <= grid_.front()) return 0.0;
            if (x >= grid_.back()) return 1.0;
            auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
            const std::size_t k = static_cast<std::size_t>(it - grid_.begin()) - 1;
            const double h = grid_[k + 1] - grid_[k];
            const double s = x - grid_[k];
            return cumulative_[k] + values_[k] * s + (values_[k + 1] - values_[k]) * s * s / (2.0 * h);
        }
    }
    return 0.0;
}

double Sampler::mean() const {
    switch (kind_) {
        case SamplerKind::dirac:
        case SamplerKind::gaussian: return a_;
        case SamplerKind::uniform: return 0.5 * (a_ + b_);
        case SamplerKind::grid_density: {
            std::vector<double> xf(grid_.size());
            for (std::size_t i = 0; i < grid_.size(); ++i) xf[i] = grid_[i] * values_[i];
            return trapezoid(grid_, xf);
        }
    }
    return 0.0;
}

double Sampler::variance() const {
    switch (kind_) {
        case SamplerKind::dirac: return 0.0;
        case SamplerKind::gaussian: return b_ * b_;
        case SamplerKind::uniform: return (b_ - a_) * (b_ - a_) / 12.0;
        case SamplerKind::grid_density: {
            const double m = mean();
            std::vector<double> r(grid_.size());
            for (std::size_t i = 0; i < grid_.size(); ++i) r[i] = (grid_[i] - m) * (grid_[i] - m) * values_[i];
            return trapezoid(grid_, r);
        }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// ProblemSpec

double ProblemSpec::effective_lambda_max(double horizon_used) const {
    return lambda_max.value_or(50.0 / horizon_used);
}

void ProblemSpec::eval_drift(const PointState& p, std::span<double> out) const {
    if (drift) {
        drift(p, out);
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
}

double smoothed_heaviside(double r, double delta) { return 0.5 * (1.0 + std::tanh(r / delta)); }

// ---------------------------------------------------------------------------
// Builtin problems

namespace {

class ParamReader {
public:
    ParamReader(std::string problem, const ParamMap& params, std::set<std::string> allowed)
        : problem_(std::move(problem)), params_(params), allowed_(std::move(allowed)) {
        allowed_.insert("T");
        allowed_.insert("lambda_max");
        for (const auto& [k, v] : params_) {
            if (!allowed_.count(k)) {
                throw std::invalid_argument(problem_ + ": unknown parameter '" + k + "'");
            }
            if (!std::isfinite(v)) throw std::invalid_argument(problem_ + ": parameter '" + k + "' is not finite");
        }
    }

    double required(const std::string& key) const {
        auto it = params_.find(key);
        if (it == params_.end()) throw std::invalid_argument(problem_ + ": missing parameter '" + key + "'");
        return it->second;
    }

    double optional(const std::string& key, double fallback) const {
        auto it = params_.find(key);
        return it == params_.end() ? fallback : it->second;
    }

    void require(bool ok, const std::string& message) const {
        if (!ok) throw std::invalid_argument(problem_ + ": " + message);
    }

private:
    std::string problem_;
    const ParamMap& params_;
    std::set<std::string> allowed_;
};

ScalarCoefficient constant_scalar(double c) {
    return [c](const PointState&) { return c; };
}

VectorCoefficient constant_vector(double c) {
    return [c](const PointState&, std::span<double> out) { std::fill(out.begin(), out.end(), c); };
}

void apply_common(ProblemSpec& spec, const ParamReader& reader, const ParamMap& params) {
    spec.horizon = reader.optional("T", 1.0);
    reader.require(spec.horizon > 0.0, "T must be positive");
    if (params.count("lambda_max")) {
        spec.lambda_max = params.at("lambda_max");
        reader.require(*spec.lambda_max > 0.0, "lambda_max must be positive");
    }
    spec.params = params;
    spec.sigma_squared_dx = [](double, double) { return 0.0; };
}

Interaction pointwise() { return Interaction{InteractionMode::pointwise, std::nullopt}; }

}  // namespace

std::vector<std::string> builtin_problem_names() {
    return {"linear_fp", "burgers_flux", "burgers_fk", "burgers_huxley", "porous_media",
            "soc_heaviside", "inventory_kpz", "terminal_fp"};
}

ProblemSpec builtin_problem(const std::string& name, const ParamMap& params) {
    ProblemSpec spec;
    spec.name = name;

    if (name == "linear_fp") {
        ParamReader r(name, params, {"sigma", "drift", "lambda", "lambda_slope", "lambda_quadratic", "lambda_cap", "dim"});
        apply_common(spec, r, params);
        const double sigma = r.optional("sigma", 1.0);
        const double drift = r.optional("drift", 0.0);
        const double lambda0 = r.optional("lambda", 0.0);
        const double slope = r.optional("lambda_slope", 0.0);
        const double quad = r.optional("lambda_quadratic", 0.0);
        const double cap = r.optional("lambda_cap", std::numeric_limits<double>::infinity());
        const double dim = r.optional("dim", 1.0);
        r.require(sigma >= 0.0, "sigma must be nonnegative");
        r.require(quad >= 0.0, "lambda_quadratic must be nonnegative");
        r.require(cap > 0.0, "lambda_cap must be positive");
        r.require(dim >= 1.0 && dim == std::floor(dim), "dim must be a positive integer");
        spec.dimension = static_cast<std::size_t>(dim);
        spec.sigma = constant_scalar(sigma);
        spec.drift = constant_vector(drift);
        spec.traits.has_lambda = lambda0 != 0.0 || slope != 0.0 || quad != 0.0;
        spec.traits.lambda_state_dependent = quad != 0.0;
        if (spec.traits.has_lambda) {
            spec.lambda = [lambda0, slope, quad, cap](const PointState& p) {
                double state = 0.0;
                if (quad != 0.0) {
                    double r2 = 0.0;
                    for (double c : p.x) r2 += c * c;
                    state = std::min(quad * r2, cap);
                }
                return lambda0 + slope * p.t - state;
            };
        }
        spec.initial_law = Sampler::dirac(0.0);
    } else if (name == "burgers_flux") {
        ParamReader r(name, params, {"nu"});
        apply_common(spec, r, params);
        const double nu = r.required("nu");
        r.require(nu > 0.0, "nu must be positive");
        spec.sigma = constant_scalar(nu);
        spec.drift = [](const PointState& p, std::span<double> out) { out[0] = 0.5 * p.u; };
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.initial_law = Sampler::gaussian(0.0, 0.5);
    } else if (name == "burgers_fk") {
        ParamReader r(name, params, {"nu"});
        apply_common(spec, r, params);
        const double nu = r.required("nu");
        r.require(nu > 0.0, "nu must be positive");
        spec.sigma = constant_scalar(nu);
        spec.drift = constant_vector(0.0);
        // Lambda(t,x,u,z) = -z reproduces -u du/dx in d_t u = ... + Lambda u.
        spec.lambda = [](const PointState& p) { return -p.grad[0]; };
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.traits.uses_gradient = true;
        spec.traits.has_lambda = true;
        spec.traits.lambda_state_dependent = true;
        spec.traits.lambda_unbounded_in_gradient = true;
        spec.initial_law = Sampler::gaussian(0.0, 0.5);
    } else if (name == "burgers_huxley") {
        ParamReader r(name, params, {"nu", "alpha", "beta", "gamma", "n"});
        apply_common(spec, r, params);
        const double nu = r.required("nu");
        const double alpha = r.required("alpha");
        const double beta = r.required("beta");
        const double gamma = r.required("gamma");
        const double n = r.required("n");
        r.require(nu > 0.0, "nu must be positive");
        r.require(n >= 0.0 && n == std::floor(n), "n must be a non-negative integer");
        spec.sigma = constant_scalar(nu);
        spec.drift = [alpha, n](const PointState& p, std::span<double> out) {
            out[0] = alpha * std::pow(std::max(p.u, 0.0), n) / (n + 1.0);
        };
        spec.lambda = [beta, gamma, n](const PointState& p) {
            const double un = std::pow(std::max(p.u, 0.0), n);
            return beta * (1.0 - un) * (un - gamma);
        };
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.traits.has_lambda = beta != 0.0;
        spec.traits.lambda_state_dependent = true;
        spec.initial_law = Sampler::gaussian(0.0, 0.5);
    } else if (name == "porous_media") {
        ParamReader r(name, params, {"q"});
        apply_common(spec, r, params);
        const double q = r.required("q");
        r.require(q > 0.0, "q must be positive");
        spec.sigma = [q](const PointState& p) { return std::pow(std::max(p.u, 0.0), q); };
        spec.drift = constant_vector(0.0);
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.initial_law = Sampler::gaussian(0.0, 1.0);
    } else if (name == "soc_heaviside") {
        ParamReader r(name, params, {"gamma", "ec", "delta"});
        apply_common(spec, r, params);
        const double gamma = r.required("gamma");
        const double ec = r.required("ec");
        const double delta = r.optional("delta", 1e-2);
        r.require(gamma > 0.0, "gamma must be positive");
        r.require(delta > 0.0, "delta must be positive");
        spec.sigma = [gamma, ec, delta](const PointState& p) { return gamma * smoothed_heaviside(p.u - ec, delta); };
        spec.drift = constant_vector(0.0);
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.traits.sigma_smoothed = true;
        spec.initial_law = Sampler::gaussian(0.0, 1.0);
    } else if (name == "inventory_kpz") {
        ParamReader r(name, params, {"sigma", "D", "h2", "h0", "u_min", "g_mass"});
        apply_common(spec, r, params);
        const double sigma = r.required("sigma");
        const double target = r.required("D");
        const double h2 = r.optional("h2", 1.0);
        const double h0 = r.optional("h0", 0.0);
        const double u_min = r.optional("u_min", 1e-6);
        const double g_mass = r.optional("g_mass", 1.0);
        r.require(sigma > 0.0, "sigma must be positive");
        r.require(u_min > 0.0, "u_min must be positive");
        r.require(g_mass > 0.0, "g_mass must be positive (g integrable and positive)");
        spec.sigma = constant_scalar(sigma);
        spec.drift = constant_vector(-target);
        spec.lambda = [h2, h0, u_min](const PointState& p) {
            const double y = std::max(p.u, u_min);
            const double z = p.grad[0];
            const double x = p.x[0];
            return 0.25 * z * z / y - (h2 * x * x + h0) / y;
        };
        spec.interaction = pointwise();
        spec.traits.uses_density = true;
        spec.traits.uses_gradient = true;
        spec.traits.has_lambda = true;
        spec.traits.lambda_state_dependent = true;
        spec.traits.lambda_singular_in_density = true;
        spec.traits.lambda_unbounded_in_gradient = true;
        spec.initial_law = Sampler::gaussian(0.0, 1.0);
        spec.initial_mass = g_mass;
    } else if (name == "terminal_fp") {
        ParamReader r(name, params, {"sigma", "a", "drift"});
        apply_common(spec, r, params);
        const double sigma = r.optional("sigma", 1.0);
        const double a = r.optional("a", 0.0);
        const double drift = r.optional("drift", 0.0);
        r.require(sigma >= 0.0, "sigma must be nonnegative");
        spec.sigma = constant_scalar(sigma);
        spec.drift = [a, drift](const PointState& p, std::span<double> out) { out[0] = drift - a * p.x[0]; };
        spec.terminal_law = Sampler::gaussian(0.0, 1.0);
    } else {
        std::ostringstream msg;
        msg << "unknown problem '" << name << "'; expected one of:";
        for (const auto& n : builtin_problem_names()) msg << ' ' << n;
        throw std::invalid_argument(msg.str());
    }
    return spec;
}

// ---------------------------------------------------------------------------
// validate

std::vector<Diagnostic> validate(const ProblemSpec& spec) {
    std::vector<Diagnostic> out;
    if (!spec.sigma) out.push_back({Severity::warning, "sigma is not defined"});
    if (!spec.initial_law && !spec.terminal_law) {
        out.push_back({Severity::warning, "neither an initial nor a terminal law is set"});
    }
    if (spec.initial_law && spec.terminal_law) {
        out.push_back({Severity::warning, "both initial and terminal laws are set; exactly one drives a run"});
    }
    if (spec.interaction.mode == InteractionMode::convolution && !spec.interaction.kernel) {
        out.push_back({Severity::warning, "convolution interaction requires a kernel"});
    }
    if (spec.traits.sigma_smoothed) {
        out.push_back({Severity::warning, "discontinuous σ: smoothing applied"});
    }
    const double lmax = spec.effective_lambda_max(spec.horizon);
    if (spec.traits.lambda_unbounded_in_gradient) {
        out.push_back({Severity::note, "Λ unbounded in ∇u: clipping at Λ_max active (Λ_max = " + std::to_string(lmax) + ")"});
    }
    if (spec.traits.lambda_singular_in_density) {
        out.push_back({Severity::note, "Λ singular at u = 0: u floored at u_min inside Λ"});
    }

    // Numeric probes on x in [-5, 5], u in [0, 2], grad u in [-5, 5].
    const std::size_t d = spec.dimension;
    std::vector<double> x(d, 0.0), g(d, 0.0), b0(d), b1(d);
    const double us[] = {0.0, 0.05, 0.2, 0.5, 1.0, 2.0};
    const double gs[] = {-5.0, -1.0, 0.0, 1.0, 5.0};
    double sigma_min = std::numeric_limits<double>::infinity();
    double lambda_sup = 0.0;
    double sigma_lip = 0.0, drift_lip = 0.0;
    const double hx = 1e-4;
    bool non_finite = false;
    for (int ix = -10; ix <= 10; ++ix) {
        for (double u : us) {
            for (double gv : gs) {
                std::fill(x.begin(), x.end(), 0.5 * ix);
                std::fill(g.begin(), g.end(), gv);
                PointState p{0.5 * spec.horizon, x, u, spec.traits.uses_gradient ? std::span<const double>(g) : std::span<const double>()};
                const double s = spec.eval_sigma(p);
                const double l = spec.eval_lambda(p);
                spec.eval_drift(p, b0);
                non_finite |= !std::isfinite(s) || !std::isfinite(l);
                if (u > 0.0) sigma_min = std::min(sigma_min, std::abs(s));
                sigma_min = std::min(sigma_min, u == 0.0 && spec.traits.uses_density ? std::abs(s) : sigma_min);
                if (std::isfinite(l)) lambda_sup = std::max(lambda_sup, std::abs(l));
                std::vector<double> xs = x;
                xs[0] += hx;
                PointState q{p.t, xs, u, p.grad};
                sigma_lip = std::max(sigma_lip, std::abs(spec.eval_sigma(q) - s) / hx);
                spec.eval_drift(q, b1);
                for (std::size_t k = 0; k < d; ++k) drift_lip = std::max(drift_lip, std::abs(b1[k] - b0[k]) / hx);
            }
        }
    }
    if (non_finite) out.push_back({Severity::warning, "coefficients are not finite on the probe box"});
    if (sigma_min < 1e-8) {
        out.push_back({Severity::warning,
                       "σ degenerate on the probe box (σ ≥ c > 0 fails): uniqueness is not guaranteed, results carry no uniqueness claim"});
    }
    if (lambda_sup > lmax && !spec.traits.lambda_unbounded_in_gradient) {
        out.push_back({Severity::note, "|Λ| reaches " + std::to_string(lambda_sup) + " on the probe box: clipping at Λ_max = " +
                                           std::to_string(lmax) + " will be active"});
    }
    if (sigma_lip > 1e6) out.push_back({Severity::warning, "σ is not Lipschitz in x on the probe box"});
    if (drift_lip > 1e6) out.push_back({Severity::warning, "b is not Lipschitz in x on the probe box"});
    return out;
}

}  // namespace mfke
