#include "mfke/oracle.hpp"

#include "mfke/errors.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mfke {

namespace {

// Tridiagonal system lo[i] x[i-1] + di[i] x[i] + up[i] x[i+1] = rhs[i]; Thomas algorithm.
void solve_tridiagonal(std::vector<double> lo, std::vector<double> di, std::vector<double> up, std::vector<double>& rhs) {
    const std::size_t n = di.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = lo[i] / di[i - 1];
        di[i] -= m * up[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

std::vector<std::size_t> output_steps(const FdOptions& o, std::size_t steps) {
    std::vector<std::size_t> out;
    if (o.output_times.empty()) {
        out.push_back(steps);
        return out;
    }
    for (double t : o.output_times) {
        const double r = t / o.dt;
        if (t < 0.0 || t > o.horizon * (1.0 + 1e-12) || std::abs(r - std::round(r)) > 1e-6 * std::max(1.0, r)) {
            throw std::invalid_argument("oracle output time " + std::to_string(t) + " is not on the step grid");
        }
        out.push_back(static_cast<std::size_t>(std::llround(r)));
    }
    return out;
}

std::size_t checked_steps(const FdOptions& o) {
    if (!(o.dt > 0.0)) throw std::invalid_argument("oracle dt must be positive");
    if (!(o.horizon > 0.0)) throw std::invalid_argument("oracle horizon must be positive");
    if (o.grid.points < 3 || !(o.grid.max > o.grid.min)) throw std::invalid_argument("oracle grid needs 3+ points");
    const double r = o.horizon / o.dt;
    if (std::abs(r - std::round(r)) > 1e-6 * std::max(1.0, r)) throw std::invalid_argument("oracle T / dt must be an integer");
    return static_cast<std::size_t>(std::llround(r));
}

DensitySnapshot make_snapshot(double t, const std::vector<double>& grid, const std::vector<double>& u) {
    DensitySnapshot s{t, grid, u, 0.0};
    s.mass = s.integral();
    return s;
}

[[noreturn]] void unstable(const std::string& what, double limit) {
    std::ostringstream msg;
    msg << what << "; retry with dt <= " << 0.9 * limit;
    throw OracleInstability(msg.str(), 0.9 * limit);
}

}  // namespace

std::vector<DensitySnapshot> fd_solve(const ProblemSpec& spec, const std::vector<double>& initial, const FdOptions& o) {
    if (spec.dimension != 1) throw std::invalid_argument("fd_solve is one-dimensional");
    const std::size_t steps = checked_steps(o);
    const auto grid = o.grid.nodes();
    const std::size_t m = grid.size();
    if (initial.size() != m) throw std::invalid_argument("initial data does not match the oracle grid");
    const double h = o.grid.spacing();
    const double dt = o.dt;
    const auto snaps = output_steps(o, steps);
    const double cap = spec.effective_lambda_max(spec.horizon);

    std::vector<double> u = initial, prev = initial;
    std::vector<double> a(m), b(m), lam(m), grad(m), star(m);
    std::vector<double> lo(m), di(m), up(m), rhs(m);
    std::vector<DensitySnapshot> out;
    std::size_t next = 0;
    auto emit = [&](std::size_t k) {
        while (next < snaps.size() && snaps[next] == k) {
            out.push_back(make_snapshot(static_cast<double>(k) * dt, grid, u));
            ++next;
        }
    };

    for (std::size_t k = 0; k < steps; ++k) {
        emit(k);
        const double t = (static_cast<double>(k) + 0.5) * dt;
        for (std::size_t i = 0; i < m; ++i) star[i] = k == 0 ? u[i] : 1.5 * u[i] - 0.5 * prev[i];
        if (spec.traits.uses_gradient) {
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t l = i == 0 ? 0 : i - 1;
                const std::size_t r = std::min(i + 1, m - 1);
                grad[i] = (star[r] - star[l]) / (grid[r] - grid[l]);
            }
        }
        double bmax = 0.0, lmax = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double x = grid[i];
            PointState p{t, std::span<const double>(&x, 1), star[i],
                         spec.traits.uses_gradient ? std::span<const double>(&grad[i], 1) : std::span<const double>()};
            const double s = spec.eval_sigma(p);
            a[i] = s * s;
            spec.eval_drift(p, std::span<double>(&b[i], 1));
            lam[i] = std::clamp(spec.eval_lambda(p), -cap, cap);
            bmax = std::max(bmax, std::abs(b[i]));
            lmax = std::max(lmax, std::abs(lam[i]));
        }
        if (bmax * dt > h) unstable("advective Courant number above 1", h / bmax);
        if (lmax * dt > 1.0) unstable("reaction step dt * |Lambda| above 1", 1.0 / lmax);

        // A u with zero flux through both ends.
        std::fill(lo.begin(), lo.end(), 0.0);
        std::fill(di.begin(), di.end(), 0.0);
        std::fill(up.begin(), up.end(), 0.0);
        const double ih2 = 1.0 / (h * h);
        const double ih = 1.0 / h;
        for (std::size_t i = 0; i < m; ++i) {
            if (i + 1 < m) {
                const double bh = 0.5 * (b[i] + b[i + 1]);
                up[i] += 0.5 * a[i + 1] * ih2 - 0.5 * bh * ih;
                di[i] += -0.5 * a[i] * ih2 - 0.5 * bh * ih;
            }
            if (i > 0) {
                const double bh = 0.5 * (b[i - 1] + b[i]);
                di[i] += -0.5 * a[i] * ih2 + 0.5 * bh * ih;
                lo[i] += 0.5 * a[i - 1] * ih2 + 0.5 * bh * ih;
            }
            di[i] += lam[i];
        }
        for (std::size_t i = 0; i < m; ++i) {
            double au = di[i] * u[i];
            if (i > 0) au += lo[i] * u[i - 1];
            if (i + 1 < m) au += up[i] * u[i + 1];
            rhs[i] = u[i] + 0.5 * dt * au;
        }
        for (std::size_t i = 0; i < m; ++i) {
            lo[i] *= -0.5 * dt;
            up[i] *= -0.5 * dt;
            di[i] = 1.0 - 0.5 * dt * di[i];
        }
        solve_tridiagonal(lo, di, up, rhs);
        prev = std::move(u);
        u = rhs;
        for (std::size_t i = 0; i < m; ++i) {
            if (!std::isfinite(u[i])) unstable("non-finite grid value", dt / 2.0 / 0.9);
        }
    }
    emit(steps);
    return out;
}

std::vector<DensitySnapshot> fd_solve(const ProblemSpec& spec, const FdOptions& options) {
    if (!spec.initial_law || !spec.initial_law->has_density()) {
        throw std::invalid_argument("fd_solve needs an initial law with a density");
    }
    const auto grid = options.grid.nodes();
    std::vector<double> u0(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) u0[i] = spec.initial_mass * spec.initial_law->density(grid[i]);
    return fd_solve(spec, u0, options);
}

DensitySnapshot cole_hopf_burgers(const std::function<double(double)>& antiderivative, double nu,
                                  const std::vector<double>& grid, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("Cole-Hopf needs t > 0");
    if (!(nu > 0.0)) throw std::invalid_argument("Cole-Hopf needs nu > 0");
    if (grid.size() < 2) throw std::invalid_argument("Cole-Hopf grid needs 2+ points");
    using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double nu2 = nu * nu;
    const double sd = nu * std::sqrt(t);

    // Largest slope of U0 near the grid bounds how far the effective kernel drifts.
    double speed = 0.0;
    const double lo = grid.front() - 20.0 * sd, hi = grid.back() + 20.0 * sd;
    const std::size_t probes = 4000;
    double prev = antiderivative(lo);
    for (std::size_t i = 1; i <= probes; ++i) {
        const double y = lo + (hi - lo) * static_cast<double>(i) / probes;
        const double cur = antiderivative(y);
        speed = std::max(speed, std::abs(cur - prev) / ((hi - lo) / probes));
        prev = cur;
    }
    const double half = 14.0 * sd + 2.0 * speed * t;

    DensitySnapshot out;
    out.time = t;
    out.grid = grid;
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const double ux = antiderivative(x);
        auto weight = [&](double y) {
            const double z = x - y;
            return std::exp(-z * z / (2.0 * nu2 * t) - (antiderivative(y) - ux) / nu2);
        };
        double err_n = 0.0, err_d = 0.0, l1_n = 0.0, l1_d = 0.0;
        const double num = Quad::integrate([&](double y) { return (x - y) / t * weight(y); }, x - half, x + half, 15, 1e-13,
                                           &err_n, &l1_n);
        const double den = Quad::integrate(weight, x - half, x + half, 15, 1e-13, &err_d, &l1_d);
        if (!(den > 0.0) || err_d > 1e-8 * l1_d || err_n > 1e-8 * l1_n + 1e-300) {
            std::ostringstream msg;
            msg << "Cole-Hopf quadrature did not converge at x=" << x << " (num error " << err_n << ", den error " << err_d
                << ", den " << den << ")";
            throw std::runtime_error(msg.str());
        }
        out.values[i] = num / den;
    }
    out.mass = out.integral();
    return out;
}

DensitySnapshot cole_hopf_burgers(const Sampler& law, double nu, const std::vector<double>& grid, double t) {
    return cole_hopf_burgers([&law](double y) { return law.cdf(y); }, nu, grid, t);
}

namespace {

double param_or(const ProblemSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

}  // namespace

HjbSolution hjb_fd_solve(const ProblemSpec& spec, const FdOptions& o) {
    if (spec.name != "inventory_kpz") throw std::invalid_argument("hjb_fd_solve needs an inventory_kpz problem");
    if (!spec.initial_law || !spec.initial_law->has_density()) throw std::invalid_argument("hjb_fd_solve needs g with a density");
    const std::size_t steps = checked_steps(o);
    const double sigma = param_or(spec, "sigma", 1.0);
    const double drift_speed = param_or(spec, "D", 0.0);
    const double h2 = param_or(spec, "h2", 1.0);
    const double h0 = param_or(spec, "h0", 0.0);
    const double g_mass = param_or(spec, "g_mass", 1.0);
    if (!(g_mass > 0.0)) throw std::invalid_argument("g must be positive and integrable");

    const auto grid = o.grid.nodes();
    const std::size_t m = grid.size();
    const double hx = o.grid.spacing();
    const double dt = o.dt;
    const auto snaps = output_steps(o, steps);
    std::vector<double> u(m), prev, star(m), forcing(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = g_mass * spec.initial_law->density(grid[i]);
    prev = u;

    // Interior operator L u = sigma^2/2 u'' + D u' (central).
    const double cd = 0.5 * sigma * sigma / (hx * hx);
    const double ca = drift_speed / (2.0 * hx);
    const double l_lo = cd - ca, l_di = -2.0 * cd, l_up = cd + ca;
    std::vector<double> lo(m), di(m), up(m), rhs(m);

    HjbSolution sol;
    std::size_t next = 0;
    auto emit = [&](std::size_t k) {
        while (next < snaps.size() && snaps[next] == k) {
            sol.u.push_back(make_snapshot(static_cast<double>(k) * dt, grid, u));
            ++next;
        }
    };
    for (std::size_t k = 0; k < steps; ++k) {
        emit(k);
        for (std::size_t i = 0; i < m; ++i) star[i] = k == 0 ? u[i] : 1.5 * u[i] - 0.5 * prev[i];
        double slope_max = 0.0;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            const double ux = (star[i + 1] - star[i - 1]) / (2.0 * hx);
            slope_max = std::max(slope_max, std::abs(ux));
            forcing[i] = 0.25 * ux * ux - (h2 * grid[i] * grid[i] + h0);
        }
        if (0.5 * slope_max * dt > hx) unstable("HJB Courant number above 1", hx / (0.5 * slope_max));

        for (std::size_t i = 1; i + 1 < m; ++i) {
            rhs[i] = u[i] + 0.5 * dt * (l_lo * u[i - 1] + l_di * u[i] + l_up * u[i + 1]) + dt * forcing[i];
            lo[i] = -0.5 * dt * l_lo;
            di[i] = 1.0 - 0.5 * dt * l_di;
            up[i] = -0.5 * dt * l_up;
        }
        // Ends: u0 - u1 = u1 - u2 with the right side lagged.
        lo[0] = 0.0;
        di[0] = 1.0;
        up[0] = -1.0;
        rhs[0] = u[1] - u[2];
        lo[m - 1] = -1.0;
        di[m - 1] = 1.0;
        up[m - 1] = 0.0;
        rhs[m - 1] = u[m - 2] - u[m - 3];
        solve_tridiagonal(lo, di, up, rhs);
        prev = std::move(u);
        u = rhs;
        for (double v : u) {
            if (!std::isfinite(v)) unstable("non-finite HJB value", dt / 2.0 / 0.9);
        }
    }
    emit(steps);

    for (auto it = sol.u.rbegin(); it != sol.u.rend(); ++it) {
        DensitySnapshot v = *it;
        v.time = o.horizon - it->time;
        if (std::abs(v.time) < 1e-12 * o.horizon) v.time = 0.0;
        sol.alpha.push_back(optimal_control(v, drift_speed));
        sol.v.push_back(std::move(v));
    }
    return sol;
}

DensitySnapshot optimal_control(const DensitySnapshot& v, double drift_speed) {
    v.validate();
    DensitySnapshot a = v;
    const std::size_t m = v.grid.size();
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t l = i == 0 ? 0 : i - 1;
        const std::size_t r = std::min(i + 1, m - 1);
        a.values[i] = drift_speed + 0.5 * (v.values[r] - v.values[l]) / (v.grid[r] - v.grid[l]);
    }
    a.mass = a.integral();
    return a;
}

double hjb_linearization_error(const ProblemSpec& spec, const FdOptions& o) {
    if (param_or(spec, "h2", 1.0) != 0.0 || param_or(spec, "h0", 0.0) != 0.0) {
        throw std::invalid_argument("linearization check needs h = 0");
    }
    const double sigma = param_or(spec, "sigma", 1.0);
    const double two_s2 = 2.0 * sigma * sigma;
    const auto hjb = hjb_fd_solve(spec, o);

    ProblemSpec linear = builtin_problem("linear_fp", {{"sigma", sigma}, {"drift", -param_or(spec, "D", 0.0)}, {"T", o.horizon}});
    const auto& g = hjb.u.front();
    std::vector<double> w0(g.values.size());
    const auto grid = o.grid.nodes();
    const double g_mass = param_or(spec, "g_mass", 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) w0[i] = std::exp(g_mass * spec.initial_law->density(grid[i]) / two_s2);
    const auto w = fd_solve(linear, w0, o);

    double err = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            err = std::max(err, std::abs(hjb.u[k].values[i] - two_s2 * std::log(w[k].values[i])));
        }
    }
    return err;
}

}  // namespace mfke
