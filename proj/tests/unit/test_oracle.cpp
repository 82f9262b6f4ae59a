#include "mfke/errors.hpp"
#include "mfke/oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numbers>
#include <vector>

using namespace mfke;

namespace {

double gauss(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var); }

double linf(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("heat equation against the exact gaussian") {
    auto spec = builtin_problem("linear_fp", {{"T", 0.5}});
    spec.initial_law = Sampler::gaussian(0.0, 0.5);
    FdOptions o{UniformGrid{-8, 8, 2000}, 1e-3, 0.5, {}};
    const auto out = fd_solve(spec, o);
    REQUIRE(out.size() == 1);
    std::vector<double> exact;
    for (double x : out[0].grid) exact.push_back(gauss(x, 0.75));
    CHECK(linf(out[0].values, exact) <= 1e-4);
    CHECK(out[0].time == 0.5);
}

TEST_CASE("zero data stays zero") {
    const auto spec = builtin_problem("burgers_flux", {{"nu", 1.0}});
    FdOptions o{UniformGrid{-5, 5, 101}, 1e-2, 1.0, {0.5, 1.0}};
    const auto out = fd_solve(spec, std::vector<double>(101, 0.0), o);
    REQUIRE(out.size() == 2);
    for (const auto& s : out) CHECK(*std::max_element(s.values.begin(), s.values.end()) == 0.0);
}

TEST_CASE("mass ode and conservation") {
    auto killed = builtin_problem("linear_fp", {{"lambda", -1.0}});
    killed.initial_law = Sampler::gaussian(0.0, 1.0);
    FdOptions o{UniformGrid{-10, 10, 801}, 1e-3, 1.0, {}};
    CHECK(fd_solve(killed, o)[0].mass == doctest::Approx(std::exp(-1.0)).epsilon(1e-4));

    const auto burgers = builtin_problem("burgers_flux", {{"nu", 1.0}});
    std::vector<double> times;
    for (int k = 0; k <= 100; ++k) times.push_back(0.01 * k);
    const auto out = fd_solve(burgers, FdOptions{UniformGrid{-10, 10, 801}, 1e-3, 1.0, times});
    for (std::size_t k = 1; k < out.size(); ++k) CHECK(std::abs(out[k].mass - out[k - 1].mass) <= 1e-10);
}

TEST_CASE("oracle refuses unstable steps") {
    auto fast = builtin_problem("linear_fp", {{"drift", 100.0}});
    fast.initial_law = Sampler::gaussian(0.0, 1.0);
    FdOptions o{UniformGrid{-5, 5, 1001}, 0.1, 1.0, {}};
    try {
        fd_solve(fast, o);
        FAIL("expected OracleInstability");
    } catch (const OracleInstability& e) {
        CHECK(e.suggested_dt() == doctest::Approx(0.9 * 0.01 / 100.0));
    }
    auto killed = builtin_problem("linear_fp", {{"lambda", -40.0}});
    killed.initial_law = Sampler::gaussian(0.0, 1.0);
    CHECK_THROWS_AS(fd_solve(killed, FdOptions{UniformGrid{-5, 5, 101}, 0.1, 1.0, {}}), OracleInstability);
}

TEST_CASE("cole-hopf constant profile") {
    const double c = 0.4;
    const std::vector<double> grid{-1.0, 0.0, 0.5, 2.0};
    const auto s = cole_hopf_burgers([c](double x) { return c * x; }, 1.0, grid, 0.7);
    for (double v : s.values) CHECK(v == doctest::Approx(c).epsilon(1e-9));
}

TEST_CASE("cole-hopf against the grid solver") {
    const auto spec = builtin_problem("burgers_flux", {{"nu", 1.0}, {"T", 0.5}});
    FdOptions o{UniformGrid{-8, 8, 2000}, 1e-3, 0.5, {}};
    const auto fd = fd_solve(spec, o);
    const auto ch = cole_hopf_burgers(*spec.initial_law, 1.0, fd[0].grid, 0.5);
    CHECK(linf(fd[0].values, ch.values) <= 1e-3);
    CHECK(ch.integral() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("large viscosity approaches the heat solution") {
    // u0 = 0.01 N(0, 1): the nonlinearity is negligible, leaving heat flow with variance nu^2 t.
    const double mass = 0.01, nu = 3.0, t = 0.2;
    const Sampler law = Sampler::gaussian(0.0, 1.0);
    std::vector<double> grid;
    for (int i = -40; i <= 40; ++i) grid.push_back(0.1 * i);
    const auto s = cole_hopf_burgers([&](double x) { return mass * law.cdf(x); }, nu, grid, t);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(s.values[i] - mass * gauss(grid[i], 1.0 + nu * nu * t)) <= 1e-3 * mass);
}

TEST_CASE("hjb symmetry and control formula") {
    const auto spec = builtin_problem("inventory_kpz", {{"sigma", 1.0}, {"D", 0.0}, {"h2", 0.0}, {"h0", 0.0}, {"T", 0.5}});
    FdOptions o{UniformGrid{-8, 8, 801}, 1e-3, 0.5, {0.0, 0.25, 0.5}};
    const auto sol = hjb_fd_solve(spec, o);
    REQUIRE(sol.v.size() == 3);
    CHECK(sol.v[0].time == 0.0);
    CHECK(sol.v[2].time == 0.5);
    for (const auto& a : sol.alpha) CHECK(std::abs(a.values[400]) < 1e-12);

    DensitySnapshot v{0.0, UniformGrid{-1, 1, 21}.nodes(), {}, 0.0};
    v.values = v.grid;
    const auto a = optimal_control(v, 0.1);
    for (double x : a.values) CHECK(x == doctest::Approx(0.6));
}

TEST_CASE("hjb linearizes under exp(v / 2 sigma^2)") {
    const auto spec = builtin_problem("inventory_kpz", {{"sigma", 1.0}, {"D", 0.0}, {"h2", 0.0}, {"h0", 0.0}, {"T", 0.5}});
    FdOptions o{UniformGrid{-8, 8, 1601}, 1e-3, 0.5, {0.1, 0.25, 0.5}};
    CHECK(hjb_linearization_error(spec, o) <= 1e-3);
    const auto quadratic = builtin_problem("inventory_kpz", {{"sigma", 1.0}, {"D", 0.0}});
    CHECK_THROWS_AS(hjb_linearization_error(quadratic, o), std::invalid_argument);
    CHECK_THROWS_AS(hjb_fd_solve(builtin_problem("linear_fp", {}), o), std::invalid_argument);
}

}
