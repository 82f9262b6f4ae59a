#include "mfke/csv.hpp"
#include "mfke/kde_evaluator.hpp"
#include "mfke/measures.hpp"
#include "mfke/parallel.hpp"
#include "mfke/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>
#include <sstream>

using namespace mfke;

namespace {

ParticleEnsemble random_ensemble(std::size_t n, std::uint64_t seed, bool weighted) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> pos(n), logw(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = z(gen) + (i % 3 == 0 ? 2.0 : 0.0);
        if (weighted) logw[i] = u(gen);
    }
    return ParticleEnsemble(1, std::move(pos), std::move(logw), 0.0);
}

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = CounterStream(seed, static_cast<std::uint32_t>(i), 0, StreamTag::initial_law).normal();
    return x;
}

// <x> under the normalised weights.
double empirical_ratio(const ParticleEnsemble& e) {
    const auto w = e.relative_weights();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        num += w[i] * e.positions()[i];
        den += w[i];
    }
    return num / den;
}

}  // namespace

TEST_SUITE("measures") {

TEST_CASE("kde point values") {
    const Mollifier k(KernelFamily::gaussian, 1.0);
    ParticleEnsemble one(1, {0.0});
    const std::vector<double> q0{0.0}, q1{1.0};
    CHECK(kde_density(one, k, q0)[0] == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
    ParticleEnsemble two(1, {-1.0, 1.0});
    CHECK(kde_density(two, k, q0)[0] == doctest::Approx(0.241971).epsilon(1e-6));
    CHECK(kde_gradient(one, k, q0)[0] == 0.0);
    CHECK(kde_gradient(one, k, q1)[0] == doctest::Approx(-0.241971).epsilon(1e-6));
}

TEST_CASE("kde errors") {
    CHECK_THROWS_AS(Mollifier(KernelFamily::gaussian, 0.0), std::domain_error);
    CHECK_THROWS_AS(Mollifier(KernelFamily::gaussian, -1.0), std::domain_error);
    ParticleEnsemble empty(1, std::vector<double>{});
    const std::vector<double> q{0.0};
    CHECK_THROWS_AS(kde_density(empty, Mollifier(KernelFamily::gaussian, 1.0), q), std::domain_error);
}

TEST_CASE("scaled kernels integrate to one") {
    for (auto fam : {KernelFamily::gaussian, KernelFamily::epanechnikov}) {
        for (double eps : {0.3, 1.0, 2.5}) {
            const Mollifier k(fam, eps);
            const Mollifier unit(fam, 1.0);
            const double r = k.support_radius();
            const std::size_t m = 20001;
            std::vector<double> x(m), v(m);
            for (std::size_t i = 0; i < m; ++i) {
                x[i] = -r + 2.0 * r * static_cast<double>(i) / (m - 1);
                v[i] = k.value_1d(x[i]);
            }
            CHECK(trapezoid(x, v) == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(k.value_1d(0.37 * eps) * eps == doctest::Approx(unit.value_1d(0.37)).epsilon(1e-14));
        }
    }
    // d = 2: eps^-2 phi(z / eps)
    const Mollifier k2(KernelFamily::gaussian, 0.5, 2), u2(KernelFamily::gaussian, 1.0, 2);
    const std::vector<double> z{0.2, -0.1}, zs{0.4, -0.2};
    CHECK(k2.value(z) * 0.25 == doctest::Approx(u2.value(zs)).epsilon(1e-14));
}

TEST_CASE("kde quadrature equals the weight average") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto ens = random_ensemble(300, seed, true);
        const double eps = 0.2;
        const Mollifier k(KernelFamily::gaussian, eps);
        const auto pos = ens.positions();
        const auto [lo, hi] = std::minmax_element(pos.begin(), pos.end());
        UniformGrid g{*lo - 8 * eps, *hi + 8 * eps, 8001};
        const auto x = g.nodes();
        const auto u = kde_density(ens, k, x);
        CHECK(trapezoid(x, u) == doctest::Approx(ens.mass()).epsilon(1e-6));
    }
}

TEST_CASE("kde gradient matches finite differences") {
    const auto ens = random_ensemble(50, 11, true);
    const Mollifier k(KernelFamily::gaussian, 0.4);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-3.0, 4.0);
    std::vector<double> q(100);
    for (double& x : q) x = u(gen);
    const auto g = kde_gradient(ens, k, q);
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    const double h = 1e-5;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const std::vector<double> p{q[i] + h}, m{q[i] - h};
        const double fd = (kde_density(ens, k, p)[0] - kde_density(ens, k, m)[0]) / (2 * h);
        CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(std::abs(g[i]), 1e-3 * scale));
    }
}

TEST_CASE("epanechnikov gradient is zero on the support boundary") {
    const Mollifier k(KernelFamily::epanechnikov, 1.0);
    CHECK(k.derivative_1d(1.0) == 0.0);
    CHECK(k.derivative_1d(-1.0) == 0.0);
    CHECK(k.derivative_1d(0.5) < 0.0);
}

TEST_CASE("kde is permutation invariant") {
    auto ens = random_ensemble(500, 4, true);
    std::vector<double> pos(ens.positions().begin(), ens.positions().end());
    std::vector<double> lw(ens.log_weights().begin(), ens.log_weights().end());
    std::vector<std::size_t> perm(pos.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    std::vector<double> p2(pos.size()), l2(pos.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        p2[i] = pos[perm[i]];
        l2[i] = lw[perm[i]];
    }
    ParticleEnsemble shuffled(1, p2, l2, 0.0);
    const Mollifier k(KernelFamily::gaussian, 0.3);
    const auto q = UniformGrid{-4, 6, 101}.nodes();
    const auto a = kde_density(ens, k, q), b = kde_density(shuffled, k, q);
    for (std::size_t i = 0; i < q.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

TEST_CASE("binned kde agrees with the direct sum") {
    const auto ens = random_ensemble(20000, 8, true);
    const Mollifier k(KernelFamily::gaussian, 0.15);
    const auto q = UniformGrid{-4, 6, 501}.nodes();
    KdeOptions binned;
    binned.method = KdeMethod::binned;
    const auto b = evaluate_kde(ens, k, q, true, binned);
    const auto d = evaluate_kde(ens, k, q, true, KdeOptions{KdeMethod::direct});
    CHECK(b.binned);
    double peak = 0.0, gpeak = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        peak = std::max(peak, d.values[i]);
        gpeak = std::max(gpeak, std::abs(d.gradients[i]));
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(std::abs(b.values[i] - d.values[i]) < 2e-4 * peak);
        CHECK(std::abs(b.gradients[i] - d.gradients[i]) < 2e-3 * gpeak);
    }
}

TEST_CASE("kde does not depend on the worker count") {
    const auto ens = random_ensemble(30000, 3, true);
    const Mollifier k(KernelFamily::gaussian, 0.1);
    const auto q = UniformGrid{-4, 6, 777}.nodes();
    set_worker_count(1);
    const auto a = evaluate_kde(ens, k, q, true);
    const auto a2 = kde_density(ens, k, q);
    set_worker_count(5);
    const auto b = evaluate_kde(ens, k, q, true);
    const auto b2 = kde_density(ens, k, q);
    set_worker_count(0);
    CHECK(a.values == b.values);
    CHECK(a.gradients == b.gradients);
    CHECK(a2 == b2);
}

TEST_CASE("log weights") {
    ParticleEnsemble e(1, {0.0, 1.0}, {std::log(2.0), std::log(4.0)}, 0.5);
    CHECK(e.mass() == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(e.weight(1) == doctest::Approx(4.0));
    ParticleEnsemble tiny(1, {0.0, 1.0}, {-800.0, -800.0}, 0.0);
    // exp(-800) underflows; the log representation keeps relative weights exact.
    CHECK(tiny.max_log_weight() == -800.0);
    CHECK(tiny.relative_weights() == std::vector<double>{1.0, 1.0});
    CHECK(empirical_ratio(tiny) == 0.5);
}

TEST_CASE("normalize") {
    auto g = UniformGrid{-6, 6, 601}.nodes();
    DensitySnapshot s{0.0, g, std::vector<double>(g.size()), 1.0};
    for (std::size_t i = 0; i < g.size(); ++i) s.values[i] = std::exp(-0.5 * g[i] * g[i]) / std::sqrt(2 * std::numbers::pi);
    auto [same, m1] = normalize(s);
    CHECK(m1 == 1.0);
    CHECK(same.values == s.values);
    DensitySnapshot twice = s;
    for (double& v : twice.values) v *= 2.0;
    twice.mass = 2.0;
    auto [back, m2] = normalize(twice);
    CHECK(m2 == 2.0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-15));
    DensitySnapshot dead = s;
    dead.mass = 0.0;
    CHECK_THROWS_AS(normalize(dead), std::domain_error);
}

TEST_CASE("wasserstein1 basics") {
    const std::vector<double> a{0.0}, b{1.0};
    CHECK(wasserstein1(WeightedSample{a}, WeightedSample{b}) == doctest::Approx(1.0));
    const auto x = normal_sample(100000, 3);
    CHECK(wasserstein1(WeightedSample{x}, WeightedSample{x}) == 0.0);
    auto y = x;
    for (double& v : y) v += 0.3;
    CHECK(std::abs(wasserstein1(WeightedSample{x}, WeightedSample{y}) - 0.3) <= 0.01);
    const std::vector<double> empty;
    CHECK_THROWS_AS(wasserstein1(WeightedSample{empty}, WeightedSample{a}), std::domain_error);
    CHECK_THROWS_AS(wasserstein1(WeightedSample{a, {}, 2}, WeightedSample{a}), std::invalid_argument);
}

TEST_CASE("wasserstein1 symmetry and triangle inequality") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> w(0.1, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> p[3], q[3];
        for (int s = 0; s < 3; ++s) {
            const std::size_t n = 20 + static_cast<std::size_t>(trial) * 7 + s * 13;
            for (std::size_t i = 0; i < n; ++i) {
                p[s].push_back(z(gen) * (1 + s) + s);
                q[s].push_back(w(gen));
            }
        }
        const WeightedSample A{p[0], q[0]}, B{p[1], q[1]}, C{p[2], q[2]};
        const double ab = wasserstein1(A, B), ba = wasserstein1(B, A);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(wasserstein1(A, C) <= ab + wasserstein1(B, C) + 1e-12);
    }
}

TEST_CASE("wasserstein1 to a normal law") {
    const std::vector<double> point{0.0};
    // W1(delta_0, N(0,1)) = E|Z| = sqrt(2/pi)
    CHECK(wasserstein1_to_normal(WeightedSample{point}, 0.0, 1.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
    const auto x = normal_sample(100000, 21);
    CHECK(wasserstein1_to_normal(WeightedSample{x}, 0.0, 1.0) < 0.01);
    CHECK(wasserstein1_to_normal(WeightedSample{x}, 0.5, 1.0) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("silverman bandwidth") {
    const auto x = normal_sample(100000, 5);
    ParticleEnsemble e(1, x);
    CHECK(silverman_bandwidth(e) == doctest::Approx(1.06 * std::pow(1e5, -0.2)).epsilon(0.01));
    ParticleEnsemble point(1, {1.0, 1.0, 1.0});
    CHECK(silverman_bandwidth(point) == 1e-3);
}

TEST_CASE("snapshot csv round trip is exact") {
    DensitySnapshot a{0.25, {-1.0, 0.1, 1.0 / 3.0}, {0.0, 1e-300, 2.0 / 7.0}, 0.9999999999999999};
    DensitySnapshot b{0.5, {-1.0, 0.1, 1.0 / 3.0}, {1.0, 2.0, 3.0}, 1.5};
    std::stringstream io;
    write_snapshots_csv(io, {a, b});
    CHECK(io.str().rfind("t,x,u,mass\n", 0) == 0);
    const auto back = read_snapshots_csv(io);
    REQUIRE(back.size() == 2);
    CHECK(back[0].grid == a.grid);
    CHECK(back[0].values == a.values);
    CHECK(back[0].mass == a.mass);
    CHECK(back[1].time == b.time);
    std::stringstream bad("t,x,u,mass\n0,1,2\n");
    CHECK_THROWS_WITH_AS(read_snapshots_csv(bad), doctest::Contains("line 2"), std::runtime_error);
}

}
