#include "mfke/measures.hpp"

#include "mfke/parallel.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mfke {

// ---------------------------------------------------------------------------
// Mollifier

Mollifier::Mollifier(KernelFamily family, double bandwidth, std::size_t dimension)
    : family_(family), bandwidth_(bandwidth), dimension_(dimension) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::domain_error("mollifier bandwidth must be positive, got " + std::to_string(bandwidth));
    }
    if (dimension == 0) throw std::domain_error("mollifier dimension must be positive");
    const double d = static_cast<double>(dimension);
    const double scale = std::pow(bandwidth, -d);
    if (family == KernelFamily::gaussian) {
        norm_ = std::pow(2.0 * std::numbers::pi, -0.5 * d) * scale;
    } else {
        const double unit_ball = std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
        norm_ = (d + 2.0) / (2.0 * unit_ball) * scale;
    }
}

double Mollifier::support_radius() const noexcept {
    return family_ == KernelFamily::gaussian ? 8.0 * bandwidth_ : bandwidth_;
}

double Mollifier::value(std::span<const double> z) const noexcept {
    double r2 = 0.0;
    for (double c : z) r2 += c * c;
    const double s2 = r2 / (bandwidth_ * bandwidth_);
    if (family_ == KernelFamily::gaussian) return norm_ * std::exp(-0.5 * s2);
    return s2 < 1.0 ? norm_ * (1.0 - s2) : 0.0;
}

void Mollifier::gradient(std::span<const double> z, std::span<double> out) const noexcept {
    double r2 = 0.0;
    for (double c : z) r2 += c * c;
    const double inv_e2 = 1.0 / (bandwidth_ * bandwidth_);
    const double s2 = r2 * inv_e2;
    double factor;
    if (family_ == KernelFamily::gaussian) {
        factor = -inv_e2 * norm_ * std::exp(-0.5 * s2);
    } else {
        factor = s2 < 1.0 ? -2.0 * inv_e2 * norm_ : 0.0;
    }
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = factor * z[k];
}

double Mollifier::value_1d(double z) const noexcept { return value(std::span<const double>(&z, 1)); }

double Mollifier::derivative_1d(double z) const noexcept {
    double g = 0.0;
    gradient(std::span<const double>(&z, 1), std::span<double>(&g, 1));
    return g;
}

// ---------------------------------------------------------------------------
// ParticleEnsemble

ParticleEnsemble::ParticleEnsemble(std::size_t dim, std::vector<double> positions, double time)
    : dim_(dim), positions_(std::move(positions)), time_(time) {
    if (dim_ == 0) throw std::invalid_argument("ensemble dimension must be positive");
    if (positions_.size() % dim_ != 0) throw std::invalid_argument("position array is not a multiple of the dimension");
    log_weights_.assign(positions_.size() / dim_, 0.0);
}

ParticleEnsemble::ParticleEnsemble(std::size_t dim, std::vector<double> positions, std::vector<double> log_weights,
                                   double time)
    : dim_(dim), positions_(std::move(positions)), log_weights_(std::move(log_weights)), time_(time) {
    if (dim_ == 0) throw std::invalid_argument("ensemble dimension must be positive");
    if (positions_.size() != log_weights_.size() * dim_) {
        throw std::invalid_argument("positions and log-weights disagree on the particle count");
    }
}

double ParticleEnsemble::weight(std::size_t i) const { return std::exp(log_weights_.at(i)); }

std::vector<double> ParticleEnsemble::weights() const {
    std::vector<double> w(log_weights_.size());
    std::transform(log_weights_.begin(), log_weights_.end(), w.begin(), [](double l) { return std::exp(l); });
    return w;
}

double ParticleEnsemble::max_log_weight() const noexcept {
    if (log_weights_.empty()) return 0.0;
    return *std::max_element(log_weights_.begin(), log_weights_.end());
}

std::vector<double> ParticleEnsemble::relative_weights() const {
    const double m = max_log_weight();
    std::vector<double> w(log_weights_.size());
    std::transform(log_weights_.begin(), log_weights_.end(), w.begin(), [m](double l) { return std::exp(l - m); });
    return w;
}

double ParticleEnsemble::mass() const {
    if (empty()) return 0.0;
    const double m = max_log_weight();
    double s = 0.0;
    for (double l : log_weights_) s += std::exp(l - m);
    return std::exp(m) * (s / static_cast<double>(size()));
}

// ---------------------------------------------------------------------------
// DensitySnapshot

void DensitySnapshot::validate() const {
    if (grid.size() != values.size()) throw std::invalid_argument("snapshot grid and values differ in length");
    if (grid.size() < 2) throw std::invalid_argument("snapshot grid needs at least two points");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("snapshot grid is not strictly increasing");
    }
}

double DensitySnapshot::integral() const { return trapezoid(grid, values); }

double DensitySnapshot::interpolate(double x) const {
    if (grid.empty() || x < grid.front() || x > grid.back()) return 0.0;
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    if (it == grid.end()) return values.back();
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    const double f = (x - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + f * (values[hi] - values[lo]);
}

std::vector<double> UniformGrid::nodes() const {
    if (points < 2 || !(max > min)) throw std::invalid_argument("grid needs min < max and at least two points");
    std::vector<double> x(points);
    const double h = spacing();
    for (std::size_t i = 0; i < points; ++i) x[i] = min + h * static_cast<double>(i);
    x.back() = max;
    return x;
}

double trapezoid(std::span<const double> grid, std::span<const double> values) {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (grid[i] - grid[i - 1]) * (values[i] + values[i - 1]);
    return s;
}

// ---------------------------------------------------------------------------
// Direct kernel density estimation

namespace {

void require_kde_inputs(const ParticleEnsemble& ensemble, const Mollifier& kernel, std::span<const double> query) {
    if (ensemble.empty()) throw std::domain_error("kernel density of an empty ensemble");
    if (!(kernel.bandwidth() > 0.0)) throw std::domain_error("kernel bandwidth must be positive");
    if (kernel.dimension() != ensemble.dim()) throw std::invalid_argument("kernel and ensemble dimensions differ");
    if (query.size() % ensemble.dim() != 0) throw std::invalid_argument("query array is not a multiple of the dimension");
}

// Particles sorted by position (1-D) so each query only visits the kernel support.
struct SortedCloud {
    std::vector<double> x;
    std::vector<double> w;
};

SortedCloud sort_cloud(const ParticleEnsemble& ensemble) {
    const auto rel = ensemble.relative_weights();
    const auto pos = ensemble.positions();
    std::vector<std::size_t> order(ensemble.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pos[a] < pos[b]; });
    SortedCloud c;
    c.x.reserve(order.size());
    c.w.reserve(order.size());
    for (std::size_t i : order) {
        c.x.push_back(pos[i]);
        c.w.push_back(rel[i]);
    }
    return c;
}

template <class Eval>
std::vector<double> direct_sum(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                               std::span<const double> query, std::size_t width, Eval eval) {
    const std::size_t d = ensemble.dim();
    const std::size_t nq = query.size() / d;
    const double scale = std::exp(ensemble.max_log_weight()) / static_cast<double>(ensemble.size());
    std::vector<double> out(nq * width, 0.0);
    if (d == 1) {
        const SortedCloud cloud = sort_cloud(ensemble);
        const double radius = kernel.support_radius();
        parallel_for(nq, [&](std::size_t begin, std::size_t end) {
            for (std::size_t q = begin; q < end; ++q) {
                const double xq = query[q];
                auto lo = std::lower_bound(cloud.x.begin(), cloud.x.end(), xq - radius);
                auto hi = std::upper_bound(lo, cloud.x.end(), xq + radius);
                double acc = 0.0;
                for (auto it = lo; it != hi; ++it) {
                    const std::size_t j = static_cast<std::size_t>(it - cloud.x.begin());
                    acc += cloud.w[j] * eval(xq - cloud.x[j]);
                }
                out[q] = scale * acc;
            }
        }, 64);
        return out;
    }
    const auto rel = ensemble.relative_weights();
    parallel_for(nq, [&](std::size_t begin, std::size_t end) {
        std::vector<double> z(d), g(d);
        for (std::size_t q = begin; q < end; ++q) {
            std::vector<double> acc(width, 0.0);
            for (std::size_t j = 0; j < ensemble.size(); ++j) {
                const auto p = ensemble.position(j);
                for (std::size_t k = 0; k < d; ++k) z[k] = query[q * d + k] - p[k];
                if (width == 1) {
                    acc[0] += rel[j] * kernel.value(z);
                } else {
                    kernel.gradient(z, g);
                    for (std::size_t k = 0; k < d; ++k) acc[k] += rel[j] * g[k];
                }
            }
            for (std::size_t k = 0; k < width; ++k) out[q * width + k] = scale * acc[k];
        }
    }, 16);
    return out;
}

}  // namespace

std::vector<double> kde_density(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                                std::span<const double> query) {
    require_kde_inputs(ensemble, kernel, query);
    return direct_sum(ensemble, kernel, query, 1, [&](double z) { return kernel.value_1d(z); });
}

std::vector<double> kde_gradient(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                                 std::span<const double> query) {
    require_kde_inputs(ensemble, kernel, query);
    return direct_sum(ensemble, kernel, query, ensemble.dim(), [&](double z) { return kernel.derivative_1d(z); });
}

double silverman_bandwidth(const ParticleEnsemble& ensemble, double factor, double floor) {
    if (ensemble.empty()) throw std::domain_error("bandwidth of an empty ensemble");
    const std::size_t d = ensemble.dim();
    const auto w = ensemble.relative_weights();
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double sd_sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ensemble.size(); ++i) mean += w[i] * ensemble.positions()[i * d + k];
        mean /= wsum;
        double var = 0.0;
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            const double r = ensemble.positions()[i * d + k] - mean;
            var += w[i] * r * r;
        }
        sd_sum += std::sqrt(var / wsum);
    }
    const double sd = sd_sum / static_cast<double>(d);
    const double eps = factor * sd * std::pow(static_cast<double>(ensemble.size()), -1.0 / (static_cast<double>(d) + 4.0));
    if (!std::isfinite(eps)) return floor;
    return std::max(eps, floor);
}

std::pair<DensitySnapshot, double> normalize(const DensitySnapshot& snapshot) {
    if (!(snapshot.mass > 0.0) || !std::isfinite(snapshot.mass)) {
        throw std::domain_error("cannot normalise a snapshot with nonpositive mass (extinct Feynman-Kac measure)");
    }
    DensitySnapshot out = snapshot;
    for (double& v : out.values) v /= snapshot.mass;
    out.mass = 1.0;
    return {std::move(out), snapshot.mass};
}

// ---------------------------------------------------------------------------
// Wasserstein-1

namespace {

struct Atoms {
    std::vector<double> x;
    std::vector<double> cdf;  // cumulative normalised weight up to and including x[k]
};

Atoms sorted_atoms(const WeightedSample& s) {
    if (s.dim != 1) throw std::invalid_argument("wasserstein1 supports one-dimensional samples only");
    if (s.points.empty()) throw std::domain_error("wasserstein1 of an empty sample");
    if (!s.weights.empty() && s.weights.size() != s.points.size()) {
        throw std::invalid_argument("sample weights and points differ in length");
    }
    std::vector<std::size_t> order(s.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.points[a] < s.points[b]; });
    double total = 0.0;
    if (s.weights.empty()) {
        total = static_cast<double>(s.points.size());
    } else {
        for (double w : s.weights) {
            if (!(w >= 0.0)) throw std::domain_error("wasserstein1 weights must be nonnegative");
            total += w;
        }
    }
    if (!(total > 0.0)) throw std::domain_error("wasserstein1 sample has zero total weight");
    Atoms a;
    a.x.reserve(order.size());
    a.cdf.reserve(order.size());
    double run = 0.0;
    for (std::size_t i : order) {
        run += s.weights.empty() ? 1.0 : s.weights[i];
        if (!a.x.empty() && a.x.back() == s.points[i]) {
            a.cdf.back() = run / total;
        } else {
            a.x.push_back(s.points[i]);
            a.cdf.push_back(run / total);
        }
    }
    a.cdf.back() = 1.0;
    return a;
}

}  // namespace

double wasserstein1(const WeightedSample& sa, const WeightedSample& sb) {
    const Atoms a = sorted_atoms(sa);
    const Atoms b = sorted_atoms(sb);
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0, x = std::min(a.x.front(), b.x.front()), dist = 0.0;
    while (i < a.x.size() || j < b.x.size()) {
        const double next_a = i < a.x.size() ? a.x[i] : INFINITY;
        const double next_b = j < b.x.size() ? b.x[j] : INFINITY;
        const double next = std::min(next_a, next_b);
        dist += std::abs(fa - fb) * (next - x);
        x = next;
        if (next_a == next) fa = a.cdf[i++];
        if (next_b == next) fb = b.cdf[j++];
    }
    return dist;
}

double wasserstein1_to_normal(const WeightedSample& sample, double mean, double sd) {
    if (!(sd > 0.0)) throw std::domain_error("normal reference needs a positive standard deviation");
    const Atoms a = sorted_atoms(sample);
    const boost::math::normal_distribution<double> unit;
    auto Phi = [&](double z) { return boost::math::cdf(unit, z); };
    // Antiderivative of Phi: z Phi(z) + phi(z).
    auto G = [&](double z) { return z * Phi(z) + boost::math::pdf(unit, z); };
    auto zs = [&](double x) { return (x - mean) / sd; };

    double dist = sd * G(zs(a.x.front()));         // int_{-inf}^{x_1} F
    dist += sd * G(-zs(a.x.back()));               // int_{x_n}^{inf} (1 - F)
    for (std::size_t k = 0; k + 1 < a.x.size(); ++k) {
        const double c = a.cdf[k];
        const double za = zs(a.x[k]);
        const double zb = zs(a.x[k + 1]);
        const double zc = boost::math::quantile(unit, std::clamp(c, 1e-300, 1.0 - 1e-16));
        // int_za^zb (Phi - c) dz, split at the crossing Phi(zc) = c
        auto above = [&](double lo, double hi) { return (G(hi) - G(lo)) - c * (hi - lo); };
        double part;
        if (zc <= za) {
            part = above(za, zb);
        } else if (zc >= zb) {
            part = -above(za, zb);
        } else {
            part = -above(za, zc) + above(zc, zb);
        }
        dist += sd * std::max(part, 0.0);
    }
    return dist;
}

double wasserstein1(const DensitySnapshot& a, const DensitySnapshot& b) {
    a.validate();
    b.validate();
    if (a.grid != b.grid) throw std::invalid_argument("grid wasserstein1 needs both snapshots on the same grid");
    const std::size_t m = a.grid.size();
    auto cdf = [m](const DensitySnapshot& s) {
        std::vector<double> F(m, 0.0);
        for (std::size_t i = 1; i < m; ++i) {
            F[i] = F[i - 1] + 0.5 * (s.grid[i] - s.grid[i - 1]) * (std::max(s.values[i], 0.0) + std::max(s.values[i - 1], 0.0));
        }
        if (!(F.back() > 0.0)) throw std::domain_error("grid density has no positive mass");
        for (double& f : F) f /= F.back();
        return F;
    };
    const auto Fa = cdf(a);
    const auto Fb = cdf(b);
    std::vector<double> diff(m);
    for (std::size_t i = 0; i < m; ++i) diff[i] = std::abs(Fa[i] - Fb[i]);
    return trapezoid(a.grid, diff);
}

}  // namespace mfke
