#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace mfke {

enum class KernelFamily { gaussian, epanechnikov };

/// Scaled kernel K^eps(x) = eps^{-d} phi(x / eps), phi a probability density on R^d.
class Mollifier {
public:
    /// Throws std::domain_error for a nonpositive bandwidth or zero dimension.
    Mollifier(KernelFamily family, double bandwidth, std::size_t dimension = 1);

    KernelFamily family() const noexcept { return family_; }
    double bandwidth() const noexcept { return bandwidth_; }
    std::size_t dimension() const noexcept { return dimension_; }

    /// K^eps(z) for a displacement z of length `dimension()`.
    double value(std::span<const double> z) const noexcept;
    /// Gradient of K^eps at z, written to `out`. The Epanechnikov gradient is
    /// taken as 0 on and outside the support boundary |z| = eps.
    void gradient(std::span<const double> z, std::span<double> out) const noexcept;

    double value_1d(double z) const noexcept;
    double derivative_1d(double z) const noexcept;

    /// Radius beyond which the kernel is treated as zero (8 eps for the
    /// Gaussian, eps for Epanechnikov).
    double support_radius() const noexcept;

private:
    KernelFamily family_;
    double bandwidth_;
    std::size_t dimension_;
    double norm_;  // phi normalisation divided by eps^d
};

/// N particles in R^d with Feynman-Kac weights held as logarithms.
///
/// Weights are exposed as positive reals; the log representation keeps long
/// non-conservative runs away from underflow.
class ParticleEnsemble {
public:
    ParticleEnsemble() = default;
    /// Unit weights. `positions` is row-major N x dim.
    ParticleEnsemble(std::size_t dim, std::vector<double> positions, double time = 0.0);
    ParticleEnsemble(std::size_t dim, std::vector<double> positions, std::vector<double> log_weights, double time);

    std::size_t size() const noexcept { return dim_ == 0 ? 0 : positions_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> positions() const noexcept { return positions_; }
    std::span<double> positions() noexcept { return positions_; }
    std::span<const double> position(std::size_t i) const noexcept { return {positions_.data() + i * dim_, dim_}; }

    std::span<const double> log_weights() const noexcept { return log_weights_; }
    std::span<double> log_weights() noexcept { return log_weights_; }
    double weight(std::size_t i) const;
    std::vector<double> weights() const;

    double time() const noexcept { return time_; }
    void set_time(double t) noexcept { time_ = t; }

    /// Largest log-weight (0 for an empty ensemble).
    double max_log_weight() const noexcept;
    /// Weights divided by exp(max_log_weight()); all in (0, 1].
    std::vector<double> relative_weights() const;
    /// (1/N) sum_j w_j. Exact when every weight is equal.
    double mass() const;

private:
    std::size_t dim_ = 1;
    std::vector<double> positions_;
    std::vector<double> log_weights_;
    double time_ = 0.0;
};

/// Grid-sampled density u(t, .) with its total Feynman-Kac mass.
struct DensitySnapshot {
    double time = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    double mass = 1.0;

    /// Throws std::invalid_argument unless the grid is strictly increasing and
    /// matches `values` in length.
    void validate() const;
    /// Trapezoid quadrature of `values` over `grid`.
    double integral() const;
    /// Linear interpolation, zero outside the grid.
    double interpolate(double x) const;
};

struct UniformGrid {
    double min = -5.0;
    double max = 5.0;
    std::size_t points = 201;

    std::vector<double> nodes() const;
    double spacing() const noexcept { return (max - min) / static_cast<double>(points - 1); }
};

double trapezoid(std::span<const double> grid, std::span<const double> values);

/// u(x_q) = (1/N) sum_j w_j K^eps(x_q - xi_j), evaluated directly.
/// `query` is row-major with `kernel.dimension()` coordinates per point.
std::vector<double> kde_density(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                                std::span<const double> query);

/// Exact spatial gradient of kde_density at each query point (row-major, d per point).
std::vector<double> kde_gradient(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                                 std::span<const double> query);

/// Silverman-type bandwidth factor * sd * N^{-1/(d+4)}, sd the weighted
/// standard deviation averaged over coordinates. Falls back to `floor` for a
/// degenerate ensemble.
double silverman_bandwidth(const ParticleEnsemble& ensemble, double factor = 1.06, double floor = 1e-3);

/// Rescales to unit mass. Returns the normalised snapshot and the extracted mass.
/// Throws std::domain_error if the mass is not positive.
std::pair<DensitySnapshot, double> normalize(const DensitySnapshot& snapshot);

/// 1-D weighted point cloud; empty `weights` means uniform.
struct WeightedSample {
    std::span<const double> points;
    std::span<const double> weights = {};
    std::size_t dim = 1;
};

/// Exact 1-D Wasserstein-1 distance via the CDF (quantile) coupling.
/// Weights are normalised internally. Throws std::domain_error for empty
/// samples and std::invalid_argument for dim != 1.
double wasserstein1(const WeightedSample& a, const WeightedSample& b);

/// Exact W1 between an empirical law and N(mean, sd^2), using the closed-form
/// antiderivative of the normal CDF.
double wasserstein1_to_normal(const WeightedSample& sample, double mean, double sd);

/// W1 between two grid densities on the same grid, each normalised to unit
/// mass, by trapezoid CDFs.
double wasserstein1(const DensitySnapshot& a, const DensitySnapshot& b);

}  // namespace mfke
