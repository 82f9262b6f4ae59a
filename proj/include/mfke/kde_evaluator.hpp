#pragma once

#include "mfke/measures.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mfke {

/// How the engine evaluates the particle density at many points.
///   direct     exact sum over particles within the kernel support
///   binned     linear binning onto a grid of spacing eps / resolution,
///              discrete convolution, linear interpolation back (1-D only)
///   automatic  direct for small ensembles, binned above `binned_threshold`
enum class KdeMethod { automatic, direct, binned };

struct KdeOptions {
    KdeMethod method = KdeMethod::automatic;
    std::size_t binned_threshold = 4000;
    std::size_t bins_per_bandwidth = 20;
    std::size_t max_bins = 4'000'000;
};

struct KdeEvaluation {
    std::vector<double> values;     // one per query point
    std::vector<double> gradients;  // d per query point, empty unless requested
    bool binned = false;
};

/// Density (and optionally gradient) of (1/N) sum_j w_j K^eps(x - xi_j) at every
/// query point. Results depend only on the inputs and options, never on the
/// worker count.
KdeEvaluation evaluate_kde(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                           std::span<const double> query, bool with_gradient, const KdeOptions& options = {});

}  // namespace mfke
