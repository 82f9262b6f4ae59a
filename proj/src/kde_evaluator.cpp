#include "mfke/kde_evaluator.hpp"

#include "mfke/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfke {

namespace {

KdeEvaluation evaluate_binned(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                              std::span<const double> query, bool with_gradient, const KdeOptions& options) {
    const auto pos = ensemble.positions();
    const auto rel = ensemble.relative_weights();
    const double scale = std::exp(ensemble.max_log_weight()) / static_cast<double>(ensemble.size());
    const auto [min_it, max_it] = std::minmax_element(pos.begin(), pos.end());
    const double radius = kernel.support_radius();

    double h = kernel.bandwidth() / static_cast<double>(std::max<std::size_t>(1, options.bins_per_bandwidth));
    const double lo = *min_it - radius - 2.0 * h;
    const double span = (*max_it + radius + 2.0 * h) - lo;
    std::size_t nodes = static_cast<std::size_t>(std::ceil(span / h)) + 2;
    if (nodes > options.max_bins) {
        nodes = options.max_bins;
        h = span / static_cast<double>(nodes - 2);
    }

    // Linear binning; sequential so the floating-point sums have a fixed order.
    std::vector<double> mass(nodes, 0.0);
    for (std::size_t j = 0; j < pos.size(); ++j) {
        const double s = (pos[j] - lo) / h;
        const auto g = static_cast<std::size_t>(s);
        const double f = s - static_cast<double>(g);
        mass[g] += rel[j] * (1.0 - f);
        mass[g + 1] += rel[j] * f;
    }

    const auto half = static_cast<std::ptrdiff_t>(std::ceil(radius / h));
    std::vector<double> kt(static_cast<std::size_t>(2 * half + 1));
    std::vector<double> dkt(with_gradient ? kt.size() : 0);
    for (std::ptrdiff_t m = -half; m <= half; ++m) {
        const double z = static_cast<double>(m) * h;
        kt[static_cast<std::size_t>(m + half)] = kernel.value_1d(z);
        if (with_gradient) dkt[static_cast<std::size_t>(m + half)] = kernel.derivative_1d(z);
    }

    // Only the nodes bracketing a query point are convolved.
    const std::size_t nq = query.size();
    std::vector<char> needed(nodes, 0);
    for (std::size_t q = 0; q < nq; ++q) {
        const double s = (query[q] - lo) / h;
        if (s < 0.0 || s >= static_cast<double>(nodes - 1)) continue;
        const auto g = static_cast<std::size_t>(s);
        needed[g] = 1;
        needed[g + 1] = 1;
    }
    std::vector<std::size_t> active;
    for (std::size_t g = 0; g < nodes; ++g) {
        if (needed[g]) active.push_back(g);
    }
    std::vector<double> node_value(nodes, 0.0);
    std::vector<double> node_grad(with_gradient ? nodes : 0, 0.0);
    const auto n_nodes = static_cast<std::ptrdiff_t>(nodes);
    parallel_for(active.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a) {
            const auto g = static_cast<std::ptrdiff_t>(active[a]);
            const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, g - half);
            const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(n_nodes - 1, g + half);
            double v = 0.0, dv = 0.0;
            for (std::ptrdiff_t k = k0; k <= k1; ++k) {
                const double mk = mass[static_cast<std::size_t>(k)];
                if (mk == 0.0) continue;
                const auto t = static_cast<std::size_t>(g - k + half);
                v += mk * kt[t];
                if (with_gradient) dv += mk * dkt[t];
            }
            node_value[static_cast<std::size_t>(g)] = scale * v;
            if (with_gradient) node_grad[static_cast<std::size_t>(g)] = scale * dv;
        }
    }, 256);

    KdeEvaluation out;
    out.binned = true;
    out.values.assign(nq, 0.0);
    if (with_gradient) out.gradients.assign(nq, 0.0);
    parallel_for(nq, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            const double s = (query[q] - lo) / h;
            if (s < 0.0 || s >= static_cast<double>(nodes - 1)) continue;
            const auto g = static_cast<std::size_t>(s);
            const double f = s - static_cast<double>(g);
            out.values[q] = (1.0 - f) * node_value[g] + f * node_value[g + 1];
            if (with_gradient) out.gradients[q] = (1.0 - f) * node_grad[g] + f * node_grad[g + 1];
        }
    }, 4096);
    return out;
}

}  // namespace

KdeEvaluation evaluate_kde(const ParticleEnsemble& ensemble, const Mollifier& kernel,
                           std::span<const double> query, bool with_gradient, const KdeOptions& options) {
    if (ensemble.empty()) throw std::domain_error("kernel density of an empty ensemble");
    bool binned = false;
    switch (options.method) {
        case KdeMethod::direct: binned = false; break;
        case KdeMethod::binned: binned = true; break;
        case KdeMethod::automatic: binned = ensemble.size() > options.binned_threshold; break;
    }
    if (binned && ensemble.dim() == 1) return evaluate_binned(ensemble, kernel, query, with_gradient, options);

    KdeEvaluation out;
    out.values = kde_density(ensemble, kernel, query);
    if (with_gradient) out.gradients = kde_gradient(ensemble, kernel, query);
    return out;
}

}  // namespace mfke
