#include "robgxe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace robgxe::stats {

double weighted_median(std::span<const double> values, std::span<const double> weights)
{
    if (values.size() != weights.size()) {
        throw std::invalid_argument("weighted_median: size mismatch");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (values.empty() || !(total > 0.0)) return 0.0;

    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    double cum = 0.0;
    for (auto i : idx) {
        cum += weights[i];
        if (cum >= 0.5 * total) return values[i];
    }
    return values[idx.back()];
}

double weighted_mad(std::span<const double> values, std::span<const double> weights)
{
    const double med = weighted_median(values, weights);
    std::vector<double> dev(values.size());
    std::transform(values.begin(), values.end(), dev.begin(),
                   [med](double v) { return std::abs(v - med); });
    return weighted_median(dev, weights);
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw std::invalid_argument("quantile: empty input");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_two_sided_p(double z)
{
    if (std::isinf(z)) return 0.0;
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double binomial_upper_tail_half(int m, int k)
{
    if (k <= 0) return 1.0;
    if (k > m) return 0.0;
    // log-space summation keeps large m stable
    double tail = 0.0;
    for (int i = k; i <= m; ++i) {
        const double log_term = std::lgamma(m + 1.0) - std::lgamma(i + 1.0) -
                                std::lgamma(m - i + 1.0) - m * std::log(2.0);
        tail += std::exp(log_term);
    }
    return std::min(1.0, tail);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace robgxe::stats
