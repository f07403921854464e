#pragma once

// Small random problems built directly on the design, bypassing CSV and sorting.

#include "robgxe/survival_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace fixture {

struct Problem {
    robgxe::ExpandedDesign design;
    robgxe::StuteWeights weights;
    robgxe::Coefficients truth;
};

// Column 0 is the intercept, the rest are standard normal. A fraction of the
// weights is zero, mimicking censored rows.
inline Problem random_problem(int n, int q, int p, std::uint64_t seed, double noise = 0.5,
                              double zero_fraction = 0.2)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    const robgxe::Layout layout{q, p};
    const auto d = layout.width();

    Problem pr;
    pr.design.layout = layout;
    pr.design.U.resize(n, d);
    for (int i = 0; i < n; ++i) {
        pr.design.U(i, 0) = 1.0;
        for (robgxe::Index c = 1; c < d; ++c) pr.design.U(i, c) = N(rng);
    }
    pr.design.column_means = Eigen::VectorXd::Zero(d);
    pr.design.column_scales = Eigen::VectorXd::Ones(d);
    pr.design.constant_column.assign(static_cast<std::size_t>(d), false);
    pr.design.constant_column[0] = true;

    pr.truth = robgxe::Coefficients(q, p);
    pr.truth[0] = N(rng);
    for (int j = 0; j < q; ++j) pr.truth[layout.env_index(j)] = N(rng);
    if (p > 0) {
        pr.truth[layout.beta_index(0)] = 1.5;
        pr.truth[layout.gamma_index(0, 0)] = -1.0;
    }
    pr.design.y = pr.design.U * pr.truth.vector();
    for (int i = 0; i < n; ++i) pr.design.y[i] += noise * N(rng);

    pr.weights.w.resize(n);
    for (int i = 0; i < n; ++i) pr.weights.w[i] = U01(rng) < zero_fraction ? 0.0 : 0.1 + U01(rng);
    if (pr.weights.w.sum() == 0.0) pr.weights.w[0] = 1.0;
    pr.weights.w /= pr.weights.w.sum();
    return pr;
}

inline robgxe::Coefficients random_coefficients(const robgxe::Layout& layout, std::uint64_t seed,
                                                double scale = 0.3)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, scale);
    robgxe::Coefficients z(layout.q, layout.p);
    for (robgxe::Index c = 0; c < z.size(); ++c) z[c] = N(rng);
    return z;
}

} // namespace fixture
