#include "robgxe/penalty.hpp"

#include "robgxe/errors.hpp"

#include <cmath>

namespace robgxe {

namespace {

void check_mcp_args(double lambda, double s)
{
    if (!(s > 1.0)) throw ValidationError("MCP parameter s must exceed 1");
    if (!(lambda >= 0.0)) throw ValidationError("MCP lambda must be non-negative");
}

} // namespace

void PenaltySpec::validate() const
{
    if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ValidationError("lambda1 must be non-negative");
    if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) throw ValidationError("lambda2 must be non-negative");
    if (!(s > 1.0) || !std::isfinite(s)) throw ValidationError("MCP parameter s must exceed 1");
}

double mcp_value(double t, double lambda, double s)
{
    check_mcp_args(lambda, s);
    const double a = std::abs(t);
    if (a <= lambda * s) return lambda * a - a * a / (2.0 * s);
    return 0.5 * s * lambda * lambda;
}

double mcp_derivative(double t, double lambda, double s)
{
    check_mcp_args(lambda, s);
    const double mag = std::max(lambda - std::abs(t) / s, 0.0);
    return t < 0.0 ? -mag : mag;
}

double sparse_group_value(const Coefficients& zeta, const PenaltySpec& spec)
{
    spec.validate();
    double total = 0.0;
    for (int k = 0; k < zeta.p(); ++k) {
        total += mcp_value(zeta.block(k).norm(), spec.lambda1, spec.s);
        for (int j = 0; j < zeta.q(); ++j) {
            total += mcp_value(zeta.gamma(j, k), spec.lambda2, spec.s);
        }
    }
    return total;
}

LlaMultipliers lla_multipliers(const Coefficients& zeta_m, const PenaltySpec& spec)
{
    spec.validate();
    const int q = zeta_m.q();
    const int p = zeta_m.p();
    LlaMultipliers out{Eigen::VectorXd(p), Eigen::MatrixXd(q, p)};
    for (int k = 0; k < p; ++k) {
        const double norm = zeta_m.block(k).norm();
        const double group_slope = mcp_derivative(norm, spec.lambda1, spec.s);
        if (norm > 0.0) {
            out.beta_mult[k] = group_slope * std::abs(zeta_m.beta(k)) / norm;
        } else {
            out.beta_mult[k] = group_slope;
        }
        for (int j = 0; j < q; ++j) {
            const double g = zeta_m.gamma(j, k);
            const double ratio = norm > 0.0 ? std::abs(g) / norm : 1.0;
            out.gamma_mult(j, k) = group_slope * ratio + std::abs(mcp_derivative(g, spec.lambda2, spec.s));
        }
    }
    return out;
}

Eigen::VectorXd LlaMultipliers::per_coordinate(const Layout& layout) const
{
    Eigen::VectorXd pen = Eigen::VectorXd::Zero(layout.width());
    for (int k = 0; k < layout.p; ++k) {
        pen[layout.beta_index(k)] = beta_mult[k];
        for (int j = 0; j < layout.q; ++j) pen[layout.gamma_index(j, k)] = gamma_mult(j, k);
    }
    return pen;
}

} // namespace robgxe
