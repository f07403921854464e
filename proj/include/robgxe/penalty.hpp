#pragma once

#include "robgxe/survival_data.hpp"

#include <Eigen/Dense>

namespace robgxe {

/// Group-level lambda1 on ||b_k||, within-group lambda2 on interactions only,
/// MCP concavity s.
struct PenaltySpec {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double s = 6.0;

    void validate() const;
};

/// MCP rho(t; lambda, s) = lambda |t| - t^2/(2s) on |t| <= lambda s, s lambda^2 / 2 beyond.
double mcp_value(double t, double lambda, double s);

/// sgn(t) (lambda - |t|/s)_+, with lambda returned at t = 0.
double mcp_derivative(double t, double lambda, double s);

/// sum_k rho(||b_k||; lambda1) + sum_k sum_j rho(|gamma_jk|; lambda2).
double sparse_group_value(const Coefficients& zeta, const PenaltySpec& spec);

/// L1 weights of the local linear approximation of the penalty at zeta_m.
struct LlaMultipliers {
    Eigen::VectorXd beta_mult;   // p
    Eigen::MatrixXd gamma_mult;  // q x p, (j, k)

    /// Per-coordinate weights over the full coefficient vector (0 for intercept and E).
    Eigen::VectorXd per_coordinate(const Layout& layout) const;
};

/// For a zero group the ratios |b_kj| / ||b_k|| are taken as 1.
LlaMultipliers lla_multipliers(const Coefficients& zeta_m, const PenaltySpec& spec);

} // namespace robgxe
