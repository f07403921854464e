#pragma once

#include "robgxe/survival_data.hpp"

#include <Eigen/Dense>

#include <string>
#include <variant>

namespace robgxe {

/// sum_i w_i exp(-r_i^2 / theta); theta scales the squared residuals.
struct ExpSquared {
    double theta = 1.0;
};

/// Stute-weighted least squares, negated: -sum_i w_i r_i^2.
struct WeightedLS {};

/// Negated Stute-weighted check loss, smoothed on |r| <= eps:
/// rho(r) = r^2/(4 eps) + (tau - 1/2) r + eps/4 inside, r (tau - 1{r<0}) outside.
struct WeightedCheck {
    double tau = 0.5;
    double eps = 1e-4;
};

/// Every kind is maximized by the same solver.
using LossKind = std::variant<ExpSquared, WeightedLS, WeightedCheck>;

void validate(const LossKind& kind);
std::string loss_name(const LossKind& kind);

/// Smoothing half-width used for the check loss: 1e-4 times the sd of y
/// (divisor n), falling back to 1e-4 for a constant response.
double default_check_epsilon(const Eigen::VectorXd& y);

/// Quadratic minorizer data at an expansion point zeta_m:
///   Q(zeta_m) + s' U (zeta - zeta_m) - 1/2 (zeta - zeta_m)' U' W U (zeta - zeta_m)
/// with per-observation score s = W .* working_residual.
struct SurrogateState {
    Eigen::VectorXd W_diag;
    Eigen::VectorXd residuals;         // v = y - U zeta_m
    Eigen::VectorXd working_residual;  // equals v except for an asymmetric check loss
    double Q_value = 0.0;
};

Eigen::VectorXd residuals(const ExpandedDesign& design, const Coefficients& zeta);

double objective(const ExpandedDesign& design, const StuteWeights& weights, const Coefficients& zeta,
                 const LossKind& kind);
double objective_from_residuals(const Eigen::VectorXd& r, const Eigen::VectorXd& w,
                                const LossKind& kind);

Eigen::VectorXd gradient(const ExpandedDesign& design, const StuteWeights& weights,
                         const Coefficients& zeta, const LossKind& kind);

SurrogateState surrogate_state(const ExpandedDesign& design, const StuteWeights& weights,
                               const Coefficients& zeta, const LossKind& kind);
SurrogateState surrogate_from_residuals(Eigen::VectorXd r, const Eigen::VectorXd& w,
                                        const LossKind& kind);

/// Value of the quadratic minorizer built at zeta_m, evaluated at zeta.
double surrogate_value(const ExpandedDesign& design, const SurrogateState& state,
                       const Coefficients& zeta_m, const Coefficients& zeta);

/// Hessian of the exponential-squared objective (diagnostic only).
Eigen::MatrixXd curvature_matrix(const ExpandedDesign& design, const StuteWeights& weights,
                                 const Coefficients& zeta, double theta, Index max_dim = 2000);

} // namespace robgxe
