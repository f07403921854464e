#pragma once

#include "robgxe/loss.hpp"
#include "robgxe/penalty.hpp"
#include "robgxe/survival_data.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace robgxe {

struct FitConfig {
    double mm_tol = 1e-4;        // sup-norm change between MM iterates
    double cd_tol = 1e-5;        // sup-norm change across one CD sweep
    int mm_max_iter = 100;
    int cd_max_sweeps = 1000;
    double ascent_slack = 1e-8;  // relative: allowed drop is ascent_slack * (1 + |L|)
    double zero_eps = 1e-8;
    int max_halvings = 10;

    void validate() const;
};

struct FitResult {
    Coefficients zeta_hat;            // raw covariate scale
    Coefficients zeta_standardized;   // scale of the design that was fitted; use for warm starts
    std::vector<int> active_genes;    // b_k != 0
    std::vector<int> main_effects;    // beta_k != 0
    std::vector<std::pair<int, int>> active_interactions;  // (j, k) with gamma_jk != 0
    std::vector<double> objective_trace;  // penalized objective, starting point first
    int mm_iters = 0;
    bool converged = false;
    bool ascent_stalled = false;  // step halving could not restore ascent
    int halvings = 0;             // MM steps that needed step halving
    int damped_steps = 0;         // MM steps redone with the group curvature term
    int cd_unconverged = 0;       // inner solves that hit cd_max_sweeps
    double kkt_residual = 0.0;    // max_j (|z_j - a_j zeta_j| - pen_j)_+ on the final surrogate
};

/// argmax_x -a x^2 / 2 + z x - pen |x|; 0 when a == 0.
double coordinate_update(double a, double z, double pen);

struct CdOutcome {
    Coefficients zeta;
    int sweeps = 0;
    bool converged = false;
};

/// Cyclic coordinate ascent on the penalized quadratic surrogate built at zeta_m.
/// Order: intercept, E effects, then each gene block (main effect, interactions).
CdOutcome cd_maximize_surrogate(const ExpandedDesign& design, const SurrogateState& surrogate,
                                const Coefficients& zeta_m, const LlaMultipliers& multipliers,
                                const FitConfig& config);

double penalized_objective(const ExpandedDesign& design, const StuteWeights& weights,
                           const Coefficients& zeta, const LossKind& kind, const PenaltySpec& spec);

/// KKT violation of the surrogate built at zeta itself.
double surrogate_kkt_residual(const ExpandedDesign& design, const StuteWeights& weights,
                              const Coefficients& zeta, const LossKind& kind,
                              const PenaltySpec& spec);

/// Unpenalized fit of intercept and E effects; gene blocks stay zero.
Coefficients null_fit(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
                      const FitConfig& config = {});

/// Smallest lambda such that (lambda1, lambda2) = (lambda, ratio * lambda) keeps every
/// gene block at zero starting from the null fit.
double lambda_max(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
                  double ratio = 1.0, const FitConfig& config = {});

/// MM with nested coordinate ascent. Without a warm start (given on the design's
/// scale), iterations begin at the null fit.
FitResult fit(const ExpandedDesign& design, const StuteWeights& weights, const LossKind& kind,
              const PenaltySpec& spec, const FitConfig& config = {},
              const std::optional<Coefficients>& warm_start = std::nullopt);

} // namespace robgxe
