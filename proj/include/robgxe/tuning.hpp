#pragma once

#include "robgxe/loss.hpp"
#include "robgxe/penalty.hpp"
#include "robgxe/solver.hpp"
#include "robgxe/survival_data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace robgxe {

/// How a configured MCP s reaches a loss. Theta: the exp-squared loss is
/// penalized with s * theta, which is s applied to theta * Q_theta; that loss
/// tends to weighted LS plus a constant as theta grows, so s keeps one meaning
/// across losses. Fixed: s as given for every loss.
enum class SScale { Theta, Fixed };

std::string s_scale_name(SScale scale);
SScale parse_s_scale(const std::string& text);
double effective_s(const LossKind& kind, double s, SScale scale);

struct TuningGrid {
    std::vector<double> thetas;
    std::vector<double> lambda1s;  // strictly descending
    std::vector<double> lambda2s;  // strictly descending
    int fold_count = 5;
    std::uint64_t seed = 1;
    double s = 6.0;
    SScale s_scale = SScale::Theta;

    void validate() const;
};

struct GridOptions {
    std::vector<double> theta_multipliers{0.5, 1.0, 2.0, 5.0, 10.0};
    int n_lambda = 30;
    double lambda_min_ratio = 0.01;
    int fold_count = 5;
    std::uint64_t seed = 1;
    double s = 6.0;
    SScale s_scale = SScale::Theta;
};

/// 1.4826 times the Stute-weighted MAD of residuals from the weighted LS fit
/// on intercept and E.
double residual_scale(const PreparedCohort& cohort);

/// n points log-spaced from hi down to min_ratio * hi.
std::vector<double> log_spaced_lambdas(double hi, double min_ratio, int n);

/// theta = multiplier * residual_scale^2; one lambda list shared by lambda1 and
/// lambda2, topped by the largest lambda_max over the theta grid.
TuningGrid default_grid(const PreparedCohort& cohort, const GridOptions& options = {});

/// Fold id in [0, K) for each of n subjects; fold sizes differ by at most one.
std::vector<int> kfold_split(Index n, int K, std::uint64_t seed);

struct CvErrorResult {
    double error = 0.0;
    std::vector<int> flagged_folds;  // held-out folds without events
};

/// Fits on each fold's complement and sums the held-out Stute-weighted squared
/// prediction errors. `folds` assigns each row of `sample` (in its given order).
CvErrorResult cv_error(const SurvivalSample& sample, const std::vector<int>& folds,
                       const LossKind& kind, const PenaltySpec& spec, const FitConfig& config = {});

struct CvSurface {
    std::vector<double> thetas;
    std::vector<double> lambda1s;
    std::vector<double> lambda2s;
    std::vector<double> error;  // theta-major, then lambda1, then lambda2
    std::vector<int> flagged_folds;
    std::size_t theta_star = 0;
    std::size_t lambda1_star = 0;
    std::size_t lambda2_star = 0;

    std::size_t index(std::size_t t, std::size_t i, std::size_t j) const
    {
        return (t * lambda1s.size() + i) * lambda2s.size() + j;
    }
    double at(std::size_t t, std::size_t i, std::size_t j) const { return error[index(t, i, j)]; }
    double selected_theta() const { return thetas[theta_star]; }
    double selected_lambda1() const { return lambda1s[lambda1_star]; }
    double selected_lambda2() const { return lambda2s[lambda2_star]; }
};

/// Cross-validated error surface of the exponential-squared loss over the grid.
/// Each fold walks the lambda grid with warm starts. Deterministic for any thread count.
CvSurface build_cv_surface(const SurvivalSample& sample, const TuningGrid& grid,
                           const FitConfig& config = {}, int threads = 1);

/// Two-stage choice: theta minimizing the lambda-averaged error, then the
/// (lambda1, lambda2) minimizing the error at that theta. Ties go to larger
/// theta, then larger lambdas.
void select(CvSurface& surface);

/// Warm-started fits along a descending path with lambda2 = ratio * lambda1.
/// s is passed to fit unchanged.
std::vector<FitResult> path_fits(const PreparedCohort& cohort, const LossKind& kind,
                                 const std::vector<double>& lambdas, double ratio, double s = 6.0,
                                 const FitConfig& config = {});

/// Cross-validated error at every point of a lambda path (warm-started per fold).
std::vector<double> cv_path_errors(const SurvivalSample& sample, const std::vector<int>& folds,
                                   const LossKind& kind, const std::vector<double>& lambdas,
                                   double ratio, double s = 6.0, const FitConfig& config = {});

} // namespace robgxe
