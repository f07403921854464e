#pragma once

#include "robgxe/loss.hpp"
#include "robgxe/simulation.hpp"
#include "robgxe/solver.hpp"
#include "robgxe/survival_data.hpp"
#include "robgxe/tuning.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace robgxe {

enum class Scope { Interactions, Mains, Both };

std::string scope_name(Scope scope);
Scope parse_scope(const std::string& text);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocPath {
    Scope scope = Scope::Interactions;
    std::vector<double> lambdas;      // one per path fit
    std::vector<RocPoint> raw;        // (FPR, TPR) at each lambda, path order
    std::vector<RocPoint> curve;      // sorted, with (0,0) and (1,1)
    double auc = 0.0;
};

/// Adds (0,0) and (1,1), sorts by FPR, keeps the smallest and largest TPR per
/// FPR and integrates with the trapezoid rule.
double trapezoid_auc(std::vector<RocPoint> points, std::vector<RocPoint>* curve = nullptr);

/// truth[c] marks the true coordinates of the scope; selected[l][c] is the
/// selection at the l-th lambda.
RocPath roc_from_selections(const std::vector<std::vector<bool>>& selected, const std::vector<bool>& truth,
                            Scope scope = Scope::Interactions, std::vector<double> lambdas = {});

/// Scoped coordinates: interactions in (k, j) order, then main G effects when the
/// scope includes them.
std::vector<bool> truth_mask(const GroundTruth& truth, Scope scope);
std::vector<bool> selection_mask(const Coefficients& zeta_hat, Scope scope);

RocPath roc_auc(const std::vector<FitResult>& path, const GroundTruth& truth, Scope scope,
                std::vector<double> lambdas = {});

enum class Method { ExpSquared, WeightedLS, WeightedCheck };
std::string method_name(Method method);

struct BenchConfig {
    int replicates = 50;
    int n_lambda = 30;
    double lambda_min_ratio = 0.01;
    double ratio = 1.0;  // lambda2 = ratio * lambda1 along the path
    double s = 6.0;
    SScale s_scale = SScale::Theta;
    std::vector<double> theta_multipliers{0.5, 1.0, 2.0, 5.0, 10.0};
    int pilot_folds = 5;
    double check_tau = 0.5;
    FitConfig fit;
    int threads = 1;

    void validate() const;
};

struct ComparisonRow {
    std::string scenario;
    std::string method;
    std::string scope;
    double mean_auc = 0.0;
    double sd_auc = 0.0;  // standard deviation across replicates
    int n_reps = 0;
};

struct ReplicateRoc {
    int replicate = 0;
    Method method = Method::ExpSquared;
    RocPath path;
};

struct SignTest {
    int positive = 0;
    int negative = 0;
    int ties = 0;
    double p_value = 1.0;  // one-sided, H1: first sample tends to be larger
};

/// Paired sign test on a[i] - b[i]; ties are dropped.
SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b);

struct Comparison {
    std::string scenario;
    double theta_multiplier = 1.0;     // pilot choice for the exp-squared loss
    std::vector<double> censoring;     // realized rate per replicate
    // auc[method][scope][replicate]
    std::vector<std::vector<std::vector<double>>> auc;
    std::vector<ComparisonRow> rows;
    std::vector<ReplicateRoc> rocs;

    const std::vector<double>& aucs(Method method, Scope scope) const
    {
        return auc[static_cast<std::size_t>(method)][static_cast<std::size_t>(scope)];
    }
    double mean_censoring() const;
};

/// theta multiplier (times residual_scale^2) with the smallest path-averaged
/// CV error on one pilot cohort simulated from a derived seed.
double pilot_theta_multiplier(const SimulationScenario& scenario, const BenchConfig& config);

/// Replicate r simulates the scenario with seed derive_seed(scenario.seed, r)
/// (fresh truth, covariates, censoring calibration) and scores the three losses
/// along lambda paths.
Comparison compare_methods(const SimulationScenario& scenario, const BenchConfig& config);

void write_comparison_csv(const std::vector<Comparison>& comparisons, std::ostream& out);
void write_roc_csv(const std::vector<Comparison>& comparisons, std::ostream& out);

struct StabilityReport {
    Layout layout;
    int B = 0;
    double fraction = 0.75;
    int skipped = 0;                        // subsamples without events
    std::vector<double> main_frequency;     // per gene
    Eigen::MatrixXd inter_frequency;        // q x p
};

/// B subsamples of ceil(fraction * n) subjects without replacement, each refitted
/// at fixed tunings. Frequencies are over the subsamples that were fitted.
StabilityReport stability(const SurvivalSample& sample, const LossKind& kind, const PenaltySpec& spec,
                          int B, double fraction, std::uint64_t seed, const FitConfig& config = {},
                          int threads = 1);

/// Rows "effect,frequency" with effects named beta.k and gamma.j.k (1-based).
void write_stability_csv(const StabilityReport& report, std::ostream& out);

} // namespace robgxe
