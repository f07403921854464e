#pragma once

#include "robgxe/survival_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace robgxe {

enum class CorrKind { Independent, AR, Band, CS };

/// Correlation among the q+p covariates (E columns first, then G):
///   AR(rho):   rho^|i-j|
///   Band(rho): 1 on the diagonal, 0.3 at lag 1, rho at lag 2, 0 beyond
///   CS(rho):   rho off the diagonal
struct CorrStructure {
    CorrKind kind = CorrKind::Independent;
    double rho = 0.0;

    std::string label() const;
    /// Accepts "Independent", "AR(0.3)", "Band(0.6)", "CS(0.2)".
    static CorrStructure parse(const std::string& text);
};

enum class CovariateKind { Continuous, Categorical };

struct SimulationScenario {
    std::string name;
    int n = 300;
    int q = 5;
    int p = 1000;
    CorrStructure corr;
    CovariateKind covariate_kind = CovariateKind::Continuous;
    double xi = 0.0;  // probability of a standard Cauchy error instead of N(0, 1)
    int n_main_E = 5;
    int n_main_G = 10;
    int n_inter = 20;
    double coef_low = 0.7;
    double coef_high = 1.3;
    double censor_target = 0.25;
    double weibull_shape = 2.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GroundTruth {
    Coefficients zeta_star;
    std::vector<int> true_main_G;                       // sorted
    std::vector<std::pair<int, int>> true_inter;        // (j, k), sorted
};

Eigen::MatrixXd correlation_matrix(const CorrStructure& corr, int dim);

struct Covariates {
    Eigen::MatrixXd E;
    Eigen::MatrixXd G;
};

/// Gaussian rows with the scenario's correlation; categorical scenarios map
/// every entry u to 1{u > -0.7}.
Covariates gen_covariates(const SimulationScenario& scenario, std::mt19937_64& rng);

GroundTruth gen_truth(const SimulationScenario& scenario, std::mt19937_64& rng);

struct Outcomes {
    SurvivalSample sample;
    Eigen::VectorXd errors;
    std::vector<bool> cauchy;  // which error draws came from the contaminating component
    double censoring_rate = 0.0;
};

/// log T = u' zeta* + eps; log C from a Weibull(shape, scale); y = min, delta = 1{T <= C}.
Outcomes gen_outcomes(const Covariates& covariates, const GroundTruth& truth,
                      const SimulationScenario& scenario, double weibull_scale, std::mt19937_64& rng);

/// Bisection on the Weibull scale over 10 fixed-seed pilot cohorts of size n
/// until the pooled censoring rate is within 0.01 of the target.
double calibrate_censoring(const GroundTruth& truth, const SimulationScenario& scenario);

struct SimulatedCohort {
    SurvivalSample sample;
    GroundTruth truth;
    double weibull_scale = 1.0;
    double censoring_rate = 0.0;
    std::vector<bool> cauchy;
};

/// Truth, calibration, covariates and outcomes from independent streams of scenario.seed.
SimulatedCohort simulate(const SimulationScenario& scenario);

} // namespace robgxe
