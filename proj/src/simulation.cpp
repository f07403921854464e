#include "robgxe/simulation.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <regex>

namespace robgxe {

namespace {

constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kCovariateStream = 2;
constexpr std::uint64_t kOutcomeStream = 3;
constexpr std::uint64_t kPilotStream = 4;
constexpr int kPilotCohorts = 10;
constexpr double kCategoricalThreshold = -0.7;

// first m of a uniformly shuffled 0..n-1, sorted
std::vector<int> sample_without_replacement(int n, int m, std::mt19937_64& rng)
{
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(m));
    std::sort(pool.begin(), pool.end());
    return pool;
}

Eigen::VectorXd linear_predictor(const Covariates& x, const GroundTruth& truth)
{
    const Coefficients& z = truth.zeta_star;
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(x.E.rows(), z.intercept());
    for (int j = 0; j < z.q(); ++j) {
        if (z.env(j) != 0.0) eta += z.env(j) * x.E.col(j);
    }
    for (int k = 0; k < z.p(); ++k) {
        const auto b = z.block(k);
        if ((b.array() == 0.0).all()) continue;
        Eigen::VectorXd slope = Eigen::VectorXd::Constant(x.E.rows(), b[0]);
        for (int j = 0; j < z.q(); ++j) {
            if (b[1 + j] != 0.0) slope += b[1 + j] * x.E.col(j);
        }
        eta += slope.cwiseProduct(x.G.col(k));
    }
    return eta;
}

Eigen::VectorXd draw_errors(Index n, double xi, std::mt19937_64& rng, std::vector<bool>& cauchy)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::cauchy_distribution<double> heavy(0.0, 1.0);
    Eigen::VectorXd eps(n);
    cauchy.assign(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n; ++i) {
        const bool c = unif(rng) < xi;
        cauchy[static_cast<std::size_t>(i)] = c;
        eps[i] = c ? heavy(rng) : normal(rng);
    }
    return eps;
}

// log of standard (scale 1) Weibull draws
Eigen::VectorXd draw_log_weibull(Index n, double shape, std::mt19937_64& rng)
{
    std::weibull_distribution<double> weib(shape, 1.0);
    Eigen::VectorXd out(n);
    for (Index i = 0; i < n; ++i) out[i] = std::log(weib(rng));
    return out;
}

} // namespace

std::string CorrStructure::label() const
{
    char buf[64];
    switch (kind) {
    case CorrKind::Independent: return "Independent";
    case CorrKind::AR: std::snprintf(buf, sizeof(buf), "AR(%g)", rho); break;
    case CorrKind::Band: std::snprintf(buf, sizeof(buf), "Band(%g)", rho); break;
    case CorrKind::CS: std::snprintf(buf, sizeof(buf), "CS(%g)", rho); break;
    }
    return buf;
}

CorrStructure CorrStructure::parse(const std::string& text)
{
    if (text == "Independent" || text == "independent") return {};
    static const std::regex pattern(R"(^\s*(AR|Band|CS)\s*\(\s*([-+0-9.eE]+)\s*\)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) {
        throw ValidationError("unrecognized correlation structure '" + text + "'");
    }
    CorrStructure c;
    c.kind = m[1] == "AR" ? CorrKind::AR : (m[1] == "Band" ? CorrKind::Band : CorrKind::CS);
    try {
        c.rho = std::stod(m[2]);
    } catch (const std::exception&) {
        throw ValidationError("bad correlation parameter in '" + text + "'");
    }
    return c;
}

void SimulationScenario::validate() const
{
    if (n < 2) throw ValidationError("scenario needs n >= 2");
    if (q < 1 || p < 1) throw ValidationError("scenario needs q >= 1 and p >= 1");
    if (!(xi >= 0.0 && xi < 1.0)) throw ValidationError("xi must lie in [0, 1)");
    if (n_main_E < 0 || n_main_E > q) throw ValidationError("n_main_E must lie in [0, q]");
    if (n_main_G < 0 || n_main_G > p) throw ValidationError("n_main_G must lie in [0, p]");
    if (n_inter < 0 || n_inter > n_main_G * q) {
        throw ValidationError("n_inter cannot be placed under n_main_G genes x q environments");
    }
    if (!(coef_low <= coef_high)) throw ValidationError("coef_low must not exceed coef_high");
    if (!(censor_target > 0.0 && censor_target < 1.0)) throw ValidationError("censor_target must lie in (0, 1)");
    if (!(weibull_shape > 0.0)) throw ValidationError("weibull_shape must be positive");
    if (corr.kind == CorrKind::CS && q + p > 1 && !(corr.rho > -1.0 / (q + p - 1))) {
        throw ValidationError("CS correlation must exceed -1/(dim-1)");
    }
}

Eigen::MatrixXd correlation_matrix(const CorrStructure& corr, int dim)
{
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            if (i == j) continue;
            const int lag = std::abs(i - j);
            switch (corr.kind) {
            case CorrKind::Independent: break;
            case CorrKind::AR: S(i, j) = std::pow(corr.rho, lag); break;
            case CorrKind::Band: S(i, j) = lag == 1 ? 0.3 : (lag == 2 ? corr.rho : 0.0); break;
            case CorrKind::CS: S(i, j) = corr.rho; break;
            }
        }
    }
    return S;
}

Covariates gen_covariates(const SimulationScenario& scenario, std::mt19937_64& rng)
{
    scenario.validate();
    const int dim = scenario.q + scenario.p;
    const Index n = scenario.n;
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd Z(n, dim);
    for (Index i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) Z(i, j) = normal(rng);
    }
    Eigen::MatrixXd X;
    if (scenario.corr.kind == CorrKind::Independent) {
        X = std::move(Z);
    } else {
        const Eigen::LLT<Eigen::MatrixXd> llt(correlation_matrix(scenario.corr, dim));
        if (llt.info() != Eigen::Success) {
            throw ValidationError("correlation matrix " + scenario.corr.label() + " of dimension " +
                                  std::to_string(dim) + " is not positive definite");
        }
        X = Z * llt.matrixU();
    }
    if (scenario.covariate_kind == CovariateKind::Categorical) {
        X = (X.array() > kCategoricalThreshold).cast<double>().matrix();
    }
    return Covariates{X.leftCols(scenario.q), X.rightCols(scenario.p)};
}

GroundTruth gen_truth(const SimulationScenario& scenario, std::mt19937_64& rng)
{
    scenario.validate();
    const int q = scenario.q;
    const int p = scenario.p;
    std::uniform_real_distribution<double> coef(scenario.coef_low, scenario.coef_high);

    GroundTruth truth;
    truth.zeta_star = Coefficients(q, p);
    const Layout layout = truth.zeta_star.layout();

    for (int j : sample_without_replacement(q, scenario.n_main_E, rng)) {
        truth.zeta_star[layout.env_index(j)] = coef(rng);
    }
    truth.true_main_G = sample_without_replacement(p, scenario.n_main_G, rng);
    for (int k : truth.true_main_G) truth.zeta_star[layout.beta_index(k)] = coef(rng);

    // interactions uniformly over (chosen genes) x (environments)
    const int cells = scenario.n_main_G * q;
    for (int c : sample_without_replacement(cells, scenario.n_inter, rng)) {
        const int k = truth.true_main_G[static_cast<std::size_t>(c / q)];
        const int j = c % q;
        truth.true_inter.emplace_back(j, k);
    }
    std::sort(truth.true_inter.begin(), truth.true_inter.end(),
              [](const auto& a, const auto& b) { return std::pair(a.second, a.first) < std::pair(b.second, b.first); });
    for (const auto& [j, k] : truth.true_inter) truth.zeta_star[layout.gamma_index(j, k)] = coef(rng);
    return truth;
}

Outcomes gen_outcomes(const Covariates& covariates, const GroundTruth& truth,
                      const SimulationScenario& scenario, double weibull_scale, std::mt19937_64& rng)
{
    if (!(weibull_scale > 0.0)) throw ValidationError("Weibull scale must be positive");
    const Index n = covariates.E.rows();
    Outcomes out;
    out.errors = draw_errors(n, scenario.xi, rng, out.cauchy);
    const Eigen::VectorXd log_t = linear_predictor(covariates, truth) + out.errors;
    const Eigen::VectorXd log_c =
        draw_log_weibull(n, scenario.weibull_shape, rng).array() + std::log(weibull_scale);

    Eigen::VectorXd y(n);
    Eigen::VectorXi delta(n);
    int censored = 0;
    for (Index i = 0; i < n; ++i) {
        const bool event = log_t[i] <= log_c[i];
        y[i] = event ? log_t[i] : log_c[i];
        delta[i] = event ? 1 : 0;
        censored += event ? 0 : 1;
    }
    out.censoring_rate = n > 0 ? static_cast<double>(censored) / static_cast<double>(n) : 0.0;
    out.sample = SurvivalSample(std::move(y), std::move(delta), covariates.E, covariates.G);
    return out;
}

double calibrate_censoring(const GroundTruth& truth, const SimulationScenario& scenario)
{
    scenario.validate();
    std::mt19937_64 rng(stats::derive_seed(scenario.seed, kPilotStream));
    // censored iff log T > log(scale) + log W0; keep the gap log T - log W0
    std::vector<double> gap;
    gap.reserve(static_cast<std::size_t>(scenario.n) * kPilotCohorts);
    for (int c = 0; c < kPilotCohorts; ++c) {
        const Covariates x = gen_covariates(scenario, rng);
        std::vector<bool> flags;
        const Eigen::VectorXd log_t =
            linear_predictor(x, truth) + draw_errors(scenario.n, scenario.xi, rng, flags);
        const Eigen::VectorXd log_w = draw_log_weibull(scenario.n, scenario.weibull_shape, rng);
        for (Index i = 0; i < scenario.n; ++i) gap.push_back(log_t[i] - log_w[i]);
    }
    const auto rate = [&](double log_scale) {
        const auto cens = std::count_if(gap.begin(), gap.end(), [&](double g) { return g > log_scale; });
        return static_cast<double>(cens) / static_cast<double>(gap.size());
    };

    const auto [mn, mx] = std::minmax_element(gap.begin(), gap.end());
    double lo = *mn - 1.0;  // everything censored
    double hi = *mx + 1.0;  // nothing censored
    double achieved = 0.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        achieved = rate(mid);
        if (std::abs(achieved - scenario.censor_target) <= 0.01) return std::exp(mid);
        if (achieved > scenario.censor_target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    throw NumericalError("censoring calibration did not converge; achieved rate " + std::to_string(achieved));
}

SimulatedCohort simulate(const SimulationScenario& scenario)
{
    scenario.validate();
    SimulatedCohort out;
    std::mt19937_64 truth_rng(stats::derive_seed(scenario.seed, kTruthStream));
    out.truth = gen_truth(scenario, truth_rng);
    out.weibull_scale = calibrate_censoring(out.truth, scenario);

    std::mt19937_64 cov_rng(stats::derive_seed(scenario.seed, kCovariateStream));
    const Covariates x = gen_covariates(scenario, cov_rng);
    std::mt19937_64 out_rng(stats::derive_seed(scenario.seed, kOutcomeStream));
    Outcomes o = gen_outcomes(x, out.truth, scenario, out.weibull_scale, out_rng);
    out.sample = std::move(o.sample);
    out.censoring_rate = o.censoring_rate;
    out.cauchy = std::move(o.cauchy);
    return out;
}

} // namespace robgxe
