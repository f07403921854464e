#include "robgxe/tuning.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/parallel.hpp"
#include "robgxe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace robgxe {

namespace {

bool strictly_descending_positive(const std::vector<double>& v)
{
    if (v.empty()) return false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0) || !std::isfinite(v[i])) return false;
        if (i > 0 && !(v[i] < v[i - 1])) return false;
    }
    return true;
}

struct FoldData {
    PreparedCohort train;
    Eigen::VectorXd val_y;
    Eigen::VectorXd val_w;
    Eigen::MatrixXd val_U;
    bool no_events = false;
};

std::vector<FoldData> make_folds(const SurvivalSample& sample, const std::vector<int>& folds, int K)
{
    if (static_cast<Index>(folds.size()) != sample.n()) {
        throw ValidationError("fold assignment does not match the sample size");
    }
    std::vector<FoldData> out(static_cast<std::size_t>(K));
    for (int f = 0; f < K; ++f) {
        std::vector<Index> train_rows;
        std::vector<Index> val_rows;
        for (Index i = 0; i < sample.n(); ++i) {
            (folds[static_cast<std::size_t>(i)] == f ? val_rows : train_rows).push_back(i);
        }
        if (val_rows.empty() || train_rows.empty()) {
            throw ValidationError("fold " + std::to_string(f) + " leaves an empty training or validation set");
        }
        auto& fd = out[static_cast<std::size_t>(f)];
        fd.train = prepare_cohort(sample.select_rows(train_rows));
        const SurvivalSample val = sort_by_time(sample.select_rows(val_rows));
        fd.val_w = compute_stute_weights(val).w;
        fd.val_y = val.y();
        fd.val_U = expand_covariates(val.E(), val.G());
        fd.no_events = val.event_count() == 0;
    }
    return out;
}

double held_out_error(const FoldData& fd, const FitResult& fit)
{
    if (fd.no_events) return 0.0;
    const Eigen::VectorXd r = fd.val_y - fd.val_U * fit.zeta_hat.vector();
    return fd.val_w.dot(r.cwiseProduct(r));
}

int max_fold(const std::vector<int>& folds)
{
    return folds.empty() ? 0 : *std::max_element(folds.begin(), folds.end()) + 1;
}

} // namespace

std::string s_scale_name(SScale scale)
{
    return scale == SScale::Theta ? "theta" : "fixed";
}

SScale parse_s_scale(const std::string& text)
{
    if (text == "theta") return SScale::Theta;
    if (text == "fixed") return SScale::Fixed;
    throw ValidationError("s scale must be 'theta' or 'fixed', got '" + text + "'");
}

double effective_s(const LossKind& kind, double s, SScale scale)
{
    if (const auto* e = std::get_if<ExpSquared>(&kind); e && scale == SScale::Theta) return s * e->theta;
    return s;
}

void TuningGrid::validate() const
{
    if (thetas.empty()) throw ValidationError("theta grid is empty");
    for (double t : thetas) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("theta values must be positive");
    }
    if (!strictly_descending_positive(lambda1s)) {
        throw ValidationError("lambda1 grid must be positive and strictly descending");
    }
    if (!strictly_descending_positive(lambda2s)) {
        throw ValidationError("lambda2 grid must be positive and strictly descending");
    }
    if (fold_count < 2) throw ValidationError("at least two folds are required");
    if (!(s > 1.0)) throw ValidationError("MCP parameter s must exceed 1");
}

double residual_scale(const PreparedCohort& cohort)
{
    const ExpandedDesign& d = cohort.design;
    const Coefficients base = null_fit(d, cohort.weights, WeightedLS{});
    const Eigen::VectorXd r = residuals(d, base);
    const double mad = stats::weighted_mad(std::span<const double>(r.data(), r.size()),
                                           std::span<const double>(cohort.weights.w.data(),
                                                                   cohort.weights.w.size()));
    return 1.4826 * mad;
}

std::vector<double> log_spaced_lambdas(double hi, double min_ratio, int n)
{
    if (!(hi > 0.0)) throw ValidationError("lambda path needs a positive upper end");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw ValidationError("lambda_min_ratio must lie in (0, 1)");
    if (n < 1) throw ValidationError("lambda path needs at least one point");
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = hi;
        return out;
    }
    const double step = std::log(min_ratio) / (n - 1);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = hi * std::exp(step * i);
    return out;
}

TuningGrid default_grid(const PreparedCohort& cohort, const GridOptions& options)
{
    const double sigma = residual_scale(cohort);
    if (!(sigma > 0.0)) throw NumericalError("no residual scale");

    TuningGrid grid;
    grid.fold_count = options.fold_count;
    grid.seed = options.seed;
    grid.s = options.s;
    grid.s_scale = options.s_scale;
    double top = 0.0;
    for (double m : options.theta_multipliers) {
        const double theta = m * sigma * sigma;
        grid.thetas.push_back(theta);
        top = std::max(top, lambda_max(cohort.design, cohort.weights, ExpSquared{theta}, 1.0));
    }
    if (!(top > 0.0)) throw NumericalError("lambda_max is zero; no gene signal to penalize");
    grid.lambda1s = log_spaced_lambdas(top, options.lambda_min_ratio, options.n_lambda);
    grid.lambda2s = grid.lambda1s;
    grid.validate();
    return grid;
}

std::vector<int> kfold_split(Index n, int K, std::uint64_t seed)
{
    if (K < 1) throw ValidationError("fold count must be positive");
    if (K > n) throw ValidationError("more folds (" + std::to_string(K) + ") than subjects (" +
                                     std::to_string(n) + ")");
    std::vector<int> folds(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) folds[static_cast<std::size_t>(i)] = static_cast<int>(i % K);
    std::mt19937_64 rng(seed);
    std::shuffle(folds.begin(), folds.end(), rng);
    return folds;
}

CvErrorResult cv_error(const SurvivalSample& sample, const std::vector<int>& folds,
                       const LossKind& kind, const PenaltySpec& spec, const FitConfig& config)
{
    const auto data = make_folds(sample, folds, max_fold(folds));
    CvErrorResult res;
    for (std::size_t f = 0; f < data.size(); ++f) {
        if (data[f].no_events) {
            res.flagged_folds.push_back(static_cast<int>(f));
            continue;
        }
        const FitResult fr = fit(data[f].train.design, data[f].train.weights, kind, spec, config);
        res.error += held_out_error(data[f], fr);
    }
    return res;
}

CvSurface build_cv_surface(const SurvivalSample& sample, const TuningGrid& grid,
                           const FitConfig& config, int threads)
{
    grid.validate();
    const auto folds = kfold_split(sample.n(), grid.fold_count, grid.seed);
    const auto data = make_folds(sample, folds, grid.fold_count);

    CvSurface surface;
    surface.thetas = grid.thetas;
    surface.lambda1s = grid.lambda1s;
    surface.lambda2s = grid.lambda2s;
    const std::size_t T = grid.thetas.size();
    const std::size_t L1 = grid.lambda1s.size();
    const std::size_t L2 = grid.lambda2s.size();
    const std::size_t K = data.size();

    // per (theta, fold) slab of L1 x L2 errors
    std::vector<double> contrib(T * K * L1 * L2, 0.0);
    parallel_for(T * K, threads, [&](std::size_t task) {
        const std::size_t t = task / K;
        const std::size_t f = task % K;
        const FoldData& fd = data[f];
        if (fd.no_events) return;
        const ExpSquared kind{grid.thetas[t]};
        const double s = effective_s(kind, grid.s, grid.s_scale);
        double* slab = contrib.data() + task * L1 * L2;
        std::optional<Coefficients> row_start;
        for (std::size_t i = 0; i < L1; ++i) {
            std::optional<Coefficients> warm = row_start;
            for (std::size_t j = 0; j < L2; ++j) {
                const PenaltySpec spec{grid.lambda1s[i], grid.lambda2s[j], s};
                const FitResult fr = fit(fd.train.design, fd.train.weights, kind, spec, config, warm);
                slab[i * L2 + j] = held_out_error(fd, fr);
                warm = fr.zeta_standardized;
                if (j == 0) row_start = fr.zeta_standardized;
            }
        }
    });

    surface.error.assign(T * L1 * L2, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t f = 0; f < K; ++f) {
            const double* slab = contrib.data() + (t * K + f) * L1 * L2;
            for (std::size_t c = 0; c < L1 * L2; ++c) surface.error[t * L1 * L2 + c] += slab[c];
        }
    }
    for (std::size_t f = 0; f < K; ++f) {
        if (data[f].no_events) surface.flagged_folds.push_back(static_cast<int>(f));
    }
    select(surface);
    return surface;
}

void select(CvSurface& surface)
{
    const std::size_t T = surface.thetas.size();
    const std::size_t L1 = surface.lambda1s.size();
    const std::size_t L2 = surface.lambda2s.size();
    if (T == 0 || L1 == 0 || L2 == 0 || surface.error.size() != T * L1 * L2) {
        throw ValidationError("error surface does not match its grid");
    }

    std::size_t best_t = 0;
    double best_mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::size_t c = 0; c < L1 * L2; ++c) sum += surface.error[t * L1 * L2 + c];
        const double mean = sum / static_cast<double>(L1 * L2);
        const bool better = t == 0 || mean < best_mean ||
                            (mean == best_mean && surface.thetas[t] > surface.thetas[best_t]);
        if (better) {
            best_t = t;
            best_mean = mean;
        }
    }

    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < L1; ++i) {
        for (std::size_t j = 0; j < L2; ++j) {
            const double e = surface.at(best_t, i, j);
            const double cur = surface.at(best_t, bi, bj);
            bool better = e < cur;
            if (e == cur) {
                if (surface.lambda1s[i] != surface.lambda1s[bi]) {
                    better = surface.lambda1s[i] > surface.lambda1s[bi];
                } else {
                    better = surface.lambda2s[j] > surface.lambda2s[bj];
                }
            }
            if (better) {
                bi = i;
                bj = j;
            }
        }
    }
    surface.theta_star = best_t;
    surface.lambda1_star = bi;
    surface.lambda2_star = bj;
}

std::vector<FitResult> path_fits(const PreparedCohort& cohort, const LossKind& kind,
                                 const std::vector<double>& lambdas, double ratio, double s,
                                 const FitConfig& config)
{
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (!(lambdas[i] < lambdas[i - 1])) throw ValidationError("lambda path must be descending");
    }
    std::vector<FitResult> out;
    out.reserve(lambdas.size());
    std::optional<Coefficients> warm;
    for (double lam : lambdas) {
        const PenaltySpec spec{lam, ratio * lam, s};
        out.push_back(fit(cohort.design, cohort.weights, kind, spec, config, warm));
        warm = out.back().zeta_standardized;
    }
    return out;
}

std::vector<double> cv_path_errors(const SurvivalSample& sample, const std::vector<int>& folds,
                                   const LossKind& kind, const std::vector<double>& lambdas,
                                   double ratio, double s, const FitConfig& config)
{
    const auto data = make_folds(sample, folds, max_fold(folds));
    std::vector<double> err(lambdas.size(), 0.0);
    for (const auto& fd : data) {
        if (fd.no_events) continue;
        const auto fits = path_fits(fd.train, kind, lambdas, ratio, s, config);
        for (std::size_t i = 0; i < fits.size(); ++i) err[i] += held_out_error(fd, fits[i]);
    }
    return err;
}

} // namespace robgxe
