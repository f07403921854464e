#include "robgxe/evaluation.hpp"

#include "robgxe/errors.hpp"
#include "robgxe/parallel.hpp"
#include "robgxe/stats.hpp"
#include "robgxe/tuning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace robgxe {

namespace {

constexpr std::uint64_t kPilotSeedStream = 0x9e3779b1ULL;
constexpr std::size_t kMethods = 3;
constexpr std::size_t kScopes = 3;
constexpr Method kAllMethods[kMethods] = {Method::ExpSquared, Method::WeightedLS, Method::WeightedCheck};
constexpr Scope kAllScopes[kScopes] = {Scope::Interactions, Scope::Mains, Scope::Both};

std::string fmt(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::pair<double, double> mean_sd(const std::vector<double>& v)
{
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

LossKind loss_for(Method m, double theta, const SurvivalSample& sample, double tau)
{
    switch (m) {
    case Method::ExpSquared: return ExpSquared{theta};
    case Method::WeightedLS: return WeightedLS{};
    case Method::WeightedCheck: return WeightedCheck{tau, default_check_epsilon(sample.y())};
    }
    return WeightedLS{};
}

// Path for one method on one cohort: lambda_max down to min_ratio * lambda_max.
std::vector<double> method_path(const PreparedCohort& cohort, const LossKind& kind, const BenchConfig& config)
{
    double top = lambda_max(cohort.design, cohort.weights, kind, config.ratio, config.fit);
    if (!(top > 0.0)) top = 1e-8;
    return log_spaced_lambdas(top, config.lambda_min_ratio, config.n_lambda);
}

} // namespace

std::string scope_name(Scope scope)
{
    switch (scope) {
    case Scope::Interactions: return "interactions";
    case Scope::Mains: return "mains";
    case Scope::Both: return "both";
    }
    return "";
}

Scope parse_scope(const std::string& text)
{
    for (Scope s : kAllScopes) {
        if (scope_name(s) == text) return s;
    }
    throw ValidationError("unknown scope '" + text + "' (expected interactions, mains or both)");
}

std::string method_name(Method method)
{
    switch (method) {
    case Method::ExpSquared: return "exp_squared";
    case Method::WeightedLS: return "weighted_ls";
    case Method::WeightedCheck: return "weighted_check";
    }
    return "";
}

double trapezoid_auc(std::vector<RocPoint> points, std::vector<RocPoint>* curve)
{
    points.push_back({0.0, 0.0});
    points.push_back({1.0, 1.0});
    std::sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    });
    // Per FPR keep the lowest and highest TPR. Keeping only the highest would
    // turn a vertical step into a diagonal and overstate the area.
    std::vector<RocPoint> kept;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const bool first = i == 0 || points[i - 1].fpr != points[i].fpr;
        const bool last = i + 1 == points.size() || points[i + 1].fpr != points[i].fpr;
        if (!first && !last) continue;
        if (!first && kept.back().tpr == points[i].tpr) continue;
        kept.push_back(points[i]);
    }
    double area = 0.0;
    for (std::size_t i = 1; i < kept.size(); ++i) {
        area += (kept[i].fpr - kept[i - 1].fpr) * (kept[i].tpr + kept[i - 1].tpr) / 2.0;
    }
    if (curve) *curve = std::move(kept);
    return area;
}

RocPath roc_from_selections(const std::vector<std::vector<bool>>& selected, const std::vector<bool>& truth,
                            Scope scope, std::vector<double> lambdas)
{
    const auto n_true = std::count(truth.begin(), truth.end(), true);
    const auto n_null = static_cast<std::ptrdiff_t>(truth.size()) - n_true;
    if (n_true == 0) throw ValidationError("no true effects in scope " + scope_name(scope));
    RocPath out;
    out.scope = scope;
    out.lambdas = std::move(lambdas);
    for (const auto& sel : selected) {
        if (sel.size() != truth.size()) throw ValidationError("selection and truth masks differ in length");
        std::ptrdiff_t tp = 0;
        std::ptrdiff_t fp = 0;
        for (std::size_t c = 0; c < sel.size(); ++c) {
            if (!sel[c]) continue;
            (truth[c] ? tp : fp) += 1;
        }
        const double fpr = n_null > 0 ? static_cast<double>(fp) / static_cast<double>(n_null) : 0.0;
        out.raw.push_back({fpr, static_cast<double>(tp) / static_cast<double>(n_true)});
    }
    out.auc = trapezoid_auc(out.raw, &out.curve);
    return out;
}

std::vector<bool> truth_mask(const GroundTruth& truth, Scope scope)
{
    const Coefficients& z = truth.zeta_star;
    std::vector<bool> mask;
    if (scope != Scope::Mains) {
        for (int k = 0; k < z.p(); ++k) {
            for (int j = 0; j < z.q(); ++j) mask.push_back(z.gamma(j, k) != 0.0);
        }
    }
    if (scope != Scope::Interactions) {
        for (int k = 0; k < z.p(); ++k) mask.push_back(z.beta(k) != 0.0);
    }
    return mask;
}

std::vector<bool> selection_mask(const Coefficients& zeta_hat, Scope scope)
{
    // same coordinates and order as truth_mask
    std::vector<bool> mask;
    if (scope != Scope::Mains) {
        for (int k = 0; k < zeta_hat.p(); ++k) {
            for (int j = 0; j < zeta_hat.q(); ++j) mask.push_back(zeta_hat.gamma(j, k) != 0.0);
        }
    }
    if (scope != Scope::Interactions) {
        for (int k = 0; k < zeta_hat.p(); ++k) mask.push_back(zeta_hat.beta(k) != 0.0);
    }
    return mask;
}

RocPath roc_auc(const std::vector<FitResult>& path, const GroundTruth& truth, Scope scope,
                std::vector<double> lambdas)
{
    std::vector<std::vector<bool>> selected;
    selected.reserve(path.size());
    for (const FitResult& fr : path) {
        if (!(fr.zeta_hat.layout() == truth.zeta_star.layout())) {
            throw ValidationError("fitted and true coefficients have different layouts");
        }
        selected.push_back(selection_mask(fr.zeta_hat, scope));
    }
    return roc_from_selections(selected, truth_mask(truth, scope), scope, std::move(lambdas));
}

void BenchConfig::validate() const
{
    if (replicates < 2) throw ValidationError("bench needs at least two replicates");
    if (n_lambda < 2) throw ValidationError("bench path needs at least two lambdas");
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
        throw ValidationError("lambda_min_ratio must lie in (0, 1)");
    }
    if (!(ratio > 0.0)) throw ValidationError("lambda2/lambda1 ratio must be positive");
    if (!(s > 1.0)) throw ValidationError("MCP parameter s must exceed 1");
    if (theta_multipliers.empty()) throw ValidationError("theta multiplier list is empty");
    for (double m : theta_multipliers) {
        if (!(m > 0.0)) throw ValidationError("theta multipliers must be positive");
    }
    if (pilot_folds < 2) throw ValidationError("pilot CV needs at least two folds");
    if (!(check_tau > 0.0 && check_tau < 1.0)) throw ValidationError("check loss tau must lie in (0, 1)");
    fit.validate();
}

SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size()) throw ValidationError("sign test needs paired samples");
    SignTest t;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) {
            ++t.positive;
        } else if (a[i] < b[i]) {
            ++t.negative;
        } else {
            ++t.ties;
        }
    }
    t.p_value = stats::binomial_upper_tail_half(t.positive + t.negative, t.positive);
    return t;
}

double Comparison::mean_censoring() const
{
    return mean_sd(censoring).first;
}

double pilot_theta_multiplier(const SimulationScenario& scenario, const BenchConfig& config)
{
    config.validate();
    if (config.theta_multipliers.size() == 1) return config.theta_multipliers.front();
    SimulationScenario pilot = scenario;
    pilot.seed = stats::derive_seed(scenario.seed, kPilotSeedStream);
    const SimulatedCohort sim = simulate(pilot);
    const PreparedCohort cohort = prepare_cohort(sim.sample);
    const double sigma = residual_scale(cohort);
    if (!(sigma > 0.0)) throw NumericalError("pilot cohort has no residual scale");
    const auto folds = kfold_split(sim.sample.n(), config.pilot_folds, pilot.seed);

    std::vector<double> score(config.theta_multipliers.size(), 0.0);
    parallel_for(score.size(), config.threads, [&](std::size_t t) {
        const ExpSquared kind{config.theta_multipliers[t] * sigma * sigma};
        const auto lambdas = method_path(cohort, kind, config);
        const auto err = cv_path_errors(sim.sample, folds, kind, lambdas, config.ratio,
                                        effective_s(kind, config.s, config.s_scale), config.fit);
        score[t] = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
    });
    std::size_t best = 0;
    for (std::size_t t = 1; t < score.size(); ++t) {
        const bool tie_larger = score[t] == score[best] &&
                                config.theta_multipliers[t] > config.theta_multipliers[best];
        if (score[t] < score[best] || tie_larger) best = t;
    }
    return config.theta_multipliers[best];
}

Comparison compare_methods(const SimulationScenario& scenario, const BenchConfig& config)
{
    scenario.validate();
    config.validate();
    Comparison out;
    out.scenario = scenario.name;
    out.theta_multiplier = pilot_theta_multiplier(scenario, config);

    const auto R = static_cast<std::size_t>(config.replicates);
    out.censoring.assign(R, 0.0);
    out.auc.assign(kMethods, std::vector<std::vector<double>>(kScopes, std::vector<double>(R, 0.0)));
    std::vector<std::vector<ReplicateRoc>> rocs(R);

    // one replicate per task; each writes only its own slots
    BenchConfig inner = config;
    inner.threads = 1;
    parallel_for(R, config.threads, [&](std::size_t r) {
        SimulationScenario rep = scenario;
        rep.seed = stats::derive_seed(scenario.seed, r);
        const SimulatedCohort sim = simulate(rep);
        out.censoring[r] = sim.censoring_rate;
        const PreparedCohort cohort = prepare_cohort(sim.sample);
        const double sigma = residual_scale(cohort);
        if (!(sigma > 0.0)) throw NumericalError("replicate " + std::to_string(r) + " has no residual scale");
        for (std::size_t m = 0; m < kMethods; ++m) {
            const LossKind kind =
                loss_for(kAllMethods[m], out.theta_multiplier * sigma * sigma, sim.sample, inner.check_tau);
            const auto lambdas = method_path(cohort, kind, inner);
            const auto fits = path_fits(cohort, kind, lambdas, inner.ratio,
                                        effective_s(kind, inner.s, inner.s_scale), inner.fit);
            for (std::size_t sc = 0; sc < kScopes; ++sc) {
                RocPath roc = roc_auc(fits, sim.truth, kAllScopes[sc], lambdas);
                out.auc[m][sc][r] = roc.auc;
                rocs[r].push_back({static_cast<int>(r), kAllMethods[m], std::move(roc)});
            }
        }
    });
    for (auto& v : rocs) {
        for (auto& x : v) out.rocs.push_back(std::move(x));
    }
    for (std::size_t m = 0; m < kMethods; ++m) {
        for (std::size_t sc = 0; sc < kScopes; ++sc) {
            const auto [mean, sd] = mean_sd(out.auc[m][sc]);
            out.rows.push_back({scenario.name, method_name(kAllMethods[m]), scope_name(kAllScopes[sc]), mean, sd,
                                config.replicates});
        }
    }
    return out;
}

void write_comparison_csv(const std::vector<Comparison>& comparisons, std::ostream& out)
{
    out << "scenario,method,scope,mean_auc,sd_auc,n_reps\n";
    for (const auto& c : comparisons) {
        for (const auto& row : c.rows) {
            out << row.scenario << ',' << row.method << ',' << row.scope << ',' << fmt(row.mean_auc) << ','
                << fmt(row.sd_auc) << ',' << row.n_reps << '\n';
        }
    }
}

void write_roc_csv(const std::vector<Comparison>& comparisons, std::ostream& out)
{
    out << "scenario,method,scope,replicate,lambda,fpr,tpr\n";
    for (const auto& c : comparisons) {
        for (const auto& rr : c.rocs) {
            for (std::size_t l = 0; l < rr.path.raw.size(); ++l) {
                const double lam = l < rr.path.lambdas.size() ? rr.path.lambdas[l] : 0.0;
                out << c.scenario << ',' << method_name(rr.method) << ',' << scope_name(rr.path.scope) << ','
                    << rr.replicate << ',' << fmt(lam) << ',' << fmt(rr.path.raw[l].fpr) << ','
                    << fmt(rr.path.raw[l].tpr) << '\n';
            }
        }
    }
}

StabilityReport stability(const SurvivalSample& sample, const LossKind& kind, const PenaltySpec& spec,
                          int B, double fraction, std::uint64_t seed, const FitConfig& config, int threads)
{
    if (B < 1) throw ValidationError("stability needs B >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("subsample fraction must lie in (0, 1]");
    validate(kind);
    spec.validate();
    config.validate();
    const Index n = sample.n();
    const auto m = static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    if (m < 2) throw ValidationError("subsample would hold fewer than two subjects");

    const Layout layout{sample.q(), sample.p()};
    std::vector<std::optional<Coefficients>> fitted(static_cast<std::size_t>(B));
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        std::mt19937_64 rng(stats::derive_seed(seed, b));
        std::vector<Index> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), Index{0});
        for (Index i = 0; i < m; ++i) {
            std::uniform_int_distribution<Index> pick(i, n - 1);
            std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
        }
        rows.resize(static_cast<std::size_t>(m));
        std::sort(rows.begin(), rows.end());
        const SurvivalSample sub = sample.select_rows(rows);
        if (sub.event_count() == 0) return;
        const PreparedCohort cohort = prepare_cohort(sub);
        fitted[b] = fit(cohort.design, cohort.weights, kind, spec, config).zeta_hat;
    });

    StabilityReport rep;
    rep.layout = layout;
    rep.B = B;
    rep.fraction = fraction;
    rep.main_frequency.assign(static_cast<std::size_t>(layout.p), 0.0);
    rep.inter_frequency = Eigen::MatrixXd::Zero(layout.q, layout.p);
    int used = 0;
    for (const auto& z : fitted) {
        if (!z) {
            ++rep.skipped;
            continue;
        }
        ++used;
        for (int k = 0; k < layout.p; ++k) {
            if (z->beta(k) != 0.0) rep.main_frequency[static_cast<std::size_t>(k)] += 1.0;
            for (int j = 0; j < layout.q; ++j) {
                if (z->gamma(j, k) != 0.0) rep.inter_frequency(j, k) += 1.0;
            }
        }
    }
    if (used > 0) {
        for (double& f : rep.main_frequency) f /= used;
        rep.inter_frequency /= used;
    }
    return rep;
}

void write_stability_csv(const StabilityReport& report, std::ostream& out)
{
    out << "effect,frequency\n";
    for (int k = 0; k < report.layout.p; ++k) {
        out << "beta." << k + 1 << ',' << fmt(report.main_frequency[static_cast<std::size_t>(k)]) << '\n';
        for (int j = 0; j < report.layout.q; ++j) {
            out << "gamma." << j + 1 << '.' << k + 1 << ',' << fmt(report.inter_frequency(j, k)) << '\n';
        }
    }
}

} // namespace robgxe
