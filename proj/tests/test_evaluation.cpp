#include "robgxe/errors.hpp"
#include "robgxe/evaluation.hpp"
#include "robgxe/stats.hpp"
#include "robgxe/tuning.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace robgxe;

namespace {

SimulationScenario small_scenario(std::uint64_t seed)
{
    SimulationScenario s;
    s.name = "toy";
    s.n = 60;
    s.q = 2;
    s.p = 10;
    s.n_main_E = 1;
    s.n_main_G = 3;
    s.n_inter = 3;
    s.corr = CorrStructure::parse("AR(0.3)");
    s.seed = seed;
    return s;
}

BenchConfig small_bench()
{
    BenchConfig b;
    b.replicates = 2;
    b.n_lambda = 6;
    b.theta_multipliers = {1.0, 5.0};
    b.pilot_folds = 3;
    return b;
}

} // namespace

TEST_CASE("trapezoid AUC examples")
{
    CHECK(trapezoid_auc({{0.0, 0.5}, {0.2, 1.0}}) == doctest::Approx(0.95));
    CHECK(trapezoid_auc({}) == doctest::Approx(0.5));
    CHECK(trapezoid_auc({{0.0, 1.0}}) == doctest::Approx(1.0));
    std::vector<RocPoint> curve;
    trapezoid_auc({{0.3, 0.4}, {0.3, 0.6}, {0.1, 0.2}}, &curve);
    REQUIRE(curve.size() == 5);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve[2].tpr == 0.4);
    CHECK(curve[3].tpr == 0.6);
    CHECK(curve.back().tpr == 1.0);
    const double expect = oracle::trapezoid({{0.0, 0.0}, {0.1, 0.2}, {0.3, 0.4}, {0.3, 0.6}, {1.0, 1.0}});
    CHECK(trapezoid_auc({{0.3, 0.4}, {0.3, 0.6}, {0.1, 0.2}}) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("ROC from selections")
{
    const std::vector<bool> truth{true, true, false, false, false};
    // exact true set at the second lambda
    const RocPath perfect = roc_from_selections({{true, false, false, false, false}, {true, true, false, false, false},
                                                 {true, true, true, true, true}},
                                                truth);
    CHECK(perfect.auc == doctest::Approx(1.0));
    CHECK(perfect.raw.size() == 3);
    CHECK_THROWS_AS(roc_from_selections({{false, false}}, {false, false}), ValidationError);

    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.5);
    std::vector<bool> big_truth(1000, false);
    for (int i = 0; i < 50; ++i) big_truth[static_cast<std::size_t>(i)] = true;
    std::vector<std::vector<bool>> random_sel;
    for (int l = 0; l < 10; ++l) {
        std::vector<bool> s(1000);
        for (std::size_t c = 0; c < s.size(); ++c) s[c] = coin(rng);
        random_sel.push_back(s);
    }
    CHECK(std::abs(roc_from_selections(random_sel, big_truth).auc - 0.5) < 0.05);
}

TEST_CASE("path AUC equals pairwise ranking by entry lambda")
{
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t m = 5 + rng() % 30;
        const std::size_t L = 1 + rng() % 8;
        std::vector<bool> truth(m);
        bool any_true = false, any_null = false;
        for (std::size_t c = 0; c < m; ++c) {
            truth[c] = rng() % 3 == 0;
            any_true = any_true || truth[c];
            any_null = any_null || !truth[c];
        }
        if (!any_true || !any_null) continue;
        // entry step per coordinate; L means never selected
        std::vector<std::size_t> entry(m);
        for (auto& e : entry) e = rng() % (L + 1);
        std::vector<std::vector<bool>> sel(L, std::vector<bool>(m));
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t c = 0; c < m; ++c) sel[l][c] = entry[c] <= l;
        }
        std::vector<double> score(m);
        for (std::size_t c = 0; c < m; ++c) score[c] = -static_cast<double>(entry[c]);
        CHECK(std::abs(roc_from_selections(sel, truth).auc - oracle::pairwise_auc(score, truth)) < 1e-10);
    }
}

TEST_CASE("scope masks and the union scope")
{
    SimulationScenario s = small_scenario(3);
    std::mt19937_64 rng(3);
    const GroundTruth t = gen_truth(s, rng);
    const auto inter = truth_mask(t, Scope::Interactions);
    const auto mains = truth_mask(t, Scope::Mains);
    const auto both = truth_mask(t, Scope::Both);
    CHECK(inter.size() == static_cast<std::size_t>(s.q * s.p));
    CHECK(mains.size() == static_cast<std::size_t>(s.p));
    CHECK(both.size() == inter.size() + mains.size());
    CHECK(std::count(both.begin(), both.end(), true) == s.n_main_G + s.n_inter);
    CHECK(selection_mask(t.zeta_star, Scope::Both) == both);
    CHECK(parse_scope(scope_name(Scope::Mains)) == Scope::Mains);
    CHECK_THROWS_AS(parse_scope("everything"), ValidationError);

    // TPR of the union lies between the per-scope TPRs
    std::mt19937_64 r2(8);
    for (int rep = 0; rep < 200; ++rep) {
        Coefficients z = t.zeta_star;
        for (Index c = 1 + s.q; c < z.size(); ++c) z[c] = (r2() % 2) ? 1.0 : 0.0;
        const auto a = roc_from_selections({selection_mask(z, Scope::Interactions)}, inter).raw[0].tpr;
        const auto b = roc_from_selections({selection_mask(z, Scope::Mains)}, mains).raw[0].tpr;
        const auto u = roc_from_selections({selection_mask(z, Scope::Both)}, both).raw[0].tpr;
        CHECK(u >= std::min(a, b) - 1e-15);
        CHECK(u <= std::max(a, b) + 1e-15);
    }
}

TEST_CASE("sign test")
{
    const SignTest t = sign_test({1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 0, 6});
    CHECK(t.positive == 5);
    CHECK(t.negative == 0);
    CHECK(t.ties == 1);
    CHECK(t.p_value == doctest::Approx(1.0 / 32.0));
    const SignTest u = sign_test({0, 1, 0, 1}, {1, 0, 1, 0});
    CHECK(u.p_value == doctest::Approx(stats::binomial_upper_tail_half(4, 2)));
    CHECK_THROWS_AS(sign_test({1.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("method comparison bookkeeping and determinism")
{
    const SimulationScenario s = small_scenario(5);
    BenchConfig b = small_bench();
    const Comparison one = compare_methods(s, b);
    b.threads = 2;
    const Comparison two = compare_methods(s, b);
    CHECK(one.auc == two.auc);
    CHECK(one.theta_multiplier == two.theta_multiplier);
    CHECK(one.rows.size() == 3 * 3);
    CHECK(one.censoring.size() == 2);
    for (const auto& row : one.rows) {
        CHECK(row.n_reps == 2);
        CHECK(row.mean_auc >= 0.0);
        CHECK(row.mean_auc <= 1.0);
    }
    // mean and sample SD against the stored replicate values
    for (const auto& row : one.rows) {
        for (Method m : {Method::ExpSquared, Method::WeightedLS, Method::WeightedCheck}) {
            for (Scope sc : {Scope::Interactions, Scope::Mains, Scope::Both}) {
                if (row.method != method_name(m) || row.scope != scope_name(sc)) continue;
                const auto& v = one.aucs(m, sc);
                const double mean = (v[0] + v[1]) / 2.0;
                CHECK(row.mean_auc == doctest::Approx(mean));
                CHECK(row.sd_auc == doctest::Approx(std::abs(v[0] - v[1]) / std::sqrt(2.0)));
            }
        }
    }

    std::ostringstream csv;
    write_comparison_csv({one, two}, csv);
    int lines = 0;
    std::istringstream in(csv.str());
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 1 + 2 * 9);

    std::ostringstream roc;
    write_roc_csv({one}, roc);
    CHECK(roc.str().rfind("scenario,", 0) == 0);

    b.replicates = 1;
    CHECK_THROWS_AS(compare_methods(s, b), ValidationError);
}

TEST_CASE("stability frequencies")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N;
    const int n = 200, q = 2, p = 50;
    Eigen::MatrixXd E(n, q), G(n, p);
    Eigen::VectorXd y(n);
    Eigen::VectorXi d(n);
    std::uniform_real_distribution<double> U01;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) E(i, j) = N(rng);
        for (int k = 0; k < p; ++k) G(i, k) = N(rng);
        y[i] = E(i, 0) + 1.0 * G(i, 3) + 1.0 * E(i, 1) * G(i, 3) + 0.5 * N(rng);
        d[i] = U01(rng) < 0.2 ? 0 : 1;
    }
    const SurvivalSample s(y, d, E, G);
    const PreparedCohort c = prepare_cohort(s);
    const double theta = residual_scale(c) * residual_scale(c);
    const double lam = 0.5 * lambda_max(c.design, c.weights, ExpSquared{theta});
    const PenaltySpec spec{lam, lam, 6.0};

    const StabilityReport one = stability(s, ExpSquared{theta}, spec, 1, 0.75, 3);
    CHECK(one.B == 1);
    for (double f : one.main_frequency) CHECK((f == 0.0 || f == 1.0));
    for (Index c2 = 0; c2 < one.inter_frequency.size(); ++c2) {
        const double f = one.inter_frequency.data()[c2];
        CHECK((f == 0.0 || f == 1.0));
    }

    const StabilityReport r = stability(s, ExpSquared{theta}, spec, 50, 0.75, 7);
    CHECK(r.inter_frequency(1, 3) >= 0.9);
    CHECK(r.main_frequency[3] >= 0.9);
    CHECK(r.skipped == 0);
    for (double f : r.main_frequency) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
    const StabilityReport again = stability(s, ExpSquared{theta}, spec, 50, 0.75, 7, {}, 2);
    CHECK(again.inter_frequency == r.inter_frequency);

    std::ostringstream out;
    write_stability_csv(r, out);
    CHECK(out.str().find("gamma.2.4,") != std::string::npos);
    CHECK(out.str().find("beta.4,") != std::string::npos);

    CHECK_THROWS_AS(stability(s, ExpSquared{theta}, spec, 0, 0.75, 1), ValidationError);
    CHECK_THROWS_AS(stability(s, ExpSquared{theta}, spec, 5, 1.5, 1), ValidationError);
}
