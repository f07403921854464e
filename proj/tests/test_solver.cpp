#include "robgxe/errors.hpp"
#include "robgxe/solver.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace robgxe;

namespace {

// y = 1 + sum_j E_j + 1.5 G_0 + E_0 G_0 + noise, every event observed unless censor > 0.
PreparedCohort planted_cohort(int n, int q, int p, std::uint64_t seed, double noise, double censor = 0.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    Eigen::MatrixXd E(n, q), G(n, p);
    Eigen::VectorXd y(n);
    Eigen::VectorXi d(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) E(i, j) = N(rng);
        for (int k = 0; k < p; ++k) G(i, k) = N(rng);
        y[i] = 1.0 + E.row(i).sum() + 1.5 * G(i, 0) + E(i, 0) * G(i, 0) + noise * N(rng);
        d[i] = U01(rng) < censor ? 0 : 1;
    }
    return prepare_cohort(SurvivalSample(y, d, E, G));
}

FitConfig tight()
{
    FitConfig c;
    c.mm_tol = 1e-10;
    c.cd_tol = 1e-12;
    c.mm_max_iter = 20000;
    c.cd_max_sweeps = 100000;
    return c;
}

bool non_decreasing(const std::vector<double>& trace)
{
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] < trace[i - 1] - 1e-8 * (1.0 + std::abs(trace[i - 1]))) return false;
    }
    return true;
}

} // namespace

TEST_CASE("coordinate update closed form")
{
    CHECK(coordinate_update(2.0, 3.0, 1.0) == 1.0);
    CHECK(coordinate_update(2.0, -3.0, 1.0) == -1.0);
    CHECK(coordinate_update(2.0, 0.5, 1.0) == 0.0);
    CHECK(coordinate_update(4.0, 3.0, 0.0) == 0.75);
    CHECK(coordinate_update(0.0, 3.0, 0.0) == 0.0);
    // brute force maximization on a fine grid
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        const double a = 0.1 + std::abs(U(rng)), z = U(rng), pen = std::abs(U(rng)) / 2.0;
        const auto f = [&](double x) { return -0.5 * a * x * x + z * x - pen * std::abs(x); };
        const double x = coordinate_update(a, z, pen);
        for (double dx : {-1e-3, 1e-3}) CHECK(f(x) >= f(x + dx));
    }
}

TEST_CASE("unpenalized CD converges to the surrogate's normal equations")
{
    const auto pr = fixture::random_problem(30, 1, 2, 11);  // d = 8
    const Coefficients zm = fixture::random_coefficients(pr.design.layout, 3);
    const SurrogateState st = surrogate_state(pr.design, pr.weights, zm, ExpSquared{2.0});
    const auto cd = cd_maximize_surrogate(pr.design, st, zm, lla_multipliers(zm, PenaltySpec{}), tight());
    CHECK(cd.converged);
    // maximizer of s'U(z - zm) - 1/2 (z - zm)' U'WU (z - zm)
    const Eigen::MatrixXd A = pr.design.U.transpose() * st.W_diag.asDiagonal() * pr.design.U;
    const Eigen::VectorXd b = pr.design.U.transpose() * (st.W_diag.array() * st.working_residual.array()).matrix();
    const Eigen::VectorXd expect = zm.vector() + A.ldlt().solve(b);
    CHECK((cd.zeta.vector() - expect).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("huge multipliers leave only the unpenalized weighted LS part")
{
    const auto pr = fixture::random_problem(40, 2, 3, 5);
    const Coefficients zm(2, 3);
    const SurrogateState st = surrogate_state(pr.design, pr.weights, zm, WeightedLS{});
    const auto cd = cd_maximize_surrogate(pr.design, st, zm, lla_multipliers(zm, PenaltySpec{1e6, 1e6, 6.0}), tight());
    const Layout& L = pr.design.layout;
    for (int k = 0; k < L.p; ++k) CHECK((cd.zeta.block(k).array() == 0.0).all());
    const Eigen::MatrixXd X = pr.design.U.leftCols(L.first_penalized());
    const Eigen::VectorXd ols = oracle::weighted_ls(X, pr.design.y, pr.weights.w);
    CHECK((cd.zeta.vector().head(L.first_penalized()) - ols).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("single coordinate problem reduces to one update")
{
    ExpandedDesign d;
    d.layout = Layout{1, 0};
    d.U = Eigen::MatrixXd::Zero(3, 2);
    d.U.col(0).setOnes();
    d.y = Eigen::Vector3d(1.0, 2.0, 4.0);
    d.column_means = Eigen::VectorXd::Zero(2);
    d.column_scales = Eigen::VectorXd::Ones(2);
    d.constant_column = {true, true};
    StuteWeights w{Eigen::Vector3d(0.2, 0.3, 0.5)};
    const Coefficients zm(1, 0);
    const SurrogateState st = surrogate_state(d, w, zm, WeightedLS{});
    const auto cd = cd_maximize_surrogate(d, st, zm, lla_multipliers(zm, PenaltySpec{}), tight());
    const double a = st.W_diag.sum();
    const double z = st.W_diag.dot(st.working_residual);
    CHECK(cd.zeta[0] == doctest::Approx(coordinate_update(a, z, 0.0)));
    CHECK(cd.zeta[0] == doctest::Approx(2.8));
}

TEST_CASE("noiseless environment-only response is recovered with genes at zero")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N;
    const int n = 60, q = 2, p = 5;
    Eigen::MatrixXd E(n, q), G(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) E(i, j) = N(rng);
        for (int k = 0; k < p; ++k) G(i, k) = N(rng);
        y[i] = 0.5 + 2.0 * E(i, 0) - 1.0 * E(i, 1);
    }
    const PreparedCohort c = prepare_cohort(SurvivalSample(y, Eigen::VectorXi::Ones(n), E, G));
    for (const LossKind& kind : {LossKind{ExpSquared{1.0}}, LossKind{WeightedLS{}}}) {
        const FitResult r = fit(c.design, c.weights, kind, PenaltySpec{10.0, 10.0, 6.0}, tight());
        CHECK(r.zeta_hat[0] == doctest::Approx(0.5).epsilon(1e-4));
        CHECK(std::abs(r.zeta_hat.env(0) - 2.0) < 1e-4);
        CHECK(std::abs(r.zeta_hat.env(1) + 1.0) < 1e-4);
        CHECK(r.active_genes.empty());
    }
}

TEST_CASE("unpenalized weighted LS fit matches the dense solve")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PreparedCohort c = planted_cohort(50, 1, 4, seed, 1.0, 0.25);  // d = 10
        const FitResult r = fit(c.design, c.weights, WeightedLS{}, PenaltySpec{0.0, 0.0, 6.0}, tight());
        const Eigen::VectorXd ols = oracle::weighted_ls(c.design.U, c.design.y, c.weights.w);
        CHECK((r.zeta_standardized.vector() - ols).lpNorm<Eigen::Infinity>() < 1e-6);
        const ExpandedDesign raw = expand_design(c.sample);
        const Eigen::VectorXd ols_raw = oracle::weighted_ls(raw.U, raw.y, c.weights.w);
        CHECK((r.zeta_hat.vector() - ols_raw).lpNorm<Eigen::Infinity>() < 1e-6);
    }
}

TEST_CASE("planted gene and interaction are recovered without noise")
{
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const PreparedCohort c = planted_cohort(100, 2, 20, seed, 0.0);
        const double lam = 0.3 * lambda_max(c.design, c.weights, WeightedLS{});
        const FitResult r = fit(c.design, c.weights, WeightedLS{}, PenaltySpec{lam, lam, 6.0});
        const bool genes = r.active_genes == std::vector<int>{0};
        const bool inter = r.active_interactions == std::vector<std::pair<int, int>>{{0, 0}};
        exact += (genes && inter) ? 1 : 0;
    }
    CHECK(exact == 20);
}

TEST_CASE("ascent, hierarchy and surrogate stationarity on random instances")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const PreparedCohort c = planted_cohort(60, 2, 8, seed, 1.0, 0.3);
        const std::vector<LossKind> kinds{ExpSquared{1.0}, WeightedLS{},
                                          WeightedCheck{0.5, default_check_epsilon(c.design.y)}};
        for (const auto& kind : kinds) {
            const double lam = 0.2 * lambda_max(c.design, c.weights, kind);
            const FitResult r = fit(c.design, c.weights, kind, PenaltySpec{lam, lam, 6.0}, tight());
            CHECK(non_decreasing(r.objective_trace));
            CHECK(!r.ascent_stalled);
            CHECK(r.kkt_residual <= 1e-6);
            for (const auto& [j, k] : r.active_interactions) {
                CHECK(std::find(r.active_genes.begin(), r.active_genes.end(), k) != r.active_genes.end());
            }
        }
    }
}

TEST_CASE("warm start at the solution is a fixed point")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PreparedCohort c = planted_cohort(80, 2, 10, seed, 0.5, 0.2);
        const double lam = 0.3 * lambda_max(c.design, c.weights, ExpSquared{1.0});
        const PenaltySpec spec{lam, lam, 6.0};
        const FitResult r = fit(c.design, c.weights, ExpSquared{1.0}, spec, tight());
        const FitResult again = fit(c.design, c.weights, ExpSquared{1.0}, spec, FitConfig{}, r.zeta_standardized);
        CHECK(again.mm_iters <= 2);
        CHECK(again.converged);
        CHECK((again.zeta_standardized.vector() - r.zeta_standardized.vector()).lpNorm<Eigen::Infinity>() < 1e-4);
    }
}

TEST_CASE("zero response gives zero coefficients")
{
    const PreparedCohort base = planted_cohort(40, 2, 5, 1, 1.0);
    const PreparedCohort c = prepare_cohort(
        SurvivalSample(Eigen::VectorXd::Zero(40), Eigen::VectorXi::Ones(40), base.sample.E(), base.sample.G()));
    for (const LossKind& kind : {LossKind{ExpSquared{1.0}}, LossKind{WeightedLS{}}, LossKind{WeightedCheck{}}}) {
        const FitResult r = fit(c.design, c.weights, kind, PenaltySpec{0.1, 0.1, 6.0});
        CHECK(r.zeta_hat.vector().lpNorm<Eigen::Infinity>() == 0.0);
    }
}

TEST_CASE("lambda max keeps every gene block at zero")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const PreparedCohort c = planted_cohort(60, 2, 6, seed, 0.5);
        for (const LossKind& kind : {LossKind{ExpSquared{2.0}}, LossKind{WeightedLS{}}}) {
            const double lm = lambda_max(c.design, c.weights, kind);
            CHECK(fit(c.design, c.weights, kind, PenaltySpec{lm, lm, 6.0}).active_genes.empty());
            CHECK(!fit(c.design, c.weights, kind, PenaltySpec{0.9 * lm, 0.9 * lm, 6.0}).active_genes.empty());
        }
    }
}

TEST_CASE("invalid configurations are rejected")
{
    const PreparedCohort c = planted_cohort(20, 1, 2, 0, 1.0);
    FitConfig bad;
    bad.mm_tol = 0.0;
    CHECK_THROWS_AS(fit(c.design, c.weights, WeightedLS{}, PenaltySpec{}, bad), ValidationError);
    CHECK_THROWS_AS(fit(c.design, c.weights, ExpSquared{-1.0}, PenaltySpec{}), ValidationError);
    CHECK_THROWS_AS(fit(c.design, c.weights, WeightedLS{}, PenaltySpec{1.0, 1.0, 0.5}), ValidationError);
    CHECK_THROWS_AS(fit(c.design, c.weights, WeightedLS{}, PenaltySpec{}, FitConfig{}, Coefficients(2, 2)),
                    ValidationError);
}
