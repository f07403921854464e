#include "robgxe/errors.hpp"
#include "robgxe/survival_data.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace robgxe;

namespace {

SurvivalSample make(std::vector<double> y, std::vector<int> d, int q = 1, int p = 1, std::uint64_t seed = 0)
{
    const auto n = static_cast<Index>(y.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::MatrixXd E(n, q), G(n, p);
    for (Index i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) E(i, j) = N(rng);
        for (int k = 0; k < p; ++k) G(i, k) = N(rng);
    }
    return SurvivalSample(Eigen::Map<Eigen::VectorXd>(y.data(), n),
                          Eigen::Map<Eigen::VectorXi>(d.data(), n), E, G);
}

std::vector<double> weights_of(std::vector<int> d)
{
    std::vector<double> y(d.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
    const auto w = compute_stute_weights(make(y, d)).w;
    return {w.data(), w.data() + w.size()};
}

} // namespace

TEST_CASE("sorting co-permutes rows and records the order")
{
    const SurvivalSample s = make({3, 1, 2}, {1, 0, 1});
    const SurvivalSample t = sort_by_time(s);
    CHECK(t.y()[0] == 1.0);
    CHECK(t.y()[2] == 3.0);
    CHECK(t.delta()[0] == 0);
    CHECK(t.delta()[1] == 1);
    CHECK(t.order() == std::vector<Index>{1, 2, 0});
    for (Index i = 0; i < 3; ++i) {
        CHECK(t.E()(i, 0) == s.E()(t.order()[static_cast<std::size_t>(i)], 0));
        CHECK(t.G()(i, 0) == s.G()(t.order()[static_cast<std::size_t>(i)], 0));
    }
    const SurvivalSample twice = sort_by_time(t);
    CHECK(twice.y() == t.y());
    CHECK(twice.order() == t.order());
}

TEST_CASE("ties put events first")
{
    const SurvivalSample t = sort_by_time(make({2, 2}, {0, 1}));
    CHECK(t.delta()[0] == 1);
    CHECK(t.delta()[1] == 0);
    // KM mass at the shared time: the event is first at risk among 2
    const auto w = compute_stute_weights(t).w;
    const auto km = oracle::km_jumps({1, 0});
    CHECK(w[0] == doctest::Approx(km[0]));
    CHECK(w[1] == 0.0);
}

TEST_CASE("Stute weight examples")
{
    auto w = weights_of({1, 1, 1});
    for (double x : w) CHECK(x == doctest::Approx(1.0 / 3.0));
    w = weights_of({1, 0, 1});
    CHECK(w[0] == doctest::Approx(1.0 / 3.0));
    CHECK(w[1] == 0.0);
    CHECK(w[2] == doctest::Approx(2.0 / 3.0));
    w = weights_of({0, 0, 0});
    for (double x : w) CHECK(x == 0.0);
    CHECK_THROWS_AS(compute_stute_weights(SurvivalSample{}), DataError);
    CHECK_THROWS_AS(compute_stute_weights(make({2, 1}, {1, 1})), ValidationError);
}

TEST_CASE("Stute weights equal product-limit jumps on random patterns")
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(rng() % 50);
        std::vector<int> d(static_cast<std::size_t>(n));
        const double pc = (rng() % 100) / 100.0;
        for (auto& x : d) x = (rng() % 1000) / 1000.0 < pc ? 0 : 1;
        const auto w = weights_of(d);
        const auto km = oracle::km_jumps(d);
        double sw = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(w[static_cast<std::size_t>(i)] - km[static_cast<std::size_t>(i)]) < 1e-12);
            if (!d[static_cast<std::size_t>(i)]) CHECK(w[static_cast<std::size_t>(i)] == 0.0);
            sw += w[static_cast<std::size_t>(i)];
        }
        CHECK(sw <= 1.0 + 1e-12);
        if (d.back() == 1) CHECK(sw == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("censoring one more subject zeroes its weight and never lowers earlier weights")
{
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 30);
        std::vector<int> d(static_cast<std::size_t>(n));
        for (auto& x : d) x = static_cast<int>(rng() % 3 != 0);
        std::vector<std::size_t> events;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i]) events.push_back(i);
        }
        if (events.empty()) continue;
        const std::size_t flip = events[rng() % events.size()];
        const auto before = weights_of(d);
        d[flip] = 0;
        const auto after = weights_of(d);
        CHECK(after[flip] == 0.0);
        for (std::size_t j = 0; j < flip; ++j) CHECK(after[j] >= before[j] - 1e-15);
    }
}

TEST_CASE("design expansion")
{
    Eigen::MatrixXd E(1, 1), G(1, 1);
    E << 2.0;
    G << 3.0;
    const Eigen::MatrixXd U = expand_covariates(E, G);
    CHECK(U.cols() == 4);
    CHECK(U(0, 0) == 1.0);
    CHECK(U(0, 1) == 2.0);
    CHECK(U(0, 2) == 3.0);
    CHECK(U(0, 3) == 6.0);
    CHECK(Layout::width(5, 1000) == 6006);
    CHECK_THROWS_AS(expand_covariates(Eigen::MatrixXd(3, 0), Eigen::MatrixXd::Ones(3, 2)), DataError);
    CHECK_THROWS_AS(expand_covariates(Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd(3, 0)), DataError);

    // naive double loop
    std::mt19937_64 rng(9);
    std::normal_distribution<double> N;
    const int n = 7, q = 3, p = 4;
    Eigen::MatrixXd E2(n, q), G2(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) E2(i, j) = N(rng);
        for (int k = 0; k < p; ++k) G2(i, k) = (k == 2 && i == 4) ? 0.0 : N(rng);
    }
    const Eigen::MatrixXd U2 = expand_covariates(E2, G2);
    const Layout L{q, p};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < q; ++j) CHECK(U2(i, L.env_index(j)) == E2(i, j));
        for (int k = 0; k < p; ++k) {
            CHECK(U2(i, L.beta_index(k)) == G2(i, k));
            for (int j = 0; j < q; ++j) CHECK(U2(i, L.gamma_index(j, k)) == E2(i, j) * G2(i, k));
        }
    }
    for (Index c = L.block_start(2); c < L.block_start(2) + L.block_size(); ++c) CHECK(U2(4, c) == 0.0);
}

TEST_CASE("standardization moments, constant columns and round trip")
{
    SurvivalSample s = make({1, 2}, {1, 1}, 1, 2);
    Eigen::MatrixXd G(2, 2);
    G << -1.0, 4.0, 1.0, 4.0;
    s = SurvivalSample(s.y(), s.delta(), s.E(), G);
    const ExpandedDesign raw = expand_design(s);
    const ExpandedDesign d = standardize(raw);
    const Layout& L = d.layout;
    CHECK(d.U(0, L.beta_index(0)) == doctest::Approx(-1.0));
    CHECK(d.U(1, L.beta_index(0)) == doctest::Approx(1.0));
    CHECK(d.constant_column[static_cast<std::size_t>(L.beta_index(1))]);
    CHECK(d.U(0, L.beta_index(1)) == 4.0);
    CHECK((d.U.col(0).array() == 1.0).all());

    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    const SurvivalSample r = make({1, 2, 3, 4, 5, 6, 7, 8}, {1, 0, 1, 1, 0, 1, 1, 1}, 2, 3, 4);
    const ExpandedDesign rr = expand_design(r);
    const ExpandedDesign st = standardize(rr);
    for (Index c = 1; c < st.cols(); ++c) {
        CHECK(st.U.col(c).mean() == doctest::Approx(0.0).scale(1.0));
        CHECK(st.U.col(c).squaredNorm() / st.rows() == doctest::Approx(1.0));
    }
    Coefficients z(2, 3);
    for (Index c = 0; c < z.size(); ++c) z[c] = N(rng);
    const Coefficients back = st.destandardize(z);
    CHECK(((st.U * z.vector()) - (rr.U * back.vector())).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((st.standardize_coefficients(back).vector() - z.vector()).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("CSV reading")
{
    std::istringstream ok("time,status,E1,E2,G1,G2,G3\n1,1,0.1,0.2,1,2,3\n2.5,0,0.3,0.4,4,5,6\n3,1,0.5,0.6,7,8,9\n");
    const SurvivalSample s = read_csv(ok);
    CHECK(s.n() == 3);
    CHECK(s.q() == 2);
    CHECK(s.p() == 3);
    CHECK(s.G()(1, 2) == 6.0);
    CHECK(s.y()[1] == doctest::Approx(std::log(2.5)));
    CHECK(s.delta()[1] == 0);

    std::istringstream bad_status("time,status,E1,G1\n1,2,0,0\n");
    try {
        read_csv(bad_status);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream non_numeric("time,status,E1,G1\n1,1,abc,0\n");
    CHECK_THROWS_AS(read_csv(non_numeric), DataError);
    std::istringstream missing("time,E1,G1\n1,0,0\n");
    CHECK_THROWS_AS(read_csv(missing), DataError);
    std::istringstream negative("time,status,E1,G1\n-1,1,0,0\n");
    CHECK_THROWS_AS(read_csv(negative), DataError);
    std::istringstream ragged("time,status,E1,G1\n1,1,0\n");
    CHECK_THROWS_AS(read_csv(ragged), DataError);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("CSV round trip keeps values bit for bit")
{
    const SurvivalSample s = make({0.3, -1.2, 2.2, 0.7}, {1, 0, 1, 1}, 2, 3, 8);
    std::stringstream buf;
    write_csv(s, buf);
    const SurvivalSample back = read_csv(buf);
    CHECK((back.y() - s.y()).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK(back.E() == s.E());
    CHECK(back.G() == s.G());
    CHECK(back.delta() == s.delta());
}

TEST_CASE("prescreen filters")
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    const int n = 60;
    Eigen::VectorXd y(n);
    Eigen::VectorXi d = Eigen::VectorXi::Ones(n);
    Eigen::MatrixXd E(n, 1), G(n, 3);
    for (int i = 0; i < n; ++i) {
        y[i] = N(rng);
        E(i, 0) = N(rng);
        G(i, 1) = N(rng);
        G(i, 2) = N(rng);
        d[i] = (i % 4 == 0) ? 0 : 1;
    }
    G.col(0) = y;
    const SurvivalSample sorted = sort_by_time(SurvivalSample(y, d, E, G));
    const StuteWeights w = compute_stute_weights(sorted);
    const PrescreenResult r = prescreen(sorted, w, 0.05, false);
    CHECK(!r.retained.empty());
    CHECK(r.retained.front() == 0);
    CHECK(r.retained.size() <= 3);

    const SurvivalSample flat = sort_by_time(SurvivalSample(y, d, E, Eigen::MatrixXd::Constant(n, 3, 2.0)));
    CHECK(prescreen(flat, compute_stute_weights(flat), 1.0, true).retained.empty());
    CHECK_THROWS_AS(prescreen(sorted, w, 0.0, false), ValidationError);
    CHECK_THROWS_AS(prescreen(sorted, w, 1.5, false), ValidationError);
}

TEST_CASE("prescreen keeps a planted gene across seeds")
{
    int kept = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> N;
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const int n = 200, p = 51;
        Eigen::MatrixXd G(n, p), E(n, 1);
        Eigen::VectorXd y(n);
        Eigen::VectorXi d(n);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < p; ++k) G(i, k) = N(rng);
            E(i, 0) = N(rng);
            const double t = G(i, 0) + N(rng);
            const double c = 1.0 + N(rng);
            y[i] = std::min(t, c);
            d[i] = t <= c ? 1 : 0;
        }
        const SurvivalSample sorted = sort_by_time(SurvivalSample(y, d, E, G));
        const auto r = prescreen(sorted, compute_stute_weights(sorted), 0.05, false);
        kept += std::count(r.retained.begin(), r.retained.end(), 0) > 0 ? 1 : 0;
    }
    CHECK(kept >= 95);
}

TEST_CASE("prepared cohort is sorted, weighted and standardized")
{
    const SurvivalSample s = make({4, 1, 3, 2, 5}, {1, 1, 0, 1, 1}, 1, 2, 3);
    const PreparedCohort c = prepare_cohort(s);
    CHECK(c.sample.is_sorted());
    CHECK(c.design.standardized);
    CHECK(c.weights.w.size() == 5);
    CHECK(c.design.y == c.sample.y());
}
