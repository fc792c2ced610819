#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "majoraudit/common.hpp"
#include "majoraudit/metrics.hpp"
#include "oracles.hpp"

using namespace majoraudit;
using metrics::Distribution;
using metrics::RankWeights;
using metrics::Weighting;

namespace {

vocab::RecommendationSet make_set(std::initializer_list<std::int32_t> ids) {
    vocab::RecommendationSet s;
    std::size_t i = 0;
    for (std::int32_t id : ids) s.ids[i++] = id;
    REQUIRE(i == 10);
    return s;
}

embed::CostMatrix make_cost(std::size_t k, std::vector<double> values) {
    embed::CostMatrix c;
    c.k = k;
    c.cost = std::move(values);
    return c;
}

// symmetric zero-diagonal random cost in [0,1]
embed::CostMatrix random_cost(std::size_t k, Rng& rng) {
    embed::CostMatrix c;
    c.k = k;
    c.cost.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double v = rng.next_double();
            c.cost[i * k + j] = v;
            c.cost[j * k + i] = v;
        }
    return c;
}

Distribution random_distribution(std::size_t k, Rng& rng) {
    std::vector<double> m(k);
    double total = 0.0;
    for (double& x : m) {
        x = rng.next_double() + 1e-6;
        total += x;
    }
    for (double& x : m) x /= total;
    return Distribution::from_mass(std::move(m));
}

}  // namespace

TEST_CASE("jaccard examples") {
    std::set<std::int32_t> a{1, 2, 3};
    CHECK(metrics::jaccard(a, a) == 1.0);
    CHECK(metrics::jaccard({1, 2}, {3, 4}) == 0.0);
    // {CS,Bio,Math} vs {Bio,Math,Econ} -> 2/4
    CHECK(metrics::jaccard({0, 1, 2}, {1, 2, 3}) == 0.5);
    CHECK(metrics::jaccard({}, {}) == 1.0);
    CHECK(metrics::jaccard({}, {1}) == 0.0);
}

TEST_CASE("jaccard property vs direct oracle") {
    Rng rng(1234);
    for (int trial = 0; trial < 1000; ++trial) {
        std::set<std::int32_t> a, b;
        const std::size_t na = rng.next_index(11), nb = rng.next_index(11);
        while (a.size() < na) a.insert(static_cast<std::int32_t>(rng.next_index(30)));
        while (b.size() < nb) b.insert(static_cast<std::int32_t>(rng.next_index(30)));
        const double got = metrics::jaccard(a, b);
        CHECK(got == oracles::jaccard_direct(a, b));
        CHECK(got == metrics::jaccard(b, a));  // symmetry
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
        CHECK((got == 1.0) == (a == b));
    }
}

TEST_CASE("empirical distribution uniform and rank weighted") {
    auto s = make_set({3, 1, 4, 5, 9, 2, 6, 8, 7, 0});

    SUBCASE("one set uniform: 0.1 per slot") {
        auto d = metrics::empirical_distribution({s}, 10, Weighting::uniform);
        for (std::size_t i = 0; i < 10; ++i) CHECK(d.mass[i] == doctest::Approx(0.1));
    }
    SUBCASE("two identical sets match one set") {
        auto one = metrics::empirical_distribution({s}, 10, Weighting::uniform);
        auto two = metrics::empirical_distribution({s, s}, 10, Weighting::uniform);
        for (std::size_t i = 0; i < 10; ++i) CHECK(two.mass[i] == doctest::Approx(one.mass[i]));
    }
    SUBCASE("rank weighted: rank-1 major has mass 10/55") {
        auto d = metrics::empirical_distribution({s}, 10, Weighting::rank_weighted);
        CHECK(d.mass[3] == doctest::Approx(10.0 / 55.0));
        CHECK(d.mass[0] == doctest::Approx(1.0 / 55.0));  // rank 10
    }
    SUBCASE("duplicates merge additively") {
        auto dup = make_set({2, 2, 2, 5, 5, 6, 7, 8, 9, 1});
        auto d = metrics::empirical_distribution({dup}, 10, Weighting::uniform);
        CHECK(d.mass[2] == doctest::Approx(0.3));
        CHECK(d.mass[5] == doctest::Approx(0.2));
        CHECK(std::accumulate(d.mass.begin(), d.mass.end(), 0.0) == doctest::Approx(1.0));
    }
}

TEST_CASE("wasserstein: identical distributions have distance zero") {
    Rng rng(7);
    auto cost = random_cost(12, rng);
    auto u = random_distribution(12, rng);
    auto r = metrics::wasserstein(u, u, cost);
    CHECK(std::abs(r.distance) <= 1e-12);
}

TEST_CASE("wasserstein: point masses cost exactly the pairwise cost") {
    auto cost = make_cost(3, {0, 0.4, 0.9, 0.4, 0, 0.6, 0.9, 0.6, 0});
    std::vector<double> u{1, 0, 0}, v{0, 0, 1};
    auto r = metrics::wasserstein(Distribution::from_mass(u), Distribution::from_mass(v), cost);
    CHECK(r.distance == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(r.plan.at(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("wasserstein: 4x4 disjoint-uniform fixture equals min matching by hand") {
    // supports {0,1} vs {2,3}; matchings: (0-2,1-3) -> (0.2+0.3)/2 = 0.25,
    // (0-3,1-2) -> (0.8+0.7)/2 = 0.75; optimum 0.25
    auto cost = make_cost(4, {0.0, 0.5, 0.2, 0.8,   //
                              0.5, 0.0, 0.7, 0.3,   //
                              0.2, 0.7, 0.0, 0.4,   //
                              0.8, 0.3, 0.4, 0.0});
    std::vector<double> u{0.5, 0.5, 0, 0}, v{0, 0, 0.5, 0.5};
    auto r = metrics::wasserstein(Distribution::from_mass(u), Distribution::from_mass(v), cost);
    CHECK(r.distance == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.plan.at(0, 2) == doctest::Approx(0.5));
    CHECK(r.plan.at(1, 3) == doctest::Approx(0.5));

    // plan export: one row per source id, comma separated
    const std::string csv = r.plan.to_csv();
    int newlines = 0;
    for (char c : csv)
        if (c == '\n') ++newlines;
    CHECK(newlines == 4);
    CHECK(csv.find("0.5") != std::string::npos);
}

TEST_CASE("wasserstein matches brute-force matching oracle on disjoint uniforms") {
    Rng rng(99);
    for (int n = 2; n <= 6; ++n) {
        for (int trial = 0; trial < 8; ++trial) {
            const std::size_t k = static_cast<std::size_t>(2 * n);
            auto cost = random_cost(k, rng);
            std::vector<std::vector<double>> sub(n, std::vector<double>(n));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) sub[i][j] = cost.at(i, static_cast<std::size_t>(n + j));
            std::vector<double> u(k, 0.0), v(k, 0.0);
            for (int i = 0; i < n; ++i) u[i] = 1.0 / n;
            for (int j = 0; j < n; ++j) v[n + j] = 1.0 / n;
            auto r = metrics::wasserstein(Distribution::from_mass(u),
                                          Distribution::from_mass(v), cost);
            CHECK(std::abs(r.distance - oracles::min_matching_mean_cost(sub)) <= 1e-9);
        }
    }
}

TEST_CASE("wasserstein plan feasibility, symmetry, bounds") {
    Rng rng(2024);
    const std::size_t k = 15;
    for (int trial = 0; trial < 25; ++trial) {
        auto cost = random_cost(k, rng);
        auto u = random_distribution(k, rng);
        auto v = random_distribution(k, rng);
        auto r = metrics::wasserstein(u, v, cost);

        CHECK(r.distance >= 0.0);
        double maxc = *std::max_element(cost.cost.begin(), cost.cost.end());
        CHECK(r.distance <= maxc + 1e-12);

        for (std::size_t i = 0; i < k; ++i) {
            double row = 0.0, col = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                CHECK(r.plan.at(i, j) >= 0.0);
                row += r.plan.at(i, j);
                col += r.plan.at(j, i);
            }
            CHECK(std::abs(row - u.mass[i]) <= 1e-9);
            CHECK(std::abs(col - v.mass[i]) <= 1e-9);
        }

        auto back = metrics::wasserstein(v, u, cost);
        CHECK(std::abs(back.distance - r.distance) <= 1e-9);
    }
}

TEST_CASE("wasserstein objective dominates random feasible plans") {
    Rng rng(555);
    const std::size_t k = 10;
    for (int trial = 0; trial < 10; ++trial) {
        auto cost = random_cost(k, rng);
        auto u = random_distribution(k, rng);
        auto v = random_distribution(k, rng);
        auto r = metrics::wasserstein(u, v, cost);
        for (int p = 0; p < 20; ++p) {
            auto plan = oracles::random_feasible_plan(rng, u.mass, v.mass);
            double obj = 0.0;
            for (std::size_t i = 0; i < k * k; ++i) obj += plan[i] * cost.cost[i];
            CHECK(r.distance <= obj + 1e-9);
        }
    }
}

TEST_CASE("wasserstein input validation") {
    auto cost = make_cost(2, {0, 0.5, 0.5, 0});
    auto u = Distribution::from_mass({0.5, 0.5});
    Distribution bad;
    bad.k = 3;
    bad.mass = {0.3, 0.3, 0.4};
    CHECK_THROWS_AS(metrics::wasserstein(u, bad, cost), ValidationError);

    Distribution unnormalized;
    unnormalized.k = 2;
    unnormalized.mass = {0.9, 0.9};
    CHECK_THROWS_AS(metrics::wasserstein(u, unnormalized, cost), ValidationError);
}

TEST_CASE("sds arithmetic from the rank-weight definition") {
    RankWeights w;
    auto s = make_set({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    SUBCASE("all ten STEM -> 5.5") {
        std::vector<bool> flags(10, true);
        CHECK(metrics::sds(s, flags, w) == doctest::Approx(5.5));
    }
    SUBCASE("no STEM -> 0") {
        std::vector<bool> flags(10, false);
        CHECK(metrics::sds(s, flags, w) == 0.0);
    }
    SUBCASE("only rank 1 STEM -> 1.0") {
        std::vector<bool> flags(10, false);
        flags[0] = true;  // id 0 sits at rank 1
        CHECK(metrics::sds(s, flags, w) == doctest::Approx(1.0));
    }
    SUBCASE("monotonicity: flipping rank r adds weights[r]/normalizer") {
        for (int r = 0; r < 10; ++r) {
            std::vector<bool> off(10, false), on(10, false);
            on[static_cast<std::size_t>(r)] = true;  // id r occupies rank r+1
            double delta = metrics::sds(s, on, w) - metrics::sds(s, off, w);
            CHECK(delta == doctest::Approx(w.weights[static_cast<std::size_t>(r)] / w.normalizer));
        }
    }
    SUBCASE("alternative normalizer 55 maps into [0,1]") {
        RankWeights unit;
        unit.normalizer = 55.0;
        std::vector<bool> flags(10, true);
        CHECK(metrics::sds(s, flags, unit) == doctest::Approx(1.0));
    }
}

TEST_CASE("rank weights validation") {
    RankWeights w;
    CHECK_NOTHROW(w.validate());
    w.weights[3] = w.weights[2];
    CHECK_THROWS_AS(w.validate(), ValidationError);
    RankWeights z;
    z.normalizer = 0.0;
    CHECK_THROWS_AS(z.validate(), ValidationError);
}

TEST_CASE("stem_in_top_k") {
    auto s = make_set({5, 6, 7, 8, 9, 0, 1, 2, 3, 4});
    std::vector<bool> flags(10, false);

    flags[7] = true;  // rank 3
    CHECK(metrics::stem_in_top_k(s, flags, 3));
    flags[7] = false;
    flags[8] = true;  // rank 4
    CHECK_FALSE(metrics::stem_in_top_k(s, flags, 3));
    CHECK(metrics::stem_in_top_k(s, flags, 10));
}

TEST_CASE("bayes posterior examples") {
    SUBCASE("constant likelihood returns the prior") {
        metrics::BayesInputs in;
        in.score_levels = {1, 2, 3};
        in.p_stem_given_score = {0.4, 0.4, 0.4};
        in.p_score = {0.2, 0.5, 0.3};
        auto post = metrics::bayes_score_posterior(in);
        CHECK(post.mass[0] == doctest::Approx(0.2));
        CHECK(post.mass[1] == doctest::Approx(0.5));
        CHECK(post.mass[2] == doctest::Approx(0.3));
    }
    SUBCASE("indicator likelihood concentrates the posterior") {
        metrics::BayesInputs in;
        in.score_levels = {1, 2};
        in.p_stem_given_score = {1.0, 0.0};
        in.p_score = {0.5, 0.5};
        auto post = metrics::bayes_score_posterior(in);
        CHECK(post.mass[0] == 1.0);
        CHECK(post.mass[1] == 0.0);
    }
    SUBCASE("three-level hand computation") {
        metrics::BayesInputs in;
        in.score_levels = {1, 2, 3};
        in.p_stem_given_score = {0.2, 0.5, 0.8};
        in.p_score = {0.3, 0.4, 0.3};
        auto post = metrics::bayes_score_posterior(in);
        // products (0.06, 0.20, 0.24), evidence 0.50
        CHECK(post.mass[0] == doctest::Approx(0.12).epsilon(1e-15));
        CHECK(post.mass[1] == doctest::Approx(0.40).epsilon(1e-15));
        CHECK(post.mass[2] == doctest::Approx(0.48).epsilon(1e-15));
    }
    SUBCASE("zero evidence is an error") {
        metrics::BayesInputs in;
        in.score_levels = {1, 2};
        in.p_stem_given_score = {0.0, 0.0};
        in.p_score = {0.5, 0.5};
        CHECK_THROWS_AS(metrics::bayes_score_posterior(in), ValidationError);
    }
}

TEST_CASE("bayes posterior normalizes over random valid inputs") {
    Rng rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.next_index(9);
        metrics::BayesInputs in;
        in.score_levels.resize(n);
        in.p_stem_given_score.resize(n);
        std::vector<double> prior(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            in.score_levels[i] = static_cast<double>(i);
            in.p_stem_given_score[i] = rng.next_double();
            prior[i] = rng.next_double() + 1e-9;
            total += prior[i];
        }
        for (double& p : prior) p /= total;
        in.p_score = prior;
        auto post = metrics::bayes_score_posterior(in);
        double sum = std::accumulate(post.mass.begin(), post.mass.end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (double p : post.mass) CHECK(p >= 0.0);
    }
}
