#include <doctest.h>

#include <cmath>

#include "majoraudit/stats.hpp"

using namespace majoraudit;
using namespace majoraudit::stats;

TEST_CASE("mean_ci on constant samples collapses to the constant") {
    std::vector<double> samples(20, 0.75);
    for (CiMethod m : {CiMethod::percentile_bootstrap, CiMethod::normal}) {
        auto r = mean_ci(samples, 0.95, m, 200, 1);
        CHECK(r.mean == doctest::Approx(0.75));
        CHECK(r.ci_lo == doctest::Approx(0.75));
        CHECK(r.ci_hi == doctest::Approx(0.75));
        CHECK_FALSE(r.degenerate);
    }
}

TEST_CASE("mean_ci normal method is symmetric about the mean") {
    auto r = mean_ci({0.0, 1.0}, 0.95, CiMethod::normal, 0, 0);
    CHECK(r.mean == doctest::Approx(0.5));
    CHECK(r.ci_lo + r.ci_hi == doctest::Approx(1.0));
    CHECK(r.ci_lo < 0.5);
    CHECK(r.ci_hi > 0.5);
}

TEST_CASE("mean_ci is deterministic under a fixed seed") {
    std::vector<double> samples;
    Rng rng(88);
    for (int i = 0; i < 40; ++i) samples.push_back(rng.next_double());
    auto a = mean_ci(samples, 0.95, CiMethod::percentile_bootstrap, 500, 42);
    auto b = mean_ci(samples, 0.95, CiMethod::percentile_bootstrap, 500, 42);
    CHECK(a.ci_lo == b.ci_lo);
    CHECK(a.ci_hi == b.ci_hi);
    auto c = mean_ci(samples, 0.95, CiMethod::percentile_bootstrap, 500, 43);
    CHECK((a.ci_lo != c.ci_lo || a.ci_hi != c.ci_hi));
}

TEST_CASE("single sample degenerates with a flag") {
    auto r = mean_ci({0.3}, 0.95, CiMethod::percentile_bootstrap, 100, 5);
    CHECK(r.mean == 0.3);
    CHECK(r.ci_lo == 0.3);
    CHECK(r.ci_hi == 0.3);
    CHECK(r.degenerate);
}

TEST_CASE("mean_ci input validation") {
    CHECK_THROWS_AS(mean_ci({}, 0.95, CiMethod::normal, 0, 0), ValidationError);
    CHECK_THROWS_AS(mean_ci({1.0, 2.0}, 1.5, CiMethod::normal, 0, 0), ValidationError);
}

TEST_CASE("bootstrap interval covers the true mean in >= 90 of 100 seeded replications") {
    int covered = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        Rng rng(mix64(1000, rep));
        std::vector<double> samples(100);
        for (double& x : samples) x = rng.next_double();  // uniform(0,1), mean 0.5
        auto r = mean_ci(samples, 0.95, CiMethod::percentile_bootstrap, 300, rep);
        if (r.ci_lo <= 0.5 && 0.5 <= r.ci_hi) ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("quantile interpolation") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
    CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
    CHECK(quantile({10.0}, 0.5) == 10.0);
}

TEST_CASE("normal quantile sanity") {
    CHECK(std::abs(normal_quantile(0.5)) < 1e-12);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959964).epsilon(1e-5));
    CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
}

TEST_CASE("replicate_ci takes quantiles of the replicates themselves") {
    std::vector<double> reps;
    for (int i = 0; i <= 100; ++i) reps.push_back(static_cast<double>(i));
    auto r = replicate_ci(reps, 0.95);
    CHECK(r.mean == doctest::Approx(50.0));
    CHECK(r.ci_lo == doctest::Approx(2.5));
    CHECK(r.ci_hi == doctest::Approx(97.5));
}
