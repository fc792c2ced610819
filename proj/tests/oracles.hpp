#pragma once

// Independent oracles used by the unit and acceptance suites. Everything here
// is deliberately brute-force and shares no code with the implementation
// paths it checks.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

namespace oracles {

// |a ∩ b| / |a ∪ b| by direct set algebra.
inline double jaccard_direct(const std::set<std::int32_t>& a, const std::set<std::int32_t>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::int32_t> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Minimum over all n! perfect matchings of the mean matched cost. For uniform
// distributions over disjoint supports of size n this equals the exact
// transportation optimum.
inline double min_matching_mean_cost(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i][perm[i]];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

// Random feasible transport plan: positive random matrix, Sinkhorn scaling
// toward the marginals, then the exact rounding step (scale rows and columns
// down where they overshoot, spread the remaining deficit as a rank-1
// correction). The result satisfies both marginals up to float arithmetic.
template <typename RngT>
std::vector<double> random_feasible_plan(RngT& rng, const std::vector<double>& u,
                                         const std::vector<double>& v) {
    const std::size_t k = u.size();
    std::vector<double> p(k * k);
    for (double& x : p) x = rng.next_double() + 1e-3;
    std::vector<double> rs(k), cs(k);
    for (int it = 0; it < 60; ++it) {
        std::fill(rs.begin(), rs.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) rs[i] += p[i * k + j];
        for (std::size_t i = 0; i < k; ++i) {
            const double f = rs[i] > 0 ? u[i] / rs[i] : 0.0;
            for (std::size_t j = 0; j < k; ++j) p[i * k + j] *= f;
        }
        std::fill(cs.begin(), cs.end(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) cs[j] += p[i * k + j];
        for (std::size_t j = 0; j < k; ++j) {
            const double f = cs[j] > 0 ? v[j] / cs[j] : 0.0;
            for (std::size_t i = 0; i < k; ++i) p[i * k + j] *= f;
        }
    }
    // rounding: clamp row/col sums to at most the marginals, then fix the
    // deficit with a rank-1 nonnegative correction
    std::fill(rs.begin(), rs.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) rs[i] += p[i * k + j];
    for (std::size_t i = 0; i < k; ++i) {
        const double f = rs[i] > 0 ? std::min(1.0, u[i] / rs[i]) : 0.0;
        for (std::size_t j = 0; j < k; ++j) p[i * k + j] *= f;
    }
    std::fill(cs.begin(), cs.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) cs[j] += p[i * k + j];
    for (std::size_t j = 0; j < k; ++j) {
        const double f = cs[j] > 0 ? std::min(1.0, v[j] / cs[j]) : 0.0;
        for (std::size_t i = 0; i < k; ++i) p[i * k + j] *= f;
    }
    std::vector<double> du(k), dv(k);
    double deficit = 0.0;
    std::fill(rs.begin(), rs.end(), 0.0);
    std::fill(cs.begin(), cs.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            rs[i] += p[i * k + j];
            cs[j] += p[i * k + j];
        }
    for (std::size_t i = 0; i < k; ++i) {
        du[i] = std::max(0.0, u[i] - rs[i]);
        deficit += du[i];
    }
    for (std::size_t j = 0; j < k; ++j) dv[j] = std::max(0.0, v[j] - cs[j]);
    if (deficit > 0) {
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) p[i * k + j] += du[i] * dv[j] / deficit;
    }
    return p;
}

// Direct Levenshtein distance by full DP table (the implementation uses a
// rolling-row variant; this one is the naive reference).
inline std::size_t levenshtein_direct(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                            std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    return d[a.size()][b.size()];
}

}  // namespace oracles
