#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "majoraudit/embeddings.hpp"
#include "majoraudit/major_vocab.hpp"

namespace majoraudit::metrics {

// |a ∩ b| / |a ∪ b|; two empty sets are identical, so 1.0.
double jaccard(const std::set<std::int32_t>& a, const std::set<std::int32_t>& b);

struct Distribution {
    std::size_t k = 0;
    std::vector<double> mass;

    // validates non-negativity and sum 1 ± 1e-9
    static Distribution from_mass(std::vector<double> mass);
};

struct RankWeights {
    std::array<double, 10> weights{{10, 9, 8, 7, 6, 5, 4, 3, 2, 1}};
    double normalizer = 10.0;

    void validate() const;  // strictly decreasing weights, normalizer > 0
    double weight_sum() const;
};

enum class Weighting { uniform, rank_weighted };

// Pools the slots of all sets into one distribution over ids 0..k-1.
// uniform: every slot carries equal mass; rank_weighted: slot j carries mass
// proportional to weights[j]. Duplicate ids within a set merge additively.
Distribution empirical_distribution(const std::vector<vocab::RecommendationSet>& sets,
                                    std::size_t k, Weighting weighting,
                                    const RankWeights& weights = RankWeights{});

struct TransportPlan {
    std::size_t k = 0;
    std::vector<double> w;  // row-major k by k, non-negative

    double at(std::size_t i, std::size_t j) const { return w[i * k + j]; }
    std::string to_csv() const;
};

struct WassersteinResult {
    double distance = 0.0;
    TransportPlan plan;
};

// Exact order-1 Wasserstein distance between u and v under the given cost:
// the transportation LP is solved to optimality with a primal transportation
// simplex (northwest-corner start, potentials improvement loop, epsilon
// perturbation of the supplies against degeneracy, Bland's rule as the
// anti-cycling fallback). The returned plan's marginals match u and v.
WassersteinResult wasserstein(const Distribution& u, const Distribution& v,
                              const embed::CostMatrix& cost);

// SDS = sum over ranks of weights[rank] * stem_indicator / normalizer, where
// the indicator reads stem_flags at the major id occupying that rank.
double sds(const vocab::RecommendationSet& set, const std::vector<bool>& stem_flags,
           const RankWeights& weights = RankWeights{});

bool stem_in_top_k(const vocab::RecommendationSet& set, const std::vector<bool>& stem_flags,
                   int k);

struct BayesInputs {
    std::vector<double> score_levels;        // labels only; not used in arithmetic
    std::vector<double> p_stem_given_score;  // likelihood per level, in [0,1]
    std::vector<double> p_score;             // prior per level, sums to 1

    void validate() const;
};

// posterior[s] = likelihood[s] * prior[s] / sum(likelihood * prior).
// Throws ValidationError when the evidence term is zero (no STEM evidence).
Distribution bayes_score_posterior(const BayesInputs& inputs);

}  // namespace majoraudit::metrics
