#include "majoraudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace majoraudit::metrics {

double jaccard(const std::set<std::int32_t>& a, const std::set<std::int32_t>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (std::int32_t x : a) inter += b.count(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Distribution Distribution::from_mass(std::vector<double> mass) {
    double sum = 0.0;
    for (double m : mass) {
        if (m < 0.0) throw ValidationError("distribution mass must be non-negative");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("distribution mass must sum to 1 (got " + std::to_string(sum) + ")");
    Distribution d;
    d.k = mass.size();
    d.mass = std::move(mass);
    return d;
}

void RankWeights::validate() const {
    for (std::size_t i = 1; i < weights.size(); ++i)
        if (!(weights[i - 1] > weights[i]))
            throw ValidationError("rank weights must be strictly decreasing");
    if (!(normalizer > 0.0)) throw ValidationError("rank weight normalizer must be positive");
}

double RankWeights::weight_sum() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

Distribution empirical_distribution(const std::vector<vocab::RecommendationSet>& sets,
                                    std::size_t k, Weighting weighting,
                                    const RankWeights& weights) {
    if (sets.empty()) throw ValidationError("empirical_distribution: no recommendation sets");
    std::vector<double> mass(k, 0.0);
    double total = 0.0;
    for (const auto& set : sets) {
        for (std::size_t rank = 0; rank < set.ids.size(); ++rank) {
            const std::int32_t id = set.ids[rank];
            if (id < 0 || static_cast<std::size_t>(id) >= k)
                throw ValidationError("empirical_distribution: id " + std::to_string(id) +
                                      " outside vocabulary of size " + std::to_string(k));
            const double w = weighting == Weighting::uniform ? 1.0 : weights.weights[rank];
            mass[static_cast<std::size_t>(id)] += w;
            total += w;
        }
    }
    for (double& m : mass) m /= total;
    Distribution d;
    d.k = k;
    d.mass = std::move(mass);
    return d;
}

namespace {

// Primal transportation simplex on the dense m x n problem
//   min sum_ij flow_ij * cost_ij
//   s.t. row sums = supply, column sums = demand (balanced).
//
// Basis is a spanning tree over the m+n row/column nodes. Start from the
// northwest-corner solution, then improve via node potentials. Degeneracy is
// broken by an epsilon perturbation of the supplies; the final basic flows
// are recomputed against the unperturbed marginals (the optimality test
// depends only on costs and the basis, so the recomputed solution stays
// optimal). Bland's lowest-index rule takes over if pivoting ever stalls.
class TransportSimplex {
public:
    TransportSimplex(const std::vector<double>& supply, const std::vector<double>& demand,
                     std::vector<double> cost, std::size_t m, std::size_t n)
        : a_(supply), b_(demand), cost_(std::move(cost)), m_(m), n_(n), adj_(m + n) {}

    // Returns row-major m x n flows; *ok is false when the perturbed path
    // produced an unusable restore (caller then re-solves unperturbed).
    std::vector<double> solve(bool perturb, bool* ok);

private:
    static constexpr double kReducedCostTol = 1e-12;
    static constexpr double kPerturb = 1e-13;

    struct Arc {
        int i;
        int j;
        double flow;
    };

    void add_arc(int i, int j, double flow);
    void northwest_corner(const std::vector<double>& supply, const std::vector<double>& demand);
    void compute_potentials(std::vector<double>& u, std::vector<double>& v) const;
    // theta of the executed pivot (0 for a degenerate step)
    double pivot(std::size_t enter_i, std::size_t enter_j);
    std::vector<double> basic_flows_for(const std::vector<double>& supply,
                                        const std::vector<double>& demand, bool* ok) const;

    std::vector<double> a_, b_, cost_;
    std::size_t m_, n_;
    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> adj_;  // node -> incident basic arc ids
};

void TransportSimplex::add_arc(int i, int j, double flow) {
    const int idx = static_cast<int>(arcs_.size());
    arcs_.push_back({i, j, flow});
    adj_[static_cast<std::size_t>(i)].push_back(idx);
    adj_[m_ + static_cast<std::size_t>(j)].push_back(idx);
}

void TransportSimplex::northwest_corner(const std::vector<double>& supply,
                                        const std::vector<double>& demand) {
    arcs_.clear();
    for (auto& v : adj_) v.clear();
    std::vector<double> ra = supply, rb = demand;
    std::size_t i = 0, j = 0;
    while (true) {
        const double t = std::min(ra[i], rb[j]);
        add_arc(static_cast<int>(i), static_cast<int>(j), t);
        ra[i] -= t;
        rb[j] -= t;
        if (i == m_ - 1 && j == n_ - 1) break;
        if (i < m_ - 1 && (ra[i] <= rb[j] || j == n_ - 1))
            ++i;
        else
            ++j;
    }
}

void TransportSimplex::compute_potentials(std::vector<double>& u, std::vector<double>& v) const {
    u.assign(m_, 0.0);
    v.assign(n_, 0.0);
    std::vector<char> seen(m_ + n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        for (int aidx : adj_[static_cast<std::size_t>(node)]) {
            const Arc& arc = arcs_[static_cast<std::size_t>(aidx)];
            const int other = node < static_cast<int>(m_) ? static_cast<int>(m_) + arc.j : arc.i;
            if (seen[static_cast<std::size_t>(other)]) continue;
            const double c = cost_[static_cast<std::size_t>(arc.i) * n_ +
                                   static_cast<std::size_t>(arc.j)];
            if (other >= static_cast<int>(m_))
                v[static_cast<std::size_t>(other) - m_] = c - u[static_cast<std::size_t>(arc.i)];
            else
                u[static_cast<std::size_t>(other)] = c - v[static_cast<std::size_t>(arc.j)];
            seen[static_cast<std::size_t>(other)] = 1;
            stack.push_back(other);
        }
    }
}

double TransportSimplex::pivot(std::size_t enter_i, std::size_t enter_j) {
    const int src = static_cast<int>(enter_i);
    const int dst = static_cast<int>(m_ + enter_j);
    // unique tree path dst -> src
    std::vector<int> parent_arc(m_ + n_, -1), parent_node(m_ + n_, -1);
    std::vector<char> seen(m_ + n_, 0);
    std::vector<int> queue{src};
    seen[static_cast<std::size_t>(src)] = 1;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const int node = queue[qi];
        if (node == dst) break;
        for (int aidx : adj_[static_cast<std::size_t>(node)]) {
            const Arc& arc = arcs_[static_cast<std::size_t>(aidx)];
            const int other = node < static_cast<int>(m_) ? static_cast<int>(m_) + arc.j : arc.i;
            if (seen[static_cast<std::size_t>(other)]) continue;
            seen[static_cast<std::size_t>(other)] = 1;
            parent_arc[static_cast<std::size_t>(other)] = aidx;
            parent_node[static_cast<std::size_t>(other)] = node;
            queue.push_back(other);
        }
    }

    // walk the path, alternating signs; the arc adjacent to the entering
    // column is the first donor
    std::vector<int> cycle;
    std::vector<int> sign;
    int node = dst;
    int s = -1;
    while (node != src) {
        cycle.push_back(parent_arc[static_cast<std::size_t>(node)]);
        sign.push_back(s);
        s = -s;
        node = parent_node[static_cast<std::size_t>(node)];
    }

    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave_pos = 0;
    long leave_key = std::numeric_limits<long>::max();
    for (std::size_t p = 0; p < cycle.size(); ++p) {
        if (sign[p] >= 0) continue;
        const Arc& arc = arcs_[static_cast<std::size_t>(cycle[p])];
        const long key = static_cast<long>(arc.i) * static_cast<long>(n_) + arc.j;
        if (arc.flow < theta || (arc.flow == theta && key < leave_key)) {
            theta = arc.flow;
            leave_pos = p;
            leave_key = key;
        }
    }

    for (std::size_t p = 0; p < cycle.size(); ++p)
        arcs_[static_cast<std::size_t>(cycle[p])].flow += sign[p] * theta;

    // entering arc takes the leaver's slot
    const int laidx = cycle[leave_pos];
    Arc& slot = arcs_[static_cast<std::size_t>(laidx)];
    auto detach = [&](std::size_t nidx) {
        auto& lst = adj_[nidx];
        lst.erase(std::find(lst.begin(), lst.end(), laidx));
    };
    detach(static_cast<std::size_t>(slot.i));
    detach(m_ + static_cast<std::size_t>(slot.j));
    slot = {static_cast<int>(enter_i), static_cast<int>(enter_j), theta};
    adj_[enter_i].push_back(laidx);
    adj_[m_ + enter_j].push_back(laidx);
    return theta;
}

std::vector<double> TransportSimplex::basic_flows_for(const std::vector<double>& supply,
                                                      const std::vector<double>& demand,
                                                      bool* ok) const {
    *ok = true;
    std::vector<double> residual(m_ + n_);
    for (std::size_t i = 0; i < m_; ++i) residual[i] = supply[i];
    for (std::size_t j = 0; j < n_; ++j) residual[m_ + j] = demand[j];

    std::vector<int> degree(m_ + n_);
    for (std::size_t node = 0; node < m_ + n_; ++node)
        degree[node] = static_cast<int>(adj_[node].size());
    std::vector<char> done(arcs_.size(), 0);
    std::vector<double> flow(arcs_.size(), 0.0);
    std::vector<int> leaves;
    for (std::size_t node = 0; node < m_ + n_; ++node)
        if (degree[node] == 1) leaves.push_back(static_cast<int>(node));

    while (!leaves.empty()) {
        const int node = leaves.back();
        leaves.pop_back();
        if (degree[static_cast<std::size_t>(node)] != 1) continue;
        int aidx = -1;
        for (int idx : adj_[static_cast<std::size_t>(node)])
            if (!done[static_cast<std::size_t>(idx)]) {
                aidx = idx;
                break;
            }
        if (aidx < 0) continue;
        const Arc& arc = arcs_[static_cast<std::size_t>(aidx)];
        const double f = residual[static_cast<std::size_t>(node)];
        flow[static_cast<std::size_t>(aidx)] = f;
        done[static_cast<std::size_t>(aidx)] = 1;
        const int other = node < static_cast<int>(m_) ? static_cast<int>(m_) + arc.j : arc.i;
        residual[static_cast<std::size_t>(other)] -= f;
        residual[static_cast<std::size_t>(node)] = 0.0;
        degree[static_cast<std::size_t>(node)] = 0;
        if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
    }

    std::vector<double> dense(m_ * n_, 0.0);
    for (std::size_t e = 0; e < arcs_.size(); ++e) {
        double f = flow[e];
        if (f < 0.0) {
            // perturbation residue only; anything larger means the epsilon
            // basis is not reusable at epsilon = 0
            if (f < -1e-9) *ok = false;
            f = 0.0;
        }
        dense[static_cast<std::size_t>(arcs_[e].i) * n_ + static_cast<std::size_t>(arcs_[e].j)] =
            f;
    }
    return dense;
}

std::vector<double> TransportSimplex::solve(bool perturb, bool* ok) {
    *ok = true;
    std::vector<double> pa = a_, pb = b_;
    if (perturb) {
        for (double& x : pa) x += kPerturb;
        pb[n_ - 1] += kPerturb * static_cast<double>(m_);
    }
    northwest_corner(pa, pb);

    std::vector<double> u, v;
    bool bland = !perturb;
    std::size_t degenerate_streak = 0;
    const std::size_t max_iters = 2000 * (m_ + n_) + 20000;
    std::size_t iter = 0;
    for (; iter < max_iters; ++iter) {
        compute_potentials(u, v);
        bool found = false;
        std::size_t ei = 0, ej = 0;
        double best = -kReducedCostTol;
        for (std::size_t i = 0; i < m_ && !(found && bland); ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                const double rc = cost_[i * n_ + j] - u[i] - v[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                    found = true;
                    if (bland) break;
                }
            }
        }
        if (!found) break;
        const double theta = pivot(ei, ej);
        if (theta <= 1e-15) {
            if (++degenerate_streak > m_ + n_) bland = true;
        } else {
            degenerate_streak = 0;
        }
    }
    if (iter == max_iters) throw Error("transportation simplex failed to converge");

    if (!perturb) {
        std::vector<double> dense(m_ * n_, 0.0);
        for (const Arc& arc : arcs_)
            dense[static_cast<std::size_t>(arc.i) * n_ + static_cast<std::size_t>(arc.j)] =
                std::max(arc.flow, 0.0);
        return dense;
    }
    return basic_flows_for(a_, b_, ok);
}

}  // namespace

WassersteinResult wasserstein(const Distribution& u, const Distribution& v,
                              const embed::CostMatrix& cost) {
    if (u.k != v.k || u.k != cost.k)
        throw ValidationError("wasserstein: dimension mismatch (u.k=" + std::to_string(u.k) +
                              ", v.k=" + std::to_string(v.k) +
                              ", cost.k=" + std::to_string(cost.k) + ")");
    const std::size_t k = u.k;
    auto check = [](const Distribution& d, const char* which) {
        double sum = 0.0;
        for (double m : d.mass) {
            if (m < 0.0)
                throw ValidationError(std::string("wasserstein: negative mass in ") + which);
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ValidationError(std::string("wasserstein: ") + which +
                                  " is not normalized (sum=" + std::to_string(sum) + ")");
        return sum;
    };
    const double usum = check(u, "u");
    const double vsum = check(v, "v");

    // restrict to the supports; zero-mass ids get zero plan rows/columns
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < k; ++i)
        if (u.mass[i] > 0.0) rows.push_back(i);
    for (std::size_t j = 0; j < k; ++j)
        if (v.mass[j] > 0.0) cols.push_back(j);
    const std::size_t m = rows.size(), n = cols.size();

    std::vector<double> supply(m), demand(n), sub_cost(m * n);
    for (std::size_t i = 0; i < m; ++i) supply[i] = u.mass[rows[i]] / usum;
    for (std::size_t j = 0; j < n; ++j) demand[j] = v.mass[cols[j]] / vsum;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) sub_cost[i * n + j] = cost.at(rows[i], cols[j]);

    TransportSimplex simplex(supply, demand, sub_cost, m, n);
    bool ok = false;
    std::vector<double> flows = simplex.solve(/*perturb=*/true, &ok);
    if (ok) {
        // the restore step must reproduce the marginals; fall back otherwise
        for (std::size_t i = 0; i < m && ok; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n; ++j) rs += flows[i * n + j];
            if (std::abs(rs - supply[i]) > 1e-10) ok = false;
        }
        for (std::size_t j = 0; j < n && ok; ++j) {
            double cs = 0.0;
            for (std::size_t i = 0; i < m; ++i) cs += flows[i * n + j];
            if (std::abs(cs - demand[j]) > 1e-10) ok = false;
        }
    }
    if (!ok) flows = simplex.solve(/*perturb=*/false, &ok);

    WassersteinResult result;
    result.plan.k = k;
    result.plan.w.assign(k * k, 0.0);
    double distance = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double f = flows[i * n + j];
            if (f == 0.0) continue;
            result.plan.w[rows[i] * k + cols[j]] = f;
            distance += f * sub_cost[i * n + j];
        }
    result.distance = distance;
    return result;
}

std::string TransportPlan::to_csv() const {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof(buf), "%.12g", at(i, j));
            if (j) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

double sds(const vocab::RecommendationSet& set, const std::vector<bool>& stem_flags,
           const RankWeights& weights) {
    weights.validate();
    double score = 0.0;
    for (std::size_t rank = 0; rank < set.ids.size(); ++rank) {
        const std::int32_t id = set.ids[rank];
        if (id < 0 || static_cast<std::size_t>(id) >= stem_flags.size())
            throw ValidationError("sds: id " + std::to_string(id) + " has no stem flag");
        if (stem_flags[static_cast<std::size_t>(id)]) score += weights.weights[rank];
    }
    return score / weights.normalizer;
}

bool stem_in_top_k(const vocab::RecommendationSet& set, const std::vector<bool>& stem_flags,
                   int k) {
    if (k < 1 || k > 10) throw ValidationError("stem_in_top_k: k must be in [1,10]");
    for (int rank = 0; rank < k; ++rank) {
        const std::int32_t id = set.ids[static_cast<std::size_t>(rank)];
        if (id < 0 || static_cast<std::size_t>(id) >= stem_flags.size())
            throw ValidationError("stem_in_top_k: id " + std::to_string(id) +
                                  " has no stem flag");
        if (stem_flags[static_cast<std::size_t>(id)]) return true;
    }
    return false;
}

void BayesInputs::validate() const {
    if (score_levels.empty() || score_levels.size() != p_stem_given_score.size() ||
        score_levels.size() != p_score.size())
        throw ValidationError("bayes inputs: level/likelihood/prior sizes must match");
    double prior_sum = 0.0;
    for (std::size_t i = 0; i < score_levels.size(); ++i) {
        if (p_stem_given_score[i] < 0.0 || p_stem_given_score[i] > 1.0)
            throw ValidationError("bayes inputs: likelihood outside [0,1]");
        if (p_score[i] < 0.0 || p_score[i] > 1.0)
            throw ValidationError("bayes inputs: prior outside [0,1]");
        prior_sum += p_score[i];
    }
    if (std::abs(prior_sum - 1.0) > 1e-9)
        throw ValidationError("bayes inputs: prior must sum to 1");
}

Distribution bayes_score_posterior(const BayesInputs& inputs) {
    inputs.validate();
    const std::size_t n = inputs.p_score.size();
    std::vector<double> post(n);
    double evidence = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        post[s] = inputs.p_stem_given_score[s] * inputs.p_score[s];
        evidence += post[s];
    }
    if (evidence <= 0.0)
        throw ValidationError("bayes posterior: zero STEM evidence under the supplied prior");
    for (double& p : post) p /= evidence;
    Distribution d;
    d.k = n;
    d.mass = std::move(post);
    return d;
}

}  // namespace majoraudit::metrics
