#ifndef CABLE_LOOPSOUP_HPP
#define CABLE_LOOPSOUP_HPP

// Random-walk loop soup on a finite domain, sampled exactly by the rooted
// decomposition: vertices are taken in a fixed order x_1, x_2, ...; the loops
// whose smallest vertex is x_i are the loops of D_i = D \ {x_1..x_{i-1}} through
// x_i. Their number is Poisson(alpha log G_i), G_i = G_{D_i}(x_i, x_i); each
// loop returns to x_i n times with P[n] ∝ R_i^n / n, R_i = 1 - 1/G_i; each
// excursion is SRW from x_i conditioned to come back to x_i inside D_i (Doob
// transform with h(y) = G_{D_i}(y, x_i) / G_i).
//
// The occupation field adds Exp(mean 1/(2d)) holding times per visit to a
// Gamma(alpha, 1/(2d)) field from trivial loops, so at alpha = 1/2 it has the law
// of phi^2 / 2 for the free field with covariance L^{-1}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cable/clusters.hpp"
#include "cable/error.hpp"
#include "cable/green.hpp"
#include "cable/lattice.hpp"
#include "cable/rng.hpp"
#include "cable/union_find.hpp"

namespace cable {

inline constexpr std::size_t kDefaultLoopRouteCap = 2048;
inline constexpr std::size_t kDefaultLoopStepCap = 1'000'000;

/// Extra-glue coefficient c: an untraversed cable between occupations a, b is open
/// with probability 1 - exp(-c sqrt(2a) sqrt(2b)).
inline constexpr double kDefaultGlueCoefficient = 1.0;

struct DiscreteLoop {
    VertexId root = 0;
    std::size_t length = 0;
    std::vector<VertexId> steps;     // cyclic sequence starting at root; empty above the step cap
    std::vector<VertexId> vertices;  // distinct vertices visited, sorted
};

struct LoopSoupSample {
    std::vector<DiscreteLoop> loops;
    std::vector<std::uint64_t> visits;           // per vertex, over nontrivial loops
    std::vector<std::uint32_t> edge_traversals;  // per edge id
    std::vector<double> gamma;
    EdgeMarks glue_open;

    [[nodiscard]] std::vector<char> visited_mask() const
    {
        std::vector<char> m(visits.size());
        for (std::size_t v = 0; v < m.size(); ++v) {
            m[v] = visits[v] > 0 ? 1 : 0;
        }
        return m;
    }
};

struct LoopSoupOptions {
    double alpha = 0.5;
    std::size_t step_cap = kDefaultLoopStepCap;
};

/// Per-domain data for the rooted decomposition: one Green solve on each
/// shrinking domain, computed once and shared read-only by all samples.
class LoopSoupPlan {
public:
    explicit LoopSoupPlan(LatticeDomain dom, std::vector<VertexId> order = {},
                          std::size_t size_cap = kDefaultLoopRouteCap)
        : dom_(std::move(dom)), order_(std::move(order))
    {
        const std::size_t n = dom_.size();
        if (n > size_cap) {
            throw CapacityError("loop route disabled above " + std::to_string(size_cap) + " vertices (domain has " +
                                std::to_string(n) + ")");
        }
        if (order_.empty()) {
            order_.resize(n);
            std::iota(order_.begin(), order_.end(), VertexId{0});
        }
        if (order_.size() != n) {
            throw DomainError("LoopSoupPlan: ordering is not a permutation of the vertices");
        }
        rank_.assign(n, kSink);
        for (std::size_t i = 0; i < n; ++i) {
            if (order_[i] >= n || rank_[order_[i]] != kSink) {
                throw DomainError("LoopSoupPlan: ordering is not a permutation of the vertices");
            }
            rank_[order_[i]] = static_cast<VertexId>(i);
        }
        std::vector<char> active(n, 1);
        h_.resize(n);
        green_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const VertexId x = order_[i];
            const Eigen::VectorXd col = GreenSolver(dom_, active).column(x);
            const double gxx = col[x];
            if (!(gxx >= 1.0 - 1e-9)) {
                throw NumericalError("LoopSoupPlan: shrinking-domain Green value below 1");
            }
            green_[i] = std::max(gxx, 1.0);
            h_[i].resize(n);
            for (std::size_t v = 0; v < n; ++v) {
                h_[i][v] = active[v] ? std::max(col[static_cast<Eigen::Index>(v)] / gxx, 0.0) : 0.0;
            }
            h_[i][x] = 1.0;
            active[x] = 0;
        }
    }

    [[nodiscard]] const LatticeDomain& domain() const noexcept { return dom_; }
    [[nodiscard]] std::span<const VertexId> order() const noexcept { return order_; }

    /// G_{D_i}(x_i, x_i) at position i of the ordering.
    [[nodiscard]] double root_green(std::size_t i) const { return green_.at(i); }
    [[nodiscard]] double return_probability(std::size_t i) const { return 1.0 - 1.0 / green_.at(i); }
    [[nodiscard]] std::span<const double> harmonic(std::size_t i) const { return h_.at(i); }

    /// Nontrivial loops at intensity alpha, plus per-vertex visit and per-edge traversal counts.
    void sample_loops(Rng& rng, LoopSoupSample& out, const LoopSoupOptions& opt = {}) const
    {
        if (!(opt.alpha > 0.0)) {
            throw DomainError("sample_loops: alpha must be positive");
        }
        const std::size_t n = dom_.size();
        const int d = dom_.dim();
        out.loops.clear();
        out.visits.assign(n, 0);
        out.edge_traversals.assign(dom_.num_edges(), 0);
        out.gamma.clear();
        out.glue_open.clear();

        std::vector<VertexId> path;
        std::vector<VertexId> distinct;
        std::vector<std::uint64_t> stamp(n, 0);
        std::uint64_t tag = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = return_probability(i);
            if (r <= 0.0) {
                continue;
            }
            const double log_g = std::log(green_[i]);
            std::poisson_distribution<long> poisson(opt.alpha * log_g);
            const long count = poisson(rng);
            const VertexId x = order_[i];
            const auto& h = h_[i];
            for (long c = 0; c < count; ++c) {
                const std::uint64_t returns = sample_log_series(r, log_g, rng);
                DiscreteLoop loop;
                loop.root = x;
                path.clear();
                path.push_back(x);
                distinct.clear();
                distinct.push_back(x);
                stamp[x] = ++tag;
                std::size_t length = 0;
                for (std::uint64_t e = 0; e < returns; ++e) {
                    VertexId at = x;
                    do {
                        double weights[128];
                        double total = 0.0;
                        for (int dir = 0; dir < 2 * d; ++dir) {
                            const VertexId u = dom_.neighbor(at, dir);
                            weights[dir] = u == kSink ? 0.0 : h[u];
                            total += weights[dir];
                        }
                        if (!(total > 0.0)) {
                            throw NumericalError("sample_loops: h-transform normalisation failed at vertex " +
                                                 std::to_string(at));
                        }
                        double u01 = uniform01(rng) * total;
                        int dir = 0;
                        for (; dir < 2 * d - 1; ++dir) {
                            if (u01 < weights[dir]) {
                                break;
                            }
                            u01 -= weights[dir];
                        }
                        while (weights[dir] == 0.0) {
                            --dir;
                        }
                        const VertexId next = dom_.neighbor(at, dir);
                        ++out.edge_traversals[dom_.edge_of(at, dir)];
                        ++out.visits[next];
                        ++length;
                        if (path.size() < opt.step_cap + 2) {
                            path.push_back(next);
                        }
                        if (stamp[next] != tag) {
                            stamp[next] = tag;
                            distinct.push_back(next);
                        }
                        at = next;
                    } while (at != x);
                }
                loop.length = length;
                std::sort(distinct.begin(), distinct.end());
                loop.vertices = distinct;
                if (length <= opt.step_cap) {
                    path.pop_back();  // closing return to the root
                    loop.steps = path;
                }
                out.loops.push_back(std::move(loop));
            }
        }
    }

private:
    static std::uint64_t sample_log_series(double r, double log_norm, Rng& rng)
    {
        const double u = uniform01(rng);
        double p = r / log_norm;
        double cum = p;
        std::uint64_t k = 1;
        while (u >= cum && p > 0.0) {
            p *= r * static_cast<double>(k) / static_cast<double>(k + 1);
            ++k;
            cum += p;
        }
        return k;
    }

    LatticeDomain dom_;
    std::vector<VertexId> order_;
    std::vector<VertexId> rank_;
    std::vector<double> green_;
    std::vector<std::vector<double>> h_;
};

inline LoopSoupSample sample_loops(const LoopSoupPlan& plan, Rng& rng, const LoopSoupOptions& opt = {})
{
    LoopSoupSample s;
    plan.sample_loops(rng, s, opt);
    return s;
}

/// gamma(x) = Gamma(alpha, 1/(2d)) + sum of visits(x) independent Exp(mean 1/(2d)),
/// drawn as a single Gamma(alpha + visits(x), 1/(2d)).
inline void accumulate_gamma(LoopSoupSample& s, const LatticeDomain& dom, Rng& rng, double alpha = 0.5)
{
    if (s.visits.size() != dom.size()) {
        throw DomainError("accumulate_gamma: sample does not match domain");
    }
    const double scale = 1.0 / (2.0 * dom.dim());
    s.gamma.resize(dom.size());
    for (std::size_t v = 0; v < dom.size(); ++v) {
        std::gamma_distribution<double> g(alpha + static_cast<double>(s.visits[v]), scale);
        s.gamma[v] = g(rng);
    }
}

/// Cable open iff traversed by a loop, or Uniform(0,1) >= exp(-c sqrt(2 gamma_x) sqrt(2 gamma_y)).
inline void glue_edges(LoopSoupSample& s, const LatticeDomain& dom, Rng& rng,
                       double glue_coefficient = kDefaultGlueCoefficient)
{
    if (s.gamma.size() != dom.size() || s.edge_traversals.size() != dom.num_edges()) {
        throw DomainError("glue_edges: gamma must be accumulated first");
    }
    const int d = dom.dim();
    s.glue_open.assign(dom.num_edges(), false);
    dom.for_each_forward_edge([&](VertexId v, int a, VertexId u) {
        if (u == kSink) {
            return;
        }
        const EdgeId e = static_cast<EdgeId>(v) * d + a;
        if (s.edge_traversals[e] > 0) {
            s.glue_open[e] = true;
            return;
        }
        const double amp = std::sqrt(2.0 * s.gamma[v]) * std::sqrt(2.0 * s.gamma[u]);
        if (amp > 0.0 && uniform01(rng) >= std::exp(-glue_coefficient * amp)) {
            s.glue_open[e] = true;
        }
    });
}

/// Loop indices partitioned into vertex-sharing chains; label = smallest loop index in the chain.
inline std::vector<std::uint32_t> loop_chain_clusters(std::span<const DiscreteLoop> loops)
{
    UnionFind uf(loops.size());
    std::map<VertexId, std::uint32_t> first;
    for (std::size_t i = 0; i < loops.size(); ++i) {
        for (VertexId v : loops[i].vertices) {
            const auto [it, inserted] = first.emplace(v, static_cast<std::uint32_t>(i));
            if (!inserted) {
                uf.unite(it->second, static_cast<std::uint32_t>(i));
            }
        }
    }
    std::vector<std::uint32_t> label(loops.size());
    std::map<std::uint32_t, std::uint32_t> root_min;
    for (std::size_t i = 0; i < loops.size(); ++i) {
        const auto r = uf.find(static_cast<std::uint32_t>(i));
        root_min.emplace(r, static_cast<std::uint32_t>(i));
        label[i] = root_min[r];
    }
    return label;
}

/// Debug dump, one line per loop: root, length, vertex sequence.
inline void write_loops(std::ostream& os, std::span<const DiscreteLoop> loops)
{
    for (const auto& l : loops) {
        os << l.root << ' ' << l.length;
        for (VertexId v : l.steps) {
            os << ' ' << v;
        }
        os << '\n';
    }
}

} // namespace cable

#endif
