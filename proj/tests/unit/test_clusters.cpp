#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "cable/clusters.hpp"
#include "cable/gff.hpp"
#include "cable/green.hpp"
#include "cable/stats.hpp"
#include "oracles/oracles.hpp"

using namespace cable;

namespace {

EdgeMarks random_marks(const LatticeDomain& dom, double p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(p);
    EdgeMarks m(dom.num_edges());
    for (std::size_t e = 0; e < m.size(); ++e) {
        m[e] = b(rng);
    }
    return m;
}

// Canonical relabelling: first occurrence order over vertex ids.
std::vector<std::uint32_t> canonical(const std::vector<std::uint32_t>& label)
{
    std::map<std::uint32_t, std::uint32_t> map;
    std::vector<std::uint32_t> out(label.size());
    for (std::size_t v = 0; v < label.size(); ++v) {
        out[v] = map.emplace(label[v], static_cast<std::uint32_t>(map.size())).first->second;
    }
    return out;
}

void check_against_bfs(const LatticeDomain& dom, const EdgeMarks& open)
{
    const auto rep = extract_clusters(dom, open);
    const auto bfs = oracle::bfs_components(dom, open);
    ASSERT_EQ(canonical(rep.label), canonical(bfs));
    // Already canonical: labels are numbered by minimal vertex.
    EXPECT_EQ(rep.label, canonical(rep.label));

    std::vector<std::uint32_t> sizes(rep.count(), 0);
    const int d = dom.dim();
    std::vector<std::vector<int>> lo(rep.count(), std::vector<int>(d, 1 << 20));
    std::vector<std::vector<int>> hi(rep.count(), std::vector<int>(d, -(1 << 20)));
    std::vector<VertexId> minv(rep.count(), kSink);
    for (VertexId v = 0; v < dom.size(); ++v) {
        const auto l = rep.label[v];
        ++sizes[l];
        minv[l] = std::min(minv[l], v);
        const auto p = dom.point(v);
        for (int a = 0; a < d; ++a) {
            lo[l][a] = std::min(lo[l][a], p[a]);
            hi[l][a] = std::max(hi[l][a], p[a]);
        }
    }
    EXPECT_EQ(sizes, rep.sizes);
    EXPECT_EQ(minv, rep.min_vertex);
    std::size_t large = 0;
    const auto box = dom.box();
    for (std::size_t l = 0; l < rep.count(); ++l) {
        int diam = 0;
        for (int a = 0; a < d; ++a) {
            diam = std::max(diam, hi[l][a] - lo[l][a]);
        }
        EXPECT_EQ(rep.diameters[l], diam);
        if (box) {
            EXPECT_LE(diam, 2 * box->N);
            large += diam > box->N / 2.0;
        }
    }
    if (box) {
        EXPECT_EQ(large_cluster_count(rep, *box), large);
    }
    dom.for_each_forward_edge([&](VertexId v, int a, VertexId u) {
        if (u != kSink && open[static_cast<EdgeId>(v) * d + a]) {
            EXPECT_EQ(rep.label[v], rep.label[u]);
        }
    });
    // Double counting: sum_n |C_n|^2 = sum_x |C(x)|.
    EXPECT_EQ(cluster_square_sum(rep), vertex_cluster_size_sum(rep));
    EXPECT_DOUBLE_EQ(cluster_power_sum(rep, 3), [&] {
        double s = 0;
        for (auto l : rep.label) {
            s += std::pow(rep.sizes[l], 2);
        }
        return s;
    }());
}

} // namespace

TEST(Clusters, AllClosedGivesSingletons)
{
    const auto dom = build_box({2, 2});
    const auto rep = extract_clusters(dom, EdgeMarks(dom.num_edges(), false));
    EXPECT_EQ(rep.count(), dom.size());
    for (VertexId v = 0; v < dom.size(); ++v) {
        const auto c = cluster_of(rep, v);
        EXPECT_EQ(c.size, 1u);
        EXPECT_EQ(c.min_vertex, v);
        EXPECT_EQ(c.diameter, 0);
        EXPECT_EQ(cluster_members(rep, c.label), std::vector<VertexId>{v});
    }
    EXPECT_EQ(large_cluster_count(rep, BoxSpec{2, 2}), 0u);
}

TEST(Clusters, AllOpenSquare)
{
    const auto dom = build_box({2, 1});
    const auto rep = extract_clusters(dom, EdgeMarks(dom.num_edges(), true));
    ASSERT_EQ(rep.count(), 1u);
    EXPECT_EQ(rep.sizes[0], 9u);
    EXPECT_EQ(rep.diameters[0], 2);
    EXPECT_EQ(large_cluster_count(rep, BoxSpec{2, 1}), 1u);
    EXPECT_EQ(max_cluster_size(rep), 9u);
}

TEST(Clusters, MatchesBreadthFirstSearch)
{
    std::uint64_t seed = 1;
    for (const BoxSpec spec : {BoxSpec{1, 6}, BoxSpec{2, 2}, BoxSpec{2, 10}, BoxSpec{3, 3}, BoxSpec{4, 2}}) {
        const auto dom = build_box(spec);
        for (double p : {0.0, 0.2, 0.5, 0.8, 1.0}) {
            for (int rep = 0; rep < 5; ++rep) {
                check_against_bfs(dom, random_marks(dom, p, seed++));
            }
        }
    }
    // Explicit point sets take the generic coordinate path.
    const auto l = LatticeDomain::from_points(2, {{0, 0}, {1, 0}, {1, 1}, {2, 1}, {2, 2}, {3, 2}});
    for (double p : {0.3, 0.7, 1.0}) {
        check_against_bfs(l, random_marks(l, p, seed++));
    }
}

TEST(Clusters, ExcludedSingletons)
{
    const auto dom = build_path(3);
    EdgeMarks open(dom.num_edges(), false);
    open[dom.edge_of(0, 0)] = true;  // 1 -- 2 on the path {1, 2, 3}
    const std::vector<char> visited{1, 0, 0};
    const auto rep = extract_clusters(dom, open, visited);
    ASSERT_EQ(rep.count(), 2u);
    EXPECT_EQ(rep.sizes[0], 2u);
    EXPECT_EQ(rep.excluded[0], 0);
    EXPECT_EQ(rep.excluded[1], 1);
    EXPECT_DOUBLE_EQ(cluster_power_sum(rep, 1, false), 2.0);
    EXPECT_DOUBLE_EQ(cluster_power_sum(rep, 1, true), 3.0);
    EXPECT_THROW(extract_clusters(dom, open, std::vector<char>{1}), DomainError);
    EXPECT_THROW(extract_clusters(dom, EdgeMarks(2)), DomainError);
    EXPECT_THROW((void)cluster_of(rep, 3), DomainError);
}

TEST(Clusters, SeparatedBoxGeometry)
{
    const auto dom = build_box({3, 4});
    const auto [b1, b2] = separated_box_pair({3, 4});
    const auto v1 = box_vertices(dom, b1);
    const auto v2 = box_vertices(dom, b2);
    EXPECT_EQ(v1.size(), 27u);
    EXPECT_EQ(v2.size(), 27u);
    for (VertexId v : v1) {
        const auto p = dom.point(v);
        EXPECT_GE(p[0], -3);
        EXPECT_LE(p[0], -1);
    }
    const auto dom3 = build_box({2, 3});
    const auto [c1, c2] = separated_box_pair({2, 3});
    EXPECT_EQ(box_vertices(dom3, c1).size(), 2u);
    EXPECT_EQ(box_vertices(dom3, c2).size(), 2u);
    const auto dom2 = build_box({2, 2});
    const auto [d1, d2] = separated_box_pair({2, 2});
    EXPECT_EQ(box_vertices(dom2, d1), std::vector<VertexId>{*dom2.index_of(std::vector<int>{-1, 0})});
    EXPECT_EQ(box_vertices(dom2, d2), std::vector<VertexId>{*dom2.index_of(std::vector<int>{1, 0})});

    EXPECT_THROW(box_vertices(dom2, ShiftedBox{{2.5, 0.0}, 1.0}), DomainError);
    EXPECT_THROW(box_vertices(dom2, ShiftedBox{{0.0}, 1.0}), DomainError);
}

TEST(Clusters, BoxIntersectionHandCases)
{
    const auto dom = build_box({1, 4});
    const ShiftedBox b1{{-2.5}, 0.5};  // {-3, -2}
    const ShiftedBox b2{{2.0}, 1.0};   // {1, 2, 3}
    const auto closed = extract_clusters(dom, EdgeMarks(dom.num_edges(), false));
    const auto none = box_intersections(dom, closed, b1, b2);
    EXPECT_EQ(none.x, 0u);
    EXPECT_EQ(none.meeting_both, 0u);
    EXPECT_TRUE(none.clusters.empty());

    const auto open = extract_clusters(dom, EdgeMarks(dom.num_edges(), true));
    const auto one = box_intersections(dom, open, b1, b2);
    EXPECT_EQ(one.x, 6u);
    EXPECT_EQ(one.meeting_both, 1u);
    ASSERT_EQ(one.clusters.size(), 1u);
    EXPECT_EQ(one.clusters[0].in_first, 2u);
    EXPECT_EQ(one.clusters[0].in_second, 3u);
}

TEST(Clusters, BoxIntersectionMatchesBruteForce)
{
    std::uint64_t seed = 100;
    for (const BoxSpec spec : {BoxSpec{2, 4}, BoxSpec{2, 8}, BoxSpec{3, 4}}) {
        const auto dom = build_box(spec);
        const auto [b1, b2] = separated_box_pair(spec);
        for (double p : {0.3, 0.5, 0.6, 0.9}) {
            const auto rep = extract_clusters(dom, random_marks(dom, p, seed++));
            EXPECT_EQ(box_intersections(dom, rep, b1, b2).x, oracle::brute_x(dom, rep.label, b1, b2));
        }
    }
}

TEST(Clusters, ExpectedXFromConnectionProbabilities)
{
    // E[X] = sum over (x1, x2) in B1 x B2 of P[x1 <-> x2], with the arcsin two-point function.
    const BoxSpec spec{2, 4};
    const auto dom = build_box(spec);
    const GreenTable g(dom);
    const DenseGffSampler sampler(g);
    const auto [b1, b2] = separated_box_pair(spec);
    double expected = 0.0;
    for (VertexId x : box_vertices(dom, b1)) {
        for (VertexId y : box_vertices(dom, b2)) {
            expected += connection_probability(g, x, y);
        }
    }
    stats::Moments x;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        Rng rng = make_stream(3, StreamTag::gff, i);
        const auto phi = sampler(rng);
        const auto rep = extract_clusters(dom, mark_edges(dom, phi, EdgeCoupling{}, rng));
        x.add(static_cast<double>(box_intersections(dom, rep, b1, b2).x));
    }
    EXPECT_LE(std::abs(stats::z_score(x.mean(), expected, x.stderr_mean())), 4.0)
        << x.mean() << " vs " << expected;
}
