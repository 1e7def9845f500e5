#ifndef CABLE_CLUSTERS_HPP
#define CABLE_CLUSTERS_HPP

// Connected clusters of the open-edge graph on interior vertices, and the
// statistics used for the high-dimensional cluster claims.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cable/error.hpp"
#include "cable/lattice.hpp"
#include "cable/union_find.hpp"

namespace cable {

/// Open/closed mark per edge id; size LatticeDomain::num_edges().
using EdgeMarks = std::vector<bool>;

struct ClusterReport {
    std::vector<std::uint32_t> label;     // per vertex; clusters numbered by their minimal vertex
    std::vector<std::uint32_t> sizes;     // |C_n|
    std::vector<int> diameters;           // L-infinity diameter
    std::vector<VertexId> min_vertex;     // representative (smallest id) of C_n
    std::vector<char> excluded;           // flagged singletons (e.g. unvisited in the loop route)

    [[nodiscard]] std::size_t count() const noexcept { return sizes.size(); }
};

/// Union-find over open interior-interior edges. Sink cables never join a cluster.
/// `visited`, if given, flags vertices with visited[v]==0 whose cluster is a singleton
/// as excluded; they are still labelled.
inline ClusterReport extract_clusters(const LatticeDomain& dom, const EdgeMarks& open,
                                      std::span<const char> visited = {})
{
    if (open.size() != dom.num_edges()) {
        throw DomainError("extract_clusters: marks must cover all " + std::to_string(dom.num_edges()) + " edges");
    }
    const std::size_t n = dom.size();
    const int d = dom.dim();
    UnionFind uf(n);
    dom.for_each_forward_edge([&](VertexId v, int a, VertexId u) {
        if (u != kSink && open[static_cast<EdgeId>(v) * d + a]) {
            uf.unite(v, u);
        }
    });

    ClusterReport rep;
    rep.label.resize(n);
    std::vector<std::uint32_t> root_label(n, std::numeric_limits<std::uint32_t>::max());
    for (std::size_t v = 0; v < n; ++v) {
        const std::uint32_t r = uf.find(static_cast<std::uint32_t>(v));
        if (root_label[r] == std::numeric_limits<std::uint32_t>::max()) {
            root_label[r] = static_cast<std::uint32_t>(rep.sizes.size());
            rep.sizes.push_back(0);
            rep.min_vertex.push_back(static_cast<VertexId>(v));
        }
        const std::uint32_t l = root_label[r];
        rep.label[v] = l;
        ++rep.sizes[l];
    }
    root_label = {};

    const std::size_t n0 = rep.sizes.size();
    rep.diameters.assign(n0, 0);
    std::vector<int> lo(n0);
    std::vector<int> hi(n0);
    std::vector<int> c(n);
    for (int a = 0; a < d; ++a) {
        if (dom.is_block()) {
            // Coordinates along axis a repeat in runs of stride, cycling through the width.
            std::size_t stride = 1;
            for (int b = d - 1; b > a; --b) {
                stride *= static_cast<std::size_t>(dom.widths()[b]);
            }
            const int w = dom.widths()[a];
            const int base = dom.lower_corner()[a];
            std::size_t v = 0;
            while (v < n) {
                for (int off = 0; off < w && v < n; ++off) {
                    std::fill_n(c.begin() + static_cast<std::ptrdiff_t>(v), stride, base + off);
                    v += stride;
                }
            }
        } else {
            for (std::size_t v = 0; v < n; ++v) {
                c[v] = dom.coord(static_cast<VertexId>(v), a);
            }
        }
        std::fill(lo.begin(), lo.end(), std::numeric_limits<int>::max());
        std::fill(hi.begin(), hi.end(), std::numeric_limits<int>::min());
        for (std::size_t v = 0; v < n; ++v) {
            const std::uint32_t l = rep.label[v];
            lo[l] = std::min(lo[l], c[v]);
            hi[l] = std::max(hi[l], c[v]);
        }
        for (std::size_t l = 0; l < n0; ++l) {
            rep.diameters[l] = std::max(rep.diameters[l], hi[l] - lo[l]);
        }
    }

    rep.excluded.assign(n0, 0);
    if (!visited.empty()) {
        if (visited.size() != n) {
            throw DomainError("extract_clusters: visited mask has wrong size");
        }
        for (std::size_t v = 0; v < n; ++v) {
            const std::uint32_t l = rep.label[v];
            if (!visited[v] && rep.sizes[l] == 1) {
                rep.excluded[l] = 1;
            }
        }
    }
    return rep;
}

struct ClusterSummary {
    std::uint32_t label;
    std::uint32_t size;
    int diameter;
    VertexId min_vertex;
};

/// C(x): the cluster containing interior vertex x.
inline ClusterSummary cluster_of(const ClusterReport& rep, VertexId x)
{
    if (x >= rep.label.size()) {
        throw DomainError("cluster_of: unknown vertex " + std::to_string(x));
    }
    const std::uint32_t l = rep.label[x];
    return {l, rep.sizes[l], rep.diameters[l], rep.min_vertex[l]};
}

inline std::vector<VertexId> cluster_members(const ClusterReport& rep, std::uint32_t label)
{
    std::vector<VertexId> out;
    for (std::size_t v = 0; v < rep.label.size(); ++v) {
        if (rep.label[v] == label) {
            out.push_back(static_cast<VertexId>(v));
        }
    }
    return out;
}

/// Axis-aligned cube of lattice points p with |p_i - center_i| <= half_width.
struct ShiftedBox {
    std::vector<double> center;
    double half_width = 0.0;
};

/// The two boxes Lambda_{N/4} shifted by -N/2 and +N/2 along the first axis.
inline std::pair<ShiftedBox, ShiftedBox> separated_box_pair(const BoxSpec& spec)
{
    std::vector<double> c(spec.d, 0.0);
    const double shift = spec.N / 2.0;
    const double hw = spec.N / 4.0;
    ShiftedBox b1{c, hw};
    ShiftedBox b2{c, hw};
    b1.center[0] = -shift;
    b2.center[0] = shift;
    return {b1, b2};
}

inline std::vector<VertexId> box_vertices(const LatticeDomain& dom, const ShiftedBox& box)
{
    const int d = dom.dim();
    if (static_cast<int>(box.center.size()) != d || box.half_width < 0) {
        throw DomainError("box_vertices: box has wrong dimension or negative width");
    }
    std::vector<int> lo(d);
    std::vector<int> hi(d);
    for (int a = 0; a < d; ++a) {
        lo[a] = static_cast<int>(std::ceil(box.center[a] - box.half_width - 1e-12));
        hi[a] = static_cast<int>(std::floor(box.center[a] + box.half_width + 1e-12));
        if (hi[a] < lo[a]) {
            return {};
        }
    }
    std::vector<VertexId> out;
    std::vector<int> p = lo;
    while (true) {
        const auto id = dom.index_of(p);
        if (!id) {
            throw DomainError("box_intersections: box leaves the domain");
        }
        out.push_back(*id);
        int a = d - 1;
        for (; a >= 0; --a) {
            if (++p[a] <= hi[a]) {
                break;
            }
            p[a] = lo[a];
        }
        if (a < 0) {
            break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct BoxPairCount {
    std::uint32_t label;
    std::uint64_t in_first;
    std::uint64_t in_second;
};

struct BoxIntersection {
    std::vector<BoxPairCount> clusters;  // clusters meeting both boxes, by label
    std::uint64_t x = 0;                 // sum_n |C_n ∩ B1| |C_n ∩ B2|
    std::uint64_t meeting_both = 0;
};

inline BoxIntersection box_intersections(const LatticeDomain& dom, const ClusterReport& rep,
                                         const ShiftedBox& b1, const ShiftedBox& b2)
{
    std::map<std::uint32_t, std::uint64_t> first;
    for (VertexId v : box_vertices(dom, b1)) {
        ++first[rep.label[v]];
    }
    std::map<std::uint32_t, std::uint64_t> second;
    for (VertexId v : box_vertices(dom, b2)) {
        ++second[rep.label[v]];
    }
    BoxIntersection out;
    for (const auto& [label, c1] : first) {
        const auto it = second.find(label);
        if (it == second.end()) {
            continue;
        }
        out.clusters.push_back({label, c1, it->second});
        out.x += c1 * it->second;
        ++out.meeting_both;
    }
    return out;
}

/// Number of clusters whose L-infinity diameter exceeds `threshold`.
inline std::size_t large_cluster_count(const ClusterReport& rep, double threshold)
{
    return static_cast<std::size_t>(std::count_if(rep.diameters.begin(), rep.diameters.end(),
                                                  [&](int diam) { return diam > threshold; }));
}

inline std::size_t large_cluster_count(const ClusterReport& rep, const BoxSpec& spec)
{
    return large_cluster_count(rep, spec.N / 2.0);
}

/// sum_n |C_n|^k over counted clusters.
inline double cluster_power_sum(const ClusterReport& rep, int k, bool include_excluded = true)
{
    double s = 0.0;
    for (std::size_t l = 0; l < rep.count(); ++l) {
        if (include_excluded || !rep.excluded[l]) {
            s += std::pow(static_cast<double>(rep.sizes[l]), k);
        }
    }
    return s;
}

inline std::uint64_t cluster_square_sum(const ClusterReport& rep)
{
    std::uint64_t s = 0;
    for (auto c : rep.sizes) {
        s += static_cast<std::uint64_t>(c) * c;
    }
    return s;
}

/// sum_x |C(x)|, computed vertex by vertex.
inline std::uint64_t vertex_cluster_size_sum(const ClusterReport& rep)
{
    std::uint64_t s = 0;
    for (auto l : rep.label) {
        s += rep.sizes[l];
    }
    return s;
}

inline std::uint32_t max_cluster_size(const ClusterReport& rep)
{
    return rep.sizes.empty() ? 0 : *std::max_element(rep.sizes.begin(), rep.sizes.end());
}

} // namespace cable

#endif
