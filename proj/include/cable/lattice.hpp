#ifndef CABLE_LATTICE_HPP
#define CABLE_LATTICE_HPP

// Finite subdomains of Z^d and the edge structure of their cable graph.
//
// Interior vertices get dense ids in lexicographic order of their coordinates
// (first axis most significant). All boundary points collapse into one sink.
//
// Edge ids: the edge leaving interior vertex v in the +axis direction has id
// v*d + axis, whether it ends at an interior vertex or at the boundary; this is
// lexicographic in (lower endpoint, axis). Edges whose lower endpoint is a
// boundary point follow, numbered from size()*d upwards.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "cable/error.hpp"

namespace cable {

using VertexId = std::uint32_t;
using EdgeId = std::size_t;

inline constexpr VertexId kSink = std::numeric_limits<VertexId>::max();
inline constexpr std::size_t kDefaultVertexBudget = 50'000'000;

/// Half-width box Lambda_N = [-N, N]^d in Z^d.
struct BoxSpec {
    int d = 1;
    int N = 1;

    [[nodiscard]] int width() const noexcept { return 2 * N + 1; }

    [[nodiscard]] std::size_t vertex_count() const noexcept
    {
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) {
            n *= static_cast<std::size_t>(width());
        }
        return n;
    }

    friend bool operator==(const BoxSpec&, const BoxSpec&) = default;
};

struct Neighbor {
    VertexId vertex;  // kSink when the neighbour lies on the boundary
    EdgeId edge;
    int axis;
    int sign;  // +1 or -1
};

struct Edge {
    VertexId lower;  // endpoint with smaller coordinate along `axis`, or kSink
    VertexId upper;
    int axis;
};

class LatticeDomain {
public:
    /// Rectangular block: points p with lo[i] <= p[i] < lo[i] + width[i].
    static LatticeDomain block(std::vector<int> lo, std::vector<int> width,
                               std::size_t vertex_budget = kDefaultVertexBudget)
    {
        if (lo.empty() || lo.size() != width.size()) {
            throw DomainError("block: lo/width must be non-empty and of equal length");
        }
        LatticeDomain dom;
        dom.d_ = static_cast<int>(lo.size());
        std::size_t n = 1;
        for (int w : width) {
            if (w < 1) {
                throw DomainError("block: every width must be >= 1");
            }
            if (n > vertex_budget / static_cast<std::size_t>(w)) {
                throw CapacityError("domain exceeds vertex budget of " + std::to_string(vertex_budget));
            }
            n *= static_cast<std::size_t>(w);
        }
        if (n > std::numeric_limits<VertexId>::max() - 1) {
            throw CapacityError("domain too large for 32-bit vertex ids");
        }
        dom.size_ = n;
        dom.lo_ = std::move(lo);
        dom.width_ = std::move(width);
        dom.stride_.assign(dom.d_, 1);
        for (int a = dom.d_ - 2; a >= 0; --a) {
            dom.stride_[a] = dom.stride_[a + 1] * static_cast<std::size_t>(dom.width_[a + 1]);
        }
        dom.lower_offset_.assign(dom.d_ + 1, dom.size_ * static_cast<std::size_t>(dom.d_));
        for (int a = 0; a < dom.d_; ++a) {
            dom.lower_offset_[a + 1] = dom.lower_offset_[a] + dom.size_ / static_cast<std::size_t>(dom.width_[a]);
        }
        return dom;
    }

    /// Explicit finite vertex set (oracle fixtures). Must be nearest-neighbour connected.
    static LatticeDomain from_points(int d, std::vector<std::vector<int>> points)
    {
        if (d < 1 || points.empty()) {
            throw DomainError("from_points: need d >= 1 and at least one point");
        }
        for (const auto& p : points) {
            if (static_cast<int>(p.size()) != d) {
                throw DomainError("from_points: point of wrong dimension");
            }
        }
        std::sort(points.begin(), points.end());
        points.erase(std::unique(points.begin(), points.end()), points.end());

        LatticeDomain dom;
        dom.d_ = d;
        dom.size_ = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            dom.index_.emplace(points[i], static_cast<VertexId>(i));
            dom.coords_.insert(dom.coords_.end(), points[i].begin(), points[i].end());
        }
        const std::size_t slots = dom.size_ * 2 * static_cast<std::size_t>(d);
        dom.nbr_.assign(slots, kSink);
        dom.nbr_edge_.assign(slots, 0);
        EdgeId next_lower = dom.size_ * static_cast<std::size_t>(d);
        for (std::size_t v = 0; v < dom.size_; ++v) {
            std::vector<int> q = points[v];
            for (int a = 0; a < d; ++a) {
                for (int s : {+1, -1}) {
                    q[a] += s;
                    const auto it = dom.index_.find(q);
                    q[a] -= s;
                    const std::size_t slot = v * 2 * d + 2 * a + (s > 0 ? 0 : 1);
                    const VertexId u = it == dom.index_.end() ? kSink : it->second;
                    dom.nbr_[slot] = u;
                    if (s > 0) {
                        dom.nbr_edge_[slot] = v * d + a;
                    } else if (u != kSink) {
                        dom.nbr_edge_[slot] = static_cast<EdgeId>(u) * d + a;
                    } else {
                        dom.nbr_edge_[slot] = next_lower++;
                    }
                }
            }
        }
        dom.num_edges_ = next_lower;
        if (!dom.is_connected()) {
            throw DomainError("from_points: vertex set is not nearest-neighbour connected");
        }
        return dom;
    }

    [[nodiscard]] int dim() const noexcept { return d_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] bool is_block() const noexcept { return !width_.empty(); }

    /// The BoxSpec this domain was built from, if it is a centred cube.
    [[nodiscard]] std::optional<BoxSpec> box() const
    {
        if (!is_block()) {
            return std::nullopt;
        }
        const int w = width_[0];
        for (int a = 0; a < d_; ++a) {
            if (width_[a] != w || w % 2 == 0 || lo_[a] != -(w - 1) / 2) {
                return std::nullopt;
            }
        }
        if (w < 3) {
            return std::nullopt;
        }
        return BoxSpec{d_, (w - 1) / 2};
    }

    [[nodiscard]] std::span<const int> widths() const noexcept { return width_; }
    [[nodiscard]] std::span<const int> lower_corner() const noexcept { return lo_; }

    [[nodiscard]] std::size_t num_edges() const noexcept
    {
        return is_block() ? lower_offset_.back() : num_edges_;
    }

    /// Number of edge ids of the form v*d + axis.
    [[nodiscard]] std::size_t num_forward_edges() const noexcept { return size_ * static_cast<std::size_t>(d_); }

    [[nodiscard]] int coord(VertexId v, int axis) const
    {
        if (is_block()) {
            return lo_[axis] + static_cast<int>((v / stride_[axis]) % static_cast<std::size_t>(width_[axis]));
        }
        return coords_[static_cast<std::size_t>(v) * d_ + axis];
    }

    [[nodiscard]] std::vector<int> point(VertexId v) const
    {
        check_vertex(v);
        std::vector<int> p(d_);
        for (int a = 0; a < d_; ++a) {
            p[a] = coord(v, a);
        }
        return p;
    }

    [[nodiscard]] std::optional<VertexId> index_of(std::span<const int> p) const
    {
        if (static_cast<int>(p.size()) != d_) {
            return std::nullopt;
        }
        if (is_block()) {
            std::size_t id = 0;
            for (int a = 0; a < d_; ++a) {
                const int off = p[a] - lo_[a];
                if (off < 0 || off >= width_[a]) {
                    return std::nullopt;
                }
                id += static_cast<std::size_t>(off) * stride_[a];
            }
            return static_cast<VertexId>(id);
        }
        const auto it = index_.find(std::vector<int>(p.begin(), p.end()));
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    [[nodiscard]] bool contains(std::span<const int> p) const { return index_of(p).has_value(); }

    /// Neighbour of v across direction dir = 2*axis + (0 for +, 1 for -); kSink if on the boundary.
    [[nodiscard]] VertexId neighbor(VertexId v, int dir) const
    {
        const int a = dir / 2;
        if (!is_block()) {
            return nbr_[static_cast<std::size_t>(v) * 2 * d_ + dir];
        }
        const int off = static_cast<int>((v / stride_[a]) % static_cast<std::size_t>(width_[a]));
        if (dir % 2 == 0) {
            return off + 1 < width_[a] ? static_cast<VertexId>(v + stride_[a]) : kSink;
        }
        return off > 0 ? static_cast<VertexId>(v - stride_[a]) : kSink;
    }

    [[nodiscard]] EdgeId edge_of(VertexId v, int dir) const
    {
        const int a = dir / 2;
        if (!is_block()) {
            return nbr_edge_[static_cast<std::size_t>(v) * 2 * d_ + dir];
        }
        if (dir % 2 == 0) {
            return static_cast<EdgeId>(v) * d_ + a;
        }
        const VertexId u = neighbor(v, dir);
        if (u != kSink) {
            return static_cast<EdgeId>(u) * d_ + a;
        }
        // Rank of v on the lower face of axis a: drop coordinate a from the mixed radix.
        const std::size_t high = v / (stride_[a] * static_cast<std::size_t>(width_[a]));
        const std::size_t low = v % stride_[a];
        return lower_offset_[a] + high * stride_[a] + low;
    }

    /// All 2d incident cable edges of interior vertex v.
    [[nodiscard]] std::vector<Neighbor> neighbors(VertexId v) const
    {
        check_vertex(v);
        std::vector<Neighbor> out;
        out.reserve(2 * static_cast<std::size_t>(d_));
        for (int dir = 0; dir < 2 * d_; ++dir) {
            out.push_back({neighbor(v, dir), edge_of(v, dir), dir / 2, dir % 2 == 0 ? 1 : -1});
        }
        return out;
    }

    /// Calls f(v, axis, u) for every edge id v*d + axis; u is kSink for boundary cables.
    template <class F>
    void for_each_forward_edge(F&& f) const
    {
        if (!is_block()) {
            for (std::size_t v = 0; v < size_; ++v) {
                for (int a = 0; a < d_; ++a) {
                    f(static_cast<VertexId>(v), a, nbr_[v * 2 * d_ + 2 * a]);
                }
            }
            return;
        }
        std::array<int, 64> off{};
        for (std::size_t v = 0; v < size_; ++v) {
            for (int a = 0; a < d_; ++a) {
                const VertexId u = off[a] + 1 < width_[a] ? static_cast<VertexId>(v + stride_[a]) : kSink;
                f(static_cast<VertexId>(v), a, u);
            }
            for (int a = d_ - 1; a >= 0; --a) {
                if (++off[a] < width_[a]) {
                    break;
                }
                off[a] = 0;
            }
        }
    }

    /// Full edge list in id order. Materialises O(|D| d) entries; meant for small domains.
    [[nodiscard]] std::vector<Edge> edges() const
    {
        std::vector<Edge> out(num_edges());
        for_each_forward_edge([&](VertexId v, int a, VertexId u) { out[static_cast<EdgeId>(v) * d_ + a] = {v, u, a}; });
        for (std::size_t v = 0; v < size_; ++v) {
            for (int a = 0; a < d_; ++a) {
                const int dir = 2 * a + 1;
                if (neighbor(static_cast<VertexId>(v), dir) == kSink) {
                    out[edge_of(static_cast<VertexId>(v), dir)] = {kSink, static_cast<VertexId>(v), a};
                }
            }
        }
        return out;
    }

    /// Lattice points at L1 distance exactly 1 from the interior, sorted.
    [[nodiscard]] std::vector<std::vector<int>> boundary() const
    {
        std::vector<std::vector<int>> out;
        for (std::size_t v = 0; v < size_; ++v) {
            for (int dir = 0; dir < 2 * d_; ++dir) {
                if (neighbor(static_cast<VertexId>(v), dir) == kSink) {
                    auto p = point(static_cast<VertexId>(v));
                    p[dir / 2] += dir % 2 == 0 ? 1 : -1;
                    out.push_back(std::move(p));
                }
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    [[nodiscard]] bool is_connected() const
    {
        if (size_ == 0) {
            return false;
        }
        std::vector<char> seen(size_, 0);
        std::queue<VertexId> queue;
        queue.push(0);
        seen[0] = 1;
        std::size_t count = 1;
        while (!queue.empty()) {
            const VertexId v = queue.front();
            queue.pop();
            for (int dir = 0; dir < 2 * d_; ++dir) {
                const VertexId u = neighbor(v, dir);
                if (u != kSink && !seen[u]) {
                    seen[u] = 1;
                    ++count;
                    queue.push(u);
                }
            }
        }
        return count == size_;
    }

    void check_vertex(VertexId v) const
    {
        if (v >= size_) {
            throw DomainError("unknown vertex id " + std::to_string(v));
        }
    }

private:
    LatticeDomain() = default;

    int d_ = 0;
    std::size_t size_ = 0;

    // block representation
    std::vector<int> lo_;
    std::vector<int> width_;
    std::vector<std::size_t> stride_;
    std::vector<std::size_t> lower_offset_;

    // explicit representation
    std::vector<int> coords_;
    std::map<std::vector<int>, VertexId> index_;
    std::vector<VertexId> nbr_;
    std::vector<EdgeId> nbr_edge_;
    std::size_t num_edges_ = 0;
};

inline LatticeDomain build_box(const BoxSpec& spec, std::size_t vertex_budget = kDefaultVertexBudget)
{
    if (spec.d < 1 || spec.N < 1) {
        throw DomainError("build_box: need d >= 1 and N >= 1");
    }
    if (spec.d > 64) {
        throw DomainError("build_box: dimension above 64 is not supported");
    }
    return LatticeDomain::block(std::vector<int>(spec.d, -spec.N), std::vector<int>(spec.d, spec.width()),
                                vertex_budget);
}

/// Interior {1..k} in Z, boundary {0, k+1}.
inline LatticeDomain build_path(int k)
{
    if (k < 1) {
        throw DomainError("build_path: need k >= 1");
    }
    return LatticeDomain::block({1}, {k});
}

} // namespace cable

#endif
