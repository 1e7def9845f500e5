#ifndef CABLE_UNION_FIND_HPP
#define CABLE_UNION_FIND_HPP

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace cable {

// Weighted quick-union with path halving.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0u); }

    [[nodiscard]] std::size_t size() const noexcept { return parent_.size(); }

    std::uint32_t find(std::uint32_t i) noexcept
    {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    /// Returns true if a and b were in different sets.
    bool unite(std::uint32_t a, std::uint32_t b) noexcept
    {
        a = find(a);
        b = find(b);
        if (a == b) {
            return false;
        }
        if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) {
            std::swap(a, b);
        }
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    bool same(std::uint32_t a, std::uint32_t b) noexcept { return find(a) == find(b); }

    [[nodiscard]] std::uint32_t set_size(std::uint32_t i) noexcept { return size_[find(i)]; }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

} // namespace cable

#endif
