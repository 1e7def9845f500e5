#ifndef CABLE_SPECTRAL_HPP
#define CABLE_SPECTRAL_HPP

// Dirichlet eigenbasis of the graph Laplacian on a box Lambda_N.
//
// On a side of M = 2N+1 sites the 1-d Dirichlet Laplacian (2 on the diagonal,
// -1 off it) has orthonormal eigenvectors
//     S[j][k] = sqrt(2/(M+1)) sin(pi (j+1)(k+1) / (M+1)),
// with eigenvalues mu_k = 2 (1 - cos(pi (k+1) / (M+1))). The d-dimensional
// Laplacian L (degree 2d minus adjacency) is the Kronecker sum, so a mode
// k = (k_1..k_d) has eigenvalue sum_i mu_{k_i} and eigenvector prod_i S[.][k_i].
// Arrays over the box are stored in vertex-id order (first axis most significant).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "cable/lattice.hpp"

namespace cable {

class SpectralBasis {
public:
    explicit SpectralBasis(const BoxSpec& spec)
        : spec_(spec), m_(spec.width()), size_(spec.vertex_count())
    {
        if (spec.d < 1 || spec.N < 1) {
            throw DomainError("SpectralBasis: need d >= 1 and N >= 1");
        }
        const double h = std::numbers::pi / static_cast<double>(m_ + 1);
        const double norm = std::sqrt(2.0 / static_cast<double>(m_ + 1));
        sine_.resize(static_cast<std::size_t>(m_) * m_);
        sine_sq_.resize(sine_.size());
        for (int j = 0; j < m_; ++j) {
            for (int k = 0; k < m_; ++k) {
                const double s = norm * std::sin(h * (j + 1) * (k + 1));
                sine_[j * m_ + k] = s;
                sine_sq_[j * m_ + k] = s * s;
            }
        }
        mu_.resize(m_);
        for (int k = 0; k < m_; ++k) {
            mu_[k] = 2.0 * (1.0 - std::cos(h * (k + 1)));
        }
    }

    [[nodiscard]] const BoxSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] int side() const noexcept { return m_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }

    /// Per-axis eigenvalue mu_k, k = 0..M-1.
    [[nodiscard]] std::span<const double> axis_eigenvalues() const noexcept { return mu_; }

    /// S[j][k]: value of axis mode k at axis position j (0-based, j = x + N).
    [[nodiscard]] double sine(int j, int k) const noexcept { return sine_[j * m_ + k]; }

    /// Laplacian eigenvalue of every mode, in mode-array order.
    [[nodiscard]] std::vector<double> eigenvalues() const
    {
        std::vector<double> lambda(size_, 0.0);
        std::size_t repeat = size_;
        for (int a = 0; a < spec_.d; ++a) {
            repeat /= static_cast<std::size_t>(m_);
            for (std::size_t i = 0; i < size_; ++i) {
                lambda[i] += mu_[(i / repeat) % static_cast<std::size_t>(m_)];
            }
        }
        return lambda;
    }

    /// In place: x <- (S (x) ... (x) S) x. S is symmetric and orthogonal, so this
    /// maps mode coefficients to site values and back.
    void synthesize(std::span<double> x, std::vector<double>& scratch) const { apply(sine_, x, scratch); }

    /// In place: x <- (S∘S (x) ... (x) S∘S) x, with S∘S the elementwise square.
    void synthesize_squared(std::span<double> x, std::vector<double>& scratch) const
    {
        apply(sine_sq_, x, scratch);
    }

private:
    void apply(const std::vector<double>& t, std::span<double> x, std::vector<double>& scratch) const
    {
        if (x.size() != size_) {
            throw DomainError("SpectralBasis: array size does not match the box");
        }
        const auto m = static_cast<std::size_t>(m_);
        // Along each axis, x viewed as [outer][m][inner]; inner runs are processed in
        // tiles so the m x tile working set stays in cache.
        constexpr std::size_t kTile = 256;
        scratch.resize(m * kTile);
        std::size_t inner = size_;
        for (int a = 0; a < spec_.d; ++a) {
            inner /= m;
            const std::size_t block = m * inner;
            for (std::size_t base = 0; base < size_; base += block) {
                for (std::size_t i0 = 0; i0 < inner; i0 += kTile) {
                    const std::size_t w = std::min(kTile, inner - i0);
                    std::fill(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(m * w), 0.0);
                    for (std::size_t k = 0; k < m; ++k) {
                        const double* in = x.data() + base + k * inner + i0;
                        for (std::size_t j = 0; j < m; ++j) {
                            const double c = t[j * m + k];
                            double* out = scratch.data() + j * w;
                            for (std::size_t i = 0; i < w; ++i) {
                                out[i] += c * in[i];
                            }
                        }
                    }
                    for (std::size_t j = 0; j < m; ++j) {
                        std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(j * w),
                                  scratch.begin() + static_cast<std::ptrdiff_t>((j + 1) * w),
                                  x.begin() + static_cast<std::ptrdiff_t>(base + j * inner + i0));
                    }
                }
            }
        }
    }

    BoxSpec spec_;
    int m_;
    std::size_t size_;
    std::vector<double> sine_;
    std::vector<double> sine_sq_;
    std::vector<double> mu_;
};

} // namespace cable

#endif
