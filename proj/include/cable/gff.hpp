#ifndef CABLE_GFF_HPP
#define CABLE_GFF_HPP

// Cable-graph Gaussian free field: vertex values with covariance C = L^{-1}, plus
// the zero-crossing state of the Brownian bridge on every cable.
//
// With unit conductances a cable is a bridge of length 1 and unit diffusivity,
// so a bridge between same-sign values a and b avoids zero with probability
// 1 - exp(-2ab). Cables to the boundary end at 0 and are always closed.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cable/clusters.hpp"
#include "cable/error.hpp"
#include "cable/green.hpp"
#include "cable/lattice.hpp"
#include "cable/rng.hpp"
#include "cable/spectral.hpp"

namespace cable {

struct EdgeCoupling {
    double zero_hit_coefficient = 2.0;

    void validate() const
    {
        if (!(zero_hit_coefficient > 0.0) || !std::isfinite(zero_hit_coefficient)) {
            throw DomainError("EdgeCoupling: zero_hit_coefficient must be positive and finite");
        }
    }
};

struct FieldSample {
    std::vector<double> phi;
    EdgeMarks edge_open;
    std::uint64_t stream = 0;
};

/// phi = chol(C) z, with the factorisation of C = G/(2d) computed once.
class DenseGffSampler {
public:
    explicit DenseGffSampler(const GreenTable& g)
    {
        const Eigen::MatrixXd c = g.dense() / (2.0 * g.dim());
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("sample_gff_dense: covariance is not positive definite");
        }
        factor_ = llt.matrixL();
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(factor_.rows()); }

    [[nodiscard]] std::vector<double> operator()(Rng& rng) const
    {
        std::normal_distribution<double> normal;
        Eigen::VectorXd z(factor_.rows());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z[i] = normal(rng);
        }
        const Eigen::VectorXd phi = factor_.triangularView<Eigen::Lower>() * z;
        return {phi.data(), phi.data() + phi.size()};
    }

private:
    Eigen::MatrixXd factor_;
};

inline std::vector<double> sample_gff_dense(const DenseGffSampler& sampler, Rng& rng) { return sampler(rng); }

/// phi = sum_k z_k / sqrt(lambda_k) psi_k, by one separable sine synthesis.
class SpectralGffSampler {
public:
    explicit SpectralGffSampler(const BoxSpec& spec) : basis_(spec)
    {
        scale_ = basis_.eigenvalues();
        for (auto& s : scale_) {
            s = 1.0 / std::sqrt(s);
        }
    }

    [[nodiscard]] const SpectralBasis& basis() const noexcept { return basis_; }
    [[nodiscard]] std::size_t size() const noexcept { return basis_.size(); }

    /// Field from given standard-normal mode coefficients.
    void from_modes(std::span<const double> z, std::vector<double>& phi, std::vector<double>& scratch) const
    {
        if (z.size() != size()) {
            throw DomainError("sample_gff_box_spectral: wrong number of modes");
        }
        phi.resize(size());
        for (std::size_t i = 0; i < phi.size(); ++i) {
            phi[i] = z[i] * scale_[i];
        }
        basis_.synthesize(phi, scratch);
    }

    void operator()(Rng& rng, std::vector<double>& phi, std::vector<double>& scratch) const
    {
        std::normal_distribution<double> normal;
        phi.resize(size());
        for (std::size_t i = 0; i < phi.size(); ++i) {
            phi[i] = normal(rng) * scale_[i];
        }
        basis_.synthesize(phi, scratch);
    }

    [[nodiscard]] std::vector<double> operator()(Rng& rng) const
    {
        std::vector<double> phi;
        std::vector<double> scratch;
        (*this)(rng, phi, scratch);
        return phi;
    }

private:
    SpectralBasis basis_;
    std::vector<double> scale_;
};

inline std::vector<double> sample_gff_box_spectral(const SpectralGffSampler& sampler, Rng& rng)
{
    return sampler(rng);
}

/// Open iff both endpoints are interior with the same sign and the bridge between
/// them avoids zero: Uniform(0,1) >= exp(-kappa |phi_x| |phi_y|).
inline void mark_edges(const LatticeDomain& dom, std::span<const double> phi, const EdgeCoupling& coupling,
                       Rng& rng, EdgeMarks& open)
{
    if (phi.size() != dom.size()) {
        throw DomainError("mark_edges: field size does not match domain");
    }
    const int d = dom.dim();
    const double kappa = coupling.zero_hit_coefficient;
    open.assign(dom.num_edges(), false);
    dom.for_each_forward_edge([&](VertexId v, int a, VertexId u) {
        if (u == kSink) {
            return;
        }
        const double prod = phi[v] * phi[u];
        if (prod > 0.0 && uniform01(rng) >= std::exp(-kappa * prod)) {
            open[static_cast<EdgeId>(v) * d + a] = true;
        }
    });
}

inline EdgeMarks mark_edges(const LatticeDomain& dom, std::span<const double> phi, const EdgeCoupling& coupling,
                            Rng& rng)
{
    EdgeMarks open;
    mark_edges(dom, phi, coupling, rng, open);
    return open;
}

/// eps_n |value(x)| with one fresh fair sign per cluster, drawn in cluster order.
inline std::vector<double> resign_by_cluster(std::span<const double> magnitude, const ClusterReport& rep, Rng& rng)
{
    if (magnitude.size() != rep.label.size()) {
        throw DomainError("signed_field: field size does not match cluster report");
    }
    std::vector<signed char> sign(rep.count());
    for (auto& s : sign) {
        s = (rng() >> 63) ? 1 : -1;
    }
    std::vector<double> out(magnitude.size());
    for (std::size_t v = 0; v < out.size(); ++v) {
        out[v] = sign[rep.label[v]] * std::abs(magnitude[v]);
    }
    return out;
}

/// Resamples the sign of phi independently on each cluster. The clusters must come
/// from this sample's edge marks, so phi has constant sign on each of them.
inline std::vector<double> signed_field(std::span<const double> phi, const ClusterReport& rep, Rng& rng)
{
    if (phi.size() != rep.label.size()) {
        throw DomainError("signed_field: field size does not match cluster report");
    }
    std::vector<signed char> seen(rep.count(), 0);
    for (std::size_t v = 0; v < phi.size(); ++v) {
        const signed char s = phi[v] > 0 ? 1 : (phi[v] < 0 ? -1 : 0);
        auto& ref = seen[rep.label[v]];
        if (ref == 0) {
            ref = s;
        } else if (s != 0 && s != ref) {
            throw DomainError("signed_field: cluster " + std::to_string(rep.label[v]) + " contains both signs");
        }
    }
    return resign_by_cluster(phi, rep, rng);
}

} // namespace cable

#endif
