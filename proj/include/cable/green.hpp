#ifndef CABLE_GREEN_HPP
#define CABLE_GREEN_HPP

// Dirichlet Green's function of simple random walk killed on leaving a domain.
//
// G(x,y) is the expected number of visits to y by the walk started at x, i.e.
// G = (I - P)^{-1} with P the killed SRW kernel. The Gaussian free field uses
// the covariance C = L^{-1} = G / (2d), L being the Dirichlet graph Laplacian.
// Probabilities below depend only on ratios of G, so the convention cancels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "cable/error.hpp"
#include "cable/lattice.hpp"
#include "cable/spectral.hpp"

namespace cable {

inline constexpr double kGreenTolerance = 1e-14;
inline constexpr std::size_t kDefaultDenseCap = 20'000;

/// Sparse solver for (I - P) on a domain, optionally restricted to an active subset
/// (inactive vertices act as killing sites, like the boundary).
class GreenSolver {
public:
    explicit GreenSolver(const LatticeDomain& dom, std::span<const char> active = {},
                         double tolerance = kGreenTolerance)
        : n_(dom.size()), tolerance_(tolerance)
    {
        if (!active.empty() && active.size() != n_) {
            throw DomainError("GreenSolver: active mask has wrong size");
        }
        local_.assign(n_, kSink);
        for (std::size_t v = 0; v < n_; ++v) {
            if (active.empty() || active[v]) {
                local_[v] = static_cast<VertexId>(global_.size());
                global_.push_back(static_cast<VertexId>(v));
            }
        }
        const double p = 1.0 / (2.0 * dom.dim());
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(global_.size() * (2 * static_cast<std::size_t>(dom.dim()) + 1));
        for (std::size_t i = 0; i < global_.size(); ++i) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
            for (int dir = 0; dir < 2 * dom.dim(); ++dir) {
                const VertexId u = dom.neighbor(global_[i], dir);
                if (u != kSink && local_[u] != kSink) {
                    triplets.emplace_back(static_cast<int>(i), static_cast<int>(local_[u]), -p);
                }
            }
        }
        const auto m = static_cast<Eigen::Index>(global_.size());
        op_.resize(m, m);
        op_.setFromTriplets(triplets.begin(), triplets.end());
        cg_.setTolerance(tolerance_);
        cg_.setMaxIterations(static_cast<Eigen::Index>(10 * std::max<std::size_t>(global_.size(), 1)));
        cg_.compute(op_);
    }

    /// Column G(x, .) over the whole domain; zero on inactive vertices.
    [[nodiscard]] Eigen::VectorXd column(VertexId x) const
    {
        if (x >= n_ || local_[x] == kSink) {
            throw DomainError("green_solve: vertex " + std::to_string(x) + " is not an active interior vertex");
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(op_.rows());
        rhs[local_[x]] = 1.0;
        Eigen::VectorXd sol = cg_.solve(rhs);
        if (cg_.info() != Eigen::Success || !(cg_.error() <= tolerance_)) {
            throw ConvergenceError("green_solve: conjugate gradient did not reach tolerance after " +
                                   std::to_string(cg_.iterations()) + " iterations");
        }
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < global_.size(); ++i) {
            out[global_[i]] = sol[static_cast<Eigen::Index>(i)];
        }
        return out;
    }

    [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const noexcept { return op_; }

private:
    std::size_t n_;
    double tolerance_;
    std::vector<VertexId> local_;
    std::vector<VertexId> global_;
    Eigen::SparseMatrix<double> op_;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg_;
};

/// Solves (I - P) g = delta_x by conjugate gradient to residual <= 1e-10.
inline Eigen::VectorXd green_solve(const LatticeDomain& dom, VertexId x)
{
    dom.check_vertex(x);
    return GreenSolver(dom).column(x);
}

/// G(x,y) for the visit-count convention. Dense when |D| <= dense_cap, otherwise
/// columns are solved on demand and memoised (thread-safe).
class GreenTable {
public:
    explicit GreenTable(LatticeDomain dom, std::size_t dense_cap = kDefaultDenseCap)
        : dom_(std::move(dom)), cache_(std::make_unique<Cache>())
    {
        if (dom_.size() <= dense_cap) {
            const auto n = static_cast<Eigen::Index>(dom_.size());
            Eigen::MatrixXd op = Eigen::MatrixXd::Identity(n, n);
            const double p = 1.0 / (2.0 * dom_.dim());
            for (Eigen::Index v = 0; v < n; ++v) {
                for (int dir = 0; dir < 2 * dom_.dim(); ++dir) {
                    const VertexId u = dom_.neighbor(static_cast<VertexId>(v), dir);
                    if (u != kSink) {
                        op(v, u) -= p;
                    }
                }
            }
            Eigen::LLT<Eigen::MatrixXd> llt(op);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("GreenTable: I - P is not positive definite");
            }
            dense_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
        }
    }

    [[nodiscard]] const LatticeDomain& domain() const noexcept { return dom_; }
    [[nodiscard]] bool is_dense() const noexcept { return dense_.has_value(); }
    [[nodiscard]] int dim() const noexcept { return dom_.dim(); }

    [[nodiscard]] const Eigen::MatrixXd& dense() const
    {
        if (!dense_) {
            throw CapacityError("GreenTable: domain is above the dense cap");
        }
        return *dense_;
    }

    [[nodiscard]] double operator()(VertexId x, VertexId y) const
    {
        dom_.check_vertex(x);
        dom_.check_vertex(y);
        if (dense_) {
            return (*dense_)(x, y);
        }
        return column(x)[y];
    }

    /// C(x,y) = G(x,y) / (2d).
    [[nodiscard]] double covariance(VertexId x, VertexId y) const { return (*this)(x, y) / (2.0 * dim()); }

    [[nodiscard]] Eigen::VectorXd column(VertexId x) const
    {
        dom_.check_vertex(x);
        if (dense_) {
            return dense_->col(x);
        }
        std::lock_guard lock(cache_->mutex);
        auto it = cache_->columns.find(x);
        if (it == cache_->columns.end()) {
            if (!cache_->solver) {
                cache_->solver = std::make_unique<GreenSolver>(dom_);
            }
            it = cache_->columns.emplace(x, cache_->solver->column(x)).first;
        }
        return it->second;
    }

private:
    struct Cache {
        std::mutex mutex;
        std::unique_ptr<GreenSolver> solver;
        std::map<VertexId, Eigen::VectorXd> columns;
    };

    LatticeDomain dom_;
    std::optional<Eigen::MatrixXd> dense_;
    std::unique_ptr<Cache> cache_;
};

namespace detail {

inline std::vector<int> box_offsets(const BoxSpec& spec, std::span<const int> p, const char* what)
{
    if (static_cast<int>(p.size()) != spec.d) {
        throw DomainError(std::string(what) + ": point has wrong dimension");
    }
    std::vector<int> off(spec.d);
    for (int a = 0; a < spec.d; ++a) {
        if (p[a] < -spec.N || p[a] > spec.N) {
            throw DomainError(std::string(what) + ": point outside the box");
        }
        off[a] = p[a] + spec.N;
    }
    return off;
}

inline void spectral_sum(const SpectralBasis& basis, const std::vector<int>& x, const std::vector<int>& y,
                         int axis, double weight, double lambda, double& acc)
{
    const int m = basis.side();
    const auto mu = basis.axis_eigenvalues();
    if (axis == basis.spec().d) {
        acc += weight / lambda;
        return;
    }
    for (int k = 0; k < m; ++k) {
        const double w = weight * basis.sine(x[axis], k) * basis.sine(y[axis], k);
        spectral_sum(basis, x, y, axis + 1, w, lambda + mu[k], acc);
    }
}

} // namespace detail

/// G(x,y) = 2d sum_k psi_k(x) psi_k(y) / lambda_k over the Dirichlet sine basis.
inline double green_box_spectral(const SpectralBasis& basis, std::span<const int> x, std::span<const int> y)
{
    const auto& spec = basis.spec();
    const auto xo = detail::box_offsets(spec, x, "green_box_spectral");
    const auto yo = detail::box_offsets(spec, y, "green_box_spectral");
    double acc = 0.0;
    detail::spectral_sum(basis, xo, yo, 0, 1.0, 0.0, acc);
    return 2.0 * spec.d * acc;
}

inline double green_box_spectral(const BoxSpec& spec, std::span<const int> x, std::span<const int> y)
{
    return green_box_spectral(SpectralBasis(spec), x, y);
}

/// Whole column G(x, .) on a box by one separable synthesis, O(M^{d+1} d).
inline std::vector<double> green_box_spectral_column(const SpectralBasis& basis, std::span<const int> x)
{
    const auto& spec = basis.spec();
    const auto xo = detail::box_offsets(spec, x, "green_box_spectral_column");
    const auto lambda = basis.eigenvalues();
    std::vector<double> coef(basis.size());
    const auto m = static_cast<std::size_t>(basis.side());
    for (std::size_t i = 0; i < coef.size(); ++i) {
        double w = 1.0;
        std::size_t rest = i;
        for (int a = spec.d - 1; a >= 0; --a) {
            w *= basis.sine(xo[a], static_cast<int>(rest % m));
            rest /= m;
        }
        coef[i] = 2.0 * spec.d * w / lambda[i];
    }
    std::vector<double> scratch;
    basis.synthesize(coef, scratch);
    return coef;
}

/// Diagonal G(y,y) for every y of the box.
inline std::vector<double> green_box_spectral_diagonal(const SpectralBasis& basis)
{
    auto v = basis.eigenvalues();
    for (auto& l : v) {
        l = 2.0 * basis.spec().d / l;
    }
    std::vector<double> scratch;
    basis.synthesize_squared(v, scratch);
    return v;
}

/// (2/pi) arcsin(gxy / sqrt(gxx gyy)): the sign covariance of a centred Gaussian
/// pair, which equals the connection probability of cable-graph clusters.
inline double connection_probability(double gxy, double gxx, double gyy)
{
    const double ratio = gxy / std::sqrt(gxx * gyy);
    constexpr double slack = 1e-12;
    if (!(ratio >= -slack && ratio <= 1.0 + slack)) {
        throw NumericalError("connection_probability: Green ratio " + std::to_string(ratio) + " outside [0,1]");
    }
    return 2.0 / std::numbers::pi * std::asin(std::clamp(ratio, 0.0, 1.0));
}

inline double connection_probability(const GreenTable& g, VertexId x, VertexId y)
{
    if (x == y) {
        throw DomainError("connection_probability: requires x != y");
    }
    return connection_probability(g(x, y), g(x, x), g(y, y));
}

struct ProfilePoint {
    int r;
    double probability;  // P[0 <-> (r,0,...,0)]
    double scaled;       // probability * r^{d-2}
};

/// Connection probability along the first axis, rescaled by r^{d-2}.
inline std::vector<ProfilePoint> twopoint_decay_profile(const BoxSpec& spec, std::span<const int> radii)
{
    if (spec.d < 3) {
        throw DomainError("twopoint_decay_profile: requires d >= 3");
    }
    const SpectralBasis basis(spec);
    const std::vector<int> origin(spec.d, 0);
    const auto col = green_box_spectral_column(basis, origin);
    const auto diag = green_box_spectral_diagonal(basis);
    const auto dom = build_box(spec);
    const VertexId o = *dom.index_of(origin);
    std::vector<ProfilePoint> out;
    for (int r : radii) {
        std::vector<int> x(spec.d, 0);
        x[0] = r;
        const auto id = dom.index_of(x);
        if (r < 1 || !id) {
            throw DomainError("twopoint_decay_profile: radius " + std::to_string(r) + " not interior");
        }
        const double p = connection_probability(col[*id], diag[o], diag[*id]);
        out.push_back({r, p, p * std::pow(static_cast<double>(r), spec.d - 2)});
    }
    return out;
}

} // namespace cable

#endif
