#ifndef CABLE_EDGE_ORACLE_HPP
#define CABLE_EDGE_ORACLE_HPP

// Exact probability that a cable between two jointly Gaussian endpoint values is
// open: E[1{ab > 0} (1 - exp(-kappa a b))].
//
// Writing (a, b) in polar coordinates of the whitened pair, the radial integral is
// closed-form, leaving
//     (1 / 2pi) * integral_{-A}^{A} [1 - 1 / (1 + kappa s (rho + cos u))] du,
// with s = sqrt(c11 c22), rho = c12 / s and A = arccos(-rho).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cable/error.hpp"
#include "cable/gff.hpp"
#include "cable/green.hpp"

namespace cable {

inline double edge_open_probability(double kappa, double c11, double c22, double c12)
{
    if (!(c11 > 0.0 && c22 > 0.0) || !(kappa >= 0.0)) {
        throw DomainError("edge_open_probability: need positive variances and kappa >= 0");
    }
    const double s = std::sqrt(c11 * c22);
    const double rho = std::clamp(c12 / s, -1.0, 1.0);
    const double a = std::acos(-rho);
    const double k = kappa * s;
    auto f = [&](double u) { return 1.0 - 1.0 / (1.0 + k * (rho + std::cos(u))); };
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -a, a, 15, 1e-14);
    return integral / (2.0 * std::numbers::pi);
}

/// Edge-open probability on the 2-vertex path for a given kappa; equals the
/// arcsin-law value 1/3 exactly when kappa = 2.
inline double path2_edge_open_probability(double kappa)
{
    return edge_open_probability(kappa, 2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0);
}

/// Throws CalibrationError unless the coupling reproduces the path-2 arcsin law to `tol`.
inline void check_edge_calibration(const EdgeCoupling& coupling, double tol = 1e-6)
{
    coupling.validate();
    const double p = path2_edge_open_probability(coupling.zero_hit_coefficient);
    const double target = 1.0 / 3.0;
    if (!(std::abs(p - target) <= tol)) {
        throw CalibrationError("edge coupling kappa=" + std::to_string(coupling.zero_hit_coefficient) +
                               " gives path-2 edge-open probability " + std::to_string(p) + ", expected 1/3");
    }
}

/// Loop-route counterpart on the 2-vertex path. Either the soup has a loop, which
/// crosses the single cable (probability 1 - G(1,1)^{-1/2} = 1 - sqrt(3)/2), or it is
/// empty and the occupations are the iid base terms Gamma(1/2, 1/2) = Z^2/4; then the
/// glue draw closes the cable with probability E[exp(-c |Z1| |Z2| / 2)].
inline double path2_glue_open_probability(double glue_coefficient)
{
    if (!(glue_coefficient >= 0.0)) {
        throw DomainError("path2_glue_open_probability: glue coefficient must be >= 0");
    }
    using boost::math::quadrature::gauss_kronrod;
    const double c = glue_coefficient;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    // E over Z2 >= 0 of exp(-b Z2), times 2: an erfc identity, kept numerically safe by
    // integrating instead of expanding exp(b^2/2) erfc(b/sqrt2).
    auto inner = [&](double z1) {
        const double b = 0.5 * c * z1;
        auto g = [&](double z2) { return 2.0 * inv_sqrt_2pi * std::exp(-0.5 * z2 * z2 - b * z2); };
        return gauss_kronrod<double, 61>::integrate(g, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
    };
    auto outer = [&](double z1) { return 2.0 * inv_sqrt_2pi * std::exp(-0.5 * z1 * z1) * inner(z1); };
    const double e = gauss_kronrod<double, 61>::integrate(outer, 0.0, std::numeric_limits<double>::infinity(), 15,
                                                          1e-13);
    return 1.0 - std::sqrt(3.0) / 2.0 * e;
}

/// Throws CalibrationError unless the loop-route glue reproduces the path-2 arcsin law.
inline void check_glue_calibration(double glue_coefficient, double tol = 1e-6)
{
    const double p = path2_glue_open_probability(glue_coefficient);
    if (!(std::abs(p - 1.0 / 3.0) <= tol)) {
        throw CalibrationError("loop glue coefficient " + std::to_string(glue_coefficient) +
                               " gives path-2 connection probability " + std::to_string(p) + ", expected 1/3");
    }
}

} // namespace cable

#endif
