#ifndef CABLE_STATS_HPP
#define CABLE_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace cable::stats {

/// Two-sided 99% standard-normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

/// Running mean/variance (Welford), mergeable in a fixed order (Chan et al.).
class Moments {
public:
    void add(double x) noexcept
    {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    void merge(const Moments& o) noexcept
    {
        if (o.n_ == 0) {
            return;
        }
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(n_ + o.n_);
        const double delta = o.mean_ - mean_;
        mean_ += delta * static_cast<double>(o.n_) / n;
        m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
        n_ += o.n_;
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return n_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }
    [[nodiscard]] double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    [[nodiscard]] double stderr_mean() const noexcept
    {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// (estimate - target) / se; 0 when both coincide with zero spread.
inline double z_score(double estimate, double target, double se) noexcept
{
    if (se <= 0.0) {
        return estimate == target ? 0.0 : std::copysign(INFINITY, estimate - target);
    }
    return (estimate - target) / se;
}

struct Interval {
    double lo;
    double hi;

    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Wilson score interval for k successes out of n.
inline Interval wilson_interval(std::uint64_t k, std::uint64_t n, double z = kZ99) noexcept
{
    if (n == 0) {
        return {0.0, 1.0};
    }
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline double binomial_se(double p, std::uint64_t n) noexcept
{
    return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

/// z for the difference of two independent proportions, unpooled.
inline double two_proportion_z(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2, std::uint64_t n2) noexcept
{
    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double se = std::sqrt(p1 * (1.0 - p1) / static_cast<double>(n1) + p2 * (1.0 - p2) / static_cast<double>(n2));
    return z_score(p1, p2, se);
}

/// Kolmogorov survival function Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
inline double kolmogorov_q(double lambda) noexcept
{
    if (lambda <= 0.0) {
        return 1.0;
    }
    if (lambda < 1.18) {
        // Theta-function form, fast for small lambda.
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        const double y8 = std::pow(y, 8.0);
        const double s = y * (1.0 + y8 * (1.0 + y8 * y8 * (1.0 + y8 * y8 * y8)));
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-17) {
            break;
        }
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic;
    double p_value;
};

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with the Stephens correction).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty()) {
        return {0.0, 1.0};
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double dmax = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) {
            ++i;
        }
        while (j < b.size() && b[j] <= x) {
            ++j;
        }
        dmax = std::max(dmax, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {dmax, kolmogorov_q((ne + 0.12 + 0.11 / ne) * dmax)};
}

} // namespace cable::stats

#endif
