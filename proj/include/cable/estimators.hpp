#ifndef CABLE_ESTIMATORS_HPP
#define CABLE_ESTIMATORS_HPP

// Reductions from per-sample cluster reports and fields to point estimates with
// standard errors and pass/fail verdicts.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cable/clusters.hpp"
#include "cable/error.hpp"
#include "cable/lattice.hpp"
#include "cable/stats.hpp"

namespace cable {

struct Thresholds {
    double z_max = 4.0;
    double ks_p_min = 0.01;
    double ci_z = stats::kZ99;
};

// ---------------------------------------------------------------------------
// Two-point function

using VertexPair = std::pair<VertexId, VertexId>;

/// Integer connection counts per pair; merges are exact, so order never matters.
class TwoPointCounter {
public:
    TwoPointCounter() = default;
    explicit TwoPointCounter(std::vector<VertexPair> pairs) : pairs_(std::move(pairs)), hits_(pairs_.size(), 0) {}

    void add(const ClusterReport& rep)
    {
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            if (rep.label[pairs_[i].first] == rep.label[pairs_[i].second]) {
                ++hits_[i];
            }
        }
        ++samples_;
    }

    void merge(const TwoPointCounter& o)
    {
        if (pairs_.empty() && samples_ == 0) {
            *this = o;
            return;
        }
        if (o.pairs_ != pairs_ && o.samples_ > 0) {
            throw DomainError("TwoPointCounter: merging counters over different pairs");
        }
        for (std::size_t i = 0; i < hits_.size() && i < o.hits_.size(); ++i) {
            hits_[i] += o.hits_[i];
        }
        samples_ += o.samples_;
    }

    [[nodiscard]] const std::vector<VertexPair>& pairs() const noexcept { return pairs_; }
    [[nodiscard]] const std::vector<std::uint64_t>& hits() const noexcept { return hits_; }
    [[nodiscard]] std::uint64_t samples() const noexcept { return samples_; }

private:
    std::vector<VertexPair> pairs_;
    std::vector<std::uint64_t> hits_;
    std::uint64_t samples_ = 0;
};

struct PairEstimate {
    VertexPair pair;
    std::uint64_t hits = 0;
    std::uint64_t samples = 0;
    double frequency = 0.0;
    stats::Interval ci{0.0, 1.0};
    double expected = 0.0;
    double z = 0.0;                 // (frequency - expected) / binomial SE at `expected`
    bool ci_contains_expected = true;
};

inline constexpr std::uint64_t kMinTwoPointSamples = 1000;

/// Same-cluster frequency per pair with a Wilson interval, flagged against `expected`.
inline std::vector<PairEstimate> twopoint_empirical(const TwoPointCounter& counter, std::span<const double> expected,
                                                    const Thresholds& th = {},
                                                    std::uint64_t min_samples = kMinTwoPointSamples)
{
    if (counter.samples() < min_samples) {
        throw DomainError("twopoint_empirical: needs at least " + std::to_string(min_samples) + " samples");
    }
    if (expected.size() != counter.pairs().size()) {
        throw DomainError("twopoint_empirical: one expected value per pair required");
    }
    std::vector<PairEstimate> out;
    const std::uint64_t n = counter.samples();
    for (std::size_t i = 0; i < expected.size(); ++i) {
        PairEstimate e;
        e.pair = counter.pairs()[i];
        e.hits = counter.hits()[i];
        e.samples = n;
        e.frequency = static_cast<double>(e.hits) / static_cast<double>(n);
        e.ci = stats::wilson_interval(e.hits, n, th.ci_z);
        e.expected = expected[i];
        e.z = stats::z_score(e.frequency, e.expected, stats::binomial_se(e.expected, n));
        e.ci_contains_expected = e.ci.contains(e.expected);
        out.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Occupation field vs squared free field

struct VertexIsomorphism {
    VertexId vertex = 0;
    double ks_statistic = 0.0;
    double ks_p = 1.0;
    double mean_gamma = 0.0;
    double mean_half_phi_sq = 0.0;
    double mean_z = 0.0;
    double second_gamma = 0.0;
    double second_half_phi_sq = 0.0;
    double second_z = 0.0;
    bool pass = true;
};

namespace detail {

inline double two_mean_z(const stats::Moments& a, const stats::Moments& b)
{
    const double se = std::hypot(a.stderr_mean(), b.stderr_mean());
    return stats::z_score(a.mean(), b.mean(), se);
}

} // namespace detail

/// gamma[v][s] and phi[v][s]: per vertex, one entry per sample, from independent runs.
inline std::vector<VertexIsomorphism> isomorphism_tests(const std::vector<std::vector<double>>& gamma,
                                                        const std::vector<std::vector<double>>& phi,
                                                        const Thresholds& th = {})
{
    if (gamma.size() != phi.size()) {
        throw DomainError("isomorphism_tests: both routes must cover the same vertices");
    }
    std::vector<VertexIsomorphism> out;
    for (std::size_t v = 0; v < gamma.size(); ++v) {
        std::vector<double> half_sq(phi[v].size());
        stats::Moments g1, g2, p1, p2;
        for (std::size_t s = 0; s < phi[v].size(); ++s) {
            half_sq[s] = 0.5 * phi[v][s] * phi[v][s];
            p1.add(half_sq[s]);
            p2.add(half_sq[s] * half_sq[s]);
        }
        for (double g : gamma[v]) {
            g1.add(g);
            g2.add(g * g);
        }
        VertexIsomorphism r;
        r.vertex = static_cast<VertexId>(v);
        const auto ks = stats::ks_two_sample(gamma[v], half_sq);
        r.ks_statistic = ks.statistic;
        r.ks_p = ks.p_value;
        r.mean_gamma = g1.mean();
        r.mean_half_phi_sq = p1.mean();
        r.mean_z = detail::two_mean_z(g1, p1);
        r.second_gamma = g2.mean();
        r.second_half_phi_sq = p2.mean();
        r.second_z = detail::two_mean_z(g2, p2);
        r.pass = r.ks_p >= th.ks_p_min && std::abs(r.mean_z) <= th.z_max && std::abs(r.second_z) <= th.z_max;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// High-dimensional cluster statistics

inline constexpr int kMaxMoment = 4;

/// Everything the ladder estimators need from one sample's ClusterReport.
struct ClusterSampleStats {
    std::uint64_t origin_size = 0;      // |C(0)|
    std::uint64_t max_size = 0;
    std::uint64_t clusters = 0;         // n_0
    std::uint64_t large_count = 0;      // diameter > N/2
    std::uint64_t x_statistic = 0;      // sum_n |C_n ∩ B1| |C_n ∩ B2|
    std::uint64_t meeting_both = 0;
    std::uint64_t square_sum = 0;       // sum_n |C_n|^2
    std::uint64_t vertex_size_sum = 0;  // sum_x |C(x)|
    std::array<double, kMaxMoment + 1> power_sum{};  // sum_n |C_n|^k, k = 0..4
    std::array<double, kMaxMoment> vertex_power_sum{};  // sum_x |C(x)|^k, k = 0..3
};

inline ClusterSampleStats summarize_clusters(const LatticeDomain& dom, const BoxSpec& spec, const ClusterReport& rep)
{
    ClusterSampleStats s;
    const std::vector<int> origin(spec.d, 0);
    s.origin_size = cluster_of(rep, *dom.index_of(origin)).size;
    s.max_size = max_cluster_size(rep);
    s.clusters = rep.count();
    s.large_count = large_cluster_count(rep, spec);
    const auto [b1, b2] = separated_box_pair(spec);
    const auto bx = box_intersections(dom, rep, b1, b2);
    s.x_statistic = bx.x;
    s.meeting_both = bx.meeting_both;
    s.square_sum = cluster_square_sum(rep);
    s.vertex_size_sum = vertex_cluster_size_sum(rep);
    for (auto c : rep.sizes) {
        double p = 1.0;
        for (int k = 0; k <= kMaxMoment; ++k) {
            s.power_sum[k] += p;
            p *= static_cast<double>(c);
        }
    }
    for (auto l : rep.label) {
        const double c = rep.sizes[l];
        double p = 1.0;
        for (int k = 0; k < kMaxMoment; ++k) {
            s.vertex_power_sum[k] += p;
            p *= c;
        }
    }
    return s;
}

struct Estimate {
    double value = 0.0;
    double se = 0.0;
    std::uint64_t n = 0;
};

inline Estimate estimate_of(const stats::Moments& m) { return {m.mean(), m.stderr_mean(), m.count()}; }

struct MomentRow {
    int N = 0;
    int k = 1;
    Estimate origin_moment;        // E|C(0)|^k
    Estimate cluster_power_sum;    // E sum_n |C_n|^{k+1}
    Estimate vertex_moment_sum;    // E sum_x |C(x)|^k (equals the line above sample by sample)
    double origin_ratio = 0.0;     // E|C(0)| / N^2
    double square_sum_ratio = 0.0; // E sum_n |C_n|^2 / N^{d+2}
    bool identity_exact = true;    // sum_n |C_n|^{k+1} == sum_x |C(x)|^k in every sample
};

struct LadderRung {
    int N = 0;
    std::vector<ClusterSampleStats> samples;
};

inline std::vector<MomentRow> moment_scan(int d, std::span<const LadderRung> ladder, int k)
{
    if (k < 1 || k + 1 > kMaxMoment) {
        throw DomainError("moment_scan: k must be in 1.." + std::to_string(kMaxMoment - 1));
    }
    std::vector<MomentRow> out;
    for (const auto& rung : ladder) {
        stats::Moments origin, power, vertex, origin1, sq;
        bool exact = true;
        for (const auto& s : rung.samples) {
            origin.add(std::pow(static_cast<double>(s.origin_size), k));
            origin1.add(static_cast<double>(s.origin_size));
            power.add(s.power_sum[k + 1]);
            vertex.add(s.vertex_power_sum[k]);
            sq.add(static_cast<double>(s.square_sum));
            exact = exact && s.square_sum == s.vertex_size_sum &&
                    std::abs(s.power_sum[k + 1] - s.vertex_power_sum[k]) <= 1e-9 * s.power_sum[k + 1];
        }
        MomentRow row;
        row.N = rung.N;
        row.k = k;
        row.origin_moment = estimate_of(origin);
        row.cluster_power_sum = estimate_of(power);
        row.vertex_moment_sum = estimate_of(vertex);
        const double n2 = static_cast<double>(rung.N) * rung.N;
        row.origin_ratio = origin1.mean() / n2;
        row.square_sum_ratio = sq.mean() / std::pow(static_cast<double>(rung.N), d + 2);
        row.identity_exact = exact;
        out.push_back(row);
    }
    return out;
}

struct HighDimRow {
    int N = 0;
    Estimate large_count;
    Estimate max_size;
    double max_ratio = 0.0;                 // E max|C_n| / (N^4 log N)
    double frac_with_large = 0.0;           // P[at least one cluster of diameter > N/2]
    double frac_max_within_fitted = 0.0;    // P[max|C_n| <= c N^4 log N] at the fitted c
    double scale_large = 0.0;               // N^{d-6} / log^2 N
    Estimate x_statistic;
};

struct HighDimSummary {
    std::vector<HighDimRow> rows;
    double fitted_c = 0.0;
    bool large_count_nondecreasing = true;
    double max_ratio_spread = 1.0;  // max / min of max_ratio over the ladder
};

inline HighDimSummary highdim_statistics(int d, std::span<const LadderRung> ladder)
{
    HighDimSummary out;
    for (const auto& rung : ladder) {
        if (rung.N < 2) {
            throw DomainError("highdim_statistics: N >= 2 required (log N > 0)");
        }
        HighDimRow row;
        row.N = rung.N;
        stats::Moments large, maxs, xs;
        std::uint64_t with_large = 0;
        for (const auto& s : rung.samples) {
            large.add(static_cast<double>(s.large_count));
            maxs.add(static_cast<double>(s.max_size));
            xs.add(static_cast<double>(s.x_statistic));
            with_large += s.large_count > 0 ? 1 : 0;
        }
        const double nn = static_cast<double>(rung.N);
        const double scale = std::pow(nn, 4) * std::log(nn);
        row.large_count = estimate_of(large);
        row.max_size = estimate_of(maxs);
        row.x_statistic = estimate_of(xs);
        row.max_ratio = maxs.mean() / scale;
        row.frac_with_large =
            rung.samples.empty() ? 0.0 : static_cast<double>(with_large) / static_cast<double>(rung.samples.size());
        row.scale_large = std::pow(nn, d - 6) / (std::log(nn) * std::log(nn));
        out.rows.push_back(row);
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& r : out.rows) {
        lo = std::min(lo, r.max_ratio);
        hi = std::max(hi, r.max_ratio);
    }
    out.fitted_c = hi;
    out.max_ratio_spread = out.rows.empty() ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        const double nn = static_cast<double>(ladder[i].N);
        const double cap = out.fitted_c * std::pow(nn, 4) * std::log(nn);
        std::uint64_t within = 0;
        for (const auto& s : ladder[i].samples) {
            within += static_cast<double>(s.max_size) <= cap ? 1 : 0;
        }
        out.rows[i].frac_max_within_fitted = ladder[i].samples.empty()
                                                 ? 0.0
                                                 : static_cast<double>(within) /
                                                       static_cast<double>(ladder[i].samples.size());
        if (i > 0 && out.rows[i].large_count.value < out.rows[i - 1].large_count.value) {
            out.large_count_nondecreasing = false;
        }
    }
    return out;
}

} // namespace cable

#endif
