#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cable/estimators.hpp"
#include "cable/gff.hpp"
#include "cable/loopsoup.hpp"
#include "cable/parallel.hpp"

using namespace cable;

namespace {

TwoPointCounter path2_counter(std::uint64_t samples, std::uint64_t salt)
{
    const auto dom = build_path(2);
    const DenseGffSampler sampler{GreenTable(dom)};
    TwoPointCounter c({{0, 1}, {1, 0}, {0, 0}});
    for (std::uint64_t i = 0; i < samples; ++i) {
        Rng rng = make_stream(1, StreamTag::gff, i, salt);
        c.add(extract_clusters(dom, mark_edges(dom, sampler(rng), EdgeCoupling{}, rng)));
    }
    return c;
}

} // namespace

TEST(Estimators, TwoPointPathTwo)
{
    const auto c = path2_counter(100000, 0);
    const double third = 1.0 / 3.0;
    const std::vector<double> expected{third, third, 1.0};
    const auto est = twopoint_empirical(c, expected);
    ASSERT_EQ(est.size(), 3u);
    EXPECT_NEAR(est[0].frequency, third, 4.0 * std::sqrt(third * (2.0 / 3.0) / 1e5));
    EXPECT_LE(std::abs(est[0].z), 4.0);
    // The same event seen from both ends.
    EXPECT_EQ(est[0].hits, est[1].hits);
    EXPECT_EQ(est[2].frequency, 1.0);
    EXPECT_TRUE(est[2].ci_contains_expected);
    EXPECT_LT(est[0].ci.lo, est[0].frequency);
    EXPECT_GT(est[0].ci.hi, est[0].frequency);
}

TEST(Estimators, TwoPointPreconditions)
{
    const auto small = path2_counter(999, 1);
    const std::vector<double> e{0.3, 0.3, 1.0};
    EXPECT_THROW(twopoint_empirical(small, e), DomainError);
    const auto c = path2_counter(1000, 2);
    EXPECT_NO_THROW(twopoint_empirical(c, e));
    EXPECT_THROW(twopoint_empirical(c, std::vector<double>{0.3}), DomainError);

    TwoPointCounter a({{0, 1}});
    TwoPointCounter b({{1, 0}});
    const auto dom = build_path(2);
    b.add(extract_clusters(dom, EdgeMarks(dom.num_edges(), false)));
    EXPECT_THROW(a.merge(b), DomainError);
    TwoPointCounter empty;
    empty.merge(b);
    EXPECT_EQ(empty.samples(), 1u);
}

TEST(Estimators, WilsonCoverageMetaCheck)
{
    int covered = 0;
    const std::vector<double> expected{1.0 / 3.0, 1.0 / 3.0, 1.0};
    for (std::uint64_t run = 0; run < 100; ++run) {
        const auto est = twopoint_empirical(path2_counter(5000, 100 + run), expected);
        covered += est[0].ci_contains_expected;
    }
    EXPECT_GE(covered, 96);
}

TEST(Estimators, WilsonIntervalBasics)
{
    const auto i = stats::wilson_interval(0, 100);
    EXPECT_EQ(i.lo, 0.0);
    EXPECT_GT(i.hi, 0.0);
    const auto j = stats::wilson_interval(100, 100);
    EXPECT_EQ(j.hi, 1.0);
    EXPECT_LT(j.lo, 1.0);
    const auto k = stats::wilson_interval(50, 100);
    EXPECT_NEAR(k.lo + k.hi, 1.0, 1e-12);
}

TEST(Estimators, KolmogorovSmirnov)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    std::vector<double> a, b, c;
    for (int i = 0; i < 5000; ++i) {
        a.push_back(n(rng));
        b.push_back(n(rng));
        c.push_back(1.2 * n(rng));
    }
    EXPECT_GT(stats::ks_two_sample(a, b).p_value, 0.01);
    EXPECT_LT(stats::ks_two_sample(a, c).p_value, 0.01);
    EXPECT_EQ(stats::ks_two_sample(a, a).statistic, 0.0);
    EXPECT_NEAR(stats::kolmogorov_q(1.0), 0.26999967, 1e-7);
    EXPECT_NEAR(stats::kolmogorov_q(1.2), 0.11224966, 1e-7);
}

TEST(Estimators, MomentsMergeMatchesSequential)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u;
    stats::Moments all, a, b;
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        all.add(x);
        (i < 400 ? a : b).add(x);
    }
    a.merge(b);
    EXPECT_EQ(a.count(), all.count());
    EXPECT_NEAR(a.mean(), all.mean(), 1e-14);
    EXPECT_NEAR(a.variance(), all.variance(), 1e-14);
}

TEST(Estimators, IsomorphismSingleVertexMetaCheck)
{
    const auto dom = build_path(1);
    const LoopSoupPlan plan(dom);
    const DenseGffSampler sampler{GreenTable(dom)};
    int passes = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
        std::vector<std::vector<double>> gamma(1), phi(1);
        for (std::uint64_t i = 0; i < 1000; ++i) {
            Rng r1 = make_stream(7, StreamTag::meta, i, run);
            auto s = sample_loops(plan, r1);
            accumulate_gamma(s, dom, r1);
            gamma[0].push_back(s.gamma[0]);
            Rng r2 = make_stream(7, StreamTag::signs, i, run);
            phi[0].push_back(sampler(r2)[0]);
        }
        passes += isomorphism_tests(gamma, phi)[0].ks_p > 0.01;
    }
    EXPECT_GE(passes, 98);
}

TEST(Estimators, IsomorphismPathTwoAndPowerCheck)
{
    const auto dom = build_path(2);
    const LoopSoupPlan plan(dom);
    const DenseGffSampler sampler{GreenTable(dom)};
    std::vector<std::vector<double>> gamma(2), scaled(2), phi(2);
    for (std::uint64_t i = 0; i < 100000; ++i) {
        Rng r1 = make_stream(8, StreamTag::loopsoup, i);
        auto s = sample_loops(plan, r1);
        accumulate_gamma(s, dom, r1);
        Rng r2 = make_stream(8, StreamTag::gff, i);
        const auto f = sampler(r2);
        for (int v = 0; v < 2; ++v) {
            gamma[v].push_back(s.gamma[v]);
            scaled[v].push_back(1.1 * s.gamma[v]);
            phi[v].push_back(f[v]);
        }
    }
    const auto ok = isomorphism_tests(gamma, phi);
    for (const auto& r : ok) {
        EXPECT_TRUE(r.pass) << "vertex " << r.vertex << " p=" << r.ks_p << " z=" << r.mean_z;
        EXPECT_LE(std::abs(stats::z_score(r.mean_gamma, 1.0 / 3.0, std::sqrt(2.0 / 9.0 / 1e5))), 4.0);
    }
    const auto bad = isomorphism_tests(scaled, phi);
    for (const auto& r : bad) {
        EXPECT_FALSE(r.pass);
        EXPECT_GT(r.mean_z, 4.0);
    }
    EXPECT_THROW(isomorphism_tests(gamma, std::vector<std::vector<double>>(1)), DomainError);
}

TEST(Estimators, ClusterSummaryIdentities)
{
    const BoxSpec spec{3, 4};
    const auto dom = build_box(spec);
    const SpectralGffSampler sampler(spec);
    std::vector<LadderRung> ladder(1);
    ladder[0].N = spec.N;
    for (std::uint64_t i = 0; i < 30; ++i) {
        Rng rng = make_stream(9, StreamTag::gff, i);
        const auto phi = sampler(rng);
        const auto rep = extract_clusters(dom, mark_edges(dom, phi, EdgeCoupling{}, rng));
        const auto s = summarize_clusters(dom, spec, rep);
        EXPECT_EQ(s.square_sum, s.vertex_size_sum);
        for (int k = 0; k + 1 <= kMaxMoment; ++k) {
            EXPECT_NEAR(s.power_sum[k + 1], s.vertex_power_sum[k], 1e-9 * s.power_sum[k + 1]);
            EXPECT_NEAR(s.power_sum[k], cluster_power_sum(rep, k), 1e-9 * s.power_sum[k]);
        }
        EXPECT_GE(s.origin_size, 1u);
        EXPECT_EQ(s.clusters, rep.count());
        EXPECT_EQ(s.max_size, max_cluster_size(rep));
        ladder[0].samples.push_back(s);
    }
    for (int k = 1; k <= 3; ++k) {
        const auto rows = moment_scan(spec.d, ladder, k);
        ASSERT_EQ(rows.size(), 1u);
        EXPECT_TRUE(rows[0].identity_exact);
        EXPECT_GE(rows[0].origin_moment.value, 1.0);
        EXPECT_NEAR(rows[0].cluster_power_sum.value, rows[0].vertex_moment_sum.value,
                    1e-9 * rows[0].cluster_power_sum.value);
    }
    EXPECT_THROW(moment_scan(3, ladder, 0), DomainError);
    EXPECT_THROW(moment_scan(3, ladder, 4), DomainError);

    // A tampered sample breaks the exact identity.
    ladder[0].samples[3].vertex_size_sum += 1;
    EXPECT_FALSE(moment_scan(spec.d, ladder, 1)[0].identity_exact);
}

TEST(Estimators, HighDimTrendBookkeeping)
{
    std::vector<LadderRung> ladder(3);
    const int ns[] = {2, 3, 4};
    const std::uint64_t large[] = {1, 2, 2};
    for (int i = 0; i < 3; ++i) {
        ladder[i].N = ns[i];
        for (std::uint64_t s = 0; s < 4; ++s) {
            ClusterSampleStats c;
            c.large_count = large[i] + (s % 2);
            c.max_size = static_cast<std::uint64_t>(10 * std::pow(ns[i], 4) * std::log(ns[i])) + s;
            c.x_statistic = s;
            ladder[i].samples.push_back(c);
        }
    }
    const auto h = highdim_statistics(7, ladder);
    ASSERT_EQ(h.rows.size(), 3u);
    EXPECT_TRUE(h.large_count_nondecreasing);
    EXPECT_NEAR(h.max_ratio_spread, 1.0, 0.1);
    EXPECT_EQ(h.rows[0].frac_with_large, 1.0);
    EXPECT_NEAR(h.rows[2].scale_large, 4.0 / (std::log(4.0) * std::log(4.0)), 1e-12);
    EXPECT_NEAR(h.rows[1].x_statistic.value, 1.5, 1e-12);
    for (const auto& r : h.rows) {
        EXPECT_GT(r.frac_max_within_fitted, 0.0);
    }

    ladder[2].samples[0].large_count = 0;
    ladder[2].samples[1].large_count = 0;
    EXPECT_FALSE(highdim_statistics(7, ladder).large_count_nondecreasing);
    ladder[0].N = 1;
    EXPECT_THROW(highdim_statistics(7, ladder), DomainError);
}

TEST(Estimators, BlockReductionIndependentOfThreads)
{
    // The block layout fixes the merge order, so floating sums agree bit for bit.
    auto run = [](unsigned threads) {
        const auto blocks = run_blocks<stats::Moments>(
            10000, threads, 64, [] { return 0; },
            [](int&, stats::Moments& m, std::size_t i) {
                Rng rng = make_stream(10, StreamTag::gff, i);
                m.add(std::normal_distribution<double>()(rng));
            });
        stats::Moments all;
        for (const auto& b : blocks) {
            all.merge(b);
        }
        return std::pair{all.mean(), all.variance()};
    };
    const auto one = run(1);
    EXPECT_EQ(one, run(4));
    EXPECT_EQ(one, run(16));
}
