#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cable/edge_oracle.hpp"
#include "cable/gff.hpp"
#include "cable/stats.hpp"
#include "oracles/oracles.hpp"

using namespace cable;

namespace {

constexpr double kZ = 4.0;

// Products phi(x) phi(y), x <= y, accumulated over samples.
struct CovarianceCheck {
    std::size_t n;
    std::vector<stats::Moments> m;
    std::vector<stats::Moments> mean;

    explicit CovarianceCheck(std::size_t n_) : n(n_), m(n_ * n_), mean(n_) {}

    void add(const std::vector<double>& f)
    {
        for (std::size_t x = 0; x < n; ++x) {
            mean[x].add(f[x]);
            for (std::size_t y = x; y < n; ++y) {
                m[x * n + y].add(f[x] * f[y]);
            }
        }
    }

    void expect_matches(const GreenTable& g) const
    {
        for (std::size_t x = 0; x < n; ++x) {
            EXPECT_LE(std::abs(stats::z_score(mean[x].mean(), 0.0, mean[x].stderr_mean())), kZ);
            for (std::size_t y = x; y < n; ++y) {
                const auto& s = m[x * n + y];
                const double c = g.covariance(static_cast<VertexId>(x), static_cast<VertexId>(y));
                EXPECT_LE(std::abs(stats::z_score(s.mean(), c, s.stderr_mean())), kZ)
                    << "entry (" << x << "," << y << "): " << s.mean() << " vs " << c;
            }
        }
    }
};

} // namespace

TEST(Gff, PathTwoMoments)
{
    const GreenTable g(build_path(2));
    const DenseGffSampler sampler(g);
    Rng rng = make_stream(1, StreamTag::gff, 0);
    stats::Moments v1, c12, m1;
    for (int i = 0; i < 100000; ++i) {
        const auto phi = sampler(rng);
        v1.add(phi[0] * phi[0]);
        c12.add(phi[0] * phi[1]);
        m1.add(phi[0]);
    }
    EXPECT_LE(std::abs(stats::z_score(v1.mean(), 2.0 / 3.0, v1.stderr_mean())), kZ);
    EXPECT_LE(std::abs(stats::z_score(c12.mean(), 1.0 / 3.0, c12.stderr_mean())), kZ);
    EXPECT_LE(std::abs(stats::z_score(m1.mean(), 0.0, m1.stderr_mean())), kZ);
}

TEST(Gff, SingleVertexVariance)
{
    const DenseGffSampler sampler{GreenTable(build_path(1))};
    Rng rng = make_stream(2, StreamTag::gff, 0);
    stats::Moments v;
    for (int i = 0; i < 100000; ++i) {
        const double x = sampler(rng)[0];
        v.add(x * x);
    }
    EXPECT_LE(std::abs(stats::z_score(v.mean(), 0.5, v.stderr_mean())), kZ);
}

TEST(Gff, SpectralCenterVariance)
{
    const SpectralGffSampler sampler(BoxSpec{1, 1});
    Rng rng = make_stream(3, StreamTag::gff, 0);
    std::vector<double> phi, scratch;
    stats::Moments v;
    for (int i = 0; i < 100000; ++i) {
        sampler(rng, phi, scratch);
        v.add(phi[1] * phi[1]);
    }
    EXPECT_LE(std::abs(stats::z_score(v.mean(), 1.0, v.stderr_mean())), kZ);
}

TEST(Gff, SpectralMatchesDenseInLaw)
{
    const BoxSpec spec{2, 2};
    const auto dom = build_box(spec);
    const SpectralGffSampler spectral(spec);
    const DenseGffSampler dense{GreenTable(dom)};
    Rng r1 = make_stream(4, StreamTag::gff, 0);
    Rng r2 = make_stream(4, StreamTag::gff, 1);
    const VertexId center = *dom.index_of(std::vector<int>{0, 0});
    const VertexId edge = *dom.index_of(std::vector<int>{2, -1});
    std::vector<double> a_c, a_e, b_c, b_e, phi, scratch;
    for (int i = 0; i < 20000; ++i) {
        spectral(r1, phi, scratch);
        a_c.push_back(phi[center]);
        a_e.push_back(phi[edge]);
        const auto q = dense(r2);
        b_c.push_back(q[center]);
        b_e.push_back(q[edge]);
    }
    EXPECT_GT(stats::ks_two_sample(a_c, b_c).p_value, 0.01);
    EXPECT_GT(stats::ks_two_sample(a_e, b_e).p_value, 0.01);
}

TEST(Gff, SpectralIsLinearInModes)
{
    const SpectralGffSampler sampler(BoxSpec{3, 2});
    Rng rng = make_stream(5, StreamTag::gff, 0);
    std::normal_distribution<double> nd;
    std::vector<double> z(sampler.size()), mz(sampler.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = nd(rng);
        mz[i] = -z[i];
    }
    std::vector<double> a, b, scratch;
    sampler.from_modes(z, a, scratch);
    sampler.from_modes(mz, b, scratch);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i], -b[i]);
    }
}

TEST(Gff, CovarianceSuite)
{
    std::vector<LatticeDomain> fixtures = {build_path(1), build_path(2), build_path(3), build_box({2, 1}),
                                           build_box({2, 2}), build_box({3, 1})};
    std::uint64_t salt = 0;
    for (const auto& dom : fixtures) {
        const GreenTable g(dom);
        const DenseGffSampler sampler(g);
        CovarianceCheck check(dom.size());
        Rng rng = make_stream(6, StreamTag::gff, 0, salt++);
        for (int i = 0; i < 50000; ++i) {
            check.add(sampler(rng));
        }
        check.expect_matches(g);
    }
}

TEST(Gff, EdgeMarksBasicCases)
{
    const auto dom = build_path(2);
    Rng rng = make_stream(7, StreamTag::gff, 0);
    const EdgeCoupling k2{};
    for (int i = 0; i < 1000; ++i) {
        const auto opp = mark_edges(dom, std::vector<double>{0.7, -1.2}, k2, rng);
        EXPECT_FALSE(opp[0]);
        const auto big = mark_edges(dom, std::vector<double>{-40.0, -40.0}, k2, rng);
        EXPECT_TRUE(big[0]);
        // Cables to the sink never open.
        EXPECT_FALSE(big[1]);
        EXPECT_FALSE(big[2]);
    }
    EXPECT_THROW(mark_edges(dom, std::vector<double>{1.0}, k2, rng), DomainError);
    EXPECT_THROW(EdgeCoupling{0.0}.validate(), DomainError);
    EXPECT_THROW(EdgeCoupling{-1.0}.validate(), DomainError);
}

TEST(Gff, SignConstantOnOpenEdges)
{
    const BoxSpec spec{3, 3};
    const auto dom = build_box(spec);
    const SpectralGffSampler sampler(spec);
    std::vector<double> phi, scratch;
    for (std::uint64_t i = 0; i < 20; ++i) {
        Rng rng = make_stream(8, StreamTag::gff, i);
        sampler(rng, phi, scratch);
        const auto open = mark_edges(dom, phi, EdgeCoupling{}, rng);
        dom.for_each_forward_edge([&](VertexId v, int a, VertexId u) {
            if (open[static_cast<EdgeId>(v) * 3 + a]) {
                ASSERT_NE(u, kSink);
                EXPECT_GT(phi[v] * phi[u], 0.0);
            }
        });
    }
}

TEST(Gff, EdgeOracleQuadrature)
{
    // The one-dimensional reduction used by the library against a direct 2-d integral.
    EXPECT_NEAR(oracle::edge_open_2d(2.0, 2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0), 1.0 / 3.0, 1e-7);
    EXPECT_NEAR(path2_edge_open_probability(2.0), 1.0 / 3.0, 1e-9);
    for (const auto& [k, c11, c22, c12] : std::vector<std::tuple<double, double, double, double>>{
             {1.0, 2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0}, {2.0, 1.0, 0.5, 0.2}, {0.5, 0.3, 0.9, -0.1}, {3.0, 1.0, 1.0, 0.9}}) {
        EXPECT_NEAR(edge_open_probability(k, c11, c22, c12), oracle::edge_open_2d(k, c11, c22, c12), 1e-7)
            << k << " " << c12;
    }
    // A wrong constant misses the arcsin value by far more than the tolerance.
    EXPECT_GT(std::abs(path2_edge_open_probability(1.0) - 1.0 / 3.0), 0.09);
    EXPECT_NO_THROW(check_edge_calibration(EdgeCoupling{2.0}));
    EXPECT_THROW(check_edge_calibration(EdgeCoupling{1.0}), CalibrationError);
}

TEST(Gff, EdgeOpenFrequencyPathTwo)
{
    const auto dom = build_path(2);
    const DenseGffSampler sampler{GreenTable(dom)};
    std::uint64_t open = 0;
    const std::uint64_t n = 100000;
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng rng = make_stream(9, StreamTag::edge_oracle, i);
        open += mark_edges(dom, sampler(rng), EdgeCoupling{}, rng)[0] ? 1 : 0;
    }
    const double f = static_cast<double>(open) / n;
    EXPECT_LE(std::abs(f - 1.0 / 3.0), 4.0 * stats::binomial_se(1.0 / 3.0, n));
}

TEST(Gff, LoopGlueQuadrature)
{
    EXPECT_NEAR(path2_glue_open_probability(1.0), 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(path2_glue_open_probability(2.0), 0.44867, 1e-4);
    EXPECT_NEAR(path2_glue_open_probability(0.0), 1.0 - std::sqrt(3.0) / 2.0, 1e-12);
    EXPECT_NO_THROW(check_glue_calibration(1.0));
    EXPECT_THROW(check_glue_calibration(2.0), CalibrationError);
}

TEST(Gff, SignedFieldProperties)
{
    const BoxSpec spec{2, 3};
    const auto dom = build_box(spec);
    const SpectralGffSampler sampler(spec);
    std::vector<double> phi, scratch;
    for (std::uint64_t i = 0; i < 50; ++i) {
        Rng rng = make_stream(10, StreamTag::gff, i);
        sampler(rng, phi, scratch);
        const auto rep = extract_clusters(dom, mark_edges(dom, phi, EdgeCoupling{}, rng));
        const auto out = signed_field(phi, rep, rng);
        std::vector<int> sign(rep.count(), 0);
        for (std::size_t v = 0; v < phi.size(); ++v) {
            EXPECT_EQ(std::abs(out[v]), std::abs(phi[v]));
            const int s = out[v] > 0 ? 1 : -1;
            auto& ref = sign[rep.label[v]];
            if (ref == 0) {
                ref = s;
            }
            EXPECT_EQ(ref, s);
        }
    }
    // Clusters that disagree with the field's signs are rejected.
    const auto path = build_path(2);
    EdgeMarks all(path.num_edges(), true);
    const auto rep = extract_clusters(path, all);
    Rng rng = make_stream(10, StreamTag::signs, 0);
    EXPECT_THROW(signed_field(std::vector<double>{1.0, -1.0}, rep, rng), DomainError);
}

TEST(Gff, SignResampledCovariancePathTwo)
{
    const auto dom = build_path(2);
    const GreenTable g(dom);
    const DenseGffSampler sampler(g);
    CovarianceCheck check(2);
    for (std::uint64_t i = 0; i < 100000; ++i) {
        Rng rng = make_stream(11, StreamTag::gff, i);
        const auto phi = sampler(rng);
        const auto rep = extract_clusters(dom, mark_edges(dom, phi, EdgeCoupling{}, rng));
        check.add(signed_field(phi, rep, rng));
    }
    check.expect_matches(g);
}

TEST(Gff, SignResampledCovarianceSmallBoxes)
{
    std::uint64_t salt = 0;
    for (const auto& dom : {build_path(3), build_box({2, 1}), build_box({2, 2})}) {
        const GreenTable g(dom);
        const DenseGffSampler sampler(g);
        CovarianceCheck check(dom.size());
        for (std::uint64_t i = 0; i < 50000; ++i) {
            Rng rng = make_stream(12, StreamTag::gff, i, salt);
            const auto phi = sampler(rng);
            const auto rep = extract_clusters(dom, mark_edges(dom, phi, EdgeCoupling{}, rng));
            check.add(signed_field(phi, rep, rng));
        }
        check.expect_matches(g);
        ++salt;
    }
}
