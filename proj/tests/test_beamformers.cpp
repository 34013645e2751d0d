#include <gtest/gtest.h>

#include "csdoa/beamformers.hpp"
#include "csdoa/synthesis.hpp"

using namespace csdoa;

namespace {

const AngularGrid kGrid = AngularGrid::uniform(-90.0, 0.5, 90.0);

std::size_t argmax(const RVector& v)
{
    Eigen::Index i = 0;
    v.maxCoeff(&i);
    return static_cast<std::size_t>(i);
}

} // namespace

TEST(SampleCovariance, HermitianAndScaled)
{
    const auto s = synthesize(SourceScenario::from_db({10.0}, {0.0}), ArraySpec(6), 40, 10.0, 2);
    const auto c = sample_covariance(s.snapshots.data);
    EXPECT_EQ(c.num_snapshots, 40);
    EXPECT_EQ((c.entries - c.entries.adjoint()).norm(), 0.0);
    const CMatrix direct = s.snapshots.data * s.snapshots.data.adjoint() / 40.0;
    EXPECT_LT((c.entries - direct).norm(), 1e-12 * direct.norm());
}

TEST(Cbf, SingleSnapshotIsMatchedFilter)
{
    const SensingMatrix a(kGrid, ArraySpec(20));
    const auto s = synthesize(SourceScenario::from_db({12.5}, {0.0}), ArraySpec(20), 1, 30.0, 5);
    const CMatrix x = cbf_single(s.snapshots.data, a);
    EXPECT_LT((x - a.matrix().adjoint() * s.snapshots.data).norm(), 1e-13);
    EXPECT_EQ(kGrid[argmax(x.col(0).cwiseAbs())], 12.5);
}

TEST(Cbf, NoiselessPeakAtSource)
{
    const SensingMatrix a(kGrid, ArraySpec(20));
    const auto s = synthesize(SourceScenario::from_db({-41.0}, {0.0}), ArraySpec(20), 4,
                              std::numeric_limits<double>::infinity(), 5);
    const auto spec = cbf_spectrum(sample_covariance(s.snapshots.data), a);
    EXPECT_EQ(kGrid[argmax(spec.power)], -41.0);
}

TEST(Mvdr, RankGuardWithoutLoading)
{
    const SensingMatrix a(kGrid, ArraySpec(20));
    const auto s = synthesize(SourceScenario::from_db({0.0}, {0.0}), ArraySpec(20), 5, 10.0, 1);
    const auto c = sample_covariance(s.snapshots.data);
    try {
        mvdr_spectrum(c, a);
        FAIL() << "expected a rank deficiency error";
    } catch (const RankDeficiencyError& e) {
        EXPECT_EQ(e.snapshots(), 5);
        EXPECT_EQ(e.sensors(), 20);
    }
    EXPECT_NO_THROW(mvdr_spectrum(c, a, 1e-2));
}

TEST(Mvdr, DistortionlessResponse)
{
    const SensingMatrix a(AngularGrid::uniform(-90.0, 2.0, 90.0), ArraySpec(10));
    const auto s = synthesize(SourceScenario::from_db({-20.0, 35.0}, {10.0, 5.0}), ArraySpec(10), 60, 15.0, 8);
    const auto res = mvdr_beamform(sample_covariance(s.snapshots.data), a);
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const cplx g = res.weights.col(i).dot(a.column(i));
        EXPECT_NEAR(g.real(), 1.0, 1e-9);
        EXPECT_NEAR(g.imag(), 0.0, 1e-9);
    }
}

TEST(Mvdr, ResolvesSourcesWithManySnapshots)
{
    const SensingMatrix a(kGrid, ArraySpec(20));
    const auto s = synthesize(SourceScenario::from_db({-3.0, 2.0, 75.0}, {12.0, 22.0, 20.0}), ArraySpec(20), 100,
                              25.0, 3);
    const auto pk = peak_pick(mvdr_spectrum(sample_covariance(s.snapshots.data), a), 3, 4);
    auto doas = pk.angles_deg;
    std::sort(doas.begin(), doas.end());
    ASSERT_EQ(doas.size(), 3u);
    EXPECT_NEAR(doas[0], -3.0, 0.5);
    EXPECT_NEAR(doas[1], 2.0, 0.5);
    EXPECT_NEAR(doas[2], 75.0, 0.5);
}

TEST(Music, PreconditionsOnK)
{
    const SensingMatrix a(kGrid, ArraySpec(8));
    const auto s = synthesize(SourceScenario::from_db({0.0}, {0.0}), ArraySpec(8), 20, 10.0, 1);
    const auto c = sample_covariance(s.snapshots.data);
    EXPECT_THROW(music_spectrum(c, a, 0), std::domain_error);
    EXPECT_THROW(music_spectrum(c, a, 8), std::domain_error);
    EXPECT_NO_THROW(music_spectrum(c, a, 7));
}

TEST(Music, InvariantToCovarianceScale)
{
    const SensingMatrix a(kGrid, ArraySpec(12));
    const auto s = synthesize(SourceScenario::from_db({-30.0, 10.0}, {0.0, 3.0}), ArraySpec(12), 40, 10.0, 6);
    auto c = sample_covariance(s.snapshots.data);
    const auto p1 = music_spectrum(c, a, 2).power;
    c.entries *= 37.5;
    const auto p2 = music_spectrum(c, a, 2).power;
    EXPECT_LT((p1 - p2).cwiseAbs().maxCoeff() / p1.maxCoeff(), 1e-8);
}

TEST(Music, FlagsDegenerateSubspaceSplit)
{
    // noiseless single source: every eigenvalue past the first is zero
    const SensingMatrix a(kGrid, ArraySpec(8));
    const auto s = synthesize(SourceScenario::from_db({5.0}, {0.0}), ArraySpec(8), 10,
                              std::numeric_limits<double>::infinity(), 2);
    const auto c = sample_covariance(s.snapshots.data);
    EXPECT_TRUE(music_spectrum(c, a, 2).degenerate_subspace);
    EXPECT_FALSE(music_spectrum(c, a, 1).degenerate_subspace);
}

TEST(PeakPick, SeparationAndTies)
{
    RVector p(12);
    p << 0, 5, 4, 5, 0, 0, 3, 0, 0, 9, 0, 1;
    const BeamSpectrum spec{AngularGrid::uniform(0.0, 1.0, 11.0), p, BeamMethod::cbf, false};
    // peaks at 9 (idx 9), 5 (idx 1 and 3, tie -> lower index first), 3, 1
    const auto pk = peak_pick(spec, 3, 3);
    ASSERT_EQ(pk.indices.size(), 3u);
    EXPECT_EQ(pk.indices[0], 9u);
    EXPECT_EQ(pk.indices[1], 1u);
    EXPECT_EQ(pk.indices[2], 6u);
    EXPECT_FALSE(pk.short_list);
}

TEST(PeakPick, ShortListWhenTooFewPeaks)
{
    RVector p(5);
    p << 0, 1, 2, 1, 0;
    const BeamSpectrum spec{AngularGrid::uniform(0.0, 1.0, 4.0), p, BeamMethod::cbf, false};
    const auto pk = peak_pick(spec, 2, 4);
    EXPECT_EQ(pk.indices.size(), 1u);
    EXPECT_TRUE(pk.short_list);
}
