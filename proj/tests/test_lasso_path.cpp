#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace csdoa;
using testutil::random_instance;
using testutil::rel_diff;

namespace {

struct ThreeSource {
    SensingMatrix a;
    CMatrix y;
};

// M=20, 5 degree grid, sources at -5, 0, 20 with magnitudes 1, 0.6, 0.2, SNR 20 dB
ThreeSource three_source_scenario(std::uint64_t seed)
{
    const AngularGrid grid = AngularGrid::uniform(-90.0, 5.0, 90.0);
    const auto syn = synthesize(SourceScenario({-5.0, 0.0, 20.0}, {1.0, 0.6, 0.2}), ArraySpec(20), 1, 20.0, seed);
    return {SensingMatrix(grid, ArraySpec(20)), syn.snapshots.data};
}

std::vector<std::size_t> compressed(const std::vector<PathEvent>& ev)
{
    std::vector<std::size_t> out;
    for (const auto& e : ev)
        if (out.empty() || out.back() != e.sparsity)
            out.push_back(e.sparsity);
    return out;
}

} // namespace

TEST(SweepPath, AllZeroAboveThreshold)
{
    const auto inst = random_instance(8, 37, 3, 10.0, 2);
    const SensingOperator op(inst.a);
    const double hi = mu_max(inst.a, inst.y);
    const auto sw = sweep_path(op, inst.y, {3.0 * hi, 2.0 * hi, 1.01 * hi});
    for (const auto& e : sw.record.events)
        EXPECT_EQ(e.sparsity, 0u);
}

TEST(SweepPath, RejectsBadMuLists)
{
    const auto inst = random_instance(8, 37, 1, 10.0, 2);
    const SensingOperator op(inst.a);
    EXPECT_THROW(sweep_path(op, inst.y, {1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(sweep_path(op, inst.y, {1.0, 2.0}), std::invalid_argument);
    EXPECT_THROW(sweep_path(op, inst.y, {1.0, 0.0}), std::invalid_argument);
}

TEST(SweepPath, TradeOffCurveIsMonotone)
{
    const auto sc = three_source_scenario(1);
    const SensingOperator op(sc.a);
    const double hi = mu_max(sc.a, sc.y);
    const auto sw = sweep_path(op, sc.y, log_spaced_mu(hi, 1e-3 * hi, 60));
    for (std::size_t i = 1; i < sw.data_error.size(); ++i) {
        EXPECT_LE(sw.data_error[i], sw.data_error[i - 1] * (1.0 + 1e-7) + 1e-12) << i;
        EXPECT_GE(sw.l1_norm[i], sw.l1_norm[i - 1] * (1.0 - 1e-7) - 1e-12) << i;
    }
}

TEST(SweepPath, EventsSatisfyOptimality)
{
    const auto sc = three_source_scenario(2);
    const SensingOperator op(sc.a);
    const double hi = mu_max(sc.a, sc.y);
    const auto sw = sweep_path(op, sc.y, log_spaced_mu(0.99 * hi, 1e-2 * hi, 25));
    const double tol = 1e-3;
    for (std::size_t i = 0; i < sw.solutions.size(); ++i) {
        const auto& sol = sw.solutions[i];
        const auto r = beamformed_residual(sc.a.matrix(), sc.y, sol.x_hat).r;
        const double mu = sw.record.events[i].mu;
        std::vector<bool> active(static_cast<std::size_t>(r.size()), false);
        for (auto k : sol.active_set)
            active[k] = true;
        for (Eigen::Index k = 0; k < r.size(); ++k) {
            if (active[static_cast<std::size_t>(k)])
                EXPECT_LE(std::abs(r[k] - mu), mu * tol) << "event " << i << " row " << k;
            else
                EXPECT_LE(r[k], mu * (1.0 + tol)) << "event " << i << " row " << k;
        }
    }
}

TEST(SweepPath, SparsityTransitionsOneAtATime)
{
    const auto sc = three_source_scenario(3);
    const SensingOperator op(sc.a);
    const double hi = mu_max(sc.a, sc.y);
    const auto sw = sweep_path(op, sc.y, log_spaced_mu(1.2 * hi, 0.05 * hi, 120));
    auto seq = compressed(sw.record.events);
    const auto dense = std::find_if(seq.begin(), seq.end(), [](std::size_t s) { return s > 3; });
    seq.erase(dense, seq.end());
    EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(SweepPath, WarmAndColdAgree)
{
    const auto sc = three_source_scenario(4);
    const SensingOperator op(sc.a);
    const double hi = mu_max(sc.a, sc.y);
    const auto mus = log_spaced_mu(hi, 0.02 * hi, 15);
    const auto warm = sweep_path(op, sc.y, mus, {}, true);
    const auto cold = sweep_path(op, sc.y, mus, {}, false);
    EXPECT_LT(rel_diff(warm.solutions.back().objective, cold.solutions.back().objective), 1e-7);
}

TEST(RunPath, Preconditions)
{
    const auto inst = random_instance(4, 37, 1, 10.0, 2);
    PathOptions po;
    po.num_sources = 4;
    EXPECT_THROW(run_path(inst.a, inst.y, po), std::domain_error);
    po.num_sources = 1;
    po.interpolation = 1.0;
    EXPECT_THROW(run_path(inst.a, inst.y, po), std::domain_error);
}

TEST(RunPath, SingleSourcePicksMatchedFilterPeak)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto syn = synthesize(SourceScenario::from_db({17.5}, {0.0}), ArraySpec(20), 1, 10.0, seed);
        const SensingMatrix a(AngularGrid::uniform(-90.0, 0.5, 90.0), ArraySpec(20));
        const RVector bf = (a.matrix().adjoint() * syn.snapshots.data).rowwise().norm();
        Eigen::Index best = 0;
        bf.maxCoeff(&best);
        PathOptions po;
        po.num_sources = 1;
        const auto res = run_path(a, syn.snapshots.data, po);
        ASSERT_EQ(res.active_set.size(), 1u);
        EXPECT_EQ(res.active_set[0], static_cast<std::size_t>(best)) << seed;
    }
}

TEST(RunPath, RecoversThreeSources)
{
    const auto sc = three_source_scenario(5);
    PathOptions po;
    po.num_sources = 3;
    const auto res = run_path(sc.a, sc.y, po);
    std::vector<double> doas;
    for (auto i : res.active_set)
        doas.push_back(sc.a.grid()[i]);
    EXPECT_EQ(doas, (std::vector<double>{-5.0, 0.0, 20.0}));
    EXPECT_FALSE(res.short_set);
    ASSERT_EQ(res.amplitudes.rows(), 3);
    // debiased magnitudes near the truth at 20 dB
    EXPECT_NEAR(std::abs(res.amplitudes(0, 0)), 1.0, 0.15);
    EXPECT_NEAR(std::abs(res.amplitudes(1, 0)), 0.6, 0.15);
    EXPECT_NEAR(std::abs(res.amplitudes(2, 0)), 0.2, 0.15);
}

TEST(RunPath, MuStrictlyDecreasesAndLoopIsBounded)
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto inst = random_instance(20, 361, 1, 0.0, 40 + seed);
        PathOptions po;
        po.num_sources = 3;
        po.overshoot = 2;
        po.count_separated_peaks = true;
        const auto res = run_path(inst.a, inst.y, po);
        EXPECT_LE(res.record.events.size(), po.max_outer_iterations);
        for (std::size_t i = 1; i < res.record.grid_of_mu.size(); ++i)
            EXPECT_LT(res.record.grid_of_mu[i], res.record.grid_of_mu[i - 1]);
        EXPECT_LE(res.active_set.size(), 3u);
    }
}

TEST(RunPath, ZeroDataGivesEmptyResult)
{
    const SensingMatrix a(AngularGrid::uniform(-90.0, 1.0, 90.0), ArraySpec(8));
    PathOptions po;
    po.num_sources = 2;
    const auto res = run_path(a, CMatrix::Zero(8, 3), po);
    EXPECT_TRUE(res.active_set.empty());
    EXPECT_TRUE(res.short_set);
}

TEST(LogSpacedMu, Endpoints)
{
    const auto v = log_spaced_mu(10.0, 0.1, 5);
    ASSERT_EQ(v.size(), 5u);
    EXPECT_DOUBLE_EQ(v.front(), 10.0);
    EXPECT_NEAR(v[2], 1.0, 1e-12);
    EXPECT_NEAR(v.back(), 0.1, 1e-14);
    EXPECT_THROW(log_spaced_mu(1.0, 2.0, 5), std::invalid_argument);
}
