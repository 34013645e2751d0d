// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "oracle/cd_group_lasso.hpp"
#include "test_util.hpp"

using namespace csdoa;
using testutil::random_instance;
using testutil::rel_diff;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4)
{
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

EstimatorSettings harness_estimator()
{
    EstimatorSettings e;
    e.min_separation = 4;
    e.path.overshoot = 2;
    e.path.count_separated_peaks = true;
    return e;
}

MonteCarloConfig scenario(std::vector<double> doas, std::vector<double> mags_db, std::size_t snapshots,
                          std::vector<Method> methods, std::vector<double> snr, std::size_t trials,
                          std::uint64_t seed, PhaseModel model = PhaseModel::iid_uniform_per_snapshot)
{
    MonteCarloConfig c;
    c.scenario.sources = SourceScenario::from_db(std::move(doas), mags_db, model);
    c.scenario.snapshots = snapshots;
    c.methods = std::move(methods);
    c.snr_db = std::move(snr);
    c.trials = trials;
    c.seed = seed;
    c.estimator = harness_estimator();
    c.threads = threads();
    return c;
}

// 1. every converged solve on a broad random family satisfies the optimality conditions
Verdict kkt_suite()
{
    const std::array<std::size_t, 3> ms{4, 8, 20};
    const std::array<std::size_t, 4> ns{8, 37, 181, 361};
    const std::array<std::size_t, 3> ls{1, 5, 50};
    const std::array<double, 3> snrs{0.0, 10.0, 20.0};
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> frac(0.02, 0.98);
    std::size_t converged = 0, passed = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 500; ++i) {
        const auto m = ms[i % 3];
        const auto n = ns[(i / 3) % 4];
        const auto l = ls[(i / 12) % 3];
        const auto snr = snrs[(i / 36) % 3];
        const auto inst = random_instance(m, n, l, snr, 10'000 + i);
        const double mu = frac(rng) * mu_max(inst.a, inst.y);
        const auto sol = solve_lasso(inst.a, inst.y, mu);
        if (!sol.converged)
            continue;
        ++converged;
        const auto kkt = kkt_check(inst.a.matrix(), inst.y, sol, 1e-3);
        worst = std::max({worst, kkt.max_violation_inactive, kkt.max_gap_active});
        if (kkt.pass)
            ++passed;
    }
    return {converged > 0 && passed == converged,
            std::to_string(passed) + "/" + std::to_string(converged) + " converged solves pass (500 instances), worst "
                "relative violation " + fmt(worst)};
}

// 2. above the threshold the solution is exactly zero
Verdict zero_threshold()
{
    double worst = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto inst = random_instance(std::array<std::size_t, 3>{4, 8, 20}[i % 3],
                                          std::array<std::size_t, 4>{8, 37, 181, 361}[i % 4],
                                          std::array<std::size_t, 3>{1, 5, 50}[i % 3 == 0 ? 0 : (i / 3) % 3],
                                          10.0 * static_cast<double>(i % 3), 20'000 + i);
        const double sup = (inst.a.matrix().adjoint() * inst.y).rowwise().norm().maxCoeff();
        const auto sol = solve_lasso(inst.a, inst.y, 2.02 * sup);
        worst = std::max(worst, sol.x_hat.cwiseAbs().maxCoeff());
    }
    return {worst < 1e-8, "max |X| over 100 instances " + fmt(worst)};
}

// 3. objective agrees with an independent coordinate-descent solver
Verdict oracle_match()
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    double worst = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        const auto inst = random_instance(4, 8, i % 2 ? 3 : 1, 10.0 * static_cast<double>(i % 3), 30'000 + i);
        const double mu = frac(rng) * mu_max(inst.a, inst.y);
        const auto sol = solve_lasso(inst.a, inst.y, mu);
        const auto ref = oracle::cd_group_lasso(inst.a.matrix(), inst.y, mu);
        worst = std::max(worst, rel_diff(sol.objective, ref.objective));
    }
    return {worst < 1e-6, "worst relative objective gap " + fmt(worst)};
}

// 4. regularization path on the three-source 5 degree grid scenario
Verdict path_regeneration()
{
    auto check = [](std::uint64_t seed, std::string* why) {
        const AngularGrid grid = AngularGrid::uniform(-90.0, 5.0, 90.0);
        const auto syn =
            synthesize(SourceScenario({-5.0, 0.0, 20.0}, {1.0, 0.6, 0.2}), ArraySpec(20), 1, 20.0, seed);
        const SensingMatrix a(grid, ArraySpec(20));
        const SensingOperator op(a);
        const double hi = mu_max(a, syn.snapshots.data);
        const auto sw = sweep_path(op, syn.snapshots.data, log_spaced_mu(1.2 * hi, 1e-3 * hi, 300));
        std::vector<std::size_t> seq;
        for (const auto& e : sw.record.events)
            if (seq.empty() || seq.back() != e.sparsity)
                seq.push_back(e.sparsity);
        seq.erase(std::find_if(seq.begin(), seq.end(), [](std::size_t s) { return s > 3; }), seq.end());
        bool ok = seq == std::vector<std::size_t>{0, 1, 2, 3};
        for (std::size_t i = 1; i < sw.data_error.size(); ++i) {
            ok = ok && sw.data_error[i] <= sw.data_error[i - 1] * (1.0 + 1e-7) + 1e-12;
            ok = ok && sw.l1_norm[i] >= sw.l1_norm[i - 1] * (1.0 - 1e-7) - 1e-12;
        }
        if (why) {
            *why = "sparsity sequence";
            for (auto s : seq)
                *why += " " + std::to_string(s);
        }
        return ok;
    };
    std::string seq;
    const bool pass = check(1, &seq);
    std::size_t other = 0;
    for (std::uint64_t s = 2; s <= 21; ++s)
        other += check(s, nullptr) ? 1 : 0;
    return {pass, seq + " (before dense regime); " + std::to_string(other)
                      + "/20 further realizations show the same ladder"};
}

// 5. single snapshot, well separated sources: CS and CBF comparable
Verdict separated_pair()
{
    const std::vector<double> snr{5.0, 10.0, 15.0, 20.0, 25.0};
    const auto rep = monte_carlo(scenario({2.0, 75.0}, {22.0, 20.0}, 1, {Method::cbf, Method::cs}, snr, 1000, 5));
    bool ok = true;
    std::string d;
    for (std::size_t s = 0; s < snr.size(); ++s) {
        const double cs = rep.at(Method::cs, s).rmse_deg;
        const double cbf = rep.at(Method::cbf, s).rmse_deg;
        const double ratio = std::max(cs, cbf) / std::min(cs, cbf);
        const bool here = ratio <= 2.0;
        ok = ok && here;
        d += fmt(snr[s], 3) + "dB CS " + fmt(cs) + " CBF " + fmt(cbf) + (here ? "" : " (ratio " + fmt(ratio, 3) + ")")
             + "; ";
    }
    return {ok, d};
}

// 6. single snapshot, close pair: CS resolves, CBF does not
Verdict close_pair()
{
    const auto rep =
        monte_carlo(scenario({-3.0, 2.0, 75.0}, {12.0, 22.0, 20.0}, 1, {Method::cbf, Method::cs}, {20.0}, 500, 6));
    const double cs = rep.at(Method::cs, 0).rmse_deg;
    const double cbf = rep.at(Method::cbf, 0).rmse_deg;
    return {cs < 0.5 * cbf, "CS " + fmt(cs) + " deg, CBF " + fmt(cbf) + " deg"};
}

// lowest grid SNR from which RMSE stays below 2 degrees, or NaN
double threshold_snr(const std::vector<MethodSnrStats>& st)
{
    double thr = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = st.size(); i-- > 0;) {
        if (!(st[i].rmse_deg < 2.0))
            break;
        thr = st[i].snr_db;
    }
    return thr;
}

std::vector<double> snr_range(double lo, double hi, double step)
{
    std::vector<double> v;
    for (double s = lo; s <= hi + 1e-9; s += step)
        v.push_back(s);
    return v;
}

// 7. multi-snapshot resolution ladder as the pair moves closer
Verdict resolution_ladder()
{
    const std::vector<double> mvdr_snr = snr_range(0.0, 30.0, 1.0);
    std::vector<double> cs_snr = snr_range(-4.0, 8.0, 1.0);
    for (double s : {12.0, 16.0, 20.0, 25.0})
        cs_snr.push_back(s);
    struct Ladder {
        std::vector<MethodSnrStats> mvdr, cs;
    };
    auto ladder = [&](std::vector<double> doas, std::uint64_t seed) {
        const auto m = monte_carlo(scenario(doas, {12.0, 22.0, 20.0}, 50, {Method::mvdr}, mvdr_snr, 100, seed));
        const auto c = monte_carlo(scenario(doas, {12.0, 22.0, 20.0}, 50, {Method::cs}, cs_snr, 100, seed));
        return Ladder{m.per_method.at(Method::mvdr), c.per_method.at(Method::cs)};
    };
    const auto wide = ladder({-3.0, 2.0, 75.0}, 7);
    const auto close = ladder({-2.0, 1.0, 75.0}, 8);

    std::vector<double> band;
    for (const auto& c : wide.cs)
        for (const auto& m : wide.mvdr)
            if (c.snr_db == m.snr_db && c.rmse_deg < 2.0 && m.rmse_deg > 5.0)
                band.push_back(c.snr_db);

    const double mv_w = threshold_snr(wide.mvdr), mv_c = threshold_snr(close.mvdr);
    const double cs_w = threshold_snr(wide.cs), cs_c = threshold_snr(close.cs);
    const double shift_diff = (mv_c - mv_w) - (cs_c - cs_w);
    std::string d = "band (CS<2, MVDR>5) at";
    for (double s : band)
        d += " " + fmt(s, 3);
    if (band.empty())
        d += " none";
    d += " dB; thresholds MVDR " + fmt(mv_w, 3) + "->" + fmt(mv_c, 3) + " dB, CS " + fmt(cs_w, 3) + "->"
         + fmt(cs_c, 3) + " dB; shift difference " + fmt(shift_diff, 3) + " dB";
    return {!band.empty() && shift_diff >= 5.0, d};
}

// 8. fully coherent pair: subspace and MVDR fail, CS resolves
Verdict coherent_pair()
{
    const auto rep = monte_carlo(scenario({55.0, 65.0}, {20.0, 20.0}, 50, {Method::mvdr, Method::music, Method::cs},
                                          {15.0}, 100, 8, PhaseModel::coherent_fixed));
    const double mvdr = rep.at(Method::mvdr, 0).success_rate(2.0);
    const double music = rep.at(Method::music, 0).success_rate(2.0);
    const double cs = rep.at(Method::cs, 0).success_rate(2.0);
    return {mvdr < 0.5 && music < 0.5 && cs > 0.9,
            "success within 2 deg: MVDR " + fmt(100 * mvdr, 3) + "%, MUSIC " + fmt(100 * music, 3) + "%, CS "
                + fmt(100 * cs, 3) + "%"};
}

// 9. CS picks the same pair of grid points as exhaustive ML
Verdict exhaustive_agreement()
{
    auto c = scenario({2.0, 75.0}, {22.0, 20.0}, 1, {Method::cs, Method::exhaustive}, {20.0}, 200, 9);
    c.keep_trial_estimates = true;
    const auto rep = monte_carlo(c);
    std::size_t agree = 0;
    for (const auto& trial : rep.outcomes[0]) {
        auto cs = trial.at(Method::cs).estimate.indices;
        auto ml = trial.at(Method::exhaustive).estimate.indices;
        std::sort(cs.begin(), cs.end());
        std::sort(ml.begin(), ml.end());
        if (!trial.at(Method::cs).failed && !trial.at(Method::exhaustive).failed && cs == ml)
            ++agree;
    }
    const double frac = static_cast<double>(agree) / 200.0;
    return {frac >= 0.9, std::to_string(agree) + "/200 trials agree"};
}

// 10. time series ingestion followed by CBF recovers the DOA
Verdict ingestion()
{
    const double fs = 1500.0;
    const std::size_t nfft = 512;
    const double f0 = 120.0 * fs / static_cast<double>(nfft);
    const ArraySpec arr(20);
    const AngularGrid grid = AngularGrid::uniform(-90.0, 0.5, 90.0);
    const SensingMatrix a(grid, arr);
    bool ok = snapshot_count(135000, 4096, 0.63) == 87;
    double worst = 0.0;
    for (double theta : {-61.0, -12.5, 0.0, 7.0, 33.5, 74.0}) {
        const auto ts = plane_wave_tone(arr, theta, f0, fs, 8000, 1.0, 0.3);
        const auto ex = extract_snapshots(ts, arr, {f0, nfft, 0.5, Window::hann});
        const auto pk = peak_pick(cbf_spectrum(sample_covariance(ex.snapshots.data), a), 1, 4);
        const double err = std::abs(pk.angles_deg.at(0) - theta);
        worst = std::max(worst, err);
        ok = ok && err <= grid.mean_step() + 1e-9 && ex.warnings.empty();
    }
    return {ok, "snapshot_count(135000, 4096, 0.63) = " + std::to_string(snapshot_count(135000, 4096, 0.63))
                    + ", worst DOA error " + fmt(worst) + " deg"};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"optimality conditions on random instances", kkt_suite},
        {"zero solution above threshold", zero_threshold},
        {"coordinate-descent oracle agreement", oracle_match},
        {"regularization path ladder", path_regeneration},
        {"separated pair, CS comparable to CBF", separated_pair},
        {"close pair, CS beats CBF", close_pair},
        {"multi-snapshot resolution ladder", resolution_ladder},
        {"coherent arrivals", coherent_pair},
        {"exhaustive ML agreement", exhaustive_agreement},
        {"tone ingestion", ingestion},
    };
    std::set<std::size_t> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.count(i + 1))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, v.pass ? "PASS" : "FAIL",
                    criteria[i].first.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
