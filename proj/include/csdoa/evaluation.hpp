#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "beamformers.hpp"
#include "lasso_path.hpp"
#include "synthesis.hpp"

namespace csdoa {

/// Angular error charged for a true source that received no estimate.
inline constexpr double kMissingEstimatePenaltyDeg = 180.0;

struct Pairing {
    double rmse = 0.0;
    /// assignment[k] = index into the estimates paired with truth[k], or -1 if padded
    std::vector<int> assignment;
    bool padded = false;
};

/// Minimum-RMSE one-to-one pairing of estimates to true DOAs by exhaustive
/// permutation search. Missing estimates cost kMissingEstimatePenaltyDeg each.
inline Pairing pair_and_rmse(const std::vector<double>& estimates, const std::vector<double>& truth)
{
    const std::size_t k = truth.size();
    if (k == 0)
        return {};
    const std::size_t slots = std::max(k, estimates.size());
    if (slots > 8)
        throw std::invalid_argument("pair_and_rmse: at most 8 estimates/sources supported");

    std::vector<int> perm(slots);
    std::iota(perm.begin(), perm.end(), 0);
    Pairing best;
    best.rmse = std::numeric_limits<double>::infinity();
    do {
        double sse = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const auto e = static_cast<std::size_t>(perm[i]);
            const double d = e < estimates.size() ? estimates[e] - truth[i] : kMissingEstimatePenaltyDeg;
            sse += d * d;
        }
        const double rmse = std::sqrt(sse / static_cast<double>(k));
        if (rmse < best.rmse) {
            best.rmse = rmse;
            best.assignment.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    for (auto& a : best.assignment)
        if (static_cast<std::size_t>(a) >= estimates.size())
            a = -1;
    best.padded = estimates.size() < k;
    return best;
}

/// Quadratic mean of per-realization RMSE values.
inline double ensemble_rmse(const std::vector<double>& per_trial)
{
    if (per_trial.empty())
        return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double v : per_trial)
        s += v * v;
    return std::sqrt(s / static_cast<double>(per_trial.size()));
}

struct ExhaustiveResult {
    std::vector<std::size_t> indices;
    std::vector<double> doas_deg;
    CMatrix amplitudes; ///< K x L
    double residual = 0.0; ///< ||Y - A_S A_S^+ Y||_F^2
};

inline double combination_count(std::size_t n, std::size_t k)
{
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i)
        c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c;
}

/// Best-fitting K-subset of steering vectors (the l0 / maximum-likelihood
/// problem). Uses G = A^H A and P = (A^H Y)(A^H Y)^H: the captured energy of a
/// subset is tr(G_SS^{-1} P_SS), so each subset costs a K x K solve.
/// Subsets with numerically dependent columns are skipped.
inline ExhaustiveResult exhaustive_ml(const SensingOperator& op, const CMatrix& y, std::size_t k)
{
    const auto n = static_cast<std::size_t>(op.num_atoms());
    if (k < 1 || k > n)
        throw std::domain_error("exhaustive_ml: need 1 <= K <= N");
    if (k > 3)
        throw std::domain_error("exhaustive_ml: K=" + std::to_string(k) + " refused, would evaluate "
                                + std::to_string(combination_count(n, k)) + " subsets");

    const CMatrix& g = op.gram();
    const CMatrix b = op.matrix().adjoint() * y;
    const CMatrix p = b * b.adjoint();
    constexpr double det_floor = 1e-10;

    double best = -1.0;
    std::vector<std::size_t> best_set;
    auto ei = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

    if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = p(ei(i), ei(i)).real() / g(ei(i), ei(i)).real();
            if (e > best) {
                best = e;
                best_set = {i};
            }
        }
    } else if (k == 2) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double gii = g(ei(i), ei(i)).real(), gjj = g(ei(j), ei(j)).real();
                const cplx gij = g(ei(i), ei(j));
                const double det = gii * gjj - std::norm(gij);
                if (det <= det_floor * gii * gjj)
                    continue;
                const double e = (gjj * p(ei(i), ei(i)).real() + gii * p(ei(j), ei(j)).real()
                                  - 2.0 * (gij * p(ei(j), ei(i))).real())
                                 / det;
                if (e > best) {
                    best = e;
                    best_set = {i, j};
                }
            }
    } else {
        Eigen::Matrix3cd gs, ps;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (std::size_t l = j + 1; l < n; ++l) {
                    const std::size_t idx[3] = {i, j, l};
                    for (int r = 0; r < 3; ++r)
                        for (int c = 0; c < 3; ++c) {
                            gs(r, c) = g(ei(idx[r]), ei(idx[c]));
                            ps(r, c) = p(ei(idx[r]), ei(idx[c]));
                        }
                    const double det = gs.determinant().real();
                    if (det <= det_floor)
                        continue;
                    const double e = (gs.inverse() * ps).trace().real();
                    if (e > best) {
                        best = e;
                        best_set = {i, j, l};
                    }
                }
    }
    if (best_set.empty())
        throw std::runtime_error("exhaustive_ml: every subset was numerically singular");

    ExhaustiveResult out;
    out.indices = best_set;
    for (auto i : best_set)
        out.doas_deg.push_back(op.sensing().grid()[i]);
    out.amplitudes = debias(op.matrix(), y, best_set);
    CMatrix sub(op.num_sensors(), static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c)
        sub.col(ei(c)) = op.matrix().col(ei(best_set[c]));
    out.residual = (y - sub * out.amplitudes).squaredNorm();
    return out;
}

enum class Method { cbf, mvdr, music, cs, exhaustive };

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::cbf: return "CBF";
    case Method::mvdr: return "MVDR";
    case Method::music: return "MUSIC";
    case Method::cs: return "CS";
    case Method::exhaustive: return "EXHAUSTIVE";
    }
    return "?";
}

inline std::optional<Method> method_from_string(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (auto m : {Method::cbf, Method::mvdr, Method::music, Method::cs, Method::exhaustive})
        if (s == to_string(m))
            return m;
    return std::nullopt;
}

struct MethodEstimate {
    std::vector<double> doas_deg;
    std::vector<std::size_t> indices;
    bool short_list = false;
};

struct EstimatorSettings {
    std::size_t num_sources = 1;
    std::size_t min_separation = 4;
    double mvdr_loading = 0.0;
    PathOptions path{};
};

/// DOA estimate of one method on one snapshot set. Throws on method failure
/// (e.g. MVDR without enough snapshots).
inline MethodEstimate estimate_doas(Method method, const SensingOperator& op, const CMatrix& y,
                                    const EstimatorSettings& s)
{
    const auto& a = op.sensing();
    auto from_spectrum = [&](const BeamSpectrum& spec) {
        const auto pk = peak_pick(spec, s.num_sources, s.min_separation);
        return MethodEstimate{pk.angles_deg, pk.indices, pk.short_list};
    };
    switch (method) {
    case Method::cbf:
        return from_spectrum(cbf_spectrum(sample_covariance(y), a));
    case Method::mvdr:
        return from_spectrum(mvdr_spectrum(sample_covariance(y), a, s.mvdr_loading));
    case Method::music:
        if (y.cols() < 2)
            throw std::domain_error("MUSIC needs at least 2 snapshots");
        return from_spectrum(music_spectrum(sample_covariance(y), a, s.num_sources));
    case Method::cs: {
        auto po = s.path;
        po.num_sources = s.num_sources;
        if (!po.min_separation)
            po.min_separation = s.min_separation;
        const auto res = run_path(op, y, po);
        MethodEstimate e;
        e.indices = res.active_set;
        for (auto i : res.active_set)
            e.doas_deg.push_back(a.grid()[i]);
        e.short_list = res.short_set;
        return e;
    }
    case Method::exhaustive: {
        const auto res = exhaustive_ml(op, y, s.num_sources);
        return {res.doas_deg, res.indices, false};
    }
    }
    throw std::logic_error("estimate_doas: unknown method");
}

struct TrialOutcome {
    bool failed = false;
    std::string error;
    MethodEstimate estimate;
    double rmse = 0.0;          ///< per-realization, after pairing
    double max_abs_error = 0.0; ///< worst paired error in degrees
    double runtime_s = 0.0;
};

struct MethodSnrStats {
    double snr_db = 0.0;
    double rmse_deg = std::numeric_limits<double>::quiet_NaN();
    std::size_t trial_count = 0; ///< successful trials
    std::size_t failures = 0;
    std::size_t short_picks = 0;
    std::map<double, std::size_t> histogram; ///< estimated angle -> count
    double mean_runtime_s = 0.0;
    std::vector<double> trial_rmse;
    std::vector<double> trial_max_error;
    std::string first_error;

    /// Fraction of successful trials with every paired error <= tol_deg.
    double success_rate(double tol_deg) const
    {
        if (trial_max_error.empty())
            return 0.0;
        const auto ok = std::count_if(trial_max_error.begin(), trial_max_error.end(),
                                      [&](double e) { return e <= tol_deg; });
        return static_cast<double>(ok) / static_cast<double>(trial_max_error.size() + failures);
    }
};

struct ScenarioDescriptor {
    SourceScenario sources;
    ArraySpec array{20};
    AngularGrid grid = AngularGrid::uniform(-90.0, 0.5, 90.0);
    std::size_t snapshots = 1;
};

struct MonteCarloConfig {
    ScenarioDescriptor scenario;
    std::vector<Method> methods;
    std::vector<double> snr_db;
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    EstimatorSettings estimator{};
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t threads = 1;
    bool keep_trial_estimates = false;
};

struct EvalReport {
    ScenarioDescriptor scenario;
    std::uint64_t seed_base = 0;
    std::size_t trials = 0;
    std::map<Method, std::vector<MethodSnrStats>> per_method;
    /// Optional per-(snr, trial, method) estimates; filled when requested.
    std::vector<std::vector<std::map<Method, TrialOutcome>>> outcomes;

    const MethodSnrStats& at(Method m, std::size_t snr_index) const { return per_method.at(m).at(snr_index); }
};

inline std::uint64_t trial_seed(std::uint64_t base, std::size_t snr_index, std::size_t trial)
{
    return derive_seed(base, snr_index, trial);
}

/// Runs every method on identical synthetic snapshot sets for each
/// (SNR, trial). Results are merged by index, so output is independent of the
/// thread count.
inline EvalReport monte_carlo(const MonteCarloConfig& cfg)
{
    cfg.scenario.sources.validate();
    if (cfg.methods.empty())
        throw std::invalid_argument("monte_carlo: no methods requested");
    const SensingMatrix a(cfg.scenario.grid, cfg.scenario.array);
    const SensingOperator op(a);
    auto est = cfg.estimator;
    est.num_sources = cfg.scenario.sources.size();

    const std::size_t n_snr = cfg.snr_db.size();
    const std::size_t jobs = n_snr * cfg.trials;
    std::vector<std::map<Method, TrialOutcome>> results(jobs);

    auto run_job = [&](std::size_t job) {
        const std::size_t si = job / cfg.trials;
        const std::size_t ti = job % cfg.trials;
        const auto syn = synthesize(cfg.scenario.sources, cfg.scenario.array, cfg.scenario.snapshots,
                                    cfg.snr_db[si], trial_seed(cfg.seed, si, ti));
        const CMatrix& y = syn.snapshots.data;
        for (auto m : cfg.methods) {
            TrialOutcome o;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                o.estimate = estimate_doas(m, op, y, est);
                const auto pr = pair_and_rmse(o.estimate.doas_deg, cfg.scenario.sources.doas_deg);
                o.rmse = pr.rmse;
                for (std::size_t k = 0; k < pr.assignment.size(); ++k) {
                    const double d = pr.assignment[k] < 0
                                         ? kMissingEstimatePenaltyDeg
                                         : std::abs(o.estimate.doas_deg[static_cast<std::size_t>(pr.assignment[k])]
                                                    - cfg.scenario.sources.doas_deg[k]);
                    o.max_abs_error = std::max(o.max_abs_error, d);
                }
            } catch (const std::exception& ex) {
                o.failed = true;
                o.error = ex.what();
            }
            o.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            results[job][m] = std::move(o);
        }
    };

    std::size_t workers = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    workers = std::min(workers, std::max<std::size_t>(jobs, 1));
    if (workers <= 1) {
        for (std::size_t j = 0; j < jobs; ++j)
            run_job(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t j = next++; j < jobs; j = next++)
                    run_job(j);
            });
        for (auto& t : pool)
            t.join();
    }

    EvalReport rep;
    rep.scenario = cfg.scenario;
    rep.seed_base = cfg.seed;
    rep.trials = cfg.trials;
    for (auto m : cfg.methods) {
        auto& stats = rep.per_method[m];
        stats.resize(n_snr);
        for (std::size_t si = 0; si < n_snr; ++si) {
            auto& st = stats[si];
            st.snr_db = cfg.snr_db[si];
            double runtime = 0.0;
            for (std::size_t ti = 0; ti < cfg.trials; ++ti) {
                const auto& o = results[si * cfg.trials + ti].at(m);
                runtime += o.runtime_s;
                if (o.failed) {
                    ++st.failures;
                    if (st.first_error.empty())
                        st.first_error = o.error;
                    continue;
                }
                ++st.trial_count;
                if (o.estimate.short_list)
                    ++st.short_picks;
                st.trial_rmse.push_back(o.rmse);
                st.trial_max_error.push_back(o.max_abs_error);
                for (double d : o.estimate.doas_deg)
                    ++st.histogram[d];
            }
            st.rmse_deg = ensemble_rmse(st.trial_rmse);
            st.mean_runtime_s = cfg.trials ? runtime / static_cast<double>(cfg.trials) : 0.0;
        }
    }
    if (cfg.keep_trial_estimates) {
        rep.outcomes.resize(n_snr);
        for (std::size_t si = 0; si < n_snr; ++si)
            for (std::size_t ti = 0; ti < cfg.trials; ++ti)
                rep.outcomes[si].push_back(std::move(results[si * cfg.trials + ti]));
    }
    return rep;
}

} // namespace csdoa
