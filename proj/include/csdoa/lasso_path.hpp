#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "peaks.hpp"
#include "sparse_solver.hpp"

namespace csdoa {

struct PathEvent {
    double mu = 0.0;
    std::size_t sparsity = 0;
    std::vector<std::size_t> active_set;
    double residual_sup = 0.0; ///< max_i r_i
};

struct PathRecord {
    std::vector<PathEvent> events;
    std::vector<double> grid_of_mu;
};

/// k-th separated peak of a residual magnitude vector.
inline PeakValue peak(const RVector& r, std::size_t k, std::size_t min_separation)
{
    return kth_peak(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())), k, min_separation);
}

struct PathOptions {
    std::size_t num_sources = 1; ///< target sparsity K
    double interpolation = 0.9;  ///< F in ]0,1[
    double epsilon = 0.05;       ///< relative activity threshold
    std::optional<std::size_t> min_separation; ///< bins; default scales 4 bins at 0.5 deg
    /// Drive the loop to K + overshoot active rows, then keep the K strongest.
    std::size_t overshoot = 0;
    std::size_t max_outer_iterations = 12;
    /// Count only separated peaks of the thresholded row norms as active in the loop.
    bool count_separated_peaks = false;
    SolverOptions solver{};
};

struct PathResult {
    SparseSolution final;
    CMatrix amplitudes;               ///< |M| x L debiased amplitudes
    std::vector<std::size_t> active_set; ///< M, ascending
    double mu_final = 0.0;
    PathRecord record;
    bool loop_exhausted = false;
    bool short_set = false; ///< fewer than K separated active rows survived
};

inline std::size_t resolve_min_separation(const PathOptions& opts, const SensingMatrix& a)
{
    if (opts.min_separation)
        return std::max<std::size_t>(1, *opts.min_separation);
    return default_min_separation(a.grid().mean_step());
}

/// Regularization selection for a target sparsity: starting from x = 0 and
/// r = 2 A^H Y, repeatedly place mu between the K-th and (K+1)-th separated
/// peaks of the latest beamformed residual, solve, and threshold the solution
/// at epsilon * max row norm, until at least K rows are active. An overshoot
/// is trimmed to the K strongest separated peaks, and the amplitudes on the
/// final set are refit by least squares.
inline PathResult run_path(const SensingOperator& op, const CMatrix& y, const PathOptions& opts)
{
    const auto m_count = static_cast<std::size_t>(op.num_sensors());
    const std::size_t k = opts.num_sources;
    if (k < 1 || k >= m_count)
        throw std::domain_error("run_path: need 1 <= K < M, got K=" + std::to_string(k));
    if (!(opts.interpolation > 0.0 && opts.interpolation < 1.0))
        throw std::domain_error("run_path: F must lie in ]0,1[");
    const std::size_t target = std::min(k + opts.overshoot, m_count - 1);
    const std::size_t sep = resolve_min_separation(opts, op.sensing());
    const double f = opts.interpolation;

    PathResult out;
    RVector r = (2.0 * (op.matrix().adjoint() * y)).rowwise().norm();
    CMatrix x = CMatrix::Zero(op.num_atoms(), y.cols());
    std::vector<std::size_t> active;
    std::optional<SparseSolution> sol;
    double mu_prev = std::numeric_limits<double>::infinity();

    std::size_t iter = 0;
    while (active.size() < target) {
        if (iter == opts.max_outer_iterations) {
            out.loop_exhausted = true;
            break;
        }
        ++iter;
        double mu = (1.0 - f) * peak(r, target, sep).value + f * peak(r, target + 1, sep).value;
        // the interpolated value can stall when boundary rows fall under the
        // epsilon threshold; keep the sequence strictly decreasing
        if (!(mu < mu_prev))
            mu = 0.9 * mu_prev;
        if (!(mu > 0.0))
            break;
        sol = solve_lasso(op, y, mu, opts.solver, sol ? &sol->x_hat : nullptr);
        r = beamformed_residual(op.matrix(), y, sol->x_hat).r;
        active = active_set_of(sol->row_norm, RelativeThreshold{opts.epsilon});
        if (opts.count_separated_peaks) {
            RVector masked = RVector::Zero(sol->row_norm.size());
            for (auto i : active)
                masked[static_cast<Eigen::Index>(i)] = sol->row_norm[static_cast<Eigen::Index>(i)];
            active = active_set_of(masked, KeepTopK{active.size(), sep});
        }
        out.record.events.push_back({mu, active.size(), active, r.maxCoeff()});
        out.record.grid_of_mu.push_back(mu);
        mu_prev = mu;
    }

    if (!sol) {
        // Y = 0 or a degenerate residual: nothing to activate
        out.final.x_hat = x;
        out.final.row_norm = RVector::Zero(op.num_atoms());
        out.amplitudes = CMatrix(0, y.cols());
        out.short_set = true;
        return out;
    }

    if (active.size() > k) {
        active = active_set_of(sol->row_norm, KeepTopK{k, sep});
    }
    out.short_set = active.size() < k;
    out.amplitudes = debias(op.matrix(), y, active);
    out.active_set = std::move(active);
    out.mu_final = sol->mu;
    out.final = std::move(*sol);
    return out;
}

inline PathResult run_path(const SensingMatrix& a, const CMatrix& y, const PathOptions& opts)
{
    const SensingOperator op(a);
    return run_path(op, y, opts);
}

struct SweepResult {
    PathRecord record;
    std::vector<SparseSolution> solutions;
    std::vector<double> data_error; ///< ||Y - A X||_F^2
    std::vector<double> l1_norm;    ///< sum of row norms
};

/// Solves along a strictly decreasing list of mu values, warm-starting each
/// solve from the previous solution.
inline SweepResult sweep_path(const SensingOperator& op, const CMatrix& y, const std::vector<double>& mu_list,
                              const SolverOptions& opts = {}, bool warm_start = true)
{
    for (std::size_t i = 0; i < mu_list.size(); ++i) {
        if (!(mu_list[i] > 0.0))
            throw std::invalid_argument("sweep_path: mu values must be positive");
        if (i > 0 && !(mu_list[i] < mu_list[i - 1]))
            throw std::invalid_argument("sweep_path: mu values must be strictly decreasing");
    }
    SweepResult out;
    for (double mu : mu_list) {
        const CMatrix* warm = (warm_start && !out.solutions.empty()) ? &out.solutions.back().x_hat : nullptr;
        auto sol = solve_lasso(op, y, mu, opts, warm);
        const auto res = beamformed_residual(op.matrix(), y, sol.x_hat);
        out.record.events.push_back({mu, sol.active_set.size(), sol.active_set, res.r.maxCoeff()});
        out.record.grid_of_mu.push_back(mu);
        out.data_error.push_back((y - op.matrix() * sol.x_hat).squaredNorm());
        out.l1_norm.push_back(sol.row_norm.sum());
        out.solutions.push_back(std::move(sol));
    }
    return out;
}

/// n log-spaced values from hi down to lo (inclusive).
inline std::vector<double> log_spaced_mu(double hi, double lo, std::size_t n)
{
    if (!(hi > lo && lo > 0.0) || n < 2)
        throw std::invalid_argument("log_spaced_mu: need hi > lo > 0 and n >= 2");
    std::vector<double> out(n);
    const double ratio = std::log(lo / hi) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = hi * std::exp(ratio * static_cast<double>(i));
    return out;
}

/// 2 max_i ||(A^H Y)_i||: the smallest mu with an all-zero solution.
inline double mu_max(const SensingMatrix& a, const CMatrix& y)
{
    return 2.0 * (a.matrix().adjoint() * y).rowwise().norm().maxCoeff();
}

} // namespace csdoa
