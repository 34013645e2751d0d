#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "array_geometry.hpp"
#include "peaks.hpp"

namespace csdoa {

struct SolverOptions {
    double rel_tol = 1e-9;
    std::size_t max_iters = 20000;
    /// Reset the momentum sequence every this many iterations (0 disables).
    std::size_t restart_period = 500;
    /// Also reset momentum whenever the objective increases.
    bool adaptive_restart = true;
    /// Relative boundary-condition tolerance that a solve must meet before it
    /// is declared converged.
    double kkt_tol = 1e-4;
};

/// Sensing matrix plus the quantities every solve reuses: the Gram matrix
/// A^H A and the gradient Lipschitz constant 2 sigma_max(A)^2.
class SensingOperator {
public:
    explicit SensingOperator(SensingMatrix a) : a_{std::move(a)}, gram_(a_.matrix().adjoint() * a_.matrix())
    {
        const CMatrix aah = a_.matrix() * a_.matrix().adjoint();
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(aah, Eigen::EigenvaluesOnly);
        lipschitz_ = 2.0 * eig.eigenvalues().maxCoeff();
    }

    const SensingMatrix& sensing() const noexcept { return a_; }
    const CMatrix& matrix() const noexcept { return a_.matrix(); }
    const CMatrix& gram() const noexcept { return gram_; }
    double lipschitz() const noexcept { return lipschitz_; }
    Eigen::Index num_sensors() const noexcept { return a_.rows(); }
    Eigen::Index num_atoms() const noexcept { return a_.cols(); }

private:
    SensingMatrix a_;
    CMatrix gram_;
    double lipschitz_ = 0.0;
};

struct SparseSolution {
    CMatrix x_hat;                  ///< N x L
    double mu = 0.0;
    std::vector<std::size_t> active_set; ///< rows with nonzero norm, ascending
    RVector row_norm;               ///< ||X_i||_2 per grid angle
    double objective = 0.0;         ///< ||Y - A X||_F^2 + mu ||row_norm||_1
    std::size_t iterations = 0;
    bool converged = false;
};

/// v * max(0, 1 - t/||v||); the proximal map of t ||.||_2.
template <class Derived>
auto row_shrink(const Eigen::MatrixBase<Derived>& v, double t)
{
    using Plain = typename Derived::PlainObject;
    const double n = v.norm();
    if (n <= t)
        return Plain(Plain::Zero(v.rows(), v.cols()));
    return Plain(v * (1.0 - t / n));
}

/// Complex soft threshold: shrinks the modulus, keeps the phase.
inline cplx soft_threshold(cplx z, double t)
{
    const double m = std::abs(z);
    return m <= t ? cplx{0.0, 0.0} : z * (1.0 - t / m);
}

inline RVector row_norms(const CMatrix& x) { return x.rowwise().norm(); }

inline std::vector<std::size_t> nonzero_rows(const RVector& norms)
{
    std::vector<std::size_t> s;
    for (Eigen::Index i = 0; i < norms.size(); ++i)
        if (norms[i] > 0.0)
            s.push_back(static_cast<std::size_t>(i));
    return s;
}

inline double lasso_objective(const CMatrix& a, const CMatrix& y, const CMatrix& x, double mu)
{
    return (y - a * x).squaredNorm() + mu * row_norms(x).sum();
}

struct ResidualVector {
    RVector r;  ///< per-angle magnitude (row norm of raw)
    CMatrix raw; ///< 2 A^H (Y - A X)
};

inline ResidualVector beamformed_residual(const CMatrix& a, const CMatrix& y, const CMatrix& x)
{
    if (a.rows() != y.rows() || a.cols() != x.rows() || x.cols() != y.cols())
        throw std::invalid_argument("beamformed_residual: shape mismatch");
    CMatrix raw = 2.0 * (a.adjoint() * (y - a * x));
    RVector r = raw.rowwise().norm();
    return {std::move(r), std::move(raw)};
}

struct KktReport {
    double max_violation_inactive = 0.0; ///< max_i (r_i - mu)/mu, clamped at 0
    double max_gap_active = 0.0;         ///< max_{i active} |r_i - mu|/mu
    bool pass = false;
};

namespace detail {

inline KktReport kkt_from_residual(const RVector& r, const std::vector<std::size_t>& active, double mu, double tol)
{
    KktReport rep;
    for (Eigen::Index i = 0; i < r.size(); ++i)
        rep.max_violation_inactive = std::max(rep.max_violation_inactive, (r[i] - mu) / mu);
    for (auto i : active)
        rep.max_gap_active = std::max(rep.max_gap_active, std::abs(r[static_cast<Eigen::Index>(i)] - mu) / mu);
    rep.pass = rep.max_violation_inactive <= tol && rep.max_gap_active <= tol;
    return rep;
}

/// Accelerated proximal gradient on ||Y - A X||_F^2 + mu sum_i ||X_i||_2.
///
/// The smooth part is evaluated through B = A^H Y and the Gram matrix, so a
/// gradient costs N |S| L for a support S (or 2 N M L through A when S is
/// dense). The step starts from the previous accepted curvature estimate,
/// shrunk by half, and doubles until the quadratic upper bound holds; it never
/// exceeds 1/Lip with Lip = 2 sigma_max(A)^2, at which the bound always holds.
template <class Mat, class Prox>
SparseSolution fista(const SensingOperator& op, const Mat& y, double mu, const SolverOptions& opts,
                     const Mat* warm_start, Prox prox)
{
    const Eigen::Index n = op.num_atoms();
    const Eigen::Index m_count = op.num_sensors();
    const Eigen::Index l = y.cols();
    const CMatrix& a = op.matrix();
    const CMatrix& gram = op.gram();
    const Mat b = a.adjoint() * y;
    const double y2 = y.squaredNorm();
    const double lip_max = op.lipschitz();

    // G * m, restricted to the nonzero rows of m
    std::vector<Eigen::Index> support;
    auto gram_times = [&](const Mat& m) -> Mat {
        support.clear();
        for (Eigen::Index i = 0; i < n; ++i)
            if (m.row(i).squaredNorm() > 0.0)
                support.push_back(i);
        if (static_cast<Eigen::Index>(support.size()) > m_count) {
            Mat am = Mat::Zero(m_count, l);
            for (auto j : support)
                am.noalias() += a.col(j) * m.row(j);
            return a.adjoint() * am;
        }
        Mat out = Mat::Zero(n, l);
        for (auto j : support)
            out.noalias() += gram.col(j) * m.row(j);
        return out;
    };
    // ||Y - A m||^2 from the Gram product
    auto smooth = [&](const Mat& m, const Mat& gm) {
        return y2 + (m.conjugate().cwiseProduct(gm - 2.0 * b)).sum().real();
    };
    auto penalty = [&](const Mat& m) { return mu * m.rowwise().norm().sum(); };

    Mat x = warm_start ? *warm_start : Mat(Mat::Zero(n, l));
    Mat gx = gram_times(x);
    double fs_x = smooth(x, gx);
    double f_x = fs_x + penalty(x);

    Mat z = x, gz = gx, x_prev = x, gx_prev = gx;
    double fs_z = fs_x;
    double t = 1.0;
    double lip = lip_max;
    SparseSolution sol;
    sol.mu = mu;
    std::size_t since_restart = 0;
    std::size_t it = 0;
    for (; it < opts.max_iters; ++it) {
        const Mat grad = 2.0 * (gz - b);
        x_prev.swap(x);
        gx_prev.swap(gx);
        lip = std::max(0.5 * lip, 1e-6 * lip_max);
        double fs_new = 0.0;
        for (;;) {
            x = prox(z - grad / lip, mu / lip);
            gx = gram_times(x);
            fs_new = smooth(x, gx);
            if (lip >= lip_max)
                break;
            const Mat d = x - z;
            const double bound = fs_z + (grad.conjugate().cwiseProduct(d)).sum().real()
                                 + 0.5 * lip * d.squaredNorm();
            if (fs_new <= bound + 1e-12 * (y2 + std::abs(fs_z)))
                break;
            lip = std::min(2.0 * lip, lip_max);
        }
        const double f_prev = f_x;
        fs_x = fs_new;
        f_x = fs_x + penalty(x);

        ++since_restart;
        const bool periodic = opts.restart_period > 0 && since_restart >= opts.restart_period;
        if ((opts.adaptive_restart && f_x > f_prev) || periodic) {
            t = 1.0;
            since_restart = 0;
            z = x;
            gz = gx;
            fs_z = fs_x;
        } else {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double beta = (t - 1.0) / t_next;
            t = t_next;
            z = x + beta * (x - x_prev);
            gz = gx + beta * (gx - gx_prev);
            fs_z = smooth(z, gz);
        }

        const double rel = std::abs(f_x - f_prev) / std::max(std::abs(f_prev), 1e-300);
        if (rel < opts.rel_tol) {
            const RVector r = (2.0 * (b - gx)).rowwise().norm();
            const RVector xn = x.rowwise().norm();
            if (kkt_from_residual(r, nonzero_rows(xn), mu, opts.kkt_tol).pass) {
                sol.converged = true;
                ++it;
                break;
            }
        }
    }

    sol.iterations = it;
    sol.x_hat = x;
    sol.row_norm = row_norms(sol.x_hat);
    sol.active_set = nonzero_rows(sol.row_norm);
    sol.objective = lasso_objective(op.matrix(), y, sol.x_hat, mu);
    return sol;
}

/// Row-wise group shrinkage of a whole matrix.
template <class Mat>
Mat shrink_rows(const Mat& v, double t)
{
    const RVector norms = v.rowwise().norm();
    const RVector factor = (1.0 - t / norms.array().max(1e-300)).max(0.0);
    return factor.asDiagonal() * v;
}

} // namespace detail

/// Row-sparse (group) LASSO; L = 1 is the ordinary complex LASSO.
inline SparseSolution solve_lasso(const SensingOperator& op, const CMatrix& y, double mu,
                                  const SolverOptions& opts = {}, const CMatrix* warm_start = nullptr)
{
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::domain_error("solve_lasso: mu must be positive");
    if (y.rows() != op.num_sensors())
        throw std::invalid_argument("solve_lasso: sensor count mismatch");
    if (warm_start && (warm_start->rows() != op.num_atoms() || warm_start->cols() != y.cols()))
        throw std::invalid_argument("solve_lasso: warm start has the wrong shape");
    auto prox = [](const CMatrix& v, double t) { return detail::shrink_rows(v, t); };
    if (y.cols() <= y.rows())
        return detail::fista<CMatrix>(op, y, mu, opts, warm_start, prox);

    // More snapshots than sensors: with Y^H = Q R (thin), Y = R^H Q^H and the
    // minimizer is X_r Q^H where X_r solves the same problem for R^H. Row norms
    // and residual norms are preserved, so this is exact.
    Eigen::HouseholderQR<CMatrix> qr(y.adjoint());
    const CMatrix q = qr.householderQ() * CMatrix::Identity(y.cols(), y.rows());
    const CMatrix y_red = y * q;
    std::optional<CMatrix> warm_red;
    if (warm_start)
        warm_red = (*warm_start) * q;
    auto sol = detail::fista<CMatrix>(op, y_red, mu, opts, warm_red ? &*warm_red : nullptr, prox);
    sol.x_hat = sol.x_hat * q.adjoint();
    sol.row_norm = row_norms(sol.x_hat);
    sol.active_set = nonzero_rows(sol.row_norm);
    sol.objective = lasso_objective(op.matrix(), y, sol.x_hat, mu);
    return sol;
}

inline SparseSolution solve_lasso(const SensingMatrix& a, const CMatrix& y, double mu, const SolverOptions& opts = {})
{
    const SensingOperator op(a);
    return solve_lasso(op, y, mu, opts);
}

/// Single-snapshot LASSO with element-wise complex soft thresholding.
inline SparseSolution solve_lasso_single(const SensingOperator& op, const CVector& y, double mu,
                                         const SolverOptions& opts = {})
{
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::domain_error("solve_lasso_single: mu must be positive");
    if (y.size() != op.num_sensors())
        throw std::invalid_argument("solve_lasso_single: sensor count mismatch");
    return detail::fista<CVector>(op, y, mu, opts, nullptr, [](const CVector& v, double t) {
        return CVector(v.unaryExpr([t](cplx z) { return soft_threshold(z, t); }));
    });
}

inline KktReport kkt_check(const CMatrix& a, const CMatrix& y, const SparseSolution& solution, double tol)
{
    const auto res = beamformed_residual(a, y, solution.x_hat);
    return detail::kkt_from_residual(res.r, solution.active_set, solution.mu, tol);
}

/// Thrown when the active columns are linearly dependent.
class DebiasError : public std::runtime_error {
public:
    DebiasError(const std::string& what, std::vector<std::size_t> dependent)
        : std::runtime_error(what), dependent_{std::move(dependent)}
    {
    }
    const std::vector<std::size_t>& dependent_indices() const noexcept { return dependent_; }

private:
    std::vector<std::size_t> dependent_;
};

/// Least-squares amplitudes A_S^+ Y on the active columns (K x L).
inline CMatrix debias(const CMatrix& a, const CMatrix& y, const std::vector<std::size_t>& active)
{
    if (a.rows() != y.rows())
        throw std::invalid_argument("debias: sensor count mismatch");
    if (active.empty())
        return CMatrix(0, y.cols());
    if (static_cast<Eigen::Index>(active.size()) > a.rows())
        throw std::invalid_argument("debias: more active columns than sensors");
    CMatrix sub(a.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (static_cast<Eigen::Index>(active[k]) >= a.cols())
            throw std::out_of_range("debias: active index out of range");
        sub.col(static_cast<Eigen::Index>(k)) = a.col(static_cast<Eigen::Index>(active[k]));
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(sub);
    qr.setThreshold(1e-10);
    if (qr.rank() < sub.cols()) {
        std::vector<std::size_t> dependent;
        std::string list;
        for (Eigen::Index k = qr.rank(); k < sub.cols(); ++k) {
            const auto idx = active[static_cast<std::size_t>(qr.colsPermutation().indices()[k])];
            dependent.push_back(idx);
            list += (list.empty() ? "" : ", ") + std::to_string(idx);
        }
        throw DebiasError("debias: active columns are linearly dependent; dependent indices: " + list,
                          std::move(dependent));
    }
    return qr.solve(y);
}

struct RelativeThreshold {
    double epsilon = 0.05;
};
struct KeepTopK {
    std::size_t k = 1;
    std::size_t min_separation = 1;
};

/// Rows with norm > epsilon * max row norm.
inline std::vector<std::size_t> active_set_of(const RVector& row_norm, RelativeThreshold rule)
{
    std::vector<std::size_t> s;
    if (row_norm.size() == 0)
        return s;
    const double top = row_norm.maxCoeff();
    if (!(top > 0.0))
        return s;
    for (Eigen::Index i = 0; i < row_norm.size(); ++i)
        if (row_norm[i] > rule.epsilon * top)
            s.push_back(static_cast<std::size_t>(i));
    return s;
}

/// The k strongest separated peaks of the row norms, returned ascending.
inline std::vector<std::size_t> active_set_of(const RVector& row_norm, KeepTopK rule)
{
    const std::span<const double> v(row_norm.data(), static_cast<std::size_t>(row_norm.size()));
    auto sel = select_peaks(v, rule.k, rule.min_separation, true).indices;
    std::sort(sel.begin(), sel.end());
    return sel;
}

template <class Rule>
std::vector<std::size_t> active_set_of(const SparseSolution& solution, Rule rule)
{
    return active_set_of(solution.row_norm, rule);
}

} // namespace csdoa
