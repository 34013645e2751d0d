#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "array_geometry.hpp"
#include "peaks.hpp"

namespace csdoa {

/// Error raised when a covariance-based estimator needs a full-rank C.
class RankDeficiencyError : public std::runtime_error {
public:
    RankDeficiencyError(const std::string& what, Eigen::Index snapshots, Eigen::Index sensors)
        : std::runtime_error(what), snapshots_{snapshots}, sensors_{sensors}
    {
    }
    Eigen::Index snapshots() const noexcept { return snapshots_; }
    Eigen::Index sensors() const noexcept { return sensors_; }

private:
    Eigen::Index snapshots_;
    Eigen::Index sensors_;
};

struct CovarianceMatrix {
    CMatrix entries;
    Eigen::Index num_snapshots = 0;

    Eigen::Index size() const noexcept { return entries.rows(); }
};

/// C = Y Y^H / L.
inline CovarianceMatrix sample_covariance(const CMatrix& y)
{
    if (y.cols() < 1)
        throw std::invalid_argument("sample_covariance: need at least one snapshot");
    CMatrix c = (y * y.adjoint()) / static_cast<double>(y.cols());
    // symmetrize away round-off so downstream Hermitian solvers see an exact Hermitian matrix
    c = (0.5 * (c + c.adjoint())).eval();
    return {std::move(c), y.cols()};
}

enum class BeamMethod { cbf, mvdr, music, cs };

inline const char* to_string(BeamMethod m)
{
    switch (m) {
    case BeamMethod::cbf: return "cbf";
    case BeamMethod::mvdr: return "mvdr";
    case BeamMethod::music: return "music";
    case BeamMethod::cs: return "cs";
    }
    return "?";
}

struct BeamSpectrum {
    AngularGrid grid;
    RVector power;
    BeamMethod method = BeamMethod::cbf;
    /// MUSIC only: the signal/noise eigenvalue split was degenerate.
    bool degenerate_subspace = false;
};

/// X_cbf = A^H Y, column-wise.
inline CMatrix cbf_single(const CMatrix& y, const SensingMatrix& a)
{
    if (y.rows() != a.rows())
        throw std::invalid_argument("cbf_single: sensor count mismatch");
    return a.matrix().adjoint() * y;
}

inline BeamSpectrum cbf_spectrum(const CovarianceMatrix& c, const SensingMatrix& a)
{
    if (c.size() != a.rows())
        throw std::invalid_argument("cbf_spectrum: covariance size mismatch");
    const CMatrix ca = c.entries * a.matrix();
    RVector p(a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i)
        p[i] = std::max(0.0, a.column(i).dot(ca.col(i)).real());
    return {a.grid(), std::move(p), BeamMethod::cbf, false};
}

struct MvdrResult {
    BeamSpectrum spectrum;
    CMatrix weights; ///< M x N, column i is w(theta_i)
};

/// MVDR with optional diagonal loading. Without loading the covariance must be
/// built from at least M snapshots and be numerically nonsingular.
inline MvdrResult mvdr_beamform(const CovarianceMatrix& c, const SensingMatrix& a, double diagonal_loading = 0.0)
{
    const auto m_count = c.size();
    if (m_count != a.rows())
        throw std::invalid_argument("mvdr_spectrum: covariance size mismatch");
    if (diagonal_loading < 0.0)
        throw std::invalid_argument("mvdr_spectrum: diagonal loading must be >= 0");
    if (diagonal_loading == 0.0 && c.num_snapshots < m_count)
        throw RankDeficiencyError("mvdr_spectrum: MVDR needs a full-rank covariance but L="
                                      + std::to_string(c.num_snapshots) + " < M=" + std::to_string(m_count)
                                      + " (use diagonal loading)",
                                  c.num_snapshots, m_count);

    CMatrix loaded = c.entries;
    loaded.diagonal().array() += diagonal_loading;

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(loaded);
    const double trace = std::max(loaded.trace().real(), 1e-300);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * trace)
        throw RankDeficiencyError("mvdr_spectrum: covariance is numerically singular (L="
                                      + std::to_string(c.num_snapshots) + ", M=" + std::to_string(m_count) + ")",
                                  c.num_snapshots, m_count);

    const CMatrix inv_a = eig.eigenvectors()
                          * eig.eigenvalues().cwiseInverse().asDiagonal()
                          * (eig.eigenvectors().adjoint() * a.matrix());
    CMatrix w(m_count, a.cols());
    RVector p(a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const cplx denom = a.column(i).dot(inv_a.col(i));
        w.col(i) = inv_a.col(i) / denom;
        p[i] = std::max(0.0, w.col(i).dot(c.entries * w.col(i)).real());
    }
    return {{a.grid(), std::move(p), BeamMethod::mvdr, false}, std::move(w)};
}

inline BeamSpectrum mvdr_spectrum(const CovarianceMatrix& c, const SensingMatrix& a, double diagonal_loading = 0.0)
{
    return mvdr_beamform(c, a, diagonal_loading).spectrum;
}

/// MUSIC pseudo-spectrum 1 / (a^H Un Un^H a) with Un the M-K weakest eigenvectors.
inline BeamSpectrum music_spectrum(const CovarianceMatrix& c, const SensingMatrix& a, std::size_t num_sources)
{
    const auto m_count = c.size();
    if (m_count != a.rows())
        throw std::invalid_argument("music_spectrum: covariance size mismatch");
    if (num_sources < 1 || static_cast<Eigen::Index>(num_sources) >= m_count)
        throw std::domain_error("music_spectrum: need 1 <= K < M, got K=" + std::to_string(num_sources));

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(c.entries);
    // ascending order: the first M-K columns span the noise subspace
    const auto noise_dim = m_count - static_cast<Eigen::Index>(num_sources);
    const CMatrix un = eig.eigenvectors().leftCols(noise_dim);

    const auto& ev = eig.eigenvalues();
    const double scale = std::max(std::abs(ev[m_count - 1]), 1e-300);
    const bool degenerate = std::abs(ev[noise_dim] - ev[noise_dim - 1]) <= 1e-10 * scale;

    const CMatrix proj = un.adjoint() * a.matrix();
    RVector p(a.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const double d = proj.col(i).squaredNorm();
        p[i] = 1.0 / std::max(d, 1e-300);
    }
    return {a.grid(), std::move(p), BeamMethod::music, degenerate};
}

struct PeakPick {
    std::vector<double> angles_deg;
    std::vector<std::size_t> indices;
    bool short_list = false;
};

inline PeakPick peak_pick(const BeamSpectrum& spectrum, std::size_t count, std::size_t min_separation_bins)
{
    const std::span<const double> values(spectrum.power.data(), static_cast<std::size_t>(spectrum.power.size()));
    const auto sel = select_peaks(values, count, min_separation_bins);
    PeakPick out;
    out.indices = sel.indices;
    out.short_list = sel.short_list;
    for (auto i : sel.indices)
        out.angles_deg.push_back(spectrum.grid[i]);
    return out;
}

} // namespace csdoa
