#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace csdoa {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Uniform linear array: sensor count and spacing in wavelengths.
class ArraySpec {
public:
    explicit ArraySpec(std::size_t num_sensors, double spacing_over_wavelength = 0.5)
        : num_sensors_{num_sensors}, spacing_{spacing_over_wavelength}
    {
        if (num_sensors_ < 2)
            throw std::invalid_argument("ArraySpec: need at least 2 sensors, got "
                                        + std::to_string(num_sensors_));
        if (!(spacing_ > 0.0) || !std::isfinite(spacing_))
            throw std::invalid_argument("ArraySpec: spacing d/lambda must be positive");
    }

    std::size_t num_sensors() const noexcept { return num_sensors_; }
    double spacing_over_wavelength() const noexcept { return spacing_; }

    friend bool operator==(const ArraySpec&, const ArraySpec&) = default;

private:
    std::size_t num_sensors_;
    double spacing_;
};

/// Strictly increasing look directions in degrees, all within [-90, 90].
class AngularGrid {
public:
    explicit AngularGrid(std::vector<double> angles_deg) : angles_{std::move(angles_deg)}
    {
        if (angles_.empty())
            throw std::invalid_argument("AngularGrid: empty grid");
        for (std::size_t i = 0; i < angles_.size(); ++i) {
            if (!(angles_[i] >= -90.0 && angles_[i] <= 90.0))
                throw std::domain_error("AngularGrid: angle outside [-90, 90]: "
                                        + std::to_string(angles_[i]));
            if (i > 0 && !(angles_[i] > angles_[i - 1]))
                throw std::invalid_argument("AngularGrid: angles must be strictly increasing");
        }
    }

    /// Inclusive (start, step, stop). The count is round((stop-start)/step)+1 so
    /// that e.g. -90:0.5:90 always yields 361 points; angles are start + i*step.
    static AngularGrid uniform(double start_deg, double step_deg, double stop_deg)
    {
        if (!(step_deg > 0.0))
            throw std::invalid_argument("AngularGrid: step must be positive");
        if (stop_deg < start_deg)
            throw std::invalid_argument("AngularGrid: stop < start");
        const double span = (stop_deg - start_deg) / step_deg;
        const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
        std::vector<double> a(count);
        for (std::size_t i = 0; i < count; ++i)
            a[i] = start_deg + static_cast<double>(i) * step_deg;
        // snap the last point onto stop when the span was an integer number of steps
        if (std::abs(a.back() - stop_deg) < 1e-9 * std::max(1.0, std::abs(stop_deg)))
            a.back() = stop_deg;
        return AngularGrid(std::move(a));
    }

    std::size_t size() const noexcept { return angles_.size(); }
    double operator[](std::size_t i) const { return angles_[i]; }
    const std::vector<double>& angles() const noexcept { return angles_; }

    /// Mean spacing in degrees (exact for uniform grids).
    double mean_step() const
    {
        if (angles_.size() < 2)
            return 0.0;
        return (angles_.back() - angles_.front()) / static_cast<double>(angles_.size() - 1);
    }

    /// Index of the grid angle closest to theta_deg (ties go to the lower index).
    std::size_t nearest_index(double theta_deg) const
    {
        std::size_t best = 0;
        for (std::size_t i = 1; i < angles_.size(); ++i)
            if (std::abs(angles_[i] - theta_deg) < std::abs(angles_[best] - theta_deg))
                best = i;
        return best;
    }

    friend bool operator==(const AngularGrid&, const AngularGrid&) = default;

private:
    std::vector<double> angles_;
};

/// a(theta): element m is exp(j 2 pi (d/lambda) m sin(theta)) / sqrt(M).
inline CVector steering_vector(double theta_deg, const ArraySpec& array)
{
    if (!(theta_deg >= -90.0 && theta_deg <= 90.0))
        throw std::domain_error("steering_vector: theta outside [-90, 90]: "
                                + std::to_string(theta_deg));
    const auto m_count = array.num_sensors();
    const double phase_step = 2.0 * std::numbers::pi * array.spacing_over_wavelength()
                              * std::sin(deg2rad(theta_deg));
    const double scale = 1.0 / std::sqrt(static_cast<double>(m_count));
    CVector a(static_cast<Eigen::Index>(m_count));
    for (std::size_t m = 0; m < m_count; ++m)
        a[static_cast<Eigen::Index>(m)] = std::polar(scale, phase_step * static_cast<double>(m));
    return a;
}

/// Dictionary of unit-norm steering vectors over an angular grid.
class SensingMatrix {
public:
    SensingMatrix(AngularGrid grid, ArraySpec array)
        : array_{array}, grid_{std::move(grid)},
          entries_(static_cast<Eigen::Index>(array.num_sensors()),
                   static_cast<Eigen::Index>(grid_.size()))
    {
        for (std::size_t i = 0; i < grid_.size(); ++i)
            entries_.col(static_cast<Eigen::Index>(i)) = steering_vector(grid_[i], array_);
    }

    const CMatrix& matrix() const noexcept { return entries_; }
    const ArraySpec& array() const noexcept { return array_; }
    const AngularGrid& grid() const noexcept { return grid_; }
    Eigen::Index rows() const noexcept { return entries_.rows(); }
    Eigen::Index cols() const noexcept { return entries_.cols(); }
    auto column(Eigen::Index i) const { return entries_.col(i); }

private:
    ArraySpec array_;
    AngularGrid grid_;
    CMatrix entries_;
};

inline SensingMatrix build_sensing_matrix(const AngularGrid& grid, const ArraySpec& array)
{
    return SensingMatrix(grid, array);
}

/// max_{i != j} |a_i^H a_j| over the columns of A.
inline double mutual_coherence(const CMatrix& a)
{
    if (a.cols() < 2)
        throw std::domain_error("mutual_coherence: need at least two columns");
    const CMatrix gram = a.adjoint() * a;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
        for (Eigen::Index i = j + 1; i < gram.rows(); ++i)
            worst = std::max(worst, std::abs(gram(i, j)));
    return worst;
}

inline double mutual_coherence(const SensingMatrix& a) { return mutual_coherence(a.matrix()); }

} // namespace csdoa
