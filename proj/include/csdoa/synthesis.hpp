#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "array_geometry.hpp"

namespace csdoa {

/// Source magnitude from dB, using the amplitude convention 20 log10 |x|.
inline double magnitude_from_db(double db) { return std::pow(10.0, db / 20.0); }
inline double magnitude_to_db(double mag) { return 20.0 * std::log10(mag); }

enum class PhaseModel {
    iid_uniform_per_snapshot,
    /// Fixed relative phases between sources; a common random phase per
    /// snapshot keeps the source matrix rank one.
    coherent_fixed,
};

struct SourceScenario {
    std::vector<double> doas_deg;
    std::vector<double> magnitudes; // linear
    PhaseModel phase_model = PhaseModel::iid_uniform_per_snapshot;

    std::size_t size() const noexcept { return doas_deg.size(); }

    void validate() const
    {
        if (doas_deg.empty())
            throw std::invalid_argument("SourceScenario: need at least one source");
        if (magnitudes.size() != doas_deg.size())
            throw std::invalid_argument("SourceScenario: doas/magnitudes length mismatch");
        for (std::size_t i = 0; i < doas_deg.size(); ++i) {
            if (!(doas_deg[i] >= -90.0 && doas_deg[i] <= 90.0))
                throw std::domain_error("SourceScenario: DOA outside [-90, 90]");
            if (!(magnitudes[i] >= 0.0) || !std::isfinite(magnitudes[i]))
                throw std::domain_error("SourceScenario: negative or non-finite magnitude");
            for (std::size_t j = 0; j < i; ++j)
                if (doas_deg[i] == doas_deg[j])
                    throw std::invalid_argument("SourceScenario: duplicate DOA");
        }
    }

    static SourceScenario from_db(std::vector<double> doas_deg, const std::vector<double>& mags_db,
                                  PhaseModel model = PhaseModel::iid_uniform_per_snapshot)
    {
        SourceScenario s{std::move(doas_deg), {}, model};
        for (double db : mags_db)
            s.magnitudes.push_back(magnitude_from_db(db));
        return s;
    }
};

struct SnapshotMeta {
    std::optional<double> snr_db;
    std::optional<std::uint64_t> seed;
    std::string provenance = "unknown";
};

/// M x L complex observations; column l is snapshot y(l).
struct SnapshotSet {
    CMatrix data;
    ArraySpec array;
    SnapshotMeta meta;

    SnapshotSet(CMatrix d, ArraySpec a, SnapshotMeta m = {})
        : data{std::move(d)}, array{a}, meta{std::move(m)}
    {
        if (data.cols() < 1)
            throw std::invalid_argument("SnapshotSet: need at least one snapshot");
        if (static_cast<std::size_t>(data.rows()) != array.num_sensors())
            throw std::invalid_argument("SnapshotSet: row count does not match sensor count");
    }

    Eigen::Index num_snapshots() const noexcept { return data.cols(); }
};

/// splitmix64 finalizer; derives independent stream seeds from (base, i, j).
inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i, std::uint64_t j = 0)
{
    return mix_seed(mix_seed(mix_seed(base) ^ i) ^ (j + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

struct SynthesisResult {
    SnapshotSet snapshots;
    CMatrix sources; ///< K x L true complex amplitudes
    CMatrix signal;  ///< M x L noiseless part A X
    CMatrix noise;   ///< M x L additive noise
    double noise_variance = 0.0;
};

/// Per-sensor noise variance for a target array SNR: sum|x_k|^2 / (M 10^(snr/10)).
inline double noise_variance_for_snr(const SourceScenario& s, std::size_t num_sensors, double snr_db)
{
    if (std::isinf(snr_db) && snr_db > 0)
        return 0.0;
    double power = 0.0;
    for (double m : s.magnitudes)
        power += m * m;
    return power / (static_cast<double>(num_sensors) * std::pow(10.0, snr_db / 10.0));
}

inline SynthesisResult synthesize(const SourceScenario& scenario, const ArraySpec& array,
                                  std::size_t num_snapshots, double snr_db, std::uint64_t seed)
{
    scenario.validate();
    if (num_snapshots < 1)
        throw std::invalid_argument("synthesize: need at least one snapshot");

    const auto m_count = static_cast<Eigen::Index>(array.num_sensors());
    const auto k_count = static_cast<Eigen::Index>(scenario.size());
    const auto l_count = static_cast<Eigen::Index>(num_snapshots);

    Rng rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    CMatrix steering(m_count, k_count);
    for (Eigen::Index k = 0; k < k_count; ++k)
        steering.col(k) = steering_vector(scenario.doas_deg[static_cast<std::size_t>(k)], array);

    CMatrix sources(k_count, l_count);
    if (scenario.phase_model == PhaseModel::iid_uniform_per_snapshot) {
        for (Eigen::Index l = 0; l < l_count; ++l)
            for (Eigen::Index k = 0; k < k_count; ++k)
                sources(k, l) = std::polar(scenario.magnitudes[static_cast<std::size_t>(k)], phase(rng));
    } else {
        std::vector<double> offsets(static_cast<std::size_t>(k_count));
        for (auto& o : offsets)
            o = phase(rng);
        for (Eigen::Index l = 0; l < l_count; ++l) {
            const double common = phase(rng);
            for (Eigen::Index k = 0; k < k_count; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                sources(k, l) = std::polar(scenario.magnitudes[ks], offsets[ks] + common);
            }
        }
    }

    CMatrix signal = steering * sources;
    const double variance = noise_variance_for_snr(scenario, array.num_sensors(), snr_db);
    CMatrix noise = CMatrix::Zero(m_count, l_count);
    if (variance > 0.0) {
        std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
        for (Eigen::Index l = 0; l < l_count; ++l)
            for (Eigen::Index m = 0; m < m_count; ++m) {
                const double re = gauss(rng);
                const double im = gauss(rng);
                noise(m, l) = cplx(re, im);
            }
    }

    SnapshotMeta meta;
    if (std::isfinite(snr_db) || snr_db > 0)
        meta.snr_db = snr_db;
    meta.seed = seed;
    meta.provenance = "synthetic";
    SnapshotSet set(signal + noise, array, std::move(meta));
    return SynthesisResult{std::move(set), std::move(sources), std::move(signal), std::move(noise), variance};
}

/// 10 log10(||signal||_F^2 / ||noise||_F^2); +inf when the noise is identically zero.
inline double empirical_snr(const CMatrix& signal, const CMatrix& noise)
{
    if (signal.rows() != noise.rows() || signal.cols() != noise.cols())
        throw std::invalid_argument("empirical_snr: shape mismatch");
    const double n2 = noise.squaredNorm();
    if (n2 == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal.squaredNorm() / n2);
}

} // namespace csdoa
