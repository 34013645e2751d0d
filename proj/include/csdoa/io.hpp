#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "beamformers.hpp"
#include "evaluation.hpp"
#include "lasso_path.hpp"
#include "synthesis.hpp"

namespace csdoa {

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// 10 log10(p), floored at -300 dB so zero power stays a finite number.
inline double power_to_db(double p) { return p > 1e-30 ? 10.0 * std::log10(p) : -300.0; }

inline void write_spectrum_csv(std::ostream& out, const AngularGrid& grid, const RVector& power, const std::string& method)
{
    out << "angle_deg,power_db,method\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        out << fmt17(grid[i]) << ',' << fmt17(power_to_db(power[static_cast<Eigen::Index>(i)])) << ',' << method
            << '\n';
}

inline void write_spectrum_csv(std::ostream& out, const BeamSpectrum& s)
{
    std::string name = to_string(s.method);
    write_spectrum_csv(out, s.grid, s.power, name);
}

inline void write_path_csv(std::ostream& out, const PathRecord& rec)
{
    out << "mu,sparsity,residual_sup\n";
    for (const auto& e : rec.events)
        out << fmt17(e.mu) << ',' << e.sparsity << ',' << fmt17(e.residual_sup) << '\n';
}

/// Sweep export with the trade-off curve columns alongside the path events.
inline void write_sweep_csv(std::ostream& out, const SweepResult& sw)
{
    out << "mu,sparsity,residual_sup,data_error,l1_norm\n";
    for (std::size_t i = 0; i < sw.record.events.size(); ++i) {
        const auto& e = sw.record.events[i];
        out << fmt17(e.mu) << ',' << e.sparsity << ',' << fmt17(e.residual_sup) << ',' << fmt17(sw.data_error[i])
            << ',' << fmt17(sw.l1_norm[i]) << '\n';
    }
}

// Snapshot CSV: '#' metadata lines, then one row per (snapshot, sensor).

inline void write_snapshots_csv(std::ostream& out, const SnapshotSet& s)
{
    out << "# sensors=" << s.array.num_sensors() << '\n';
    out << "# spacing=" << fmt17(s.array.spacing_over_wavelength()) << '\n';
    out << "# snapshots=" << s.num_snapshots() << '\n';
    if (s.meta.snr_db)
        out << "# snr_db=" << fmt17(*s.meta.snr_db) << '\n';
    if (s.meta.seed)
        out << "# seed=" << *s.meta.seed << '\n';
    out << "# provenance=" << s.meta.provenance << '\n';
    out << "snapshot,sensor,re,im\n";
    for (Eigen::Index l = 0; l < s.data.cols(); ++l)
        for (Eigen::Index m = 0; m < s.data.rows(); ++m)
            out << l << ',' << m << ',' << fmt17(s.data(m, l).real()) << ',' << fmt17(s.data(m, l).imag()) << '\n';
}

inline SnapshotSet read_snapshots_csv(std::istream& in)
{
    std::size_t sensors = 0, count = 0;
    double spacing = 0.5;
    SnapshotMeta meta;
    std::string line;
    bool header_seen = false;
    std::vector<std::tuple<std::size_t, std::size_t, cplx>> cells;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                continue;
            const auto key = line.substr(2, eq - 2);
            const auto val = line.substr(eq + 1);
            if (key == "sensors")
                sensors = std::stoul(val);
            else if (key == "spacing")
                spacing = std::stod(val);
            else if (key == "snapshots")
                count = std::stoul(val);
            else if (key == "snr_db")
                meta.snr_db = std::stod(val);
            else if (key == "seed")
                meta.seed = std::stoull(val);
            else if (key == "provenance")
                meta.provenance = val;
            continue;
        }
        if (!header_seen) {
            if (line != "snapshot,sensor,re,im")
                throw std::runtime_error("snapshot CSV: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string a, b, re, im;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, re, ',')
            || !std::getline(ss, im, ','))
            throw std::runtime_error("snapshot CSV: malformed row '" + line + "'");
        cells.emplace_back(std::stoul(a), std::stoul(b), cplx{std::stod(re), std::stod(im)});
    }
    if (sensors == 0 || count == 0)
        throw std::runtime_error("snapshot CSV: missing sensors/snapshots metadata");
    if (cells.size() != sensors * count)
        throw std::runtime_error("snapshot CSV: expected " + std::to_string(sensors * count) + " rows, got "
                                 + std::to_string(cells.size()));
    CMatrix data(static_cast<Eigen::Index>(sensors), static_cast<Eigen::Index>(count));
    for (const auto& [l, m, v] : cells) {
        if (l >= count || m >= sensors)
            throw std::runtime_error("snapshot CSV: index out of range");
        data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) = v;
    }
    return SnapshotSet(std::move(data), ArraySpec(sensors, spacing), meta);
}

inline SnapshotSet read_snapshots_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return read_snapshots_csv(in);
}

inline void write_rmse_csv(std::ostream& out, const EvalReport& rep)
{
    out << "snr_db,method,rmse_deg,trials,failures,short_picks\n";
    for (const auto& [m, stats] : rep.per_method)
        for (const auto& s : stats)
            out << fmt17(s.snr_db) << ',' << to_string(m) << ',' << fmt17(s.rmse_deg) << ',' << s.trial_count << ','
                << s.failures << ',' << s.short_picks << '\n';
}

inline void write_histogram_csv(std::ostream& out, const EvalReport& rep)
{
    out << "method,snr_db,angle_deg,count\n";
    for (const auto& [m, stats] : rep.per_method)
        for (const auto& s : stats)
            for (const auto& [angle, n] : s.histogram)
                out << to_string(m) << ',' << fmt17(s.snr_db) << ',' << fmt17(angle) << ',' << n << '\n';
}

inline nlohmann::json report_json(const EvalReport& rep)
{
    using nlohmann::json;
    json methods = json::object();
    for (const auto& [m, stats] : rep.per_method) {
        json arr = json::array();
        for (const auto& s : stats) {
            json hist = json::array();
            for (const auto& [angle, n] : s.histogram)
                hist.push_back({angle, n});
            json e{{"snr_db", s.snr_db},
                   {"rmse_deg", std::isfinite(s.rmse_deg) ? json(s.rmse_deg) : json(nullptr)},
                   {"trial_count", s.trial_count},
                   {"failures", s.failures},
                   {"short_picks", s.short_picks},
                   {"mean_runtime_s", s.mean_runtime_s},
                   {"histogram", hist}};
            if (!s.first_error.empty())
                e["first_error"] = s.first_error;
            arr.push_back(e);
        }
        methods[to_string(m)] = arr;
    }
    const auto& sc = rep.scenario;
    json mags = json::array();
    for (double v : sc.sources.magnitudes)
        mags.push_back(magnitude_to_db(v));
    return {{"scenario",
             {{"doas_deg", sc.sources.doas_deg},
              {"magnitudes_db", mags},
              {"sensors", sc.array.num_sensors()},
              {"spacing", sc.array.spacing_over_wavelength()},
              {"grid_size", sc.grid.size()},
              {"snapshots", sc.snapshots}}},
            {"seed_base", rep.seed_base},
            {"trials", rep.trials},
            {"methods", methods}};
}

} // namespace csdoa
