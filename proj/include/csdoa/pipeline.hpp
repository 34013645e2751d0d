#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "config.hpp"
#include "io.hpp"
#include "timeseries.hpp"

#define CSDOA_VERSION "1.0.0"

namespace csdoa {

enum class ExitCode : int {
    ok = 0,
    failure = 1,
    bad_config = 2,
    rank_deficient = 3,
    io_error = 4,
};

struct RunResult {
    ExitCode code = ExitCode::ok;
    std::vector<std::string> files; ///< written, relative to the output directory
    json error;                     ///< null on success
};

inline const std::vector<std::string>& commands()
{
    static const std::vector<std::string> names{"synth", "ingest", "beamform", "cs", "path", "bench"};
    return names;
}

namespace detail {

class Outputs {
public:
    explicit Outputs(std::filesystem::path dir) : dir_{std::move(dir)} { std::filesystem::create_directories(dir_); }

    template <class Fn>
    void write(const std::string& name, Fn&& fn)
    {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out)
            throw std::ios_base::failure("cannot write " + (dir_ / name).string());
        fn(out);
        if (!out)
            throw std::ios_base::failure("write failed for " + (dir_ / name).string());
        files_.push_back(name);
    }

    void json_file(const std::string& name, const json& j)
    {
        write(name, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    }

    const std::vector<std::string>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline std::string lower(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline SnapshotSet synthesize_from(const ScenarioConfig& c, double snr_db, std::uint64_t seed)
{
    if (c.doas_deg.empty())
        throw ConfigError("no sources configured and no input given");
    return synthesize(c.scenario(), c.array(), c.snapshots, snr_db, seed).snapshots;
}

inline Extraction ingest_from(const ScenarioConfig& c, std::ostream& log)
{
    const auto& g = *c.ingest;
    const TimeSeries ts = g.format == "raw"
                              ? load_timeseries_raw(g.file, g.sidecar.empty() ? g.file + ".json" : g.sidecar)
                              : load_timeseries_csv(g.file);
    ExtractOptions eo;
    eo.f0_hz = g.f0_hz;
    eo.nfft = g.nfft;
    eo.overlap = g.overlap;
    eo.window = g.window;
    return extract_snapshots(ts, c.array(), eo, [&](const std::string& w) { log << "warning: " << w << '\n'; });
}

/// Snapshots for analysis commands: an explicit CSV, an ingest block, or a
/// synthetic realization at the first SNR.
inline SnapshotSet obtain_snapshots(const ScenarioConfig& c, std::ostream& log)
{
    if (!c.input.empty()) {
        auto s = read_snapshots_csv(c.input);
        if (!(s.array == c.array()))
            throw ConfigError("input snapshots were recorded with a different array than configured");
        return s;
    }
    if (c.ingest)
        return ingest_from(c, log).snapshots;
    return synthesize_from(c, c.snr_db.front(), c.seed);
}

inline void guard_rank(const ScenarioConfig& c, std::size_t snapshots)
{
    const bool wants_mvdr = std::find(c.methods.begin(), c.methods.end(), Method::mvdr) != c.methods.end();
    if (wants_mvdr && c.mvdr_loading == 0.0 && snapshots < c.sensors)
        throw RankDeficiencyError("MVDR requires a full-rank covariance: L=" + std::to_string(snapshots)
                                      + " < M=" + std::to_string(c.sensors) + " with zero diagonal loading",
                                  static_cast<Eigen::Index>(snapshots), static_cast<Eigen::Index>(c.sensors));
}

/// Spectra of all requested beamformers plus the CS solution on one snapshot set.
inline json write_spectra(Outputs& out, const ScenarioConfig& c, const SensingOperator& op, const CMatrix& y,
                          bool include_cs)
{
    json peaks = json::object();
    const auto est = c.estimator();
    const auto cov = sample_covariance(y);
    for (auto m : c.methods) {
        std::optional<BeamSpectrum> spec;
        if (m == Method::cbf)
            spec = cbf_spectrum(cov, op.sensing());
        else if (m == Method::mvdr)
            spec = mvdr_spectrum(cov, op.sensing(), c.mvdr_loading);
        else if (m == Method::music) {
            if (y.cols() < 2)
                throw std::domain_error("MUSIC needs at least 2 snapshots");
            spec = music_spectrum(cov, op.sensing(), c.k());
        }
        if (!spec)
            continue;
        const auto pk = peak_pick(*spec, c.k(), c.min_separation);
        peaks[to_string(m)] = {{"doas_deg", pk.angles_deg}, {"short_list", pk.short_list}};
        out.write("spectrum_" + lower(to_string(m)) + ".csv", [&](std::ostream& o) { write_spectrum_csv(o, *spec); });
    }
    const bool wants_cs = std::find(c.methods.begin(), c.methods.end(), Method::cs) != c.methods.end();
    if (include_cs && wants_cs) {
        const auto res = run_path(op, y, est.path);
        RVector power = res.final.row_norm.array().square() / static_cast<double>(y.cols());
        std::vector<double> doas, mags;
        for (std::size_t j = 0; j < res.active_set.size(); ++j) {
            doas.push_back(op.sensing().grid()[res.active_set[j]]);
            const double amp = res.amplitudes.row(static_cast<Eigen::Index>(j)).norm()
                               / std::sqrt(static_cast<double>(y.cols()));
            mags.push_back(magnitude_to_db(amp));
        }
        peaks["CS"] = {{"doas_deg", doas},
                       {"magnitudes_db", mags},
                       {"mu_final", res.mu_final},
                       {"short_list", res.short_set},
                       {"loop_exhausted", res.loop_exhausted}};
        out.write("spectrum_cs.csv",
                  [&](std::ostream& o) { write_spectrum_csv(o, op.sensing().grid(), power, "CS"); });
        out.write("path.csv", [&](std::ostream& o) { write_path_csv(o, res.record); });
    }
    return peaks;
}

inline json manifest(const std::string& command, const ScenarioConfig& c, const std::vector<std::string>& files)
{
    return {{"tool", "csdoa"},
            {"version", CSDOA_VERSION},
            {"command", command},
            {"config_hash", config_hash(c)},
            {"seed", c.seed},
            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "."
                                  + std::to_string(EIGEN_MINOR_VERSION)},
            {"outputs", files},
            {"config", to_json(c)}};
}

} // namespace detail

/// Executes one CLI command. Every failure is turned into an exit code and a
/// machine-readable error record (also written to error.json when possible).
inline RunResult run(const std::string& command, const ScenarioConfig& cfg, std::ostream& log = std::clog)
{
    RunResult result;
    std::optional<detail::Outputs> out;
    auto fail = [&](ExitCode code, const std::string& kind, const std::string& msg, json extra = json::object()) {
        result.code = code;
        result.error = {{"error", kind}, {"message", msg}, {"exit_code", static_cast<int>(code)}, {"command", command}};
        result.error.update(extra);
        try {
            if (!out)
                out.emplace(cfg.output_dir);
            out->json_file("error.json", result.error);
        } catch (...) {
            // the record is still returned to the caller
        }
        log << result.error.dump() << '\n';
    };

    try {
        if (std::find(commands().begin(), commands().end(), command) == commands().end())
            throw ConfigError("unknown command '" + command + "'");
        validate(cfg);
        out.emplace(cfg.output_dir);
        json report{{"command", command}};

        if (command == "synth") {
            const auto s = detail::synthesize_from(cfg, cfg.snr_db.front(), cfg.seed);
            out->write("snapshots.csv", [&](std::ostream& o) { write_snapshots_csv(o, s); });
        } else if (command == "ingest") {
            if (!cfg.ingest)
                throw ConfigError("ingest needs an ingest block (file, f0_hz, nfft, overlap)");
            const auto ex = detail::ingest_from(cfg, log);
            out->write("snapshots.csv", [&](std::ostream& o) { write_snapshots_csv(o, ex.snapshots); });
            report["bin"] = ex.bin;
            report["bin_frequency_hz"] = ex.bin_frequency_hz;
            report["hop"] = ex.hop;
            report["snapshots"] = ex.snapshots.num_snapshots();
            report["warnings"] = ex.warnings;
        } else if (command == "beamform" || command == "cs") {
            const auto s = detail::obtain_snapshots(cfg, log);
            const SensingOperator op(SensingMatrix(cfg.grid(), s.array));
            if (command == "beamform") {
                detail::guard_rank(cfg, static_cast<std::size_t>(s.num_snapshots()));
                report["estimates"] = detail::write_spectra(*out, cfg, op, s.data, false);
            } else {
                auto only_cs = cfg;
                only_cs.methods = {Method::cs};
                report["estimates"] = detail::write_spectra(*out, only_cs, op, s.data, true);
            }
        } else if (command == "path") {
            const auto s = detail::obtain_snapshots(cfg, log);
            const SensingMatrix a(cfg.grid(), s.array);
            const SensingOperator op(a);
            auto mus = cfg.mu_list;
            if (mus.empty()) {
                const double hi = mu_max(a, s.data);
                if (!(hi > 0.0))
                    throw std::domain_error("path: all-zero data has an empty path");
                mus = log_spaced_mu(hi, hi * cfg.mu_floor_ratio, cfg.mu_count);
            }
            const auto sw = sweep_path(op, s.data, mus, cfg.solver);
            out->write("path.csv", [&](std::ostream& o) { write_sweep_csv(o, sw); });
            report["mu_max"] = mu_max(a, s.data);
            report["events"] = sw.record.events.size();
        } else { // bench
            detail::guard_rank(cfg, cfg.snapshots);
            if (cfg.doas_deg.empty())
                throw ConfigError("bench needs a source scenario");
            MonteCarloConfig mc;
            mc.scenario.sources = cfg.scenario();
            mc.scenario.array = cfg.array();
            mc.scenario.grid = cfg.grid();
            mc.scenario.snapshots = cfg.snapshots;
            mc.methods = cfg.methods;
            mc.snr_db = cfg.snr_db;
            mc.trials = cfg.trials;
            mc.seed = cfg.seed;
            mc.estimator = cfg.estimator();
            mc.threads = cfg.threads;
            const auto rep = monte_carlo(mc);

            // spectra of the first realization, for plotting alongside the curves
            const auto first = detail::synthesize_from(cfg, cfg.snr_db.front(), trial_seed(cfg.seed, 0, 0));
            const SensingOperator op(SensingMatrix(cfg.grid(), cfg.array()));
            detail::write_spectra(*out, cfg, op, first.data, true);

            out->write("rmse_vs_snr.csv", [&](std::ostream& o) { write_rmse_csv(o, rep); });
            out->write("histogram.csv", [&](std::ostream& o) { write_histogram_csv(o, rep); });
            report = report_json(rep);
            report["command"] = command;
        }
        out->json_file("report.json", report);
        out->json_file("manifest.json", detail::manifest(command, cfg, out->files()));
        result.files = out->files();
    } catch (const RankDeficiencyError& e) {
        fail(ExitCode::rank_deficient, "rank_deficiency", e.what(),
             {{"snapshots", e.snapshots()}, {"sensors", e.sensors()}});
    } catch (const ConfigError& e) {
        fail(ExitCode::bad_config, "config", e.what());
    } catch (const std::ios_base::failure& e) {
        fail(ExitCode::io_error, "io", e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        fail(ExitCode::io_error, "io", e.what());
    } catch (const std::invalid_argument& e) {
        fail(ExitCode::bad_config, "invalid_argument", e.what());
    } catch (const std::domain_error& e) {
        fail(ExitCode::bad_config, "domain_error", e.what());
    } catch (const std::exception& e) {
        fail(ExitCode::failure, "runtime", e.what());
    }
    return result;
}

} // namespace csdoa
