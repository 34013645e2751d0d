// csdoa: command-line front end for DOA synthesis, ingestion, beamforming,
// sparse estimation, regularization paths and Monte-Carlo benchmarks.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "csdoa/csdoa.hpp"

namespace {

// Flag values; only flags the user actually passed are merged into the config.
struct Flags {
    std::string config;
    std::optional<std::size_t> sensors;
    std::optional<double> spacing;
    std::vector<double> grid;
    std::vector<double> doas;
    std::vector<double> mags_db;
    std::optional<std::string> phase_model;
    std::optional<std::size_t> snapshots;
    std::vector<double> snr;
    std::vector<std::string> methods;
    std::optional<std::size_t> k;
    std::optional<std::size_t> min_sep;
    std::optional<double> loading;
    std::optional<double> interpolation;
    std::optional<double> epsilon;
    std::optional<std::size_t> overshoot;
    std::optional<std::size_t> max_outer;
    std::optional<bool> separated_peaks;
    std::optional<double> rel_tol;
    std::optional<std::size_t> max_iters;
    std::vector<double> mu_list;
    std::optional<std::size_t> mu_count;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> output_dir;
    std::optional<std::string> input;
    std::optional<std::string> ingest_file;
    std::optional<std::string> ingest_format;
    std::optional<double> f0;
    std::optional<std::size_t> nfft;
    std::optional<double> overlap;
    std::optional<std::string> window;
};

void add_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("-c,--config", f.config, "JSON scenario config")->check(CLI::ExistingFile);
    cmd->add_option("--sensors", f.sensors, "number of array elements M");
    cmd->add_option("--spacing", f.spacing, "element spacing in wavelengths");
    cmd->add_option("--grid", f.grid, "angular grid: start step stop (deg)")->expected(3);
    cmd->add_option("--doas", f.doas, "source DOAs (deg)");
    cmd->add_option("--mags-db", f.mags_db, "source magnitudes (dB)");
    cmd->add_option("--phase-model", f.phase_model, "iid or coherent");
    cmd->add_option("-L,--snapshots", f.snapshots, "snapshots per realization");
    cmd->add_option("--snr", f.snr, "array SNR list (dB)");
    cmd->add_option("--methods", f.methods, "CBF MVDR MUSIC CS EXHAUSTIVE");
    cmd->add_option("-K,--num-sources", f.k, "number of sources to estimate");
    cmd->add_option("--min-sep", f.min_sep, "peak separation in bins");
    cmd->add_option("--loading", f.loading, "MVDR diagonal loading");
    cmd->add_option("--interpolation", f.interpolation, "path interpolation factor F");
    cmd->add_option("--epsilon", f.epsilon, "relative activity threshold");
    cmd->add_option("--overshoot", f.overshoot, "extra path peaks before trimming to K");
    cmd->add_option("--max-outer", f.max_outer, "path loop guard");
    cmd->add_option("--separated-peaks", f.separated_peaks, "count only separated peaks as active (true/false)");
    cmd->add_option("--rel-tol", f.rel_tol, "solver relative objective tolerance");
    cmd->add_option("--max-iters", f.max_iters, "solver iteration cap");
    cmd->add_option("--mu", f.mu_list, "explicit decreasing mu list for the path command");
    cmd->add_option("--mu-count", f.mu_count, "log-spaced mu values when --mu is absent");
    cmd->add_option("--trials", f.trials, "Monte-Carlo trials per SNR");
    cmd->add_option("--seed", f.seed, "base seed");
    cmd->add_option("--threads", f.threads, "worker threads (0 = all cores)");
    cmd->add_option("-o,--output-dir", f.output_dir, "output directory");
    cmd->add_option("-i,--input", f.input, "snapshot CSV to analyse");
    cmd->add_option("--ingest-file", f.ingest_file, "time-series file");
    cmd->add_option("--ingest-format", f.ingest_format, "csv or raw");
    cmd->add_option("--f0", f.f0, "narrowband frequency (Hz)");
    cmd->add_option("--nfft", f.nfft, "DFT length");
    cmd->add_option("--overlap", f.overlap, "segment overlap fraction");
    cmd->add_option("--window", f.window, "rectangular or hann");
}

template <class T>
void put(csdoa::json& j, const std::optional<T>& v, std::initializer_list<const char*> path)
{
    if (!v)
        return;
    csdoa::json* node = &j;
    auto it = path.begin();
    for (; std::next(it) != path.end(); ++it)
        node = &(*node)[*it];
    (*node)[*it] = *v;
}

template <class T>
void put(csdoa::json& j, const std::vector<T>& v, std::initializer_list<const char*> path)
{
    if (!v.empty())
        put(j, std::optional<std::vector<T>>(v), path);
}

csdoa::json merged_config(const Flags& f)
{
    csdoa::json j = csdoa::json::object();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        try {
            j = csdoa::json::parse(in);
        } catch (const csdoa::json::parse_error& e) {
            throw csdoa::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    put(j, f.sensors, {"array", "sensors"});
    put(j, f.spacing, {"array", "spacing"});
    if (f.grid.size() == 3) {
        j["grid"]["start"] = f.grid[0];
        j["grid"]["step"] = f.grid[1];
        j["grid"]["stop"] = f.grid[2];
    }
    put(j, f.doas, {"sources", "doas_deg"});
    put(j, f.mags_db, {"sources", "magnitudes_db"});
    put(j, f.phase_model, {"sources", "phase_model"});
    put(j, f.snapshots, {"snapshots"});
    put(j, f.snr, {"snr_db"});
    put(j, f.methods, {"methods"});
    put(j, f.k, {"num_sources"});
    put(j, f.min_sep, {"min_separation"});
    put(j, f.loading, {"mvdr_loading"});
    put(j, f.interpolation, {"path", "interpolation"});
    put(j, f.epsilon, {"path", "epsilon"});
    put(j, f.overshoot, {"path", "overshoot"});
    put(j, f.max_outer, {"path", "max_outer_iterations"});
    put(j, f.separated_peaks, {"path", "count_separated_peaks"});
    put(j, f.rel_tol, {"solver", "rel_tol"});
    put(j, f.max_iters, {"solver", "max_iters"});
    put(j, f.mu_list, {"mu_list"});
    put(j, f.mu_count, {"mu_count"});
    put(j, f.trials, {"trials"});
    put(j, f.seed, {"seed"});
    put(j, f.threads, {"threads"});
    put(j, f.output_dir, {"output_dir"});
    put(j, f.input, {"input"});
    put(j, f.ingest_file, {"ingest", "file"});
    put(j, f.ingest_format, {"ingest", "format"});
    put(j, f.f0, {"ingest", "f0_hz"});
    put(j, f.nfft, {"ingest", "nfft"});
    put(j, f.overlap, {"ingest", "overlap"});
    put(j, f.window, {"ingest", "window"});
    return j;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"csdoa: sparse direction-of-arrival estimation"};
    app.require_subcommand(1);
    Flags flags;
    std::map<std::string, CLI::App*> subs;
    const std::map<std::string, std::string> help{
        {"synth", "synthesize one snapshot set to snapshots.csv"},
        {"ingest", "extract narrowband snapshots from a multichannel time series"},
        {"beamform", "CBF / MVDR / MUSIC spectra and peak picks"},
        {"cs", "sparse estimate via the regularization-path search"},
        {"path", "LASSO path sweep over mu"},
        {"bench", "Monte-Carlo RMSE versus SNR"},
    };
    for (const auto& name : csdoa::commands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        add_flags(sub, flags);
        subs[name] = sub;
    }
    CLI11_PARSE(app, argc, argv);

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed())
            command = name;

    csdoa::ScenarioConfig cfg;
    try {
        cfg = csdoa::parse_config(merged_config(flags));
    } catch (const std::exception& e) {
        const csdoa::json err{{"error", "config"},
                              {"message", e.what()},
                              {"exit_code", static_cast<int>(csdoa::ExitCode::bad_config)},
                              {"command", command}};
        std::cerr << err.dump() << '\n';
        return static_cast<int>(csdoa::ExitCode::bad_config);
    }
    if (const char* dir = std::getenv("CSDOA_OUTPUT_DIR"); dir && *dir)
        cfg.output_dir = dir;

    const auto result = csdoa::run(command, cfg, std::cerr);
    if (result.code == csdoa::ExitCode::ok) {
        for (const auto& f : result.files)
            std::cout << (std::filesystem::path(cfg.output_dir) / f).string() << '\n';
    }
    return static_cast<int>(result.code);
}
