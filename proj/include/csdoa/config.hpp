#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "evaluation.hpp"
#include "timeseries.hpp"

namespace csdoa {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IngestConfig {
    std::string file;
    std::string format = "csv"; ///< csv | raw
    std::string sidecar;        ///< raw only; defaults to <file>.json
    double f0_hz = 0.0;
    std::size_t nfft = 4096;
    double overlap = 0.0;
    Window window = Window::rectangular;
};

/// Everything a CLI run needs. Parsed from JSON with unknown keys rejected.
struct ScenarioConfig {
    std::size_t sensors = 20;
    double spacing = 0.5;
    double grid_start = -90.0;
    double grid_step = 0.5;
    double grid_stop = 90.0;

    std::vector<double> doas_deg;
    std::vector<double> magnitudes_db;
    PhaseModel phase_model = PhaseModel::iid_uniform_per_snapshot;
    std::size_t snapshots = 1;
    std::vector<double> snr_db{20.0};

    std::vector<Method> methods{Method::cbf, Method::cs};
    std::optional<std::size_t> num_sources;
    std::size_t min_separation = 4;
    double mvdr_loading = 0.0;
    SolverOptions solver{};
    PathOptions path = [] {
        PathOptions p;
        p.overshoot = 2;
        p.count_separated_peaks = true;
        return p;
    }();

    std::vector<double> mu_list;   ///< path command; empty means log-spaced below mu_max
    std::size_t mu_count = 40;
    double mu_floor_ratio = 1e-3;

    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string output_dir = "out";
    std::string input;             ///< snapshot CSV to analyse instead of synthesizing
    std::optional<IngestConfig> ingest;

    ArraySpec array() const { return ArraySpec(sensors, spacing); }
    AngularGrid grid() const { return AngularGrid::uniform(grid_start, grid_step, grid_stop); }
    SourceScenario scenario() const { return SourceScenario::from_db(doas_deg, magnitudes_db, phase_model); }
    std::size_t k() const { return num_sources.value_or(doas_deg.size()); }

    EstimatorSettings estimator() const
    {
        EstimatorSettings s;
        s.num_sources = k();
        s.min_separation = min_separation;
        s.mvdr_loading = mvdr_loading;
        s.path = path;
        s.path.num_sources = k();
        s.path.solver = solver;
        return s;
    }
};

namespace detail {

inline void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys)
{
    if (!obj.is_object())
        throw ConfigError(where + ": expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k))
            throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where)
{
    if (!obj.contains(key))
        return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline const char* phase_model_name(PhaseModel p)
{
    return p == PhaseModel::coherent_fixed ? "coherent" : "iid";
}

inline const char* window_name(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

} // namespace detail

/// Checks module preconditions that can be decided before any work starts.
inline void validate(const ScenarioConfig& c)
{
    try {
        (void)c.array();
        (void)c.grid();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (c.doas_deg.size() != c.magnitudes_db.size())
        throw ConfigError("sources: doas_deg and magnitudes_db differ in length");
    if (!c.doas_deg.empty()) {
        try {
            c.scenario().validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
    if (c.snapshots < 1)
        throw ConfigError("snapshots must be >= 1");
    if (c.snr_db.empty())
        throw ConfigError("snr_db must list at least one value");
    if (c.methods.empty())
        throw ConfigError("methods must not be empty");
    if (c.k() < 1 || c.k() >= c.sensors)
        throw ConfigError("num_sources must satisfy 1 <= K < sensors");
    if (!(c.path.interpolation > 0.0 && c.path.interpolation < 1.0))
        throw ConfigError("path.interpolation must lie in ]0,1[");
    if (!(c.path.epsilon > 0.0 && c.path.epsilon < 1.0))
        throw ConfigError("path.epsilon must lie in ]0,1[");
    if (c.mvdr_loading < 0.0)
        throw ConfigError("mvdr_loading must be >= 0");
    if (c.min_separation < 1)
        throw ConfigError("min_separation must be >= 1");
    for (std::size_t i = 0; i < c.mu_list.size(); ++i)
        if (!(c.mu_list[i] > 0.0) || (i > 0 && !(c.mu_list[i] < c.mu_list[i - 1])))
            throw ConfigError("mu_list must be positive and strictly decreasing");
    if (c.mu_count < 2 || !(c.mu_floor_ratio > 0.0 && c.mu_floor_ratio < 1.0))
        throw ConfigError("mu_count must be >= 2 and mu_floor_ratio in ]0,1[");
    if (c.ingest) {
        if (c.ingest->file.empty())
            throw ConfigError("ingest.file is required");
        if (c.ingest->format != "csv" && c.ingest->format != "raw")
            throw ConfigError("ingest.format must be csv or raw");
        if (!(c.ingest->overlap >= 0.0 && c.ingest->overlap < 1.0))
            throw ConfigError("ingest.overlap must lie in [0,1)");
    }
}

inline ScenarioConfig parse_config(const json& j)
{
    using detail::read;
    ScenarioConfig c;
    detail::allow_keys(j, "config",
                       {"array", "grid", "sources", "snapshots", "snr_db", "methods", "num_sources", "min_separation",
                        "mvdr_loading", "solver", "path", "mu_list", "mu_count", "mu_floor_ratio", "trials", "seed",
                        "threads", "output_dir", "input", "ingest"});
    if (j.contains("array")) {
        const auto& a = j["array"];
        detail::allow_keys(a, "array", {"sensors", "spacing"});
        read(a, "sensors", c.sensors, "array");
        read(a, "spacing", c.spacing, "array");
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        detail::allow_keys(g, "grid", {"start", "step", "stop"});
        read(g, "start", c.grid_start, "grid");
        read(g, "step", c.grid_step, "grid");
        read(g, "stop", c.grid_stop, "grid");
    }
    if (j.contains("sources")) {
        const auto& s = j["sources"];
        detail::allow_keys(s, "sources", {"doas_deg", "magnitudes_db", "phase_model"});
        read(s, "doas_deg", c.doas_deg, "sources");
        read(s, "magnitudes_db", c.magnitudes_db, "sources");
        std::string pm = detail::phase_model_name(c.phase_model);
        read(s, "phase_model", pm, "sources");
        if (pm == "iid")
            c.phase_model = PhaseModel::iid_uniform_per_snapshot;
        else if (pm == "coherent")
            c.phase_model = PhaseModel::coherent_fixed;
        else
            throw ConfigError("sources.phase_model must be iid or coherent");
    }
    read(j, "snapshots", c.snapshots, "config");
    read(j, "snr_db", c.snr_db, "config");
    if (j.contains("methods")) {
        std::vector<std::string> names;
        read(j, "methods", names, "config");
        c.methods.clear();
        for (const auto& n : names) {
            const auto m = method_from_string(n);
            if (!m)
                throw ConfigError("methods: unknown method '" + n + "'");
            c.methods.push_back(*m);
        }
    }
    if (j.contains("num_sources")) {
        std::size_t k = 0;
        read(j, "num_sources", k, "config");
        c.num_sources = k;
    }
    read(j, "min_separation", c.min_separation, "config");
    read(j, "mvdr_loading", c.mvdr_loading, "config");
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        detail::allow_keys(s, "solver", {"rel_tol", "max_iters", "restart_period", "adaptive_restart", "kkt_tol"});
        read(s, "rel_tol", c.solver.rel_tol, "solver");
        read(s, "max_iters", c.solver.max_iters, "solver");
        read(s, "restart_period", c.solver.restart_period, "solver");
        read(s, "adaptive_restart", c.solver.adaptive_restart, "solver");
        read(s, "kkt_tol", c.solver.kkt_tol, "solver");
    }
    if (j.contains("path")) {
        const auto& p = j["path"];
        detail::allow_keys(p, "path",
                           {"interpolation", "epsilon", "min_separation", "overshoot", "max_outer_iterations",
                            "count_separated_peaks"});
        read(p, "interpolation", c.path.interpolation, "path");
        read(p, "epsilon", c.path.epsilon, "path");
        if (p.contains("min_separation")) {
            std::size_t v = 0;
            read(p, "min_separation", v, "path");
            c.path.min_separation = v;
        }
        read(p, "overshoot", c.path.overshoot, "path");
        read(p, "max_outer_iterations", c.path.max_outer_iterations, "path");
        read(p, "count_separated_peaks", c.path.count_separated_peaks, "path");
    }
    read(j, "mu_list", c.mu_list, "config");
    read(j, "mu_count", c.mu_count, "config");
    read(j, "mu_floor_ratio", c.mu_floor_ratio, "config");
    read(j, "trials", c.trials, "config");
    read(j, "seed", c.seed, "config");
    read(j, "threads", c.threads, "config");
    read(j, "output_dir", c.output_dir, "config");
    read(j, "input", c.input, "config");
    if (j.contains("ingest")) {
        const auto& g = j["ingest"];
        detail::allow_keys(g, "ingest", {"file", "format", "sidecar", "f0_hz", "nfft", "overlap", "window"});
        IngestConfig ic;
        read(g, "file", ic.file, "ingest");
        read(g, "format", ic.format, "ingest");
        read(g, "sidecar", ic.sidecar, "ingest");
        read(g, "f0_hz", ic.f0_hz, "ingest");
        read(g, "nfft", ic.nfft, "ingest");
        read(g, "overlap", ic.overlap, "ingest");
        std::string w = detail::window_name(ic.window);
        read(g, "window", w, "ingest");
        if (w == "rectangular")
            ic.window = Window::rectangular;
        else if (w == "hann")
            ic.window = Window::hann;
        else
            throw ConfigError("ingest.window must be rectangular or hann");
        c.ingest = ic;
    }
    validate(c);
    return c;
}

inline ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    try {
        return parse_config(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

/// Fully resolved config with every default written out; the canonical form
/// that the manifest hash is computed over.
inline json to_json(const ScenarioConfig& c)
{
    json methods = json::array();
    for (auto m : c.methods)
        methods.push_back(to_string(m));
    json path{{"interpolation", c.path.interpolation},
              {"epsilon", c.path.epsilon},
              {"overshoot", c.path.overshoot},
              {"max_outer_iterations", c.path.max_outer_iterations},
              {"count_separated_peaks", c.path.count_separated_peaks}};
    if (c.path.min_separation)
        path["min_separation"] = *c.path.min_separation;
    json j{{"array", {{"sensors", c.sensors}, {"spacing", c.spacing}}},
           {"grid", {{"start", c.grid_start}, {"step", c.grid_step}, {"stop", c.grid_stop}}},
           {"sources",
            {{"doas_deg", c.doas_deg},
             {"magnitudes_db", c.magnitudes_db},
             {"phase_model", detail::phase_model_name(c.phase_model)}}},
           {"snapshots", c.snapshots},
           {"snr_db", c.snr_db},
           {"methods", methods},
           {"min_separation", c.min_separation},
           {"mvdr_loading", c.mvdr_loading},
           {"solver",
            {{"rel_tol", c.solver.rel_tol},
             {"max_iters", c.solver.max_iters},
             {"restart_period", c.solver.restart_period},
             {"adaptive_restart", c.solver.adaptive_restart},
             {"kkt_tol", c.solver.kkt_tol}}},
           {"path", path},
           {"mu_list", c.mu_list},
           {"mu_count", c.mu_count},
           {"mu_floor_ratio", c.mu_floor_ratio},
           {"trials", c.trials},
           {"seed", c.seed},
           {"threads", c.threads},
           {"output_dir", c.output_dir},
           {"input", c.input}};
    if (c.num_sources)
        j["num_sources"] = *c.num_sources;
    if (c.ingest)
        j["ingest"] = {{"file", c.ingest->file},         {"format", c.ingest->format},
                       {"sidecar", c.ingest->sidecar},   {"f0_hz", c.ingest->f0_hz},
                       {"nfft", c.ingest->nfft},         {"overlap", c.ingest->overlap},
                       {"window", detail::window_name(c.ingest->window)}};
    return j;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const ScenarioConfig& c)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(c).dump())));
    return buf;
}

} // namespace csdoa
