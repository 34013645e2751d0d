#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "synthesis.hpp"

namespace csdoa {

/// Real multichannel record, channel-major: samples[c] holds channel c.
struct TimeSeries {
    double sample_rate_hz = 0.0;
    std::vector<std::vector<double>> samples;

    std::size_t num_channels() const noexcept { return samples.size(); }
    std::size_t length() const noexcept { return samples.empty() ? 0 : samples.front().size(); }

    void validate() const
    {
        if (!(sample_rate_hz > 0.0))
            throw std::invalid_argument("TimeSeries: sample rate must be positive");
        if (samples.empty())
            throw std::invalid_argument("TimeSeries: no channels");
        for (const auto& ch : samples)
            if (ch.size() != samples.front().size())
                throw std::invalid_argument("TimeSeries: channels have unequal lengths");
    }
};

inline void check_channels(const TimeSeries& ts, const ArraySpec& array)
{
    if (ts.num_channels() != array.num_sensors())
        throw std::invalid_argument("time series has " + std::to_string(ts.num_channels())
                                    + " channels but the array has " + std::to_string(array.num_sensors())
                                    + " sensors");
}

namespace detail {

inline std::vector<double> split_numbers(const std::string& line)
{
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        out.push_back(v);
    }
    return out;
}

} // namespace detail

/// CSV layout: a header line "fs,M", a line with their values, then one line
/// per channel holding that channel's samples.
inline TimeSeries load_timeseries_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("time series CSV: empty input");
    if (line.rfind("fs", 0) == 0 && !std::getline(in, line))
        throw std::runtime_error("time series CSV: missing fs,M values");
    const auto head = detail::split_numbers(line);
    if (head.size() != 2 || !(head[1] >= 1.0))
        throw std::runtime_error("time series CSV: expected 'fs,M' header values");
    TimeSeries ts;
    ts.sample_rate_hz = head[0];
    const auto m = static_cast<std::size_t>(head[1]);
    while (ts.samples.size() < m && std::getline(in, line)) {
        if (line.empty())
            continue;
        ts.samples.push_back(detail::split_numbers(line));
    }
    if (ts.samples.size() != m)
        throw std::runtime_error("time series CSV: expected " + std::to_string(m) + " channel rows, got "
                                 + std::to_string(ts.samples.size()));
    ts.validate();
    return ts;
}

inline TimeSeries load_timeseries_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return load_timeseries_csv(in);
}

inline void write_timeseries_csv(std::ostream& out, const TimeSeries& ts)
{
    out.precision(17);
    out << "fs,M\n" << ts.sample_rate_hz << ',' << ts.num_channels() << '\n';
    for (const auto& ch : ts.samples) {
        for (std::size_t i = 0; i < ch.size(); ++i)
            out << (i ? "," : "") << ch[i];
        out << '\n';
    }
}

/// Raw little-endian float32, channel-major, described by a JSON sidecar
/// {"sample_rate_hz": fs, "channels": M, "samples_per_channel": T}.
inline TimeSeries load_timeseries_raw(const std::string& data_path, const std::string& sidecar_path)
{
    std::ifstream side(sidecar_path);
    if (!side)
        throw std::runtime_error("cannot open " + sidecar_path);
    const auto desc = nlohmann::json::parse(side);
    TimeSeries ts;
    ts.sample_rate_hz = desc.at("sample_rate_hz").get<double>();
    const auto m = desc.at("channels").get<std::size_t>();
    const auto t = desc.at("samples_per_channel").get<std::size_t>();

    std::ifstream in(data_path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + data_path);
    ts.samples.assign(m, std::vector<double>(t));
    std::vector<unsigned char> buf(t * 4);
    for (std::size_t c = 0; c < m; ++c) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw std::runtime_error("raw time series: file shorter than the sidecar describes");
        for (std::size_t i = 0; i < t; ++i) {
            const std::uint32_t bits = std::uint32_t{buf[4 * i]} | (std::uint32_t{buf[4 * i + 1]} << 8)
                                       | (std::uint32_t{buf[4 * i + 2]} << 16) | (std::uint32_t{buf[4 * i + 3]} << 24);
            float f;
            std::memcpy(&f, &bits, sizeof f);
            ts.samples[c][i] = f;
        }
    }
    ts.validate();
    return ts;
}

inline void write_timeseries_raw(const std::string& data_path, const std::string& sidecar_path, const TimeSeries& ts)
{
    std::ofstream out(data_path, std::ios::binary);
    for (const auto& ch : ts.samples)
        for (double v : ch) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof f);
            const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                        static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    std::ofstream side(sidecar_path);
    side << nlohmann::json{{"sample_rate_hz", ts.sample_rate_hz},
                           {"channels", ts.num_channels()},
                           {"samples_per_channel", ts.length()}}
                .dump(2)
         << '\n';
}

enum class Window { rectangular, hann };

struct ExtractOptions {
    double f0_hz = 0.0;
    std::size_t nfft = 4096;
    double overlap = 0.0; ///< fraction in [0, 1)
    Window window = Window::rectangular;
};

struct Extraction {
    SnapshotSet snapshots;
    std::size_t bin = 0;
    double bin_frequency_hz = 0.0;
    std::size_t hop = 0;
    std::vector<std::string> warnings;
};

inline std::size_t snapshot_hop(std::size_t nfft, double overlap)
{
    return static_cast<std::size_t>(std::floor(static_cast<double>(nfft) * (1.0 - overlap)));
}

inline std::size_t snapshot_count(std::size_t record_length, std::size_t nfft, double overlap)
{
    const auto hop = snapshot_hop(nfft, overlap);
    if (hop == 0 || record_length < nfft)
        return 0;
    return (record_length - nfft) / hop + 1;
}

/// Narrowband snapshots: per hop, window each channel, take the DFT bin
/// nearest f0 and stack the channel values as one column. Only the selected
/// bin is evaluated, which equals picking it from a full transform.
inline Extraction extract_snapshots(const TimeSeries& ts, const ArraySpec& array, const ExtractOptions& opt,
                                    const std::function<void(const std::string&)>& warn = {})
{
    ts.validate();
    check_channels(ts, array);
    const double fs = ts.sample_rate_hz;
    if (!(opt.overlap >= 0.0 && opt.overlap < 1.0))
        throw std::invalid_argument("extract_snapshots: overlap must lie in [0, 1)");
    if (opt.nfft < 1)
        throw std::invalid_argument("extract_snapshots: nfft must be positive");
    if (!(opt.f0_hz >= 0.0 && opt.f0_hz < fs / 2.0))
        throw std::domain_error("extract_snapshots: f0 must lie in [0, fs/2)");
    if (opt.nfft > ts.length())
        throw std::invalid_argument("extract_snapshots: record of " + std::to_string(ts.length())
                                    + " samples is shorter than nfft=" + std::to_string(opt.nfft));

    Extraction out{SnapshotSet(CMatrix::Zero(static_cast<Eigen::Index>(array.num_sensors()), 1), array), 0, 0.0,
                   snapshot_hop(opt.nfft, opt.overlap), {}};
    if (out.hop == 0)
        throw std::invalid_argument("extract_snapshots: overlap leaves a zero hop");
    const double df = fs / static_cast<double>(opt.nfft);
    out.bin = static_cast<std::size_t>(std::lround(opt.f0_hz / df));
    out.bin_frequency_hz = static_cast<double>(out.bin) * df;
    // the nearest bin is always within half a bin, so any visible offset is reported
    if (std::abs(out.bin_frequency_hz - opt.f0_hz) > 0.01 * df) {
        std::ostringstream msg;
        msg << "f0=" << opt.f0_hz << " Hz is off bin centre; using bin " << out.bin << " at "
            << out.bin_frequency_hz << " Hz";
        out.warnings.push_back(msg.str());
        if (warn)
            warn(msg.str());
    }

    std::vector<cplx> kernel(opt.nfft);
    for (std::size_t n = 0; n < opt.nfft; ++n) {
        double w = 1.0;
        if (opt.window == Window::hann)
            w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(opt.nfft));
        // reduce the index first so the phase stays accurate for long transforms
        const auto kn = (out.bin * n) % opt.nfft;
        kernel[n] = w * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(kn) / static_cast<double>(opt.nfft));
    }

    const auto count = snapshot_count(ts.length(), opt.nfft, opt.overlap);
    CMatrix y(static_cast<Eigen::Index>(array.num_sensors()), static_cast<Eigen::Index>(count));
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t start = s * out.hop;
        for (std::size_t c = 0; c < ts.num_channels(); ++c) {
            cplx acc{0.0, 0.0};
            const auto& ch = ts.samples[c];
            for (std::size_t n = 0; n < opt.nfft; ++n)
                acc += ch[start + n] * kernel[n];
            y(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = acc;
        }
    }
    SnapshotMeta meta;
    meta.provenance = "ingested";
    out.snapshots = SnapshotSet(std::move(y), array, meta);
    return out;
}

/// Multichannel tone from a plane wave at theta: channel m carries
/// amplitude cos(2 pi f t + phase + 2 pi (d/lambda) m sin(theta)), so the
/// extracted bin reproduces the steering-vector phase progression.
inline TimeSeries plane_wave_tone(const ArraySpec& array, double theta_deg, double f_hz, double fs_hz,
                                  std::size_t length, double amplitude = 1.0, double phase = 0.0)
{
    TimeSeries ts;
    ts.sample_rate_hz = fs_hz;
    const double kd = 2.0 * std::numbers::pi * array.spacing_over_wavelength() * std::sin(deg2rad(theta_deg));
    for (std::size_t m = 0; m < array.num_sensors(); ++m) {
        std::vector<double> ch(length);
        for (std::size_t n = 0; n < length; ++n)
            ch[n] = amplitude
                    * std::cos(2.0 * std::numbers::pi * f_hz * static_cast<double>(n) / fs_hz + phase
                               + kd * static_cast<double>(m));
        ts.samples.push_back(std::move(ch));
    }
    return ts;
}

} // namespace csdoa
