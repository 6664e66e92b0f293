#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnrlab/detector.hpp"
#include "pnrlab/pmf.hpp"
#include "pnrlab/trace.hpp"

namespace pnrlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Locale-independent shortest round-trip decimal representation.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Writes a file atomically: to a sibling temp path, then rename over.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// CSV exports (LF line endings, '.' decimal separator)
// ---------------------------------------------------------------------------

inline std::string histogram_csv(const Histogram& hist) {
    std::string out = "n,count,probability\n";
    for (std::size_t n = 0; n < hist.counts.size(); ++n) {
        out += std::to_string(n) + ',' + std::to_string(hist.counts[n]) + ',' +
               format_double(hist.probability(n)) + '\n';
    }
    return out;
}

inline std::string pmf_csv(const PhotonPmf& pmf) {
    std::string out = "n,probability\n";
    for (std::size_t n = 0; n < pmf.probs.size(); ++n)
        out += std::to_string(n) + ',' + format_double(pmf.probs[n]) + '\n';
    return out;
}

inline nlohmann::json histogram_json(const Histogram& hist) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t n = 0; n < hist.counts.size(); ++n)
        rows.push_back({{"n", n}, {"count", hist.counts[n]}, {"probability", hist.probability(n)}});
    return rows;
}

inline nlohmann::json pmf_json(const PhotonPmf& pmf) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t n = 0; n < pmf.probs.size(); ++n)
        rows.push_back({{"n", n}, {"probability", pmf.probs[n]}});
    return rows;
}

// ---------------------------------------------------------------------------
// Trace file formats
// ---------------------------------------------------------------------------

inline std::string trace_csv(const TraceFrame& frame) {
    std::string out = "t,v\n";
    for (std::size_t i = 0; i < frame.samples.size(); ++i)
        out += format_double(frame.t0 + static_cast<double>(i) * frame.dt) + ',' +
               format_double(frame.samples[i]) + '\n';
    return out;
}

inline TraceFrame trace_from_csv(const std::string& text, int slots) {
    TraceFrame frame;
    frame.slots = slots;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.substr(0, pos) != "t,v")
        throw std::invalid_argument("trace CSV: missing t,v header");
    double t_first = 0.0, t_second = 0.0;
    ++pos;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("trace CSV: malformed row");
        const double t = std::stod(line.substr(0, comma));
        const double v = std::stod(line.substr(comma + 1));
        if (frame.samples.empty()) t_first = t;
        else if (frame.samples.size() == 1) t_second = t;
        frame.samples.push_back(v);
    }
    if (frame.samples.size() < 2) throw std::invalid_argument("trace CSV: too few samples");
    frame.t0 = t_first;
    frame.dt = t_second - t_first;
    return frame;
}

/// Binary trace layout: 24-byte header (8-byte magic "PNRTRACE",
/// little-endian u32 slot count, u32 format version, f64 sample interval)
/// followed by the samples as little-endian f64.
inline constexpr char kTraceMagic[8] = {'P', 'N', 'R', 'T', 'R', 'A', 'C', 'E'};
inline constexpr std::uint32_t kTraceFormatVersion = 1;

inline std::string trace_binary(const TraceFrame& frame) {
    std::string out;
    out.resize(24 + frame.samples.size() * sizeof(double));
    char* p = out.data();
    std::memcpy(p, kTraceMagic, 8);
    const std::uint32_t slots = static_cast<std::uint32_t>(frame.slots);
    std::memcpy(p + 8, &slots, 4);
    std::memcpy(p + 12, &kTraceFormatVersion, 4);
    std::memcpy(p + 16, &frame.dt, 8);
    std::memcpy(p + 24, frame.samples.data(), frame.samples.size() * sizeof(double));
    return out;
}

inline TraceFrame trace_from_binary(const std::string& bytes) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kTraceMagic, 8) != 0)
        throw std::invalid_argument("trace binary: bad magic or truncated header");
    TraceFrame frame;
    std::uint32_t slots = 0, version = 0;
    std::memcpy(&slots, bytes.data() + 8, 4);
    std::memcpy(&version, bytes.data() + 12, 4);
    std::memcpy(&frame.dt, bytes.data() + 16, 8);
    if (version != kTraceFormatVersion)
        throw std::invalid_argument("trace binary: unsupported format version");
    frame.slots = static_cast<int>(slots);
    const std::size_t n = (bytes.size() - 24) / sizeof(double);
    frame.samples.resize(n);
    std::memcpy(frame.samples.data(), bytes.data() + 24, n * sizeof(double));
    return frame;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Reproducibility record written next to every command's outputs.
struct RunManifest {
    std::string command;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    int workers = 1;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const {
        return {{"command", command},      {"config", config},
                {"seed", seed},            {"workers", workers},
                {"tool_version", kToolVersion}, {"partition_scheme", kPartitionScheme},
                {"started", started},      {"finished", finished},
                {"outputs", outputs}};
    }

    void write(const std::filesystem::path& path) const {
        write_file_atomic(path, to_json().dump(2) + "\n");
    }
};

}  // namespace pnrlab
