#ifndef STOWAVE_MANIFEST_HPP
#define STOWAVE_MANIFEST_HPP

// Output directory with checksummed files, the run manifest, and the
// formatting helpers that keep CSV/JSON output byte-stable.

#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace stowave {

namespace fs = std::filesystem;

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::runtime_error("fmt: conversion failed");
    return {buf, end};
}

/// JSON value for a double; non-finite values become null.
inline json jnum(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version = stowave::tool_version;
    std::uint64_t seed = 0;
    std::string experiment;
    std::string started;
    std::string finished;
    std::vector<ManifestFile> files;
    json config;

    [[nodiscard]] json to_json() const {
        json files_json = json::array();
        for (const auto& f : files) files_json.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return {{"schema_version", schema_version},
                {"tool_version", tool_version},
                {"config_hash", config_hash},
                {"seed", seed},
                {"experiment", experiment},
                {"started", started},
                {"finished", finished},
                {"files", files_json},
                {"config", config}};
    }
};

inline constexpr const char* manifest_name = "manifest.json";

/// All writes of a run go through here: flat file names only, so nothing
/// escapes the declared output directory.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    [[nodiscard]] const fs::path& root() const noexcept { return root_; }
    [[nodiscard]] const std::vector<ManifestFile>& files() const noexcept { return files_; }

    void write(const std::string& name, const std::string& content) {
        check_name(name);
        if (name == manifest_name) throw std::invalid_argument("output: manifest name is reserved");
        put(name, content);
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    void write_json(const std::string& name, const json& value) { write(name, value.dump(2) + "\n"); }

    void write_manifest(RunManifest manifest) {
        manifest.files = files_;
        put(manifest_name, manifest.to_json().dump(2) + "\n");
    }

private:
    static void check_name(const std::string& name) {
        if (name.empty() || name == "." || name == "..") throw std::invalid_argument("output: bad file name");
        for (char c : name)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
                throw std::invalid_argument("output: file name '" + name + "' must be a plain file name");
    }

    void put(const std::string& name, const std::string& content) const {
        std::ofstream os(root_ / name, std::ios::binary | std::ios::trunc);
        os << content;
        if (!os) throw std::runtime_error("output: cannot write '" + (root_ / name).string() + "'");
    }

    fs::path root_;
    std::vector<ManifestFile> files_;
};

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Re-reads every file listed in dir/manifest.json; returns the names whose
/// checksum or size no longer match (empty when the run verifies).
inline std::vector<std::string> verify_manifest(const fs::path& dir) {
    const auto doc = json::parse(read_file(dir / manifest_name));
    std::vector<std::string> bad;
    for (const auto& f : doc.at("files")) {
        const auto name = f.at("name").get<std::string>();
        std::string content;
        try {
            content = read_file(dir / name);
        } catch (const std::runtime_error&) {
            bad.push_back(name);
            continue;
        }
        if (sha256_hex(content) != f.at("sha256").get<std::string>() ||
            content.size() != f.at("bytes").get<std::uintmax_t>())
            bad.push_back(name);
    }
    return bad;
}

} // namespace stowave

#endif
