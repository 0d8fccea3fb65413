#ifndef STOWAVE_CONFIG_HPP
#define STOWAVE_CONFIG_HPP

// Run configuration: a single JSON file with nested blocks
//
//   seed, workers, output_dir,
//   grid { dim, n, L, dt, nt },
//   covariance { beta, amplitude, taper { kind, amplitude, width } },
//   coefficients { name, params { ... } },
//   initial_data { name, params { ... } },
//   deviation_scale { theta },
//   experiment { name, params { ... } }.
//
// Unknown keys are rejected. The config hash covers everything except
// `workers` and `output_dir`, which do not change any result.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "propagator.hpp"

namespace stowave {

using json = nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr const char* tool_version = "stowave " STOWAVE_VERSION;

/// A malformed config: syntax error (with line and column) or a bad field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"simulate",   "clt",    "mdp-rate",       "mdp-tail",
                                                "noise-check", "holder", "weak-continuity"};
    return names;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

/// Typed access to one JSON object with a dotted path for diagnostics.
/// Every key read is recorded; `finish` rejects the rest.
class Reader {
public:
    Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    [[nodiscard]] const json& at(const std::string& key) {
        seen_.insert(key);
        if (!obj_.contains(key)) fail(key, "missing");
        return obj_.at(key);
    }

    [[nodiscard]] double number(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }
    [[nodiscard]] double number(const std::string& key, double fallback) {
        return has(key) ? number(key) : fallback;
    }

    [[nodiscard]] std::int64_t integer(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<std::int64_t>();
    }
    [[nodiscard]] std::int64_t integer(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : fallback;
    }

    [[nodiscard]] std::uint64_t unsigned_integer(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_unsigned()) fail(key, "expected a non-negative 64-bit integer");
        return v.get<std::uint64_t>();
    }

    [[nodiscard]] std::string string(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }
    [[nodiscard]] std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    [[nodiscard]] bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = obj_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    [[nodiscard]] std::vector<double> numbers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(key, "expected a non-empty array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    [[nodiscard]] std::vector<int> integers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of integers");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) fail(key, "expected a non-empty array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    /// Numeric map (coefficient and initial-data parameters).
    [[nodiscard]] Params params(const std::string& key) {
        Params out;
        if (!has(key)) return out;
        const auto& v = obj_.at(key);
        if (!v.is_object()) fail(key, "expected an object of numbers");
        for (const auto& [k, e] : v.items()) {
            if (!e.is_number()) fail(key + "." + k, "expected a number");
            out[k] = e.get<double>();
        }
        return out;
    }

    [[nodiscard]] Reader child(const std::string& key) { return Reader(at(key), join(key)); }

    void finish() const {
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k)) fail(k, "unknown field");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError("config: field '" + join(key) + "': " + what);
    }

    [[nodiscard]] std::string join(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

struct GridConfig {
    int dim = 1;
    int n = 64;
    double length = 4.0;
    double dt = 0.01;
    int nt = 100;
};

struct RunConfig {
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string output_dir;
    GridConfig grid;
    CovarianceSpec covariance;
    std::string coeffs_name;
    Params coeffs_params;
    std::string init_name;
    Params init_params;
    DeviationScale scale;
    std::string experiment;
    json experiment_params = json::object();
    /// The parsed document, and its hash without workers and output_dir.
    json document;
    std::string hash;
};

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline std::string config_hash(const json& doc) {
    json hashed = doc;
    hashed.erase("workers");
    hashed.erase("output_dir");
    return sha256_hex(hashed.dump());
}

inline RunConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        const auto [line, col] = line_column(text, at);
        std::string what = e.what();
        if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
        throw ConfigError("config: parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + what);
    }

    RunConfig cfg;
    Reader root(doc, "");
    cfg.seed = root.unsigned_integer("seed");
    const auto workers = root.integer("workers", 1);
    if (workers < 1 || workers > 1024) root.fail("workers", "must lie in 1..1024");
    cfg.workers = static_cast<unsigned>(workers);
    cfg.output_dir = root.string("output_dir");
    if (cfg.output_dir.empty()) root.fail("output_dir", "must not be empty");

    {
        auto g = root.child("grid");
        cfg.grid.dim = static_cast<int>(g.integer("dim"));
        cfg.grid.n = static_cast<int>(g.integer("n"));
        cfg.grid.length = g.number("L");
        cfg.grid.dt = g.number("dt");
        cfg.grid.nt = static_cast<int>(g.integer("nt"));
        g.finish();
    }
    {
        auto c = root.child("covariance");
        cfg.covariance.beta = c.number("beta");
        cfg.covariance.amplitude = c.number("amplitude", 1.0);
        cfg.covariance.dim = cfg.grid.dim;
        if (c.has("taper")) {
            auto t = c.child("taper");
            const auto kind = t.string("kind", "none");
            if (kind == "bump") {
                cfg.covariance.taper.kind = Taper::Kind::bump;
            } else if (kind != "none") {
                t.fail("kind", "expected \"none\" or \"bump\"");
            }
            cfg.covariance.taper.amplitude = t.number("amplitude", cfg.covariance.taper.amplitude);
            cfg.covariance.taper.width = t.number("width", 0.0);
            t.finish();
        }
        c.finish();
    }
    {
        auto c = root.child("coefficients");
        cfg.coeffs_name = c.string("name");
        cfg.coeffs_params = c.params("params");
        c.finish();
    }
    {
        auto c = root.child("initial_data");
        cfg.init_name = c.string("name");
        cfg.init_params = c.params("params");
        c.finish();
    }
    {
        auto c = root.child("deviation_scale");
        cfg.scale.theta = c.number("theta");
        c.finish();
    }
    {
        auto e = root.child("experiment");
        cfg.experiment = e.string("name");
        const auto& names = experiment_names();
        if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
            e.fail("name", "unknown experiment '" + cfg.experiment + "' (see `stowave list`)");
        if (e.has("params")) {
            cfg.experiment_params = e.at("params");
            if (!cfg.experiment_params.is_object()) e.fail("params", "expected an object");
        }
        e.finish();
    }
    root.finish();
    cfg.document = doc;
    cfg.hash = config_hash(doc);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Builds and validates the model; hypothesis violations surface as HypothesisError.
inline Model build_model(const RunConfig& cfg) {
    const Grid grid(cfg.grid.dim, cfg.grid.n, cfg.grid.length, cfg.grid.dt, cfg.grid.nt);
    const auto coeffs = make_coeffs(cfg.coeffs_name, cfg.coeffs_params);
    const auto init = make_initial_data(cfg.init_name, cfg.init_params, cfg.grid.length, cfg.grid.dim);
    const bool deviation = cfg.experiment == "clt" || cfg.experiment == "mdp-rate" || cfg.experiment == "mdp-tail" ||
                           cfg.experiment == "weak-continuity";
    return validate_config(grid, cfg.covariance, coeffs, init, cfg.scale, deviation);
}

} // namespace stowave

#endif
