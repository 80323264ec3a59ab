#pragma once

// Flat `key = value` run configuration: parsing, validation, resolved dump.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lepton/evolve.hpp"
#include "lepton/identities.hpp"

namespace lepton {

/// Configuration problem: unknown key, malformed value, failed validation.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"verify", "residual", "gauge-check", "evolve", "mms"};
    return c;
}

struct RunConfig {
    std::string command;
    std::string kind = "neutrino3"; ///< a system kind, or "all" for gauge-check
    int dims = 1;                   ///< spatial dimensions (1 or 3)
    int n = 32;                     ///< sites per axis
    std::vector<int> extents;       ///< per-axis override of n (time axis first for spacetime commands)
    double length = 1.0;            ///< box length per axis

    double m = 1.0, m0 = 1.0, alpha = 0.0, beta = 0.3, epsilon = 0.5;
    std::string closure = "auto";   ///< auto: on for third-approximation kinds
    Sign sign1 = Sign::plus, sign2 = Sign::plus, branch = Sign::plus;

    std::uint64_t seed = 1;
    int cutoff = 2;
    double amplitude = 0.15;
    std::vector<int> resolutions{64, 128, 256};
    std::string output_dir = "lepton_out";
    int threads = 1;

    double exact_tol = kExactDeviation;
    double min_order = kMinOrder;
    double residual_tol = 0.0;      ///< > 0: residual fails above it

    std::string fixture = "random"; ///< residual / gauge-check: random, zero, plane_wave
    int gauge_cutoff = 1;
    double gauge_amplitude = 0.3;

    double T = 1.0;
    double dt = 0.0;                ///< 0: cfl * min spacing
    double cfl = kDefaultCfl;
    int cadence = 10;
    int snapshot_cadence = 0;       ///< 0: no snapshots
    std::string init = "random";    ///< zero, random, plane_wave
    std::string projection = "discrete";
    double spinor_scale = 1.0;
    int mode = 1;
    double rapidity = 0.5;

    std::string mms_mode = "both";  ///< spatial, temporal, both
    bool zero_solution = false;

    /// Keys explicitly set, in the order they were applied.
    std::vector<std::string> set_keys;

    bool closure_on() const {
        if (closure == "auto") {
            const auto k = parse_kind(kind);
            return k && info(*k).third;
        }
        return closure == "true";
    }
    /// alpha actually used: closure value when closure is on.
    double resolved_alpha() const { return closure_on() ? 2.0 * m * epsilon / (m0 * m0) : alpha; }

    Params params() const {
        Params p;
        p.m = m;
        p.m0 = m0;
        p.alpha = alpha;
        p.beta = beta;
        p.epsilon = epsilon;
        p.closure = closure_on();
        p.sign1 = sign1;
        p.sign2 = sign2;
        p.n_plus_branch = branch;
        return p;
    }

    std::vector<int> axis_extents(int axes) const {
        if (extents.empty()) return std::vector<int>(axes, n);
        if (static_cast<int>(extents.size()) == axes) return extents;
        if (extents.size() == 1) return std::vector<int>(axes, extents[0]);
        throw ConfigError("extents", "expected 1 or " + std::to_string(axes) + " values");
    }
    Lattice spacetime_lattice() const {
        const auto e = axis_extents(dims + 1);
        std::vector<double> h;
        for (int x : e) h.push_back(length / x);
        return Lattice::spacetime(e, h);
    }
    Lattice spatial_lattice() const {
        const auto e = axis_extents(dims);
        std::vector<double> h;
        for (int x : e) h.push_back(length / x);
        return Lattice::spatial(e, h);
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc{} || p != end) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline Sign parse_sign(const std::string& key, const std::string& v) {
    if (v == "+" || v == "plus" || v == "+1" || v == "1") return Sign::plus;
    if (v == "-" || v == "minus" || v == "-1") return Sign::minus;
    throw ConfigError(key, "expected + or -, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
    if (out.empty()) throw ConfigError(key, "expected a comma-separated list of integers");
    return out;
}

inline std::string one_of(const std::string& key, const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    throw ConfigError(key, "expected one of {" + list + "}, got '" + v + "'");
}

} // namespace detail

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> k{
        "command",   "kind",         "dims",          "n",           "extents",         "length",     "m",
        "m0",        "alpha",        "beta",          "epsilon",     "closure",         "sign1",      "sign2",
        "branch",    "seed",         "cutoff",        "amplitude",   "resolutions",     "output_dir", "threads",
        "exact_tol", "min_order",    "residual_tol",  "fixture",     "gauge_cutoff",    "gauge_amplitude",
        "T",         "dt",           "cfl",           "cadence",     "snapshot_cadence", "init",      "projection",
        "spinor_scale", "mode",      "rapidity",      "mms_mode",    "zero_solution"};
    return k;
}

/// Applies one key. Unknown keys and malformed values throw ConfigError.
inline void set_key(RunConfig& c, const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string v = trim(raw);
    if (key == "command") c.command = v;
    else if (key == "kind") c.kind = v;
    else if (key == "dims") c.dims = static_cast<int>(parse_int(key, v));
    else if (key == "n") c.n = static_cast<int>(parse_int(key, v));
    else if (key == "extents") c.extents = parse_int_list(key, v);
    else if (key == "length") c.length = parse_double(key, v);
    else if (key == "m") c.m = parse_double(key, v);
    else if (key == "m0") c.m0 = parse_double(key, v);
    else if (key == "alpha") c.alpha = parse_double(key, v);
    else if (key == "beta") c.beta = parse_double(key, v);
    else if (key == "epsilon") c.epsilon = parse_double(key, v);
    else if (key == "closure") c.closure = v == "auto" ? v : (parse_bool(key, v) ? "true" : "false");
    else if (key == "sign1") c.sign1 = parse_sign(key, v);
    else if (key == "sign2") c.sign2 = parse_sign(key, v);
    else if (key == "branch") c.branch = parse_sign(key, v);
    else if (key == "seed") {
        const long long s = parse_int(key, v);
        if (s < 0) throw ConfigError(key, "must be non-negative");
        c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "cutoff") c.cutoff = static_cast<int>(parse_int(key, v));
    else if (key == "amplitude") c.amplitude = parse_double(key, v);
    else if (key == "resolutions") c.resolutions = parse_int_list(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "threads") c.threads = static_cast<int>(parse_int(key, v));
    else if (key == "exact_tol") c.exact_tol = parse_double(key, v);
    else if (key == "min_order") c.min_order = parse_double(key, v);
    else if (key == "residual_tol") c.residual_tol = parse_double(key, v);
    else if (key == "fixture") c.fixture = one_of(key, v, {"random", "zero", "plane_wave"});
    else if (key == "gauge_cutoff") c.gauge_cutoff = static_cast<int>(parse_int(key, v));
    else if (key == "gauge_amplitude") c.gauge_amplitude = parse_double(key, v);
    else if (key == "T") c.T = parse_double(key, v);
    else if (key == "dt") c.dt = parse_double(key, v);
    else if (key == "cfl") c.cfl = parse_double(key, v);
    else if (key == "cadence") c.cadence = static_cast<int>(parse_int(key, v));
    else if (key == "snapshot_cadence") c.snapshot_cadence = static_cast<int>(parse_int(key, v));
    else if (key == "init") c.init = one_of(key, v, {"zero", "random", "plane_wave"});
    else if (key == "projection") c.projection = one_of(key, v, {"none", "discrete", "spectral"});
    else if (key == "spinor_scale") c.spinor_scale = parse_double(key, v);
    else if (key == "mode") c.mode = static_cast<int>(parse_int(key, v));
    else if (key == "rapidity") c.rapidity = parse_double(key, v);
    else if (key == "mms_mode") c.mms_mode = one_of(key, v, {"spatial", "temporal", "both"});
    else if (key == "zero_solution") c.zero_solution = parse_bool(key, v);
    else throw ConfigError(key, "unknown key");
    c.set_keys.erase(std::remove(c.set_keys.begin(), c.set_keys.end(), key), c.set_keys.end());
    c.set_keys.push_back(key);
}

/// Parses `key = value` lines; '#' and ';' start comments. Errors carry
/// the source name and line number.
inline void parse_config_text(RunConfig& c, const std::string& text, const std::string& source = "<config>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where, "expected 'key = value', got '" + line + "'");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where, "missing key");
        try {
            set_key(c, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(where, e.what());
        }
    }
}

inline void parse_config_file(RunConfig& c, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    parse_config_text(c, ss.str(), path);
}

/// Checks every numeric field against the module preconditions.
inline void validate(const RunConfig& c) {
    if (c.command.empty()) throw ConfigError("command", "required (one of verify, residual, gauge-check, evolve, mms)");
    if (std::find(known_commands().begin(), known_commands().end(), c.command) == known_commands().end())
        throw ConfigError("command", "unknown command '" + c.command + "'");
    const bool all_kinds = c.kind == "all";
    if (!all_kinds && !parse_kind(c.kind)) throw ConfigError("kind", "unknown system kind '" + c.kind + "'");
    if (all_kinds && c.command != "gauge-check") throw ConfigError("kind", "'all' is accepted by gauge-check only");
    if (c.dims != 1 && c.dims != 3) throw ConfigError("dims", "must be 1 or 3");
    if (c.n < Lattice::kMinExtent) throw ConfigError("n", "must be >= 8");
    for (int e : c.extents)
        if (e < Lattice::kMinExtent) throw ConfigError("extents", "every extent must be >= 8");
    if (!(c.length > 0.0)) throw ConfigError("length", "must be positive");
    if (c.epsilon == 0.0) throw ConfigError("epsilon", "must be nonzero");
    if (c.m < 0.0) throw ConfigError("m", "must be non-negative");
    if (c.closure_on() && c.m0 == 0.0) throw ConfigError("m0", "must be nonzero when closure is on");
    if (c.cutoff < 0) throw ConfigError("cutoff", "must be non-negative");
    if (!(c.amplitude >= 0.0)) throw ConfigError("amplitude", "must be non-negative");
    if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
    if (!(c.exact_tol > 0.0)) throw ConfigError("exact_tol", "must be positive");
    if (!(c.min_order > 0.0)) throw ConfigError("min_order", "must be positive");
    if (c.residual_tol < 0.0) throw ConfigError("residual_tol", "must be non-negative");
    for (int r : c.resolutions)
        if (r < Lattice::kMinExtent) throw ConfigError("resolutions", "every resolution must be >= 8");
    if (!std::is_sorted(c.resolutions.begin(), c.resolutions.end()) ||
        std::adjacent_find(c.resolutions.begin(), c.resolutions.end()) != c.resolutions.end())
        throw ConfigError("resolutions", "must be strictly increasing");
    const bool study = c.command == "verify" || c.command == "mms" || c.command == "gauge-check";
    if (study && c.resolutions.size() < 3) throw ConfigError("resolutions", "need at least 3 resolutions");
    if (study && 2 * c.cutoff >= c.resolutions.front()) throw ConfigError("cutoff", "2 * cutoff must be below the coarsest resolution");
    if (c.gauge_cutoff < 0) throw ConfigError("gauge_cutoff", "must be non-negative");
    if (!(c.T > 0.0)) throw ConfigError("T", "must be positive");
    if (c.dt < 0.0) throw ConfigError("dt", "must be non-negative (0 selects cfl * spacing)");
    if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw ConfigError("cfl", "must lie in (0, 1]");
    if (c.cadence < 1) throw ConfigError("cadence", "must be >= 1");
    if (c.snapshot_cadence < 0) throw ConfigError("snapshot_cadence", "must be >= 0");
    if (c.spinor_scale <= 0.0) throw ConfigError("spinor_scale", "must be positive");
    if (c.command == "evolve") {
        const auto e = c.axis_extents(c.dims);
        const double h = c.length / *std::max_element(e.begin(), e.end());
        if (c.dt > c.cfl * h * (1.0 + 1e-12)) throw ConfigError("dt", "violates dt <= cfl * min spacing");
        const int nmin = *std::min_element(e.begin(), e.end());
        if (c.init == "random" && 2 * c.cutoff >= nmin) throw ConfigError("cutoff", "2 * cutoff must be below the extent");
        if (c.init == "plane_wave" && c.dims != 1) throw ConfigError("init", "plane_wave needs dims = 1");
        if (c.init == "plane_wave" && c.mode == 0) throw ConfigError("mode", "must be nonzero");
    }
    if (c.command == "mms" && c.dims != 1) throw ConfigError("dims", "mms runs in 1+1 only");
    if (c.command == "residual" || c.command == "gauge-check") {
        const auto e = c.axis_extents(c.dims + 1);
        const int nmin = *std::min_element(e.begin(), e.end());
        if (c.fixture == "random" && 2 * c.cutoff >= nmin) throw ConfigError("cutoff", "2 * cutoff must be below the extent");
        if (c.fixture == "plane_wave" && (c.dims != 1 || (c.kind != "left_conservative" && c.kind != "right_conservative")))
            throw ConfigError("fixture", "plane_wave needs dims = 1 and a free conservative kind");
    }
}

/// The resolved configuration embedded in every report.
inline nlohmann::json to_json(const RunConfig& c) {
    auto sign = [](Sign s) { return s == Sign::plus ? "+" : "-"; };
    nlohmann::json j{
        {"command", c.command},
        {"kind", c.kind},
        {"dims", c.dims},
        {"n", c.n},
        {"extents", c.extents},
        {"length", c.length},
        {"m", c.m},
        {"m0", c.m0},
        {"alpha", c.resolved_alpha()},
        {"alpha_source", c.closure_on() ? "closure" : "config"},
        {"beta", c.beta},
        {"epsilon", c.epsilon},
        {"closure", c.closure_on()},
        {"sign1", sign(c.sign1)},
        {"sign2", sign(c.sign2)},
        {"branch", sign(c.branch)},
        {"seed", c.seed},
        {"cutoff", c.cutoff},
        {"amplitude", c.amplitude},
        {"resolutions", c.resolutions},
        {"output_dir", c.output_dir},
        {"exact_tol", c.exact_tol},
        {"min_order", c.min_order},
        {"residual_tol", c.residual_tol},
        {"fixture", c.fixture},
        {"gauge_cutoff", c.gauge_cutoff},
        {"gauge_amplitude", c.gauge_amplitude},
        {"T", c.T},
        {"dt", c.dt},
        {"cfl", c.cfl},
        {"cadence", c.cadence},
        {"snapshot_cadence", c.snapshot_cadence},
        {"init", c.init},
        {"projection", c.projection},
        {"spinor_scale", c.spinor_scale},
        {"mode", c.mode},
        {"rapidity", c.rapidity},
        {"mms_mode", c.mms_mode},
        {"zero_solution", c.zero_solution},
    };
    return j;
}

} // namespace lepton
