#pragma once

// JSON views of suite results, residual bundles and run diagnostics.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <string>

#include "lepton/suites.hpp"

namespace lepton {

using json = nlohmann::json;

inline constexpr const char* kReportSchema = "lepton-report/1";

/// NaN and infinities become null (JSON has no spelling for them).
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const Check& c) {
    json j{{"name", c.name}, {"value", number(c.value)}, {"relation", c.relation}, {"threshold", number(c.threshold)},
           {"pass", c.pass}};
    if (c.relation == "in") j["upper"] = number(c.upper);
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

inline json to_json(const IdentityReport& r) {
    json dev = json::array();
    for (double d : r.deviations) dev.push_back(number(d));
    json j{{"name", r.name},   {"resolutions", r.resolutions}, {"spacings", r.spacings},
           {"deviations", dev}, {"order", number(r.order)},   {"exact", r.exact},
           {"inconclusive", r.inconclusive}, {"pass", r.pass}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline json to_json(const MmsReport& r) {
    json levels = json::array();
    for (const auto& L : r.levels) {
        json ve = json::object();
        for (std::size_t i = 0; i < L.var_errors.size() && i < r.var_names.size(); ++i)
            ve[r.var_names[i]] = number(L.var_errors[i]);
        levels.push_back({{"n", L.n}, {"h", L.h}, {"dt", L.dt}, {"steps", L.steps}, {"error", number(L.error)},
                          {"variable_errors", ve}});
    }
    json vo = json::object();
    for (std::size_t i = 0; i < r.var_orders.size(); ++i) vo[r.var_names[i]] = number(r.var_orders[i]);
    json j{{"kind", to_string(r.kind)},
           {"mode", r.mode == MmsMode::spatial ? "spatial" : "temporal"},
           {"levels", levels},
           {"order", number(r.order)},
           {"variable_orders", vo},
           {"monotone", r.monotone},
           {"zero_solution", r.zero_solution},
           {"halted", r.halted}};
    if (r.halted) j["halt_reason"] = r.halt_reason;
    return j;
}

inline json to_json(const Diagnostics& d) {
    json j{{"samples", d.rows.size()}, {"steps", d.steps}, {"halted", d.halted}};
    if (d.halted) j["halt_reason"] = d.halt_reason;
    if (!d.rows.empty()) {
        const auto& a = d.rows.front();
        const auto& b = d.rows.back();
        double gmax = 0.0;
        for (const auto& r : d.rows) gmax = std::max(gmax, r.gauss_norm);
        j["t_final"] = b.t;
        j["gauss_norm_initial"] = number(a.gauss_norm);
        j["gauss_norm_final"] = number(b.gauss_norm);
        j["gauss_norm_max"] = number(gmax);
        j["charge_initial"] = {number(a.charge.real()), number(a.charge.imag())};
        j["charge_final"] = {number(b.charge.real()), number(b.charge.imag())};
        const double q0 = std::abs(a.charge);
        j["charge_relative_drift"] = q0 > 0.0 ? number(std::abs(b.charge - a.charge) / q0) : json(nullptr);
        j["min_abs_det_phi_final"] = number(b.min_abs_det_phi);
        j["scalar_norm_final"] = number(b.scalar_norm);
    }
    return j;
}

inline json to_json(const SuiteResult& s) {
    json checks = json::array();
    for (const auto& c : s.checks) checks.push_back(to_json(c));
    json j{{"name", s.name}, {"pass", s.pass()}, {"checks", checks}};
    if (!s.identities.empty()) {
        json ids = json::array();
        for (const auto& r : s.identities) ids.push_back(to_json(r));
        j["convergence"] = ids;
    }
    if (!s.mms.empty()) {
        json m = json::array();
        for (const auto& r : s.mms) m.push_back(to_json(r));
        j["mms"] = m;
    }
    if (!s.diagnostics.rows.empty()) j["diagnostics"] = to_json(s.diagnostics);
    return j;
}

inline json to_json(const ResidualBundle& b) {
    json eq = json::array();
    for (const auto& e : b.entries)
        eq.push_back({{"name", e.name},
                      {"max_norm", number(e.summary.max_norm)},
                      {"l2_norm", number(e.summary.l2_norm)},
                      {"constraint", e.constraint},
                      {"covariance", e.covariance == Covariance::right_multiply ? "right_multiply" : "adjoint"}});
    json viol = json::array();
    for (const auto& v : b.violations)
        viol.push_back({{"equation", v.equation}, {"message", v.message}, {"sites", v.sites}});
    return {{"kind", to_string(b.kind)},
            {"closure_mode", b.closure_mode},
            {"alpha", number(b.alpha)},
            {"beta", number(b.beta)},
            {"rho_min", number(b.rho_min)},
            {"rho_max", number(b.rho_max)},
            {"max_equation_norm", number(b.max_equation_norm())},
            {"equations", eq},
            {"violations", viol}};
}

/// UTC time in ISO 8601; the only field excluded from determinism checks.
inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Failed checks as {suite, check, note}.
inline json failure_list(const std::vector<SuiteResult>& suites) {
    json f = json::array();
    for (const auto& s : suites)
        for (const auto& c : s.checks)
            if (!c.pass) {
                json e{{"suite", s.name}, {"check", c.name}, {"value", number(c.value)}};
                if (!c.note.empty()) e["note"] = c.note;
                f.push_back(e);
            }
    return f;
}

/// Report without the timestamp, for byte comparisons.
inline json strip_volatile(json report) {
    report.erase("timestamp");
    return report;
}

} // namespace lepton
