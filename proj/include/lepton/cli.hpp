#pragma once

// Command orchestration: turns a validated RunConfig into checks, a JSON
// report and CSV artifacts.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lepton/config.hpp"
#include "lepton/report.hpp"

namespace lepton {

enum ExitCode : int { kExitPass = 0, kExitCheckFailure = 1, kExitConfigError = 2, kExitRuntimeAbort = 3 };

struct CommandResult {
    int exit_code = kExitPass;
    json report;
    std::vector<std::string> artifacts; ///< files written, relative to the output directory
};

/// Fields all zero (spinors, A, F) with a valid constant N: iσ³ for the
/// kinds with det N = 1, N_- = 0 for ym_scalar.
inline FieldConfig zero_config(SystemKind kind, const Lattice& lat, const Params& p) {
    const KindInfo& ki = info(kind);
    FieldConfig c(lat);
    c.params = p;
    if (ki.phi) c.phi = MatrixField(lat, "phi");
    if (ki.theta) c.theta = MatrixField(lat, "theta");
    c.A = GaugePotential::zero(lat, algebra_of(ki.group));
    c.N = ki.n_is_minus ? MatrixField(lat, "N") : MatrixField::constant(lat, I * pauli::s3, "N");
    return c;
}

inline FieldConfig make_fixture(const RunConfig& rc, SystemKind kind, const Lattice& lat) {
    if (rc.fixture == "zero") return zero_config(kind, lat, rc.params());
    if (rc.fixture == "plane_wave") {
        const Chirality chir = kind == SystemKind::left_conservative ? Chirality::left : Chirality::right;
        const PlaneWave w = plane_wave_1p1(chir, lat.length(1), rc.mode, rc.rapidity);
        // one temporal period across the time axis
        const Lattice wl = Lattice::spacetime({lat.extent(0), lat.extent(1)},
                                              {w.time_length / lat.extent(0), lat.spacing(1)});
        FieldConfig c = plane_wave_config(w, wl);
        Params p = rc.params();
        p.m = w.m;
        c.params = p;
        return c;
    }
    FieldConfig c = random_config(kind, lat, rc.seed, rc.cutoff);
    const Params p = rc.params();
    c.params = p;
    return c;
}

namespace detail {

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text,
                       CommandResult& out) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    f << text;
    out.artifacts.push_back(name);
}

inline int exit_for(const std::vector<SuiteResult>& suites) {
    for (const auto& s : suites)
        if (!s.pass()) return kExitCheckFailure;
    return kExitPass;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline json cmd_verify(const RunConfig& rc, const std::filesystem::path& dir, CommandResult& out,
                       std::vector<SuiteResult>& suites) {
    suites.push_back(algebra_suite(rc.seed));
    suites.push_back(u2_structure_suite(rc.seed));
    suites.push_back(nform_suite(rc.seed));
    suites.push_back(closure_suite(rc.seed));
    IdentityOptions io;
    io.resolutions = rc.resolutions;
    io.cutoff = rc.cutoff;
    io.order_lo = rc.min_order;
    suites.push_back(identity_suite(rc.seed, io));
    std::ostringstream csv;
    write_identity_csv(csv, suites.back().identities);
    detail::write_text(dir, "identities.csv", csv.str(), out);
    json j = json::array();
    for (const auto& s : suites) j.push_back(to_json(s));
    return {{"suites", j}};
}

inline json cmd_residual(const RunConfig& rc, const std::filesystem::path& dir, CommandResult& out,
                         std::vector<SuiteResult>& suites) {
    const SystemKind kind = *parse_kind(rc.kind);
    const FieldConfig c = make_fixture(rc, kind, rc.spacetime_lattice());
    const ResidualBundle b = assemble(kind, c);
    SuiteResult s;
    s.name = "residual";
    s.checks.push_back(holds("preconditions_hold", b.violations.empty(),
                             std::to_string(b.violations.size()) + " violation(s)"));
    if (rc.residual_tol > 0.0) s.checks.push_back(at_most("max_equation_norm", b.max_equation_norm(), rc.residual_tol));
    suites.push_back(s);

    std::vector<MatrixField> fields;
    for (const auto& e : b.entries) fields.push_back(MatrixField(e.field).relabel(e.name));
    std::vector<const MatrixField*> ptrs;
    for (const auto& f : fields) ptrs.push_back(&f);
    std::ostringstream csv;
    write_snapshot_csv(csv, ptrs);
    detail::write_text(dir, "residual_fields.csv", csv.str(), out);
    return {{"suites", json::array({to_json(s)})}, {"residual", to_json(b)}};
}

inline json cmd_gauge_check(const RunConfig& rc, const std::filesystem::path& dir, CommandResult& out,
                            std::vector<SuiteResult>& suites) {
    std::vector<SystemKind> kinds;
    if (rc.kind == "all")
        kinds.assign(kAllKinds.begin(), kAllKinds.end());
    else
        kinds.push_back(*parse_kind(rc.kind));
    CovarianceOptions o;
    o.resolutions = rc.resolutions;
    o.fixture_cutoff = rc.cutoff;
    o.gauge_cutoff = rc.gauge_cutoff;
    o.gauge_amplitude = rc.gauge_amplitude;
    o.exact_tol = rc.exact_tol;
    o.min_order = rc.min_order;
    suites.push_back(covariance_suite(rc.seed, o, kinds, rc.dims + 1));
    std::ostringstream csv;
    write_identity_csv(csv, suites.back().identities);
    detail::write_text(dir, "covariance.csv", csv.str(), out);
    return {{"suites", json::array({to_json(suites.back())})}};
}

inline json cmd_evolve(const RunConfig& rc, const std::filesystem::path& dir, CommandResult& out,
                       std::vector<SuiteResult>& suites) {
    const SystemKind kind = *parse_kind(rc.kind);
    const Lattice lat = rc.spatial_lattice();
    InitialData d;
    d.type = rc.init == "zero" ? InitialKind::zero : rc.init == "plane_wave" ? InitialKind::plane_wave : InitialKind::random;
    d.seed = rc.seed;
    d.cutoff = rc.cutoff;
    d.amplitude = rc.amplitude;
    d.spinor_scale = rc.spinor_scale;
    d.mode = rc.mode;
    d.rapidity = rc.rapidity;
    d.projection = rc.projection == "none"       ? GaussProjection::none
                   : rc.projection == "spectral" ? GaussProjection::spectral
                                                 : GaussProjection::discrete;
    EvolutionState st = init(kind, lat, d, rc.params());

    RunOptions o;
    o.T = rc.T;
    o.dt = rc.dt;
    o.cfl = rc.cfl;
    o.cadence = rc.cadence;
    int sample_index = 0;
    if (rc.snapshot_cadence > 0)
        o.on_sample = [&](const EvolutionState& s) {
            if (sample_index++ % rc.snapshot_cadence != 0) return;
            std::vector<const MatrixField*> ptrs;
            for (const auto& f : s.vars) ptrs.push_back(&f);
            std::ostringstream csv;
            write_snapshot_csv(csv, ptrs);
            detail::write_text(dir, "snapshot_" + std::to_string(out.artifacts.size()) + ".csv", csv.str(), out);
        };
    SuiteResult s;
    s.name = "evolve";
    s.diagnostics = run(st, o);
    s.checks.push_back(holds("completed", !s.diagnostics.halted, s.diagnostics.halt_reason));
    suites.push_back(s);
    std::ostringstream csv;
    write_diagnostics_csv(csv, s.diagnostics);
    detail::write_text(dir, "diagnostics.csv", csv.str(), out);
    return {{"suites", json::array({to_json(s)})}, {"initial_projection", to_string(d.projection)}};
}

inline json cmd_mms(const RunConfig& rc, const std::filesystem::path& dir, CommandResult& out,
                    std::vector<SuiteResult>& suites) {
    const SystemKind kind = *parse_kind(rc.kind);
    SuiteResult s;
    s.name = "mms";
    std::vector<MmsMode> modes;
    if (rc.mms_mode != "temporal") modes.push_back(MmsMode::spatial);
    if (rc.mms_mode != "spatial") modes.push_back(MmsMode::temporal);
    std::ostringstream csv;
    csv << "kind,mode,n,h,dt,error\n" << std::setprecision(17);
    for (MmsMode mode : modes) {
        MmsOptions o;
        o.mode = mode;
        o.params = rc.params();
        o.resolutions = rc.resolutions;
        o.length = rc.length;
        o.zero_solution = rc.zero_solution;
        if (mode == MmsMode::temporal) o.T = 0.5;
        MmsReport rep = mms(kind, o);
        const bool sp = mode == MmsMode::spatial;
        const std::string name = std::string(sp ? "spatial" : "temporal") + "_order";
        Check c;
        if (rc.zero_solution) {
            double worst = 0.0;
            for (const auto& L : rep.levels) worst = std::max(worst, L.error);
            c = at_most(sp ? "spatial_zero_error" : "temporal_zero_error", worst, 0.0);
        } else {
            c = sp ? within(name, rep.order, 1.8, 2.3) : within(name, rep.order, 3.5, 4.5);
            if (!rep.monotone) {
                c.pass = false;
                c.note = "non-monotone error sequence";
            }
        }
        if (rep.halted) {
            c.pass = false;
            c.note = "halted: " + rep.halt_reason;
        }
        s.checks.push_back(c);
        for (const auto& L : rep.levels)
            csv << to_string(kind) << ',' << (sp ? "spatial" : "temporal") << ',' << L.n << ',' << L.h << ',' << L.dt
                << ',' << L.error << '\n';
        s.mms.push_back(std::move(rep));
    }
    suites.push_back(s);
    detail::write_text(dir, "mms.csv", csv.str(), out);
    return {{"suites", json::array({to_json(s)})}};
}

/// Runs one command. Configuration problems give exit 2, runtime aborts
/// (constraint halts, NaN, unsatisfiable data) exit 3, failed checks exit 1.
inline CommandResult run_command(const RunConfig& rc) {
    CommandResult out;
    json report{{"schema", kReportSchema}, {"tool", "lepton"}, {"command", rc.command}, {"timestamp", utc_timestamp()},
                {"config", to_json(rc)}};
    std::vector<SuiteResult> suites;
    try {
        validate(rc);
        set_threads(rc.threads);
        const auto dir = detail::ensure_dir(rc.output_dir);
        json results;
        if (rc.command == "verify") results = cmd_verify(rc, dir, out, suites);
        else if (rc.command == "residual") results = cmd_residual(rc, dir, out, suites);
        else if (rc.command == "gauge-check") results = cmd_gauge_check(rc, dir, out, suites);
        else if (rc.command == "evolve") results = cmd_evolve(rc, dir, out, suites);
        else results = cmd_mms(rc, dir, out, suites);
        report["results"] = results;
        report["failures"] = failure_list(suites);
        out.exit_code = detail::exit_for(suites);
        if (rc.command == "evolve" && !suites.empty() && suites.back().diagnostics.halted)
            out.exit_code = kExitRuntimeAbort;
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfigError;
        report["failures"] = json::array({{{"error", "config"}, {"field", e.field()}, {"message", e.what()}}});
    } catch (const SiteError& e) {
        out.exit_code = kExitRuntimeAbort;
        report["failures"] = json::array({{{"error", "runtime"}, {"message", e.what()}, {"sites", e.sites()}}});
    } catch (const std::exception& e) {
        out.exit_code = kExitRuntimeAbort;
        report["failures"] = json::array({{{"error", "runtime"}, {"message", e.what()}}});
    }
    report["exit_code"] = out.exit_code;
    report["status"] = out.exit_code == kExitPass ? "pass"
                       : out.exit_code == kExitCheckFailure ? "fail"
                       : out.exit_code == kExitConfigError  ? "config_error"
                                                            : "abort";
    report["artifacts"] = out.artifacts;
    out.report = report;
    if (out.exit_code != kExitConfigError) {
        try {
            std::ofstream f(detail::ensure_dir(rc.output_dir) / "report.json");
            f << report.dump(2) << '\n';
        } catch (const std::exception&) {
        }
    }
    return out;
}

} // namespace lepton
