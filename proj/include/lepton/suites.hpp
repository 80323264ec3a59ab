#pragma once

// Property and convergence suites shared by the CLI and the acceptance run.

#include <chrono>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lepton/evolve.hpp"
#include "lepton/gauge.hpp"
#include "lepton/identities.hpp"

namespace lepton {

struct Check {
    std::string name;
    double value = 0.0;     ///< measured quantity (error, order, ratio)
    double threshold = 0.0;
    std::string relation;   ///< "<=", ">=", "in", "=="
    double upper = 0.0;     ///< second bound for "in"
    bool pass = false;
    std::string note;
};

struct SuiteResult {
    std::string name;
    std::vector<Check> checks;
    std::vector<IdentityReport> identities;
    std::vector<MmsReport> mms;
    Diagnostics diagnostics;
    double seconds = 0.0; ///< wall time; kept out of reports
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

inline Check at_most(std::string name, double value, double bound, std::string note = {}) {
    return {std::move(name), value, bound, "<=", 0.0, value <= bound, std::move(note)};
}
inline Check at_least(std::string name, double value, double bound, std::string note = {}) {
    return {std::move(name), value, bound, ">=", 0.0, value >= bound, std::move(note)};
}
inline Check within(std::string name, double value, double lo, double hi, std::string note = {}) {
    return {std::move(name), value, lo, "in", hi, value >= lo && value <= hi, std::move(note)};
}
inline Check holds(std::string name, bool ok, std::string note = {}) {
    return {std::move(name), ok ? 1.0 : 0.0, 1.0, "==", 0.0, ok, std::move(note)};
}

namespace detail {

inline std::string num(double v) {
    std::ostringstream o;
    o.precision(4);
    o << v;
    return o.str();
}

class Timer {
public:
    Timer() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

/// Running max of |lhs - rhs| / scale.
struct MaxRel {
    double worst = 0.0;
    void add(const Mat2& lhs, const Mat2& rhs, double scale) {
        worst = std::max(worst, norm(lhs - rhs) / std::max(scale, 1e-300));
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// Algebra

inline SuiteResult algebra_suite(std::uint64_t seed, int samples = 1000) {
    detail::Timer timer;
    std::mt19937_64 rng(seed);
    detail::MaxRel dag, til, sta, hat_law, adj, pplus, pminus, pcross, psum, tilde_proj;
    for (int i = 0; i < samples; ++i) {
        const Mat2 a = random_mat(rng), b = random_mat(rng);
        const Mat2 ab = a * b;
        const double s = norm(a) * norm(b);
        dag.add(dagger(ab), dagger(b) * dagger(a), s);
        til.add(tilde(ab), tilde(b) * tilde(a), s);
        sta.add(star(ab), star(a) * star(b), s);
        hat_law.add(hat(ab), hat(a) * hat(b), s);
        adj.add(tilde(a) * a, Mat2::scalar(a.det()), norm(a) * norm(a));
        const double na = norm(a);
        pplus.add(proj_plus(proj_plus(a)), proj_plus(a), na);
        pminus.add(proj_minus(proj_minus(a)), proj_minus(a), na);
        pcross.add(proj_plus(proj_minus(a)) + proj_minus(proj_plus(a)), Mat2{}, na);
        psum.add(proj_plus(a) + proj_minus(a), a, na);
        tilde_proj.add(tilde(a), proj_plus(a) - proj_minus(a), na);
    }
    SuiteResult r;
    r.name = "algebra";
    const double tol = 1e-12;
    r.checks.push_back(at_most("dagger_antimultiplicative", dag.worst, tol));
    r.checks.push_back(at_most("tilde_antimultiplicative", til.worst, tol));
    r.checks.push_back(at_most("star_multiplicative", sta.worst, tol));
    r.checks.push_back(at_most("hat_multiplicative", hat_law.worst, tol));
    r.checks.push_back(at_most("tilde_times_A_is_det", adj.worst, tol));
    r.checks.push_back(at_most("proj_plus_idempotent", pplus.worst, tol));
    r.checks.push_back(at_most("proj_minus_idempotent", pminus.worst, tol));
    r.checks.push_back(at_most("proj_orthogonal", pcross.worst, tol));
    r.checks.push_back(at_most("proj_complementary", psum.worst, tol));
    r.checks.push_back(at_most("tilde_is_proj_difference", tilde_proj.worst, tol));
    r.seconds = timer.seconds();
    return r;
}

/// (a) A in u(2) iff A* in u(2); (b) on u(2), A*A = -e iff det A = 1;
/// (c) V^-1 N V keeps u(2) membership and det N = 1 for V in U(2).
inline SuiteResult u2_structure_suite(std::uint64_t seed, int samples = 1000) {
    detail::Timer timer;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lam(0.2, 5.0);
    const double tol = 1e-10;
    int a_mismatch = 0, b_mismatch = 0, c_fail = 0;
    double a_err = 0.0, b_err = 0.0, c_err = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Mat2 u = random_u2_algebra(rng);
        const Mat2 g = random_mat(rng);
        if (!membership(star(u), AlgebraSet::u2, tol)) ++a_mismatch;
        if (membership(g, AlgebraSet::u2, tol) != membership(star(g), AlgebraSet::u2, tol)) ++a_mismatch;
        a_err = std::max(a_err, max_abs(star(u) + dagger(star(u))) / std::max(1.0, norm(u)));

        // det 1 sample from the general form, generic sample from u(2)
        const Mat2 v = random_U2(rng);
        const Mat2 n = make_N(lam(rng), v).value;
        for (const Mat2& x : {n, u}) {
            const bool lhs = max_abs(star(x) * x + Mat2::identity()) <= tol * std::max(1.0, norm(x) * norm(x));
            const bool rhs = std::abs(x.det() - 1.0) <= tol * std::max(1.0, norm(x) * norm(x));
            if (lhs != rhs) ++b_mismatch;
        }
        b_err = std::max(b_err, max_abs(star(n) * n + Mat2::identity()) / std::max(1.0, norm(n) * norm(n)));

        const Mat2 w = random_U2(rng);
        const Mat2 m = inverse(w) * n * w;
        if (!membership(m, AlgebraSet::u2, tol) || std::abs(m.det() - 1.0) > tol) ++c_fail;
        c_err = std::max(c_err, std::max(max_abs(m + dagger(m)), std::abs(m.det() - 1.0)) / std::max(1.0, norm(n)));
    }
    SuiteResult r;
    r.name = "u2_structure";
    r.checks.push_back(holds("u2_iff_star_in_u2", a_mismatch == 0, std::to_string(a_mismatch) + " mismatches"));
    r.checks.push_back(at_most("star_of_u2_antihermitian", a_err, tol));
    r.checks.push_back(holds("starA_A_minus_e_iff_det_one", b_mismatch == 0, std::to_string(b_mismatch) + " mismatches"));
    r.checks.push_back(at_most("starN_N_plus_e", b_err, tol));
    r.checks.push_back(holds("similarity_keeps_N_form", c_fail == 0, std::to_string(c_fail) + " failures"));
    r.checks.push_back(at_most("similarity_error", c_err, tol));
    r.seconds = timer.seconds();
    return r;
}

inline SuiteResult nform_suite(std::uint64_t seed, int samples = 1000) {
    detail::Timer timer;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.2, 5.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> radius(1.0, 4.0);
    double det_err = 0.0, tr_err = 0.0, rec_err = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double l = coin(rng) ? mag(rng) : -mag(rng);
        const NMatrix n = make_N(l, random_U2(rng));
        det_err = std::max(det_err, std::abs(n.value.det() - 1.0));
        tr_err = std::max(tr_err, std::abs(n.value.trace() - I * (l - 1.0 / l)) / std::max(1.0, std::abs(l)));

        // admissible N_-: radius >= 1 along a random direction
        std::normal_distribution<double> g;
        double d[3] = {g(rng), g(rng), g(rng)};
        const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        const double rr = radius(rng);
        const Mat2 nm = su2_from_coords(rr * d[0] / len, rr * d[1] / len, rr * d[2] / len);
        const Mat2 full = n_plus_from_minus(nm, coin(rng) ? Sign::plus : Sign::minus) + nm;
        rec_err = std::max(rec_err, std::abs(full.det() - 1.0) / (rr * rr));
    }
    SuiteResult r;
    r.name = "n_form";
    const double tol = 1e-12;
    r.checks.push_back(at_most("make_N_det_one", det_err, tol));
    r.checks.push_back(at_most("make_N_trace", tr_err, tol));
    r.checks.push_back(at_most("n_plus_reconstruction_det_one", rec_err, tol));
    r.seconds = timer.seconds();
    return r;
}

inline SuiteResult closure_suite(std::uint64_t seed, int samples = 1000) {
    detail::Timer timer;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 3.0), frac(1.0001, 4.0), below(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    double unit_err = 0.0, e1_err = 0.0, e2_err = 0.0;
    int alpha_mismatch = 0, not_rejected = 0;
    for (int i = 0; i < samples; ++i) {
        const double eps = coin(rng) ? u(rng) : -u(rng);
        const double m = u(rng), m0 = u(rng);
        const double dphi = std::abs(eps) * frac(rng), dtheta = std::abs(eps) * frac(rng);
        const Sign s1 = coin(rng) ? Sign::plus : Sign::minus, s2 = coin(rng) ? Sign::plus : Sign::minus;
        const ClosureResult c = closure(eps, m, m0, {dphi}, {dtheta}, s1, s2);
        unit_err = std::max({unit_err, std::abs(std::abs(c.lambda1[0]) - 1.0), std::abs(std::abs(c.lambda2[0]) - 1.0)});
        if (c.alpha != 2.0 * m * eps / (m0 * m0)) ++alpha_mismatch;
        e1_err = std::max(e1_err, std::abs(c.lambda1[0].imag() * dphi - eps) / std::abs(eps));
        e2_err = std::max(e2_err, std::abs(c.lambda2[0].imag() * dtheta + eps) / std::abs(eps));
        // |det Phi| <= |eps| must always be refused
        try {
            (void)closure(eps, m, m0, {std::abs(eps) * below(rng)}, {dtheta}, s1, s2);
            ++not_rejected;
        } catch (const ConstraintViolation&) {
        }
        try {
            (void)closure(eps, m, m0, {dphi}, {std::abs(eps)}, s1, s2);
            ++not_rejected;
        } catch (const ConstraintViolation&) {
        }
    }
    SuiteResult r;
    r.name = "closure";
    r.checks.push_back(at_most("lambda_unit_modulus", unit_err, 1e-14));
    r.checks.push_back(holds("alpha_m0sq_equals_2_m_eps", alpha_mismatch == 0,
                             std::to_string(alpha_mismatch) + " mismatches against 2 m eps / m0^2"));
    r.checks.push_back(at_most("eps1_detphi_equals_eps", e1_err, 1e-13));
    r.checks.push_back(at_most("eps2_dettheta_equals_minus_eps", e2_err, 1e-13));
    r.checks.push_back(holds("guard_rejects_small_det", not_rejected == 0, std::to_string(not_rejected) + " accepted"));
    r.seconds = timer.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Gauge covariance

struct CovarianceOptions {
    std::vector<int> resolutions{32, 64, 128};
    int fixture_cutoff = 1;
    int gauge_cutoff = 1;
    double gauge_amplitude = 0.3;
    double exact_tol = 1e-11;
    double min_order = 1.8;
};

inline SuiteResult covariance_suite(std::uint64_t seed, const CovarianceOptions& opt = {},
                                   const std::vector<SystemKind>& kinds = {kAllKinds.begin(), kAllKinds.end()},
                                   int dim = 2) {
    detail::Timer timer;
    SuiteResult r;
    r.name = "gauge_covariance";
    std::mt19937_64 rng(seed);
    for (SystemKind k : kinds) {
        const GaugeGroup g = info(k).group;
        const Lattice base = Lattice::spacetime_cube(dim, opt.resolutions.front(), 1.0);
        const FieldConfig c0 = random_config(k, base, seed + 11, opt.fixture_cutoff);
        const Mat2 v = g == GaugeGroup::SU2 ? random_SU2(rng) : random_U2(rng);
        const CovarianceReport cr = covariance_check(k, c0, constant_gauge(base, v, g));
        r.checks.push_back(at_most("constant_V_" + to_string(k), cr.deviation, opt.exact_tol));

        const IdentityReport ir = convergence_study(
            "covariance_" + to_string(k), refinement(dim, opt.resolutions), [&](const Lattice& lat) {
                const FieldConfig c = random_config(k, lat, seed + 11, opt.fixture_cutoff);
                return covariance_check(k, c, random_gauge(lat, seed + 13, g, opt.gauge_cutoff, opt.gauge_amplitude))
                    .deviation;
            });
        r.checks.push_back(at_least("smooth_V_order_" + to_string(k), ir.order, opt.min_order));
        r.identities.push_back(ir);
    }
    r.seconds = timer.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Identities

struct IdentityOptions {
    std::vector<int> resolutions{64, 128, 256};
    int cutoff = 2;
    double order_lo = 1.8, order_hi = 2.3;
    double alpha_shift_fraction = 0.1; ///< relative alpha violation to detect
    double detect_fraction = 0.09;     ///< required deviation / (m0^2 min|N_-|)
};

inline SuiteResult identity_suite(std::uint64_t seed, const IdentityOptions& opt = {}) {
    detail::Timer timer;
    SuiteResult r;
    r.name = "identities";
    const auto lats = refinement(2, opt.resolutions);
    auto source = [&](SystemKind k) -> ConfigSource {
        return [k, seed, cut = opt.cutoff](const Lattice& lat) { return random_config(k, lat, seed, cut); };
    };
    auto in_range = [&](const IdentityReport& ir) {
        r.checks.push_back(within(ir.name + "_order", ir.order, opt.order_lo, opt.order_hi,
                                  ir.inconclusive ? "inconclusive: " + ir.note : std::string{}));
        r.identities.push_back(ir);
    };
    in_range(check_current_consequence(SystemKind::neutrino3, Chirality::left, source(SystemKind::neutrino3), lats));
    in_range(check_current_consequence(SystemKind::antineutrino3, Chirality::right, source(SystemKind::antineutrino3), lats));
    in_range(check_ym_divergence(source(SystemKind::ym_scalar), lats));
    in_range(check_jdot(SystemKind::ym_scalar, source(SystemKind::ym_scalar), lats));
    for (SystemKind k : {SystemKind::neutrino3, SystemKind::electron3}) {
        IdentityReport ir = check_consistency_condition(k, source(k), lats);
        in_range(ir);

        // alpha off by a fixed fraction must leave a visible defect
        const FieldConfig c = source(k)(lats.back());
        const double alpha = 2.0 * c.params.m * c.params.epsilon / (c.params.m0 * c.params.m0);
        const double shift = opt.alpha_shift_fraction * alpha;
        const IdentityReport sh = check_consistency_condition(k, source(k), lats, shift);
        const MatrixField nm = n_minus_of(k, c);
        double nmin = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < nm.size(); ++s) nmin = std::min(nmin, norm(nm.at(s)));
        const double need = opt.detect_fraction * c.params.m0 * c.params.m0 * nmin;
        r.checks.push_back(at_least("shifted_alpha_detected_" + to_string(k), sh.deviations.back(), need,
                                    "alpha shift " + detail::num(shift)));
        r.identities.push_back(sh);
    }
    r.seconds = timer.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Conservation and constraint preservation under evolution

struct ConservationOptions {
    int n_coarse = 256;
    double drift_bound = 1e-4;
    double improvement = 4.0;     ///< expected drift ratio between L/256 and L/512
    double roundoff_floor = 1e-12; ///< drifts below this count as converged
    int gauss_sites = 256;
    int gauss_steps = 1000;
    double gauss_growth = 10.0;
    std::vector<int> gauss_resolutions{64, 128, 256};
    double gauss_T = 0.5;
};

/// Initial data for the Gauss-constraint runs: small spinors keep the
/// uniform spinor current (and with it A) from pushing N_- into the unit
/// sphere within the run.
inline EvolutionState gauss_scenario(const Lattice& lat, std::uint64_t seed) {
    InitialData d;
    d.seed = seed;
    d.cutoff = 1;
    d.amplitude = 0.05;
    d.spinor_scale = 0.25;
    d.projection = GaussProjection::spectral;
    Params p = random_config(SystemKind::neutrino3, lat, seed, 1).params;
    p.m0 = 0.3;
    p.epsilon = 0.02;
    return init(SystemKind::neutrino3, lat, d, p);
}

inline double charge_drift(int n, double& period) {
    const Lattice lat = Lattice::spatial({n}, {1.0 / n});
    InitialData d;
    d.type = InitialKind::plane_wave;
    d.projection = GaussProjection::none;
    EvolutionState st = init(SystemKind::left_conservative, lat, d, Params{});
    period = plane_wave_1p1(Chirality::left, 1.0, d.mode, d.rapidity, d.wave_amplitude).time_length;
    const cplx q0 = total_charge(st);
    RunOptions o;
    o.T = period;
    o.cadence = 1 << 30;
    const Diagnostics diag = run(st, o);
    if (diag.halted) throw ConstraintViolation("plane-wave run halted: " + diag.halt_reason, {});
    return std::abs(total_charge(st) - q0) / std::abs(q0);
}

inline SuiteResult conservation_suite(std::uint64_t seed, const ConservationOptions& opt = {}) {
    detail::Timer timer;
    SuiteResult r;
    r.name = "conservation";
    double period = 0.0;
    const double d1 = charge_drift(opt.n_coarse, period);
    const double d2 = charge_drift(2 * opt.n_coarse, period);
    r.checks.push_back(at_most("charge_drift_L/" + std::to_string(opt.n_coarse), d1, opt.drift_bound,
                               "one period T = " + detail::num(period)));
    const bool floor = d2 <= opt.roundoff_floor;
    const double ratio = d2 > 0.0 ? d1 / d2 : std::numeric_limits<double>::infinity();
    r.checks.push_back(Check{"charge_drift_improvement", ratio, opt.improvement, ">=~", 0.0,
                             floor || ratio >= 0.75 * opt.improvement,
                             "drift at L/" + std::to_string(2 * opt.n_coarse) + " = " + detail::num(d2) +
                                 (floor ? " (round-off level)" : "")});

    {
        const Lattice lat = Lattice::spatial({opt.gauss_sites}, {1.0 / opt.gauss_sites});
        EvolutionState st = gauss_scenario(lat, seed);
        RunOptions o;
        o.dt = kDefaultCfl * lat.spacing(0);
        o.T = opt.gauss_steps * o.dt;
        o.cadence = 10;
        r.diagnostics = run(st, o);
        double g0 = r.diagnostics.rows.front().gauss_norm, gmax = 0.0;
        for (const auto& row : r.diagnostics.rows) gmax = std::max(gmax, row.gauss_norm);
        r.checks.push_back(holds("gauss_run_completed", !r.diagnostics.halted && r.diagnostics.steps == opt.gauss_steps,
                                 r.diagnostics.halt_reason));
        r.checks.push_back(at_most("gauss_growth_over_steps", g0 > 0.0 ? gmax / g0 : 0.0, opt.gauss_growth,
                                   "initial " + detail::num(g0) + ", max " + detail::num(gmax)));
    }
    {
        IdentityReport ir;
        ir.name = "gauss_refinement";
        for (int n : opt.gauss_resolutions) {
            const Lattice lat = Lattice::spatial({n}, {1.0 / n});
            EvolutionState st = gauss_scenario(lat, seed);
            RunOptions o;
            o.T = opt.gauss_T;
            o.cadence = 1 << 30;
            const Diagnostics dg = run(st, o);
            double gmax = 0.0;
            for (const auto& row : dg.rows) gmax = std::max(gmax, row.gauss_norm);
            ir.resolutions.push_back(n);
            ir.spacings.push_back(lat.spacing(0));
            ir.deviations.push_back(dg.halted ? std::numeric_limits<double>::infinity() : gmax);
        }
        finalize(ir);
        r.checks.push_back(at_least("gauss_refinement_order", ir.order, kMinOrder));
        r.identities.push_back(ir);
    }
    r.seconds = timer.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Manufactured solutions

inline SuiteResult mms_suite(const std::vector<SystemKind>& kinds = {SystemKind::neutrino3, SystemKind::electron3,
                                                                      SystemKind::ym_scalar}) {
    detail::Timer timer;
    SuiteResult r;
    r.name = "mms";
    for (SystemKind k : kinds) {
        for (MmsMode mode : {MmsMode::spatial, MmsMode::temporal}) {
            MmsOptions o;
            o.mode = mode;
            o.params = mms_params(k);
            if (mode == MmsMode::temporal) o.T = 0.5;
            MmsReport rep = mms(k, o);
            const bool sp = mode == MmsMode::spatial;
            const std::string name = std::string(sp ? "spatial" : "temporal") + "_order_" + to_string(k);
            Check c = sp ? within(name, rep.order, 1.8, 2.3) : within(name, rep.order, 3.5, 4.5);
            if (rep.halted) {
                c.pass = false;
                c.note = "halted: " + rep.halt_reason;
            } else if (!rep.monotone) {
                c.pass = false;
                c.note = "non-monotone error sequence";
            }
            r.checks.push_back(c);
            r.mms.push_back(std::move(rep));
        }
    }
    r.seconds = timer.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Star duality

inline SuiteResult duality_suite(std::uint64_t seed, int resolution = 32, int samples = 3) {
    detail::Timer timer;
    SuiteResult r;
    r.name = "duality";
    for (SystemKind k : {SystemKind::neutrino3, SystemKind::electron3}) {
        double worst = 0.0;
        for (int s = 0; s < samples; ++s)
            for (int dim : {2, 4}) {
                const Lattice lat = Lattice::spacetime_cube(dim, dim == 2 ? resolution : 8, 1.0);
                worst = std::max(worst, star_duality_deviation(k, random_config(k, lat, seed + 101 * s, 1)));
            }
        r.checks.push_back(at_most("star_duality_" + to_string(k), worst, 1e-12));
    }
    r.seconds = timer.seconds();
    return r;
}

} // namespace lepton
