#pragma once

// Temporal-gauge (A_0 = 0) evolution of the coupled spinor / Yang-Mills /
// scalar systems on a spatial slice with classical RK4, Gauss projection of
// initial data, run diagnostics and manufactured-solution studies.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <array>
#include <cstdint>
#include <numbers>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lepton/systems.hpp"

namespace lepton {

inline constexpr double kDefaultCfl = 0.5;
inline constexpr double kMembershipTol = 1e-9;

/// Positions of the evolved variables inside EvolutionState::vars.
struct Layout {
    int phi = -1, theta = -1, a = -1, e = -1, nm = -1, pi = -1;
    int dim = 0;
    int count = 0;
};

inline Layout make_layout(SystemKind kind, int dim) {
    const KindInfo& ki = info(kind);
    Layout l;
    l.dim = dim;
    int k = 0;
    if (ki.phi) l.phi = k++;
    if (ki.theta) l.theta = k++;
    if (ki.yang_mills) {
        l.a = k;
        k += dim;
        l.e = k;
        k += dim;
    }
    if (ki.scalar) {
        l.nm = k++;
        l.pi = k++;
    }
    l.count = k;
    return l;
}

/// Phi, Theta, A_k, E_k = F^{k0}, N_-, Pi = d_0 N_- on a spatial slice.
struct EvolutionState {
    EvolutionState(SystemKind k, Lattice lat, Params p)
        : kind(k), lattice(std::move(lat)), params(p), layout(make_layout(k, lattice.dim())) {
        if (lattice.has_time()) throw InvalidArgument("evolution runs on a spatial slice");
        for (int i = 0; i < layout.count; ++i) vars.emplace_back(lattice);
        if (!info(kind).scalar && kind != SystemKind::ym_scalar)
            n_fixed = MatrixField::constant(lattice, I * pauli::s3, "N");
    }

    SystemKind kind;
    Lattice lattice;
    Params params;
    Layout layout;
    double time = 0.0;
    std::vector<MatrixField> vars;
    std::optional<MatrixField> n_fixed; ///< N of the kinds without a dynamical scalar

    MatrixField& phi() { return vars.at(layout.phi); }
    MatrixField& theta() { return vars.at(layout.theta); }
    MatrixField& A(int k) { return vars.at(layout.a + k); }
    MatrixField& E(int k) { return vars.at(layout.e + k); }
    MatrixField& n_minus() { return vars.at(layout.nm); }
    MatrixField& pi() { return vars.at(layout.pi); }
    const MatrixField& phi() const { return vars.at(layout.phi); }
    const MatrixField& theta() const { return vars.at(layout.theta); }
    const MatrixField& A(int k) const { return vars.at(layout.a + k); }
    const MatrixField& E(int k) const { return vars.at(layout.e + k); }
    const MatrixField& n_minus() const { return vars.at(layout.nm); }
    const MatrixField& pi() const { return vars.at(layout.pi); }

    bool has_phi() const { return layout.phi >= 0; }
    bool has_theta() const { return layout.theta >= 0; }
    bool has_ym() const { return layout.a >= 0; }
    bool has_scalar() const { return layout.nm >= 0; }

    std::string var_name(int i) const {
        if (i == layout.phi) return "phi";
        if (i == layout.theta) return "theta";
        if (has_ym() && i >= layout.a && i < layout.a + layout.dim) return "A" + std::to_string(i - layout.a + 1);
        if (has_ym() && i >= layout.e && i < layout.e + layout.dim) return "E" + std::to_string(i - layout.e + 1);
        if (i == layout.nm) return "N_minus";
        if (i == layout.pi) return "Pi";
        return "var" + std::to_string(i);
    }
};

using Vars = std::vector<MatrixField>;

namespace detail {

/// Phi^ with the continuous extension 0 at Phi = 0.
inline Mat2 hat_or_zero(const Mat2& s) {
    if (s == Mat2{}) return {};
    return hat(s);
}

inline AlgebraSet potential_algebra(SystemKind k) { return algebra_of(info(k).group); }

inline GaugePotential potential_of(const EvolutionState& st, const Vars& y) {
    if (!st.has_ym()) return GaugePotential::zero(st.lattice, potential_algebra(st.kind));
    GaugePotential a;
    a.algebra = potential_algebra(st.kind);
    for (int k = 0; k < st.layout.dim; ++k) a.components.push_back(y[st.layout.a + k]);
    return a;
}

/// N = N_+(N_-) + N_- for third-approximation kinds, the fixed N otherwise.
inline std::optional<MatrixField> full_N(const EvolutionState& st, const Vars& y) {
    const KindInfo& ki = info(st.kind);
    if (ki.third) {
        const Sign b = st.params.n_plus_branch;
        return map(y[st.layout.nm], [b](const Mat2& x) { return n_plus_from_minus(x, b) + x; });
    }
    if (st.n_fixed) return *st.n_fixed;
    return std::nullopt;
}

} // namespace detail

/// Spatial derivative terms entering the right-hand side. They come from
/// the stencil in ordinary runs and from exact derivatives in
/// manufactured-solution sources.
struct SpatialTerms {
    std::vector<MatrixField> cov_phi;   ///< d_j Phi + Phi A_j
    std::vector<MatrixField> cov_theta; ///< d_j Theta + Theta A_j
    std::vector<MatrixField> cov_nm;    ///< D_j N_-
    std::optional<MatrixField> lap_nm;  ///< sum_j D_j D_j N_-
    std::vector<MatrixField> ym_div;    ///< sum_j D_j F_{jk} per k
};

inline SpatialTerms discrete_terms(const EvolutionState& st, const Vars& y) {
    SpatialTerms t;
    const GaugePotential a = detail::potential_of(st, y);
    const int d = st.layout.dim;
    for (int j = 0; j < d; ++j) {
        if (st.has_phi()) t.cov_phi.push_back(cov_spinor(y[st.layout.phi], a, j));
        if (st.has_theta()) t.cov_theta.push_back(cov_spinor(y[st.layout.theta], a, j));
        if (st.has_scalar()) t.cov_nm.push_back(cov_adjoint(y[st.layout.nm], a, j));
    }
    if (st.has_scalar()) {
        MatrixField lap(st.lattice);
        for (int j = 0; j < d; ++j) lap = lap + cov_adjoint(t.cov_nm[j], a, j);
        t.lap_nm = std::move(lap);
    }
    if (st.has_ym()) t.ym_div = ym_divergence(a, field_strength(a));
    return t;
}

/// Time components and spatial components of the Yang-Mills source.
struct EvolutionCurrent {
    MatrixField j0;
    std::vector<MatrixField> jk;
};

inline EvolutionCurrent evolution_current(const EvolutionState& st, const Vars& y, const SpatialTerms& t,
                                          double alpha, double beta) {
    const Lattice& lat = st.lattice;
    const int d = st.layout.dim;
    auto spinor_part = [&](int mu) {
        return MatrixField::generate(lat, [&](std::size_t s) {
            const Mat2 p = st.has_phi() ? y[st.layout.phi].at(s) : Mat2{};
            const Mat2 q = st.has_theta() ? y[st.layout.theta].at(s) : Mat2{};
            return spinor_current_part(st.kind, &p, &q, mu);
        });
    };
    EvolutionCurrent j{spinor_part(0), {}};
    for (int k = 0; k < d; ++k) j.jk.push_back(spinor_part(lat.sigma_index(k)));
    if (st.has_scalar()) {
        const MatrixField& nm = y[st.layout.nm];
        const MatrixField& pi = y[st.layout.pi];
        j.j0 = j.j0 + zip(nm, pi, [&](const Mat2& n, const Mat2& p) { return alpha * p + beta * commutator(n, p); });
        // D^k = -D_k on the slice
        for (int k = 0; k < d; ++k)
            j.jk[k] = j.jk[k] - zip(nm, t.cov_nm[k], [&](const Mat2& n, const Mat2& dn) {
                          return alpha * dn + beta * commutator(n, dn);
                      });
    }
    return j;
}

/// d_0 of every evolved variable.
inline Vars evolution_rhs(const EvolutionState& st, const Vars& y, const SpatialTerms& t) {
    const Lattice& lat = st.lattice;
    const Params& p = st.params;
    const int d = st.layout.dim;
    const std::optional<MatrixField> n = detail::full_N(st, y);
    const Coefficients co = resolve_coefficients(st.kind, p, st.has_phi() ? &y[st.layout.phi] : nullptr,
                                                 st.has_theta() ? &y[st.layout.theta] : nullptr, lat.size());
    Vars out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out.emplace_back(lat);

    auto spinor_rhs = [&](Chirality chir, const MatrixField& s, const std::vector<MatrixField>& cov,
                          const MatrixField& nn, const ComplexField& lam) {
        return MatrixField::generate(lat, [&](std::size_t x) {
            Mat2 r;
            for (int j = 0; j < d; ++j) r -= sigma_for(chir, lat.sigma_index(j)) * cov[j].at(x);
            const cplx c = p.m * lam[x];
            if (c != 0.0) r -= c * (detail::hat_or_zero(s.at(x)) * nn.at(x));
            return r;
        });
    };
    if (st.has_phi()) out[st.layout.phi] = spinor_rhs(Chirality::left, y[st.layout.phi], t.cov_phi, *n, co.lambda_phi);
    if (st.has_theta()) {
        const MatrixField nn = theta_uses_star_N(st.kind) ? star_field(*n) : *n;
        out[st.layout.theta] = spinor_rhs(Chirality::right, y[st.layout.theta], t.cov_theta, nn, co.lambda_theta);
    }
    if (st.has_ym()) {
        const EvolutionCurrent j = evolution_current(st, y, t, co.alpha, co.beta);
        for (int k = 0; k < d; ++k) {
            out[st.layout.a + k] = y[st.layout.e + k];
            out[st.layout.e + k] = t.ym_div[k] - j.jk[k];
        }
    }
    if (st.has_scalar()) {
        out[st.layout.nm] = y[st.layout.pi];
        const double m0sq = p.m0 * p.m0;
        out[st.layout.pi] = zip(*t.lap_nm, y[st.layout.nm], [m0sq](const Mat2& l, const Mat2& x) { return l - m0sq * x; });
    }
    return out;
}

inline Vars evolution_rhs(const EvolutionState& st, const Vars& y) { return evolution_rhs(st, y, discrete_terms(st, y)); }

/// Additive source for every variable at time t (manufactured solutions).
using Source = std::function<Vars(double t)>;

inline Vars axpy(const Vars& y, double a, const Vars& k) {
    Vars out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out.push_back(zip(y[i], k[i], [a](const Mat2& u, const Mat2& v) { return u + a * v; }).relabel(y[i].label()));
    return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

/// Gauss residual sum_j D_j E_j - J^0 (zero for kinds without Yang-Mills).
inline MatrixField gauss_residual(const EvolutionState& st) {
    if (!st.has_ym()) return MatrixField(st.lattice);
    const GaugePotential a = detail::potential_of(st, st.vars);
    const SpatialTerms t = discrete_terms(st, st.vars);
    const Coefficients co = resolve_coefficients(st.kind, st.params, st.has_phi() ? &st.phi() : nullptr,
                                                 st.has_theta() ? &st.theta() : nullptr, st.lattice.size());
    const EvolutionCurrent j = evolution_current(st, st.vars, t, co.alpha, co.beta);
    MatrixField g(st.lattice);
    for (int k = 0; k < st.layout.dim; ++k) g = g + cov_adjoint(st.E(k), a, k);
    return g - j.j0;
}

/// Lattice sum of pi_+(i Phi^dagger Phi) + pi_+(i Theta^dagger Theta), as the
/// coefficient of e.
inline cplx total_charge(const EvolutionState& st) {
    cplx q = 0.0;
    for (std::size_t s = 0; s < st.lattice.size(); ++s) {
        if (st.has_phi()) q += 0.5 * spinor_current(Chirality::left, st.phi().at(s), 0).trace();
        if (st.has_theta()) q += 0.5 * spinor_current(Chirality::right, st.theta().at(s), 0).trace();
    }
    return q;
}

inline double min_abs_det(const EvolutionState& st) {
    double m = std::numeric_limits<double>::infinity();
    auto scan = [&](const MatrixField& f) {
        for (std::size_t s = 0; s < f.size(); ++s) m = std::min(m, std::abs(f.at(s).det()));
    };
    if (st.has_phi()) scan(st.phi());
    if (st.has_theta()) scan(st.theta());
    return std::isfinite(m) ? m : 0.0;
}

struct DiagnosticsRow {
    double t = 0.0;
    double gauss_norm = 0.0;
    cplx charge;
    double min_abs_det_phi = 0.0;
    double scalar_norm = 0.0;
    double dt = 0.0;
};

inline DiagnosticsRow sample(const EvolutionState& st, double dt) {
    DiagnosticsRow r;
    r.t = st.time;
    r.gauss_norm = max_norm(gauss_residual(st));
    r.charge = total_charge(st);
    r.min_abs_det_phi = min_abs_det(st);
    r.scalar_norm = st.has_scalar() ? max_norm(st.n_minus()) : 0.0;
    r.dt = dt;
    return r;
}

struct Diagnostics {
    std::vector<DiagnosticsRow> rows;
    int steps = 0;
    bool halted = false;
    std::string halt_reason;
};

inline void write_diagnostics_csv(std::ostream& os, const Diagnostics& d) {
    os << "t,gauss_norm,charge_re,charge_im,min_abs_det_phi,scalar_norm,dt\n" << std::setprecision(17);
    for (const auto& r : d.rows)
        os << r.t << ',' << r.gauss_norm << ',' << r.charge.real() << ',' << r.charge.imag() << ','
           << r.min_abs_det_phi << ',' << r.scalar_norm << ',' << r.dt << '\n';
}

// ---------------------------------------------------------------------------
// Validation

/// Memberships, finiteness and the |det| > |eps| guard. Throws the
/// matching SiteError.
inline void validate(const EvolutionState& st, double tol = kMembershipTol) {
    for (std::size_t i = 0; i < st.vars.size(); ++i)
        if (!st.vars[i].all_finite()) throw SingularField("non-finite values in " + st.var_name(static_cast<int>(i)), {});
    const AlgebraSet alg = detail::potential_algebra(st.kind);
    auto check = [&](const MatrixField& f, AlgebraSet set, const std::string& name) {
        const auto bad = membership_failures(f, set, tol);
        if (!bad.empty()) throw MembershipLost(name + " left " + to_string(set), bad);
    };
    if (st.has_ym())
        for (int k = 0; k < st.layout.dim; ++k) {
            check(st.A(k), alg, "A" + std::to_string(k + 1));
            check(st.E(k), alg, "E" + std::to_string(k + 1));
        }
    if (st.has_scalar()) {
        check(st.n_minus(), AlgebraSet::su2, "N_minus");
        check(st.pi(), AlgebraSet::su2, "Pi");
    }
    if (info(st.kind).third) {
        // raises NoRealBranch below the unit sphere
        (void)detail::full_N(st, st.vars);
        if (st.params.closure)
            (void)resolve_coefficients(st.kind, st.params, st.has_phi() ? &st.phi() : nullptr,
                                       st.has_theta() ? &st.theta() : nullptr, st.lattice.size());
    }
    if (st.n_fixed) {
        std::vector<std::size_t> bad;
        for (std::size_t s = 0; s < st.lattice.size(); ++s)
            if (!check_N(st.n_fixed->at(s), tol).ok) bad.push_back(s);
        if (!bad.empty()) throw ConstraintViolation("N violates det N = 1 or anti-Hermiticity", bad);
    }
}

/// Removes roundoff drift out of the Lie algebras.
inline void reproject(EvolutionState& st) {
    const bool su2 = detail::potential_algebra(st.kind) == AlgebraSet::su2;
    auto fix = [](MatrixField& f, bool traceless) {
        f = map(f, [traceless](const Mat2& x) {
                Mat2 a = 0.5 * (x - dagger(x));
                return traceless ? proj_minus(a) : a;
            }).relabel(f.label());
    };
    if (st.has_ym())
        for (int k = 0; k < st.layout.dim; ++k) {
            fix(st.A(k), su2);
            fix(st.E(k), su2);
        }
    if (st.has_scalar()) {
        fix(st.n_minus(), true);
        fix(st.pi(), true);
    }
}

// ---------------------------------------------------------------------------
// Stepping

inline void check_cfl(const EvolutionState& st, double dt, double cfl = kDefaultCfl) {
    if (!(dt > 0.0) || dt > cfl * st.lattice.min_spacing() * (1.0 + 1e-12))
        throw InvalidArgument("time step " + std::to_string(dt) + " violates dt <= " + std::to_string(cfl) +
                              " * min spacing");
}

/// One classical RK4 step. The state is left untouched if anything throws.
inline void step(EvolutionState& st, double dt, const Source* source = nullptr, double cfl = kDefaultCfl) {
    check_cfl(st, dt, cfl);
    const double t = st.time;
    auto f = [&](const Vars& y, double tt) {
        Vars k = evolution_rhs(st, y);
        if (source) {
            const Vars s = (*source)(tt);
            for (std::size_t i = 0; i < k.size(); ++i) k[i] = k[i] + s[i];
        }
        return k;
    };
    const Vars& y = st.vars;
    const Vars k1 = f(y, t);
    const Vars k2 = f(axpy(y, 0.5 * dt, k1), t + 0.5 * dt);
    const Vars k3 = f(axpy(y, 0.5 * dt, k2), t + 0.5 * dt);
    const Vars k4 = f(axpy(y, dt, k3), t + dt);
    Vars next;
    next.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        next.push_back(MatrixField::generate(st.lattice, [&](std::size_t s) {
                           return y[i].at(s) + (dt / 6.0) * (k1[i].at(s) + 2.0 * k2[i].at(s) + 2.0 * k3[i].at(s) + k4[i].at(s));
                       }).relabel(y[i].label()));
    EvolutionState trial = st;
    trial.vars = std::move(next);
    trial.time = t + dt;
    validate(trial);
    reproject(trial);
    st = std::move(trial);
}

struct RunOptions {
    double T = 1.0;
    double dt = 0.0;         ///< 0 selects cfl * min spacing
    int cadence = 1;         ///< sample every `cadence` steps
    double cfl = kDefaultCfl;
    const Source* source = nullptr;
    std::function<void(const EvolutionState&)> on_sample; ///< e.g. snapshot writer
};

/// Steps until T. Halts early (state = last good) on NaN, lost membership,
/// |det| <= |eps|, a missing real N_+ branch, or a singular spinor.
inline Diagnostics run(EvolutionState& st, const RunOptions& opt) {
    Diagnostics d;
    const double dt0 = opt.dt > 0.0 ? opt.dt : opt.cfl * st.lattice.min_spacing();
    const int nsteps = static_cast<int>(std::ceil(opt.T / dt0 - 1e-9));
    const double dt = nsteps > 0 ? opt.T / nsteps : dt0;
    check_cfl(st, dt, opt.cfl);
    const int cadence = std::max(1, opt.cadence);
    d.rows.push_back(sample(st, dt));
    if (opt.on_sample) opt.on_sample(st);
    for (int n = 0; n < nsteps; ++n) {
        try {
            step(st, dt, opt.source, opt.cfl);
        } catch (const Error& e) {
            d.halted = true;
            d.halt_reason = e.what();
            if (d.rows.back().t != st.time) d.rows.push_back(sample(st, dt));
            break;
        }
        ++d.steps;
        if (d.steps % cadence == 0 || d.steps == nsteps) {
            d.rows.push_back(sample(st, dt));
            if (opt.on_sample) opt.on_sample(st);
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Gauss projection

enum class GaussProjection { none, discrete, spectral };

inline std::string to_string(GaussProjection g) {
    switch (g) {
    case GaussProjection::none: return "none";
    case GaussProjection::discrete: return "discrete";
    case GaussProjection::spectral: return "spectral";
    }
    return "none";
}

namespace detail {

/// In-place multidimensional FFT of one complex array in site order.
inline void fft(std::vector<cplx>& data, const std::vector<int>& extents, int sign) {
    static_assert(sizeof(cplx) == sizeof(fftw_complex));
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan = fftw_plan_dft(static_cast<int>(extents.size()), extents.data(), p, p, sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

inline std::array<std::vector<cplx>, 4> fft_field(const MatrixField& f, int sign) {
    std::array<std::vector<cplx>, 4> out;
    for (int k = 0; k < 4; ++k) {
        const auto e = f.entry(k);
        out[k].assign(e.begin(), e.end());
        fft(out[k], f.lattice().extents(), sign);
    }
    return out;
}

inline MatrixField field_from_spectrum(const Lattice& lat, std::array<std::vector<cplx>, 4> spec) {
    const double norm = 1.0 / static_cast<double>(lat.size());
    for (auto& s : spec) fft(s, lat.extents(), FFTW_BACKWARD);
    return MatrixField::generate(lat, [&](std::size_t x) {
        return Mat2{spec[0][x] * norm, spec[1][x] * norm, spec[2][x] * norm, spec[3][x] * norm};
    });
}

/// Derivative symbol s_j(k) with d_j -> i s_j: sin(k h)/h for the stencil,
/// k for the exact derivative. Nyquist modes get 0 in both cases.
inline std::vector<double> symbols(const Lattice& lat, std::size_t site, GaussProjection mode) {
    std::vector<double> s(lat.dim());
    for (int j = 0; j < lat.dim(); ++j) {
        const int n = lat.extent(j);
        int m = lat.coord_index(site, j);
        if (2 * m == n) {
            s[j] = 0.0;
            continue;
        }
        if (2 * m > n) m -= n;
        const double k = 2.0 * std::numbers::pi * m / lat.length(j);
        s[j] = mode == GaussProjection::discrete ? std::sin(k * lat.spacing(j)) / lat.spacing(j) : k;
    }
    return s;
}

/// Solves (alpha + beta ad_n) x = b on su(2) coordinates:
/// alpha x - 2 beta n x x = b.
inline std::array<double, 3> solve_scalar_map(double alpha, double beta, const std::array<double, 3>& n,
                                              const std::array<double, 3>& b) {
    const double m[3][3] = {{alpha, 2 * beta * n[2], -2 * beta * n[1]},
                            {-2 * beta * n[2], alpha, 2 * beta * n[0]},
                            {2 * beta * n[1], -2 * beta * n[0], alpha}};
    auto det3 = [](const double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double d = det3(m);
    if (std::abs(d) < 1e-300) throw ConstraintViolation("scalar map not invertible", {});
    std::array<double, 3> x{};
    for (int c = 0; c < 3; ++c) {
        double t[3][3];
        for (int r = 0; r < 3; ++r)
            for (int q = 0; q < 3; ++q) t[r][q] = q == c ? b[r] : m[r][q];
        x[c] = det3(t) / d;
    }
    return x;
}

} // namespace detail

/// Makes sum_j d_j E_j = J^0 hold (stencil or exact derivative) with A = 0.
/// Modes the divergence cannot reach (k = 0, Nyquist) are absorbed into Pi
/// through J^0 = alpha Pi + beta [N_-, Pi] + spinor part; returns the Gauss
/// norm afterwards. Throws ConstraintViolation when that is impossible.
inline double project_gauss(EvolutionState& st, GaussProjection mode) {
    if (mode == GaussProjection::none || !st.has_ym()) return max_norm(gauss_residual(st));
    for (int k = 0; k < st.layout.dim; ++k)
        if (max_norm(st.A(k)) != 0.0) throw InvalidArgument("Gauss projection requires A = 0 initial data");
    const Lattice& lat = st.lattice;

    auto unreachable = [&](const MatrixField& r) {
        auto spec = detail::fft_field(r, FFTW_FORWARD);
        for (std::size_t x = 0; x < lat.size(); ++x) {
            double s2 = 0.0;
            for (double s : detail::symbols(lat, x, mode)) s2 += s * s;
            if (s2 > 0.0)
                for (auto& e : spec) e[x] = 0.0;
        }
        return detail::field_from_spectrum(lat, spec);
    };

    MatrixField r = cplx(-1.0) * gauss_residual(st); // J^0 - div E
    const MatrixField r0 = unreachable(r);
    const double scale = std::max(1.0, max_norm(r));
    if (max_norm(map(r0, [](const Mat2& x) { return proj_plus(x); })) > 1e-12 * scale)
        throw ConstraintViolation("net central charge cannot be balanced on a periodic box", {});
    if (max_norm(r0) > 1e-12 * scale) {
        if (!st.has_scalar())
            throw ConstraintViolation("net charge cannot be balanced without a scalar field", {});
        const Coefficients co = resolve_coefficients(st.kind, st.params, st.has_phi() ? &st.phi() : nullptr,
                                                     st.has_theta() ? &st.theta() : nullptr, lat.size());
        if (co.alpha == 0.0) throw ConstraintViolation("net charge cannot be balanced with alpha = 0", {});
        MatrixField& pi = st.pi();
        for (std::size_t x = 0; x < lat.size(); ++x) {
            const auto b = su2_coords(proj_minus(r0.at(x)));
            const auto c = detail::solve_scalar_map(co.alpha, co.beta, su2_coords(st.n_minus().at(x)), b);
            pi.set(x, pi.at(x) - su2_from_coords(c[0], c[1], c[2]));
        }
        r = cplx(-1.0) * gauss_residual(st);
    }

    const auto spec = detail::fft_field(r, FFTW_FORWARD);
    for (int j = 0; j < st.layout.dim; ++j) {
        std::array<std::vector<cplx>, 4> de;
        for (int e = 0; e < 4; ++e) de[e].assign(lat.size(), 0.0);
        for (std::size_t x = 0; x < lat.size(); ++x) {
            const auto s = detail::symbols(lat, x, mode);
            double s2 = 0.0;
            for (double v : s) s2 += v * v;
            if (s2 == 0.0) continue;
            for (int e = 0; e < 4; ++e) de[e][x] = -I * s[j] * spec[e][x] / s2;
        }
        st.E(j) = st.E(j) + detail::field_from_spectrum(lat, de);
    }
    reproject(st);
    return max_norm(gauss_residual(st));
}

// ---------------------------------------------------------------------------
// Initial data

enum class InitialKind { zero, random, plane_wave };

struct InitialData {
    InitialKind type = InitialKind::random;
    std::uint64_t seed = 1;
    int cutoff = 2;
    double amplitude = 0.15;   ///< size of E, Pi and the spinor perturbation
    bool random_potential = false; ///< A != 0 (incompatible with projection)
    int mode = 1;              ///< plane wave periods across the box
    double rapidity = 0.5;
    cplx wave_amplitude{1.0, 0.0};
    double spinor_scale = 1.0; ///< multiplies the random spinors (|det| scales by its square)
    GaussProjection projection = GaussProjection::discrete;
};

/// Builds and validates the t = 0 state. Plane waves are defined for the
/// free conservative kinds and set m and N themselves.
inline EvolutionState init(SystemKind kind, const Lattice& lat, const InitialData& data, const Params& params) {
    EvolutionState st(kind, lat, params);
    const KindInfo& ki = info(kind);
    switch (data.type) {
    case InitialKind::zero:
        if (st.has_scalar() && ki.third) st.n_minus() = MatrixField::constant(lat, I * pauli::s3, "N_minus");
        break;
    case InitialKind::plane_wave: {
        if (kind != SystemKind::left_conservative && kind != SystemKind::right_conservative)
            throw InvalidArgument("plane-wave data exists for the free conservative kinds only");
        if (lat.dim() != 1) throw InvalidArgument("plane-wave data is defined in 1+1");
        const Chirality chir = kind == SystemKind::left_conservative ? Chirality::left : Chirality::right;
        const PlaneWave w = plane_wave_1p1(chir, lat.length(0), data.mode, data.rapidity, data.wave_amplitude);
        const MatrixField f = MatrixField::generate(lat, [&](std::size_t s) { return w.value(0.0, lat.coord(s, 0)); });
        if (chir == Chirality::left)
            st.phi() = f;
        else
            st.theta() = f;
        st.params.m = w.m;
        st.n_fixed = MatrixField::constant(lat, w.N, "N");
        break;
    }
    case InitialKind::random: {
        const FieldConfig c = random_config(kind, lat, data.seed, data.cutoff);
        const cplx sc = data.spinor_scale;
        if (st.has_phi()) st.phi() = (sc * *c.phi).relabel("phi");
        if (st.has_theta()) st.theta() = (sc * *c.theta).relabel("theta");
        if (st.has_ym()) {
            const AlgebraSet alg = detail::potential_algebra(kind);
            const auto cons = alg == AlgebraSet::su2 ? FieldConstraint::su2 : FieldConstraint::u2;
            for (int k = 0; k < st.layout.dim; ++k) {
                if (data.random_potential) st.A(k) = (*c.A)[k];
                st.E(k) = smooth_random_field(lat, data.seed * 131 + 17 + k, cons, data.cutoff, data.amplitude,
                                              "E" + std::to_string(k + 1));
            }
        }
        if (st.has_scalar()) {
            if (ki.third) // nearly uniform: gradients of a rotating N_- shrink |N_-| toward the sphere
                st.n_minus() = MatrixField::constant(lat, 2.0 * I * pauli::s3) +
                               smooth_random_field(lat, data.seed * 131 + 23, FieldConstraint::su2, data.cutoff,
                                                   data.amplitude, "N_minus");
            else
                st.n_minus() = *c.N;
            st.pi() = smooth_random_field(lat, data.seed * 131 + 29, FieldConstraint::su2, data.cutoff, data.amplitude, "Pi");
        } else if (st.n_fixed) {
            st.n_fixed = *c.N;
        }
        break;
    }
    }
    validate(st);
    if (data.projection != GaussProjection::none && st.has_ym()) {
        const double g = project_gauss(st, data.projection);
        if (data.projection == GaussProjection::discrete && g > 1e-8)
            throw ConstraintViolation("Gauss projection left residual " + std::to_string(g), {});
        validate(st);
    }
    return st;
}

// ---------------------------------------------------------------------------
// Manufactured solutions (1+1)

/// B0 + sum_q C_q cos(k_q x + w_q t + phase_q) with exact derivatives.
struct TrigMatrix {
    struct Term {
        Mat2 c;
        double k, w, phase;
    };
    Mat2 b0;
    std::vector<Term> terms;

    Mat2 value(double t, double x) const {
        Mat2 v = b0;
        for (const auto& q : terms) v += std::cos(q.k * x + q.w * t + q.phase) * q.c;
        return v;
    }
    Mat2 dx(double t, double x) const {
        Mat2 v;
        for (const auto& q : terms) v -= (q.k * std::sin(q.k * x + q.w * t + q.phase)) * q.c;
        return v;
    }
    Mat2 dxx(double t, double x) const {
        Mat2 v;
        for (const auto& q : terms) v -= (q.k * q.k * std::cos(q.k * x + q.w * t + q.phase)) * q.c;
        return v;
    }
    Mat2 dt(double t, double x) const {
        Mat2 v;
        for (const auto& q : terms) v -= (q.w * std::sin(q.k * x + q.w * t + q.phase)) * q.c;
        return v;
    }
    /// d_t of the time derivative (the manufactured E and Pi).
    TrigMatrix time_derivative() const {
        TrigMatrix d;
        for (const auto& q : terms) d.terms.push_back({q.w * q.c, q.k, q.w, q.phase + std::numbers::pi / 2});
        return d;
    }
};

/// Smooth exact fields for a kind on a 1+1 box of length `length`.
struct Manufactured {
    SystemKind kind;
    double length = 1.0;
    std::optional<TrigMatrix> phi, theta, a, nm;

    static Manufactured make(SystemKind kind, double length = 1.0) {
        const KindInfo& ki = info(kind);
        Manufactured m{kind, length, {}, {}, {}, {}};
        const double k1 = 2.0 * std::numbers::pi / length;
        auto spinor = [&](double shift) {
            TrigMatrix t;
            t.b0 = 1.5 * pauli::s0;
            t.terms.push_back({Mat2{cplx(0.1, 0.05), cplx(0.05, -0.1), cplx(-0.1, 0.02), cplx(0.05, 0.1)}, k1, 1.1, shift});
            t.terms.push_back({Mat2{cplx(0.03, -0.04), cplx(0.06, 0.02), cplx(0.02, 0.05), cplx(-0.04, 0.03)}, 2 * k1, -0.7, 0.3 + shift});
            return t;
        };
        if (ki.phi) m.phi = spinor(0.2);
        if (ki.theta) m.theta = spinor(1.1);
        if (ki.yang_mills) {
            TrigMatrix t;
            const bool u2 = ki.group == GaugeGroup::U2;
            t.terms.push_back({su2_from_coords(0.3, -0.2, 0.1) + (u2 ? Mat2::scalar(I * 0.2) : Mat2{}), k1, 0.9, 0.4});
            t.terms.push_back({su2_from_coords(-0.1, 0.15, 0.2), 2 * k1, 1.3, 1.0});
            m.a = t;
        }
        if (ki.scalar) {
            TrigMatrix t;
            t.b0 = su2_from_coords(0.2, 0.1, 1.6);
            t.terms.push_back({su2_from_coords(0.1, -0.05, 0.08), k1, 1.2, 0.7});
            t.terms.push_back({su2_from_coords(-0.04, 0.07, 0.05), 2 * k1, -0.8, 0.1});
            m.nm = t;
        }
        return m;
    }

    /// Exact values of every evolved variable at time t.
    Vars values(const EvolutionState& st, double t) const {
        Vars y;
        for (int i = 0; i < st.layout.count; ++i) y.emplace_back(st.lattice, st.vars[i].label());
        const Lattice& lat = st.lattice;
        auto fill = [&](int i, auto&& fn) {
            y[i] = MatrixField::generate(lat, [&](std::size_t s) { return fn(lat.coord(s, 0)); });
        };
        if (phi) fill(st.layout.phi, [&](double x) { return phi->value(t, x); });
        if (theta) fill(st.layout.theta, [&](double x) { return theta->value(t, x); });
        if (a) {
            fill(st.layout.a, [&](double x) { return a->value(t, x); });
            fill(st.layout.e, [&](double x) { return a->dt(t, x); });
        }
        if (nm) {
            fill(st.layout.nm, [&](double x) { return nm->value(t, x); });
            fill(st.layout.pi, [&](double x) { return nm->dt(t, x); });
        }
        return y;
    }

    /// Exact d_0 of every variable.
    Vars time_derivatives(const EvolutionState& st, double t) const {
        Vars y;
        for (int i = 0; i < st.layout.count; ++i) y.emplace_back(st.lattice);
        const Lattice& lat = st.lattice;
        auto fill = [&](int i, auto&& fn) {
            y[i] = MatrixField::generate(lat, [&](std::size_t s) { return fn(lat.coord(s, 0)); });
        };
        if (phi) fill(st.layout.phi, [&](double x) { return phi->dt(t, x); });
        if (theta) fill(st.layout.theta, [&](double x) { return theta->dt(t, x); });
        if (a) {
            const TrigMatrix e = a->time_derivative();
            fill(st.layout.a, [&](double x) { return a->dt(t, x); });
            fill(st.layout.e, [&](double x) { return e.dt(t, x); });
        }
        if (nm) {
            const TrigMatrix p = nm->time_derivative();
            fill(st.layout.nm, [&](double x) { return nm->dt(t, x); });
            fill(st.layout.pi, [&](double x) { return p.dt(t, x); });
        }
        return y;
    }

    /// Spatial terms from exact derivatives (1+1: no spatial field strength).
    SpatialTerms exact_terms(const EvolutionState& st, double t) const {
        const Lattice& lat = st.lattice;
        SpatialTerms s;
        auto gen = [&](auto&& fn) {
            return MatrixField::generate(lat, [&](std::size_t i) { return fn(lat.coord(i, 0)); });
        };
        auto av = [&](double x) { return a ? a->value(t, x) : Mat2{}; };
        auto adx = [&](double x) { return a ? a->dx(t, x) : Mat2{}; };
        if (phi) s.cov_phi.push_back(gen([&](double x) { return phi->dx(t, x) + phi->value(t, x) * av(x); }));
        if (theta) s.cov_theta.push_back(gen([&](double x) { return theta->dx(t, x) + theta->value(t, x) * av(x); }));
        if (nm) {
            auto dn = [&](double x) { return nm->dx(t, x) - commutator(av(x), nm->value(t, x)); };
            s.cov_nm.push_back(gen(dn));
            s.lap_nm = gen([&](double x) {
                const Mat2 d_dn = nm->dxx(t, x) - commutator(adx(x), nm->value(t, x)) - commutator(av(x), nm->dx(t, x));
                return d_dn - commutator(av(x), dn(x));
            });
        }
        if (a) s.ym_div.emplace_back(lat);
        return s;
    }
};

enum class MmsMode { spatial, temporal };

struct MmsLevel {
    int n = 0;
    double h = 0.0, dt = 0.0;
    int steps = 0;
    double error = 0.0;
    std::vector<double> var_errors;
};

struct MmsReport {
    SystemKind kind = SystemKind::ym_scalar;
    MmsMode mode = MmsMode::spatial;
    std::vector<std::string> var_names;
    std::vector<MmsLevel> levels;
    double order = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> var_orders;
    bool monotone = true;
    bool zero_solution = false;
    bool halted = false;
    std::string halt_reason;
};

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

struct MmsOptions {
    MmsMode mode = MmsMode::spatial;
    std::vector<int> resolutions{64, 128, 256}; ///< spatial mode: grids
    int n_temporal = 32;                         ///< temporal mode: fixed grid
    std::vector<double> dt_fractions{0.5, 0.25, 0.125}; ///< temporal mode: dt / h
    double dt_fraction = 0.1;                    ///< spatial mode: dt / h
    double T = 0.25;
    double length = 1.0;
    bool zero_solution = false;                  ///< manufacture the exact zero solution
    Params params;
};

/// Default parameters for manufactured runs: closure with eps = 0.3 for
/// third-approximation kinds.
inline Params mms_params(SystemKind kind) {
    Params p;
    p.m = 1.0;
    p.m0 = 1.0;
    p.beta = 0.3;
    p.alpha = 0.7;
    p.epsilon = 0.3;
    p.closure = info(kind).third;
    return p;
}

/// Evolves the manufactured solution with its exact residual as a source
/// and measures the error at T. Spatial mode moves the continuum residual
/// into the source (error O(h^2)); temporal mode moves the stencil residual
/// (only the RK4 error remains).
inline MmsReport mms(SystemKind kind, const MmsOptions& opt) {
    MmsReport rep;
    rep.kind = kind;
    rep.mode = opt.mode;
    rep.zero_solution = opt.zero_solution;
    if (opt.zero_solution && info(kind).third)
        throw InvalidArgument("the zero solution violates the closure guard; unavailable for " + to_string(kind));
    const std::size_t levels = opt.mode == MmsMode::spatial ? opt.resolutions.size() : opt.dt_fractions.size();
    if (levels < 3) throw InvalidArgument("manufactured-solution study needs at least three levels");
    const Manufactured man = Manufactured::make(kind, opt.length);

    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
        const int n = opt.mode == MmsMode::spatial ? opt.resolutions[lvl] : opt.n_temporal;
        const Lattice lat = Lattice::spatial({n}, {opt.length / n});
        EvolutionState st(kind, lat, opt.params);
        const double frac = opt.mode == MmsMode::spatial ? opt.dt_fraction : opt.dt_fractions[lvl];
        const int steps = static_cast<int>(std::ceil(opt.T / (frac * lat.spacing(0)) - 1e-9));
        const double dt = opt.T / steps;

        Source src;
        if (!opt.zero_solution) {
            st.vars = man.values(st, 0.0);
            src = [&, mode = opt.mode](double t) {
                const Vars y = man.values(st, t);
                const SpatialTerms terms = mode == MmsMode::spatial ? man.exact_terms(st, t) : discrete_terms(st, y);
                const Vars f = evolution_rhs(st, y, terms);
                Vars dy = man.time_derivatives(st, t);
                for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = dy[i] - f[i];
                return dy;
            };
        }
        MmsLevel L;
        L.n = n;
        L.h = lat.spacing(0);
        L.dt = dt;
        L.steps = steps;
        for (int s = 0; s < steps; ++s) {
            try {
                step(st, dt, opt.zero_solution ? nullptr : &src);
            } catch (const Error& e) {
                rep.halted = true;
                rep.halt_reason = e.what();
                break;
            }
        }
        if (rep.halted) break;
        const Vars exact = opt.zero_solution ? Vars(st.vars.size(), MatrixField(lat)) : man.values(st, st.time);
        for (std::size_t i = 0; i < st.vars.size(); ++i) {
            const double e = max_distance(st.vars[i], exact[i]);
            L.var_errors.push_back(e);
            L.error = std::max(L.error, e);
        }
        rep.levels.push_back(std::move(L));
        if (lvl == 0)
            for (int i = 0; i < st.layout.count; ++i) rep.var_names.push_back(st.var_name(i));
    }
    if (rep.halted) return rep;

    std::vector<double> x, y;
    for (const auto& L : rep.levels) {
        x.push_back(opt.mode == MmsMode::spatial ? L.h : L.dt);
        y.push_back(L.error);
    }
    rep.order = ls_slope(x, y);
    for (std::size_t i = 1; i < y.size(); ++i)
        if (!(y[i] < y[i - 1])) rep.monotone = false;
    for (std::size_t v = 0; v < rep.var_names.size(); ++v) {
        std::vector<double> yv;
        for (const auto& L : rep.levels) yv.push_back(L.var_errors[v]);
        rep.var_orders.push_back(ls_slope(x, yv));
    }
    return rep;
}

} // namespace lepton
