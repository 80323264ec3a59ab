#pragma once

// Residual evaluators for the conservative lepton systems: spinor
// equations, Yang-Mills with matrix currents, the covariant scalar (N_-)
// equation, algebraic constraints, and the closure formulas fixing
// lambda_1, lambda_2 and alpha.

#include <algorithm>
#include <cstdint>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lepton/algebra.hpp"
#include "lepton/fields.hpp"

namespace lepton {

enum class SystemKind {
    left_conservative,
    right_conservative,
    neutrino2,
    antineutrino2,
    electron2,
    positron2,
    ym_scalar,
    neutrino3,
    antineutrino3,
    electron3,
    positron3,
};

inline constexpr std::array<SystemKind, 11> kAllKinds{
    SystemKind::left_conservative, SystemKind::right_conservative, SystemKind::neutrino2,
    SystemKind::antineutrino2,     SystemKind::electron2,          SystemKind::positron2,
    SystemKind::ym_scalar,         SystemKind::neutrino3,          SystemKind::antineutrino3,
    SystemKind::electron3,         SystemKind::positron3,
};

enum class GaugeGroup { SU2, U2 };

/// What a system needs and how it is built.
struct KindInfo {
    std::string_view name;
    bool phi = false;       ///< left spinor Phi
    bool theta = false;     ///< right spinor Theta
    bool yang_mills = false;
    bool scalar = false;    ///< dynamical N_- obeying the covariant Klein-Gordon equation
    bool third = false;     ///< lambda coefficients and det N = 1 with dynamical N
    bool n_is_minus = false; ///< config.N holds N_- only (ym_scalar)
    GaugeGroup group = GaugeGroup::U2;
};

inline const KindInfo& info(SystemKind k) {
    static const std::array<KindInfo, 11> table{{
        {"left_conservative", true, false, false, false, false, false, GaugeGroup::U2},
        {"right_conservative", false, true, false, false, false, false, GaugeGroup::U2},
        {"neutrino2", true, false, true, false, false, false, GaugeGroup::SU2},
        {"antineutrino2", false, true, true, false, false, false, GaugeGroup::SU2},
        {"electron2", true, true, true, false, false, false, GaugeGroup::U2},
        {"positron2", true, true, true, false, false, false, GaugeGroup::U2},
        {"ym_scalar", false, false, true, true, false, true, GaugeGroup::SU2},
        {"neutrino3", true, false, true, true, true, false, GaugeGroup::SU2},
        {"antineutrino3", false, true, true, true, true, false, GaugeGroup::SU2},
        {"electron3", true, true, true, true, true, false, GaugeGroup::U2},
        {"positron3", true, true, true, true, true, false, GaugeGroup::U2},
    }};
    return table[static_cast<std::size_t>(k)];
}

inline std::string to_string(SystemKind k) { return std::string(info(k).name); }

inline std::optional<SystemKind> parse_kind(std::string_view name) {
    for (auto k : kAllKinds)
        if (info(k).name == name) return k;
    return std::nullopt;
}

inline AlgebraSet algebra_of(GaugeGroup g) { return g == GaugeGroup::SU2 ? AlgebraSet::su2 : AlgebraSet::u2; }

/// Right-conservative equations of the second approximation use N*.
inline bool theta_uses_star_N(SystemKind k) {
    return k == SystemKind::right_conservative || k == SystemKind::antineutrino2;
}

// ---------------------------------------------------------------------------
// Parameters and closure

using ComplexField = std::vector<cplx>;
using RealField = std::vector<double>;

struct Params {
    double m = 1.0;
    double m0 = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double epsilon = 0.0;
    cplx lambda1{1.0, 0.0};
    cplx lambda2{1.0, 0.0};
    bool closure = false;   ///< derive lambda_1, lambda_2, alpha from epsilon
    Sign sign1 = Sign::plus;
    Sign sign2 = Sign::plus;
    Sign n_plus_branch = Sign::plus;
};

struct ClosureResult {
    ComplexField lambda1; ///< (+-sqrt(|det Phi|^2 - eps^2) + i eps) / |det Phi|
    ComplexField lambda2; ///< (+-sqrt(|det Theta|^2 - eps^2) - i eps) / |det Theta|
    double alpha = 0.0;   ///< 2 m eps / m0^2
};

inline cplx closure_lambda(double det_abs, double epsilon, Sign sign, double imag_sign) {
    const double root = std::sqrt((det_abs - epsilon) * (det_abs + epsilon));
    return cplx(sign_value(sign) * root, imag_sign * epsilon) / det_abs;
}

/// Particular solution of the consistency condition with constant alpha and
/// beta. Requires |det Phi| > |eps| and |det Theta| > |eps| at every site;
/// either field may be empty.
inline ClosureResult closure(double epsilon, double m, double m0, const RealField& det_phi_abs,
                             const RealField& det_theta_abs, Sign sign1, Sign sign2) {
    if (epsilon == 0.0 || !std::isfinite(epsilon)) throw InvalidArgument("closure requires epsilon != 0");
    if (m0 == 0.0 || !std::isfinite(m0)) throw InvalidArgument("closure requires m0 != 0");
    std::vector<std::size_t> bad;
    const double eabs = std::abs(epsilon);
    for (std::size_t s = 0; s < det_phi_abs.size(); ++s)
        if (!(det_phi_abs[s] > eabs)) bad.push_back(s);
    for (std::size_t s = 0; s < det_theta_abs.size(); ++s)
        if (!(det_theta_abs[s] > eabs)) bad.push_back(s);
    if (!bad.empty()) {
        std::sort(bad.begin(), bad.end());
        bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
        throw ConstraintViolation("|det| > |epsilon| violated", bad);
    }
    ClosureResult r;
    r.alpha = 2.0 * m * epsilon / (m0 * m0);
    r.lambda1.reserve(det_phi_abs.size());
    for (double d : det_phi_abs) r.lambda1.push_back(closure_lambda(d, epsilon, sign1, +1.0));
    r.lambda2.reserve(det_theta_abs.size());
    for (double d : det_theta_abs) r.lambda2.push_back(closure_lambda(d, epsilon, sign2, -1.0));
    return r;
}

inline RealField abs_det(const MatrixField& f) {
    RealField out(f.size());
    for (std::size_t s = 0; s < f.size(); ++s) out[s] = std::abs(f.at(s).det());
    return out;
}

/// The coefficients actually multiplying the mass terms of a given kind.
struct Coefficients {
    ComplexField lambda_phi;   ///< multiplies Phi^ N in the Phi equation
    ComplexField lambda_theta; ///< multiplies Theta^ N in the Theta equation
    double alpha = 0.0;
    double beta = 0.0;
    bool from_closure = false;
};

/// Resolves lambda coefficients and alpha for a kind. Throws
/// ConstraintViolation when closure is requested and |det| <= |eps|.
inline Coefficients resolve_coefficients(SystemKind kind, const Params& p, const MatrixField* phi,
                                         const MatrixField* theta, std::size_t sites) {
    const KindInfo& ki = info(kind);
    Coefficients c;
    c.alpha = p.alpha;
    c.beta = p.beta;
    if (!ki.third) {
        if (ki.phi) c.lambda_phi.assign(sites, 1.0);
        if (ki.theta) c.lambda_theta.assign(sites, 1.0);
        return c;
    }
    if (!p.closure) {
        switch (kind) {
        case SystemKind::neutrino3: c.lambda_phi.assign(sites, p.lambda1); break;
        case SystemKind::antineutrino3: c.lambda_theta.assign(sites, std::conj(p.lambda1)); break;
        case SystemKind::electron3:
            c.lambda_phi.assign(sites, p.lambda1);
            c.lambda_theta.assign(sites, p.lambda2);
            break;
        case SystemKind::positron3:
            c.lambda_phi.assign(sites, std::conj(p.lambda2));
            c.lambda_theta.assign(sites, std::conj(p.lambda1));
            break;
        default: break;
        }
        return c;
    }
    c.from_closure = true;
    const RealField none;
    switch (kind) {
    case SystemKind::neutrino3: {
        auto r = closure(p.epsilon, p.m, p.m0, abs_det(*phi), none, p.sign1, p.sign2);
        c.lambda_phi = std::move(r.lambda1);
        c.alpha = r.alpha;
        break;
    }
    case SystemKind::antineutrino3: {
        // lambda_1 is built from |det Theta| (= |det Phi| of the dual neutrino).
        auto r = closure(p.epsilon, p.m, p.m0, abs_det(*theta), none, p.sign1, p.sign2);
        for (auto& v : r.lambda1) v = std::conj(v);
        c.lambda_theta = std::move(r.lambda1);
        c.alpha = r.alpha;
        break;
    }
    case SystemKind::electron3: {
        auto r = closure(p.epsilon, p.m, p.m0, abs_det(*phi), abs_det(*theta), p.sign1, p.sign2);
        c.lambda_phi = std::move(r.lambda1);
        c.lambda_theta = std::move(r.lambda2);
        c.alpha = r.alpha;
        break;
    }
    case SystemKind::positron3: {
        // After the renaming Phi <- Theta*, Theta <- Phi*: lambda_1 follows
        // |det Theta| and lambda_2 follows |det Phi|.
        auto r = closure(p.epsilon, p.m, p.m0, abs_det(*theta), abs_det(*phi), p.sign1, p.sign2);
        for (auto& v : r.lambda2) v = std::conj(v);
        for (auto& v : r.lambda1) v = std::conj(v);
        c.lambda_phi = std::move(r.lambda2);
        c.lambda_theta = std::move(r.lambda1);
        c.alpha = r.alpha;
        break;
    }
    default: break;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Equation residuals

enum class Chirality { left, right };

inline const Mat2& sigma_for(Chirality c, int mu) {
    return c == Chirality::left ? pauli::sigma_tilde[mu] : pauli::sigma[mu];
}

/// sigma-tilde^mu (d_mu S + S A_mu) + m lambda S^ N (left) or the same with
/// sigma^mu (right). lambda holds one value or one per site. Sites where
/// the mass term is active and S is singular but nonzero raise SingularField.
inline MatrixField residual_spinor(Chirality chir, const MatrixField& sp, const GaugePotential& a, const MatrixField& n,
                                   double m, const ComplexField& lambda) {
    const Lattice& lat = sp.lattice();
    require_compatible(sp, a);
    require_same_lattice(lat, n.lattice());
    if (lambda.size() != 1 && lambda.size() != lat.size())
        throw InvalidArgument("lambda must be constant or given per site");
    auto lam = [&](std::size_t s) { return lambda.size() == 1 ? lambda[0] : lambda[s]; };

    std::vector<std::size_t> singular;
    for (std::size_t s = 0; s < lat.size(); ++s)
        if (m * lam(s) != 0.0 && sp.at(s) != Mat2{} && !hat_defined(sp.at(s))) singular.push_back(s);
    if (!singular.empty()) throw SingularField("singular spinor field", singular);

    std::vector<MatrixField> cov;
    for (int mu = 0; mu < lat.dim(); ++mu) cov.push_back(cov_spinor(sp, a, mu));
    return MatrixField::generate(lat, [&](std::size_t s) {
        Mat2 r;
        for (int mu = 0; mu < lat.dim(); ++mu) r += sigma_for(chir, lat.sigma_index(mu)) * cov[mu].at(s);
        const cplx c = m * lam(s);
        // S = 0 takes the continuous extension S^ = 0 (|S^| = |S|)
        if (c != 0.0 && sp.at(s) != Mat2{}) r += c * (hat(sp.at(s)) * n.at(s));
        return r;
    });
}

inline MatrixField residual_spinor(Chirality chir, const MatrixField& sp, const GaugePotential& a, const MatrixField& n,
                                   double m, cplx lambda) {
    return residual_spinor(chir, sp, a, n, m, ComplexField{lambda});
}

/// Covariant derivative with raised index: D^mu X = eta^{mu mu} (d_mu X - [A_mu, X]).
inline std::vector<MatrixField> cov_adjoint_upper(const MatrixField& x, const GaugePotential& a) {
    std::vector<MatrixField> out;
    const Lattice& lat = x.lattice();
    for (int mu = 0; mu < lat.dim(); ++mu) {
        MatrixField d = cov_adjoint(x, a, mu);
        out.push_back(lat.metric(mu) > 0 ? std::move(d) : cplx(-1.0) * d);
    }
    return out;
}

/// d_mu (D^mu X) - [A_mu, D^mu X]: the covariant d'Alembertian.
inline MatrixField cov_dalembert(const MatrixField& x, const GaugePotential& a) {
    const Lattice& lat = x.lattice();
    const auto up = cov_adjoint_upper(x, a);
    MatrixField out(lat);
    for (int mu = 0; mu < lat.dim(); ++mu) {
        const MatrixField d = cov_adjoint(up[mu], a, mu);
        out = out + d;
    }
    return out;
}

/// Covariant Klein-Gordon residual D_mu D^mu N_- + m0^2 N_-.
inline MatrixField residual_scalar(const MatrixField& n_minus, const GaugePotential& a, double m0,
                                   double tol = kDefaultTol) {
    const auto bad = membership_failures(n_minus, AlgebraSet::su2, tol);
    if (!bad.empty()) throw NotAntiHermitian("scalar field N_- must be su(2)-valued (" + std::to_string(bad.size()) + " sites)");
    const MatrixField box = cov_dalembert(n_minus, a);
    return zip(box, n_minus, [m0](const Mat2& b, const Mat2& x) { return b + (m0 * m0) * x; });
}

/// d_mu F^{mu nu} - [A_mu, F^{mu nu}] for every nu (upper index).
inline std::vector<MatrixField> ym_divergence(const GaugePotential& a, const FieldStrength& f) {
    const Lattice& lat = a.lattice();
    const int d = lat.dim();
    std::vector<MatrixField> out;
    for (int nu = 0; nu < d; ++nu) {
        MatrixField acc(lat);
        for (int mu = 0; mu < d; ++mu) {
            if (mu == nu) continue;
            const double sgn = lat.metric(mu) * lat.metric(nu);
            const MatrixField fup = MatrixField::generate(lat, [&](std::size_t s) { return sgn * f.at(mu, nu, s); });
            acc = acc + cov_adjoint(fup, a, mu);
        }
        out.push_back(std::move(acc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Currents

/// i S^dagger sigma^mu S (right) or i S^dagger sigma-tilde^mu S (left), upper index.
inline Mat2 spinor_current(Chirality chir, const Mat2& s, int mu) {
    return I * (dagger(s) * sigma_for(chir, mu) * s);
}

/// Spinor contribution to the Yang-Mills current of a kind at one site.
inline Mat2 spinor_current_part(SystemKind kind, const Mat2* phi, const Mat2* theta, int mu) {
    switch (kind) {
    case SystemKind::left_conservative: return spinor_current(Chirality::left, *phi, mu);
    case SystemKind::right_conservative: return spinor_current(Chirality::right, *theta, mu);
    case SystemKind::neutrino2:
    case SystemKind::neutrino3: return proj_minus(spinor_current(Chirality::left, *phi, mu));
    case SystemKind::antineutrino2:
    case SystemKind::antineutrino3: return -proj_minus(spinor_current(Chirality::right, *theta, mu));
    case SystemKind::electron2:
    case SystemKind::electron3:
        return spinor_current(Chirality::left, *phi, mu) + proj_plus(spinor_current(Chirality::right, *theta, mu));
    case SystemKind::positron2:
    case SystemKind::positron3:
        return -spinor_current(Chirality::right, *theta, mu) - proj_plus(spinor_current(Chirality::left, *phi, mu));
    case SystemKind::ym_scalar: return {};
    }
    return {};
}

/// Yang-Mills source J^nu split into its parts; every vector is indexed by nu.
struct CurrentSet {
    std::vector<MatrixField> total;  ///< right-hand side of the Yang-Mills equation
    std::vector<MatrixField> spinor; ///< built from Phi / Theta
    std::vector<MatrixField> scalar; ///< alpha D^nu N_- + beta [N_-, D^nu N_-]
    std::vector<MatrixField> jdot;   ///< beta [N_-, D^nu N_-]
    std::vector<MatrixField> external; ///< externally supplied J (ym_scalar)
    std::vector<MatrixField> plus;   ///< pi_+ of total
    std::vector<MatrixField> minus;  ///< pi_- of total
};

/// A bundle of fields plus parameters describing one configuration.
struct FieldConfig {
    explicit FieldConfig(Lattice lat) : lattice(std::move(lat)) {}

    Lattice lattice;
    std::optional<MatrixField> phi;
    std::optional<MatrixField> theta;
    std::optional<GaugePotential> A;            ///< zero when absent
    std::optional<FieldStrength> F;             ///< field_strength(A) when absent
    std::optional<MatrixField> N;               ///< full N, or N_- for ym_scalar
    std::optional<std::vector<MatrixField>> J;  ///< external current (ym_scalar)
    Params params;

    GaugePotential potential(AlgebraSet algebra = AlgebraSet::u2) const {
        return A ? *A : GaugePotential::zero(lattice, algebra);
    }
    FieldStrength strength() const { return F ? *F : field_strength(potential()); }
};

inline void require_fields(SystemKind kind, const FieldConfig& c) {
    const KindInfo& ki = info(kind);
    auto need = [&](bool present, const char* what) {
        if (!present) throw MissingField(std::string(ki.name) + " requires field " + what);
    };
    if (ki.phi) need(c.phi.has_value(), "phi");
    if (ki.theta) need(c.theta.has_value(), "theta");
    need(c.N.has_value(), "N");
    auto check = [&](const std::optional<MatrixField>& f) {
        if (f) require_same_lattice(c.lattice, f->lattice());
    };
    check(c.phi);
    check(c.theta);
    check(c.N);
    if (c.A) {
        if (c.A->dim() != c.lattice.dim()) throw LatticeMismatch("potential has the wrong number of components");
        for (const auto& comp : c.A->components) require_same_lattice(c.lattice, comp.lattice());
    }
}

inline MatrixField n_minus_of(SystemKind kind, const FieldConfig& c) {
    if (info(kind).n_is_minus) return *c.N;
    return map(*c.N, [](const Mat2& x) { return proj_minus(x); });
}

inline CurrentSet current(SystemKind kind, const FieldConfig& c, const Coefficients& coeffs) {
    require_fields(kind, c);
    const KindInfo& ki = info(kind);
    const Lattice& lat = c.lattice;
    const int d = lat.dim();
    CurrentSet js;
    for (int nu = 0; nu < d; ++nu) {
        const int mu = lat.sigma_index(nu);
        js.spinor.push_back(MatrixField::generate(lat, [&](std::size_t s) {
            if (kind == SystemKind::ym_scalar) return Mat2{};
            const Mat2 p = ki.phi ? c.phi->at(s) : Mat2{};
            const Mat2 t = ki.theta ? c.theta->at(s) : Mat2{};
            return spinor_current_part(kind, &p, &t, mu);
        }));
    }
    if (ki.scalar) {
        const MatrixField nm = n_minus_of(kind, c);
        const auto dn = cov_adjoint_upper(nm, c.potential());
        for (int nu = 0; nu < d; ++nu) {
            js.jdot.push_back(zip(nm, dn[nu], [&](const Mat2& x, const Mat2& y) { return coeffs.beta * commutator(x, y); }));
            js.scalar.push_back(zip(dn[nu], js.jdot[nu], [&](const Mat2& y, const Mat2& jd) { return coeffs.alpha * y + jd; }));
        }
    } else {
        for (int nu = 0; nu < d; ++nu) {
            js.jdot.emplace_back(lat);
            js.scalar.emplace_back(lat);
        }
    }
    for (int nu = 0; nu < d; ++nu) {
        if (c.J && kind == SystemKind::ym_scalar) {
            if (static_cast<int>(c.J->size()) != d) throw LatticeMismatch("external current has the wrong number of components");
            js.external.push_back((*c.J)[nu]);
        } else {
            js.external.emplace_back(lat);
        }
        js.total.push_back(js.spinor[nu] + js.scalar[nu] + js.external[nu]);
        js.plus.push_back(map(js.total[nu], [](const Mat2& x) { return proj_plus(x); }));
        js.minus.push_back(map(js.total[nu], [](const Mat2& x) { return proj_minus(x); }));
    }
    return js;
}

// ---------------------------------------------------------------------------
// Residual bundles

/// How a residual transforms under Phi -> Phi V, A -> V^-1 A V - V^-1 dV.
enum class Covariance { right_multiply, adjoint };

struct NormSummary {
    double max_norm = 0.0;
    double l2_norm = 0.0; ///< root mean square over sites
};

inline NormSummary summarize(const MatrixField& f) { return {max_norm(f), rms_norm(f)}; }

struct ResidualEntry {
    std::string name;
    MatrixField field;
    NormSummary summary;
    Covariance covariance = Covariance::adjoint;
    bool constraint = false; ///< algebraic constraint rather than field equation
};

struct Violation {
    std::string equation;
    std::string message;
    std::vector<std::size_t> sites;
};

struct ResidualBundle {
    SystemKind kind = SystemKind::left_conservative;
    std::vector<ResidualEntry> entries;
    std::vector<Violation> violations;
    bool closure_mode = false;
    double alpha = 0.0;
    double beta = 0.0;
    double rho_min = 0.0, rho_max = 0.0;

    const ResidualEntry* find(std::string_view name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
    const MatrixField& field(std::string_view name) const {
        const auto* e = find(name);
        if (!e) throw MissingField("no residual named " + std::string(name));
        return e->field;
    }
    void add(std::string name, MatrixField f, Covariance cov, bool constraint = false) {
        const NormSummary s = summarize(f);
        entries.push_back({std::move(name), std::move(f), s, cov, constraint});
    }
    double max_equation_norm() const {
        double m = 0.0;
        for (const auto& e : entries)
            if (!e.constraint) m = std::max(m, e.summary.max_norm);
        return m;
    }
};

/// F-definition residuals "fdef_mn" (mu < nu) and Yang-Mills residuals "ym_n".
inline void residual_ym(ResidualBundle& out, const GaugePotential& a, const FieldStrength& f,
                        const std::vector<MatrixField>* j) {
    const Lattice& lat = a.lattice();
    const FieldStrength fa = field_strength(a);
    for (int mu = 0; mu < lat.dim(); ++mu)
        for (int nu = mu + 1; nu < lat.dim(); ++nu)
            out.add("fdef_" + std::to_string(mu) + std::to_string(nu), fa.upper(mu, nu) - f.upper(mu, nu),
                    Covariance::adjoint);
    const auto div = ym_divergence(a, f);
    for (int nu = 0; nu < lat.dim(); ++nu)
        out.add("ym_" + std::to_string(nu), j ? div[nu] - (*j)[nu] : div[nu], Covariance::adjoint);
}

inline ResidualBundle residual_ym(const GaugePotential& a, const FieldStrength& f, const CurrentSet& j) {
    ResidualBundle b;
    residual_ym(b, a, f, &j.total);
    return b;
}

struct AssembleOptions {
    bool include_current = true; ///< false drops J from the Yang-Mills right-hand side
};

/// Every residual of a kind: one entry per equation plus the algebraic
/// constraints (det N = 1, N anti-Hermitian, |lambda| = 1) as sitewise
/// scalar residuals. Precondition failures are recorded as violations and
/// the affected equations are skipped.
inline ResidualBundle assemble(SystemKind kind, const FieldConfig& c, const AssembleOptions& opt = {}) {
    require_fields(kind, c);
    const KindInfo& ki = info(kind);
    const Lattice& lat = c.lattice;
    const Params& p = c.params;
    const GaugePotential a = c.potential(algebra_of(ki.group));

    ResidualBundle b;
    b.kind = kind;
    b.closure_mode = ki.third && p.closure;

    if (c.A) {
        for (int mu = 0; mu < a.dim(); ++mu) {
            auto bad = membership_failures(a[mu], algebra_of(ki.group));
            if (!bad.empty())
                b.violations.push_back({"A" + std::to_string(mu), "potential outside " + to_string(algebra_of(ki.group)), bad});
        }
    }

    std::optional<Coefficients> coeffs;
    try {
        coeffs = resolve_coefficients(kind, p, c.phi ? &*c.phi : nullptr, c.theta ? &*c.theta : nullptr, lat.size());
    } catch (const ConstraintViolation& e) {
        b.violations.push_back({"closure", e.what(), e.sites()});
    }
    b.alpha = coeffs ? coeffs->alpha : p.alpha;
    b.beta = p.beta;

    const MatrixField& n = *c.N;
    if (coeffs) {
        auto spinor_eq = [&](const char* name, Chirality chir, const MatrixField& sp, const MatrixField& nn,
                             const ComplexField& lam) {
            try {
                b.add(name, residual_spinor(chir, sp, a, nn, p.m, lam), Covariance::right_multiply);
            } catch (const SingularField& e) {
                b.violations.push_back({name, e.what(), e.sites()});
            }
        };
        if (ki.phi) spinor_eq("spinor_phi", Chirality::left, *c.phi, n, coeffs->lambda_phi);
        if (ki.theta) {
            const MatrixField nn = theta_uses_star_N(kind) ? map(n, [](const Mat2& x) { return star(x); }) : n;
            spinor_eq("spinor_theta", Chirality::right, *c.theta, nn, coeffs->lambda_theta);
        }
    }

    if (ki.yang_mills) {
        const FieldStrength f = c.F ? *c.F : field_strength(a);
        if (opt.include_current && coeffs) {
            const CurrentSet j = current(kind, c, *coeffs);
            residual_ym(b, a, f, &j.total);
        } else if (opt.include_current) {
            Coefficients fallback;
            fallback.alpha = p.alpha;
            fallback.beta = p.beta;
            const CurrentSet j = current(kind, c, fallback);
            residual_ym(b, a, f, &j.total);
        } else {
            residual_ym(b, a, f, nullptr);
        }
    }

    if (ki.scalar) {
        const MatrixField nm = n_minus_of(kind, c);
        try {
            b.add("scalar", residual_scalar(nm, a, p.m0), Covariance::adjoint);
        } catch (const NotAntiHermitian& e) {
            b.violations.push_back({"scalar", e.what(), membership_failures(nm, AlgebraSet::su2)});
        }
    }

    if (!ki.n_is_minus) {
        b.add("det_N", map(n, [](const Mat2& x) { return Mat2::scalar(x.det() - 1.0); }), Covariance::adjoint, true);
        b.add("N_antihermitian", map(n, [](const Mat2& x) { return x + dagger(x); }), Covariance::adjoint, true);
        double rmin = 0.0, rmax = 0.0;
        for (std::size_t s = 0; s < lat.size(); ++s) {
            const double r = n.at(s).trace().imag();
            rmin = s == 0 ? r : std::min(rmin, r);
            rmax = s == 0 ? r : std::max(rmax, r);
        }
        b.rho_min = rmin;
        b.rho_max = rmax;
    }
    if (ki.third && coeffs) {
        auto modulus = [&](const char* name, const ComplexField& lam) {
            if (lam.empty()) return;
            b.add(name,
                  MatrixField::generate(lat, [&](std::size_t s) {
                      return Mat2::scalar(std::abs(lam.size() == 1 ? lam[0] : lam[s]) - 1.0);
                  }),
                  Covariance::adjoint, true);
        };
        modulus("lambda_phi_modulus", coeffs->lambda_phi);
        modulus("lambda_theta_modulus", coeffs->lambda_theta);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Star duality

/// Kind obtained by star-conjugating every field: neutrino3 <-> antineutrino3,
/// electron3 <-> positron3 (with Phi and Theta swapped).
inline std::optional<SystemKind> star_dual(SystemKind k) {
    switch (k) {
    case SystemKind::neutrino3: return SystemKind::antineutrino3;
    case SystemKind::antineutrino3: return SystemKind::neutrino3;
    case SystemKind::electron3: return SystemKind::positron3;
    case SystemKind::positron3: return SystemKind::electron3;
    default: return std::nullopt;
    }
}

inline MatrixField star_field(const MatrixField& f) {
    return map(f, [](const Mat2& x) { return star(x); }).relabel(f.label());
}

/// Star image of a configuration. For the neutrino pair Theta' = Phi*;
/// for the electron pair Phi' = Theta*, Theta' = Phi*. A, F, N, J are starred.
inline FieldConfig star_config(SystemKind kind, const FieldConfig& c) {
    const auto dual = star_dual(kind);
    if (!dual) throw InvalidArgument(to_string(kind) + " has no star dual");
    FieldConfig out(c.lattice);
    out.params = c.params;
    auto st = [](const std::optional<MatrixField>& f) -> std::optional<MatrixField> {
        if (!f) return std::nullopt;
        return star_field(*f);
    };
    out.phi = st(c.theta);
    out.theta = st(c.phi);
    out.N = st(c.N);
    if (c.A) {
        GaugePotential a;
        a.algebra = c.A->algebra;
        for (const auto& comp : c.A->components) a.components.push_back(star_field(comp));
        out.A = std::move(a);
    }
    if (c.F) {
        FieldStrength f(c.lattice);
        for (std::size_t k = 0; k < f.components().size(); ++k) f.components()[k] = star_field(c.F->components()[k]);
        out.F = std::move(f);
    }
    if (c.J) {
        std::vector<MatrixField> j;
        for (const auto& comp : *c.J) j.push_back(star_field(comp));
        out.J = std::move(j);
    }
    return out;
}

/// Residual name in the dual bundle.
inline std::string star_residual_name(std::string_view name) {
    if (name == "spinor_phi") return "spinor_theta";
    if (name == "spinor_theta") return "spinor_phi";
    if (name == "lambda_phi_modulus") return "lambda_theta_modulus";
    if (name == "lambda_theta_modulus") return "lambda_phi_modulus";
    return std::string(name);
}

/// max over residuals and sites of |star(R_kind(c)) - R_dual(star c)|.
inline double star_duality_deviation(SystemKind kind, const FieldConfig& c) {
    const ResidualBundle b = assemble(kind, c);
    const ResidualBundle d = assemble(*star_dual(kind), star_config(kind, c));
    if (b.entries.size() != d.entries.size()) throw InvalidArgument("dual bundles differ in shape");
    double dev = 0.0;
    for (const auto& e : b.entries) dev = std::max(dev, max_distance(star_field(e.field), d.field(star_residual_name(e.name))));
    return dev;
}

// ---------------------------------------------------------------------------
// Free plane waves (1+1)

/// Phi = c exp(i p.x) e solving the free conservative equation with
/// N = i(n0 e + n1 sigma^1), n1^2 - n0^2 = 1. The dispersion is p^2 = -m^2.
/// For the right equation N is the matrix whose star enters the mass term.
struct PlaneWave {
    Chirality chirality = Chirality::left;
    double m = 1.0;
    Mat2 N;
    double p0 = 0.0, p1 = 0.0; ///< lower-index momenta
    cplx amplitude{1.0, 0.0};
    double space_length = 1.0;
    double time_length = 1.0;  ///< one period in t (space_length when static)

    Lattice lattice(int n_time, int n_space) const {
        return Lattice::spacetime({n_time, n_space}, {time_length / n_time, space_length / n_space});
    }

    /// Value at (t, x).
    Mat2 value(double t, double x) const { return Mat2::scalar(amplitude * std::exp(I * (p0 * t + p1 * x))); }

    MatrixField field(const Lattice& lat) const {
        return MatrixField::generate(lat, [&](std::size_t s) { return value(lat.coord(s, 0), lat.coord(s, 1)); },
                                     chirality == Chirality::left ? "phi" : "theta");
    }
};

/// `mode` periods across the box; rapidity sets n0 = sinh, |n1| = cosh.
inline PlaneWave plane_wave_1p1(Chirality chir, double space_length, int mode, double rapidity,
                                cplx amplitude = 1.0) {
    if (mode == 0) throw InvalidArgument("plane wave needs a nonzero mode number");
    PlaneWave w;
    w.chirality = chir;
    w.amplitude = amplitude;
    w.space_length = space_length;
    w.p1 = 2.0 * std::numbers::pi * mode / space_length;
    const double n0 = std::sinh(rapidity);
    const double ch = std::cosh(rapidity);
    w.m = std::abs(w.p1) / ch;
    const double n1 = chir == Chirality::left ? w.p1 / w.m : -w.p1 / w.m;
    w.N = I * (n0 * pauli::s0 + n1 * pauli::s1);
    // left: p_0 = -m n0, p_k = m n_k; right: p_0 = m n0, p_k = -m n_k
    w.p0 = chir == Chirality::left ? -w.m * n0 : w.m * n0;
    w.time_length = w.p0 == 0.0 ? space_length : 2.0 * std::numbers::pi / std::abs(w.p0);
    return w;
}

/// FieldConfig for the matching free conservative kind (A = 0).
inline FieldConfig plane_wave_config(const PlaneWave& w, const Lattice& lat) {
    FieldConfig c(lat);
    if (w.chirality == Chirality::left)
        c.phi = w.field(lat);
    else
        c.theta = w.field(lat);
    c.N = MatrixField::constant(lat, w.N, "N");
    c.params.m = w.m;
    return c;
}

// ---------------------------------------------------------------------------
// Smooth test configurations

/// Smooth (non-solution) configuration for a kind: nonsingular spinors with
/// |det| well above the default epsilon, A in the kind's algebra, F from A,
/// and N valid (det N = 1, anti-Hermitian) with |N_-| >= 1.
inline FieldConfig random_config(SystemKind kind, const Lattice& lat, std::uint64_t seed, int cutoff = 2) {
    const KindInfo& ki = info(kind);
    FieldConfig c(lat);
    c.params.m = 1.0;
    c.params.m0 = 1.0;
    c.params.beta = 0.3;
    c.params.epsilon = 0.5;
    c.params.alpha = 0.7;
    c.params.closure = ki.third;
    if (ki.phi) c.phi = smooth_nonsingular_field(lat, seed * 31 + 1, cutoff, 1.2, 0.15, "phi");
    if (ki.theta) c.theta = smooth_nonsingular_field(lat, seed * 31 + 2, cutoff, 1.2, 0.15, "theta");
    c.A = smooth_random_potential(lat, seed * 31 + 3, algebra_of(ki.group), cutoff, 0.5);
    if (ki.n_is_minus) {
        c.N = smooth_random_field(lat, seed * 31 + 4, FieldConstraint::su2, cutoff, 0.8, "N");
    } else {
        const MatrixField rot = smooth_random_field(lat, seed * 31 + 5, FieldConstraint::su2, cutoff, 0.4);
        const MatrixField mag = smooth_random_field(lat, seed * 31 + 6, FieldConstraint::su2, cutoff, 0.2);
        const Sign branch = c.params.n_plus_branch;
        c.N = zip(rot, mag, [branch](const Mat2& r, const Mat2& g) {
                  const Mat2 v = lepton::exp(r);
                  const double size = 1.5 + 0.3 * std::tanh(su2_coords(g)[0]);
                  const Mat2 nm = size * (dagger(v) * (I * pauli::s3) * v);
                  return n_plus_from_minus(proj_minus(nm), branch) + proj_minus(nm);
              }).relabel("N");
    }
    return c;
}

} // namespace lepton
