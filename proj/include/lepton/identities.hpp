#pragma once

// Derived identities, stated with explicit residual corrections so they hold
// (up to the O(h^2) stencil error) on arbitrary smooth fields.

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lepton/systems.hpp"

namespace lepton {

inline constexpr double kExactDeviation = 1e-11;
inline constexpr double kMinOrder = 1.8;

struct IdentityReport {
    std::string name;
    std::vector<int> resolutions;    ///< sites along the finest-resolved axis
    std::vector<double> spacings;    ///< minimum spacing per resolution
    std::vector<double> deviations;  ///< max sitewise norm of the defect
    double order = std::numeric_limits<double>::quiet_NaN();
    bool exact = false;
    bool inconclusive = false;
    bool pass = false;
    std::string note;
};

/// Least-squares slope of log(dev) against log(h).
inline double fit_order(const std::vector<double>& h, const std::vector<double>& dev) {
    const std::size_t n = h.size();
    if (n < 2 || dev.size() != n) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(dev[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double x = std::log(h[i]), y = std::log(dev[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

inline void finalize(IdentityReport& r) {
    double worst = 0.0;
    for (double d : r.deviations) worst = std::max(worst, d);
    r.exact = !r.deviations.empty() && worst <= kExactDeviation;
    r.order = fit_order(r.spacings, r.deviations);
    r.pass = !r.inconclusive && (r.exact || (std::isfinite(r.order) && r.order >= kMinOrder));
}

using ConfigSource = std::function<FieldConfig(const Lattice&)>;

/// Runs `defect` on each lattice and fits the order.
inline IdentityReport convergence_study(std::string name, const std::vector<Lattice>& lattices,
                                        const std::function<double(const Lattice&)>& defect) {
    IdentityReport r;
    r.name = std::move(name);
    if (lattices.size() < 2) throw InvalidArgument("convergence study needs at least two resolutions");
    for (const auto& lat : lattices) {
        int n = 0;
        for (int a = 0; a < lat.dim(); ++a) n = std::max(n, lat.extent(a));
        r.resolutions.push_back(n);
        r.spacings.push_back(lat.min_spacing());
        r.deviations.push_back(defect(lat));
    }
    finalize(r);
    return r;
}

/// Cubes of the given extents covering a fixed box.
inline std::vector<Lattice> refinement(int dim, const std::vector<int>& extents, double length = 1.0) {
    std::vector<Lattice> out;
    for (int n : extents) out.push_back(Lattice::spacetime_cube(dim, n, length));
    return out;
}

// ---------------------------------------------------------------------------
// Sitewise defects

/// Upper-index spinor current i S^dagger sigma(~)^mu S per axis.
inline std::vector<MatrixField> spinor_currents(Chirality chir, const MatrixField& s) {
    const Lattice& lat = s.lattice();
    std::vector<MatrixField> j;
    for (int a = 0; a < lat.dim(); ++a)
        j.push_back(map(s, [&](const Mat2& x) { return spinor_current(chir, x, lat.sigma_index(a)); }));
    return j;
}

/// d_mu X^mu - [A_mu, X^mu].
inline MatrixField cov_divergence(const std::vector<MatrixField>& x, const GaugePotential& a) {
    MatrixField out(a.lattice());
    for (int mu = 0; mu < a.dim(); ++mu) out = out + cov_adjoint(x[mu], a, mu);
    return out;
}

/// D_mu J^mu - 2 m Im(lambda) |det S| N - i(S^dagger R + R^dagger S).
inline MatrixField current_consequence_defect(Chirality chir, const MatrixField& s, const GaugePotential& a,
                                              const MatrixField& n, double m, const ComplexField& lambda) {
    const MatrixField r = residual_spinor(chir, s, a, n, m, lambda);
    const MatrixField div = cov_divergence(spinor_currents(chir, s), a);
    auto lam = [&](std::size_t k) { return lambda.size() == 1 ? lambda[0] : lambda[k]; };
    return MatrixField::generate(s.lattice(), [&](std::size_t k) {
        const Mat2 sv = s.at(k), rv = r.at(k);
        const double coeff = 2.0 * m * lam(k).imag() * std::abs(sv.det());
        return div.at(k) - coeff * n.at(k) - I * (dagger(sv) * rv + dagger(rv) * sv);
    });
}

/// D_nu D_mu F^{mu nu} with F = field_strength(A).
inline MatrixField ym_divergence_defect(const GaugePotential& a) {
    return cov_divergence(ym_divergence(a, field_strength(a)), a);
}

/// D_nu Jdot^nu - beta [N_-, R_scalar] with Jdot^nu = beta [N_-, D^nu N_-].
inline MatrixField jdot_defect(const MatrixField& n_minus, const GaugePotential& a, double beta, double m0) {
    const auto up = cov_adjoint_upper(n_minus, a);
    std::vector<MatrixField> jdot;
    for (const auto& d : up) jdot.push_back(beta * commutator(n_minus, d));
    const MatrixField rs = residual_scalar(n_minus, a, m0);
    return cov_divergence(jdot, a) - beta * commutator(n_minus, rs);
}

/// i(S^dagger R + R^dagger S).
inline MatrixField spinor_source(const MatrixField& s, const MatrixField& r) {
    return zip(s, r, [](const Mat2& x, const Mat2& y) { return I * (dagger(x) * y + dagger(y) * x); });
}

struct ConsistencyTerms {
    MatrixField derived;  ///< right-hand side built from residuals
    MatrixField expected; ///< (2 m eps1 |det Phi| - alpha m0^2) N_-  (+ central part for electron3)
};

/// Residual-built form of the consistency condition for neutrino3/electron3.
/// `alpha_shift` perturbs alpha in the current and in the scalar correction.
inline ConsistencyTerms consistency_terms(SystemKind kind, const FieldConfig& c, double alpha_shift = 0.0) {
    if (kind != SystemKind::neutrino3 && kind != SystemKind::electron3)
        throw InvalidArgument("consistency condition is defined for neutrino3 and electron3");
    require_fields(kind, c);
    const Lattice& lat = c.lattice;
    const Params& p = c.params;
    const GaugePotential a = c.potential(algebra_of(info(kind).group));
    Coefficients co = resolve_coefficients(kind, p, &*c.phi, c.theta ? &*c.theta : nullptr, lat.size());
    co.alpha += alpha_shift;
    const double alpha = co.alpha;
    const MatrixField& n = *c.N;
    const MatrixField nm = map(n, [](const Mat2& x) { return proj_minus(x); });
    const FieldStrength f = c.F ? *c.F : field_strength(a);

    const CurrentSet js = current(kind, c, co);
    ResidualBundle yb;
    residual_ym(yb, a, f, &js.total);
    std::vector<MatrixField> rym;
    for (int nu = 0; nu < lat.dim(); ++nu) rym.push_back(yb.field("ym_" + std::to_string(nu)));

    MatrixField derived = cplx(-1.0) * cov_divergence(rym, a);
    for (int mu = 0; mu < lat.dim(); ++mu)
        for (int nu = mu + 1; nu < lat.dim(); ++nu) {
            const MatrixField& rf = yb.field("fdef_" + std::to_string(mu) + std::to_string(nu));
            const double sgn = lat.metric(mu) * lat.metric(nu);
            derived = derived + sgn * commutator(rf, f.upper(mu, nu));
        }
    const MatrixField rs = residual_scalar(nm, a, p.m0);
    derived = derived - alpha * rs - co.beta * commutator(nm, rs);

    const MatrixField rphi = residual_spinor(Chirality::left, *c.phi, a, n, p.m, co.lambda_phi);
    const MatrixField sphi = spinor_source(*c.phi, rphi);
    if (kind == SystemKind::neutrino3) {
        derived = derived - map(sphi, [](const Mat2& x) { return proj_minus(x); });
    } else {
        const MatrixField rth = residual_spinor(Chirality::right, *c.theta, a, n, p.m, co.lambda_theta);
        derived = derived - sphi - map(spinor_source(*c.theta, rth), [](const Mat2& x) { return proj_plus(x); });
    }

    const double m0sq = p.m0 * p.m0;
    MatrixField expected = MatrixField::generate(lat, [&](std::size_t s) {
        const double e1 = co.lambda_phi[s].imag() * std::abs(c.phi->at(s).det());
        Mat2 v = (2.0 * p.m * e1 - alpha * m0sq) * nm.at(s);
        if (kind == SystemKind::electron3) {
            const double e2 = co.lambda_theta[s].imag() * std::abs(c.theta->at(s).det());
            v += 2.0 * p.m * (e1 + e2) * proj_plus(n.at(s));
        }
        return v;
    });
    return {std::move(derived), std::move(expected)};
}

// ---------------------------------------------------------------------------
// Convergence checks

/// max|R| relative to max|kinetic term| + max|mass term| of a free
/// conservative equation.
inline double relative_free_residual(Chirality chir, const FieldConfig& c) {
    const MatrixField& s = chir == Chirality::left ? *c.phi : *c.theta;
    const MatrixField n = chir == Chirality::left ? *c.N : star_field(*c.N);
    const GaugePotential zero = GaugePotential::zero(c.lattice, AlgebraSet::u2);
    const MatrixField full = residual_spinor(chir, s, zero, n, c.params.m, cplx(1.0));
    const MatrixField kinetic = residual_spinor(chir, s, zero, n, 0.0, cplx(1.0));
    const double scale = max_norm(kinetic) + max_norm(full - kinetic);
    return scale == 0.0 ? 0.0 : max_norm(full) / scale;
}

/// Divergence of the free conservative current d_mu J^mu on approximate
/// solutions. Inputs whose relative residual on the finest grid exceeds
/// `threshold` make the report inconclusive.
inline IdentityReport check_conservation_free(Chirality chir, const ConfigSource& source,
                                              const std::vector<Lattice>& lattices, double threshold = 1e-2) {
    IdentityReport r = convergence_study(
        chir == Chirality::left ? "conservation_left" : "conservation_right", lattices, [&](const Lattice& lat) {
            const FieldConfig c = source(lat);
            const MatrixField& s = chir == Chirality::left ? *c.phi : *c.theta;
            return max_norm(cov_divergence(spinor_currents(chir, s), GaugePotential::zero(lat, AlgebraSet::u2)));
        });
    const double rel = relative_free_residual(chir, source(lattices.back()));
    if (rel > threshold) {
        r.inconclusive = true;
        r.note = "input is not an approximate solution (relative residual " + std::to_string(rel) + ")";
    }
    finalize(r);
    return r;
}

inline IdentityReport check_current_consequence(SystemKind kind, Chirality chir, const ConfigSource& source,
                                                const std::vector<Lattice>& lattices) {
    const std::string side = chir == Chirality::left ? "left" : "right";
    return convergence_study("current_consequence_" + side, lattices, [&](const Lattice& lat) {
        const FieldConfig c = source(lat);
        const Coefficients co = resolve_coefficients(kind, c.params, c.phi ? &*c.phi : nullptr,
                                                     c.theta ? &*c.theta : nullptr, lat.size());
        const GaugePotential a = c.potential(algebra_of(info(kind).group));
        if (chir == Chirality::left)
            return max_norm(current_consequence_defect(chir, *c.phi, a, *c.N, c.params.m, co.lambda_phi));
        const MatrixField n = theta_uses_star_N(kind) ? star_field(*c.N) : *c.N;
        return max_norm(current_consequence_defect(chir, *c.theta, a, n, c.params.m, co.lambda_theta));
    });
}

inline IdentityReport check_ym_divergence(const ConfigSource& source, const std::vector<Lattice>& lattices) {
    return convergence_study("ym_divergence", lattices,
                             [&](const Lattice& lat) { return max_norm(ym_divergence_defect(source(lat).potential())); });
}

inline IdentityReport check_jdot(SystemKind kind, const ConfigSource& source, const std::vector<Lattice>& lattices) {
    return convergence_study("jdot", lattices, [&](const Lattice& lat) {
        const FieldConfig c = source(lat);
        return max_norm(jdot_defect(n_minus_of(kind, c), c.potential(), c.params.beta, c.params.m0));
    });
}

/// Consistency condition: max |derived| with closure in force converges to
/// zero; with alpha shifted by delta it stays near |delta| m0^2 |N_-|.
inline IdentityReport check_consistency_condition(SystemKind kind, const ConfigSource& source,
                                                  const std::vector<Lattice>& lattices, double alpha_shift = 0.0) {
    return convergence_study(alpha_shift == 0.0 ? "consistency_" + to_string(kind)
                                                : "consistency_" + to_string(kind) + "_shifted",
                             lattices, [&](const Lattice& lat) {
                                 const FieldConfig c = source(lat);
                                 return max_norm(consistency_terms(kind, c, alpha_shift).derived);
                             });
}

/// The exact identity behind the consistency condition: derived == expected
/// up to the stencil error, whatever the parameters.
inline IdentityReport check_consistency_identity(SystemKind kind, const ConfigSource& source,
                                                 const std::vector<Lattice>& lattices, double alpha_shift = 0.0) {
    return convergence_study("consistency_identity_" + to_string(kind), lattices, [&](const Lattice& lat) {
        const ConsistencyTerms t = consistency_terms(kind, source(lat), alpha_shift);
        return max_distance(t.derived, t.expected);
    });
}

inline void write_identity_csv(std::ostream& os, const std::vector<IdentityReport>& reports) {
    os << "identity,resolution,spacing,deviation\n";
    os << std::setprecision(17);
    for (const auto& r : reports)
        for (std::size_t i = 0; i < r.deviations.size(); ++i)
            os << r.name << ',' << r.resolutions[i] << ',' << r.spacings[i] << ',' << r.deviations[i] << '\n';
}

} // namespace lepton
