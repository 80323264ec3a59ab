#pragma once

// Gauge transformations of whole configurations and covariance checks.

#include <cstdint>
#include <string>
#include <vector>

#include "lepton/systems.hpp"

namespace lepton {

/// Sitewise group-valued field V(x) with its group tag.
struct GaugeField {
    MatrixField V;
    GaugeGroup group = GaugeGroup::SU2;

    const Lattice& lattice() const { return V.lattice(); }
};

inline AlgebraSet group_set(GaugeGroup g) { return g == GaugeGroup::SU2 ? AlgebraSet::SU2 : AlgebraSet::U2; }

inline GaugeField make_gauge(MatrixField v, GaugeGroup group, double tol = 1e-12) {
    const auto bad = membership_failures(v, group_set(group), tol);
    if (!bad.empty()) throw MembershipLost("gauge field leaves " + to_string(group_set(group)), bad);
    return {std::move(v), group};
}

inline GaugeField constant_gauge(const Lattice& lat, const Mat2& v, GaugeGroup group) {
    return make_gauge(MatrixField::constant(lat, v, "V"), group);
}

/// exp of a band-limited Lie-algebra field; cutoff 0 gives a constant V.
inline GaugeField random_gauge(const Lattice& lat, std::uint64_t seed, GaugeGroup group, int cutoff,
                               double amplitude = 1.0) {
    const auto c = group == GaugeGroup::SU2 ? FieldConstraint::su2 : FieldConstraint::u2;
    const MatrixField x = smooth_random_field(lat, seed, c, cutoff, amplitude);
    return {map(x, [](const Mat2& a) { return lepton::exp(a); }).relabel("V"), group};
}

inline void require_group(SystemKind kind, const GaugeField& v) {
    if (info(kind).group == GaugeGroup::SU2 && v.group == GaugeGroup::U2)
        throw GroupMismatch(to_string(kind) + " admits SU(2) gauge fields only");
}

inline MatrixField adjoint_action(const MatrixField& x, const MatrixField& v) {
    return zip(x, v, [](const Mat2& a, const Mat2& g) { return dagger(g) * a * g; }).relabel(x.label());
}

/// Phi -> Phi V, Theta -> Theta V, N -> V^-1 N V, A -> V^-1 A V - V^-1 dV,
/// F -> V^-1 F V, J -> V^-1 J V. V^-1 dV is projected onto the potential's
/// algebra; the projection only removes an O(h^2) stencil remainder.
inline FieldConfig apply_gauge(const FieldConfig& c, const GaugeField& v, SystemKind kind) {
    require_group(kind, v);
    require_same_lattice(c.lattice, v.lattice());
    const KindInfo& ki = info(kind);
    FieldConfig out(c.lattice);
    out.params = c.params;
    auto right = [&](const std::optional<MatrixField>& f) -> std::optional<MatrixField> {
        if (!f) return std::nullopt;
        return (*f * v.V).relabel(f->label());
    };
    auto adj = [&](const std::optional<MatrixField>& f) -> std::optional<MatrixField> {
        if (!f) return std::nullopt;
        return adjoint_action(*f, v.V);
    };
    out.phi = right(c.phi);
    out.theta = right(c.theta);
    out.N = adj(c.N);

    const AlgebraSet alg = c.A ? c.A->algebra : algebra_of(ki.group);
    const GaugePotential a = c.A ? *c.A : GaugePotential::zero(c.lattice, alg);
    GaugePotential at;
    at.algebra = alg;
    for (int mu = 0; mu < a.dim(); ++mu) {
        const MatrixField dv = partial(v.V, mu);
        at.components.push_back(MatrixField::generate(c.lattice, [&](std::size_t s) {
                                    const Mat2 g = v.V.at(s);
                                    Mat2 x = dagger(g) * a[mu].at(s) * g - dagger(g) * dv.at(s);
                                    x = 0.5 * (x - dagger(x));
                                    return alg == AlgebraSet::su2 ? proj_minus(x) : x;
                                }).relabel(a[mu].label()));
    }
    out.A = std::move(at);

    if (c.F) {
        FieldStrength f(c.lattice);
        for (std::size_t k = 0; k < f.components().size(); ++k) f.components()[k] = adjoint_action(c.F->components()[k], v.V);
        out.F = std::move(f);
    }
    if (c.J) {
        std::vector<MatrixField> j;
        for (const auto& comp : *c.J) j.push_back(adjoint_action(comp, v.V));
        out.J = std::move(j);
    }
    return out;
}

struct EquationDeviation {
    std::string name;
    double deviation = 0.0;
};

struct CovarianceReport {
    double deviation = 0.0;        ///< max over equations and sites
    double norm_original = 0.0;    ///< max residual norm before the transformation
    double norm_transformed = 0.0; ///< max residual norm after
    std::vector<EquationDeviation> equations;
};

/// |R(apply_gauge(c)) - T(R(c))| with T(R) = R V for spinor equations and
/// V^-1 R V otherwise.
inline CovarianceReport covariance_check(SystemKind kind, const FieldConfig& c, const GaugeField& v) {
    const ResidualBundle before = assemble(kind, c);
    const ResidualBundle after = assemble(kind, apply_gauge(c, v, kind));
    CovarianceReport r;
    for (const auto& e : before.entries) {
        const MatrixField expected =
            e.covariance == Covariance::right_multiply ? e.field * v.V : adjoint_action(e.field, v.V);
        const double d = max_distance(after.field(e.name), expected);
        r.equations.push_back({e.name, d});
        r.deviation = std::max(r.deviation, d);
        r.norm_original = std::max(r.norm_original, e.summary.max_norm);
    }
    for (const auto& e : after.entries) r.norm_transformed = std::max(r.norm_transformed, e.summary.max_norm);
    return r;
}

} // namespace lepton
