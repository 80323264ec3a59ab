#include <gtest/gtest.h>

#include <random>

#include "lepton/gauge.hpp"
#include "lepton/identities.hpp"

using namespace lepton;
using pauli::s0;

namespace {

Mat2 group_element(std::mt19937_64& rng, GaugeGroup g) { return g == GaugeGroup::SU2 ? random_SU2(rng) : random_U2(rng); }

} // namespace

TEST(RandomGauge, GroupMembershipAndDeterminism) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const GaugeField v = random_gauge(lat, 3, GaugeGroup::SU2, 2, 0.8);
    EXPECT_TRUE(membership_failures(v.V, AlgebraSet::SU2, 1e-12).empty());
    const GaugeField u = random_gauge(lat, 3, GaugeGroup::U2, 2, 0.8);
    EXPECT_TRUE(membership_failures(u.V, AlgebraSet::U2, 1e-12).empty());
    EXPECT_EQ(max_distance(v.V, random_gauge(lat, 3, GaugeGroup::SU2, 2, 0.8).V), 0.0);

    const GaugeField c = random_gauge(lat, 4, GaugeGroup::SU2, 0, 0.8);
    for (int mu = 0; mu < 2; ++mu) EXPECT_LE(max_norm(partial(c.V, mu)), 1e-14);
}

TEST(ApplyGauge, IdentityIsNoOp) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    for (SystemKind k : kAllKinds) {
        const FieldConfig c = random_config(k, lat, 2, 2);
        const FieldConfig t = apply_gauge(c, constant_gauge(lat, s0, info(k).group), k);
        if (c.phi) { EXPECT_EQ(max_distance(*t.phi, *c.phi), 0.0); }
        if (c.theta) { EXPECT_EQ(max_distance(*t.theta, *c.theta), 0.0); }
        EXPECT_EQ(max_distance(*t.N, *c.N), 0.0);
        for (int mu = 0; mu < 2; ++mu) EXPECT_LE(max_distance((*t.A)[mu], (*c.A)[mu]), 1e-16);
        EXPECT_EQ(covariance_check(k, c, constant_gauge(lat, s0, info(k).group)).deviation, 0.0);
    }
}

TEST(ApplyGauge, ConstantVConjugatesPotential) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    std::mt19937_64 rng(4);
    const Mat2 v = random_U2(rng);
    const FieldConfig c = random_config(SystemKind::electron2, lat, 3, 2);
    const FieldConfig t = apply_gauge(c, constant_gauge(lat, v, GaugeGroup::U2), SystemKind::electron2);
    for (int mu = 0; mu < 2; ++mu)
        for (std::size_t s = 0; s < lat.size(); s += 17)
            EXPECT_LE(norm((*t.A)[mu].at(s) - inverse(v) * (*c.A)[mu].at(s) * v), 1e-14);
    EXPECT_DOUBLE_EQ(t.params.epsilon, c.params.epsilon);
    EXPECT_DOUBLE_EQ(t.params.m0, c.params.m0);
}

TEST(ApplyGauge, DeterminantMultiplicativity) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const FieldConfig c = random_config(SystemKind::electron2, lat, 5, 2);
    const GaugeField u = random_gauge(lat, 6, GaugeGroup::U2, 2);
    const GaugeField v = random_gauge(lat, 6, GaugeGroup::SU2, 2);
    const FieldConfig tu = apply_gauge(c, u, SystemKind::electron2);
    const FieldConfig tv = apply_gauge(c, v, SystemKind::electron2);
    for (std::size_t s = 0; s < lat.size(); ++s) {
        EXPECT_LE(std::abs(tu.phi->at(s).det() - c.phi->at(s).det() * u.V.at(s).det()), 1e-13);
        EXPECT_NEAR(std::abs(tv.phi->at(s).det()), std::abs(c.phi->at(s).det()), 1e-13);
    }
}

TEST(ApplyGauge, MembershipPreserved) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    for (SystemKind k : kAllKinds) {
        const FieldConfig c = random_config(k, lat, 7, 2);
        const FieldConfig t = apply_gauge(c, random_gauge(lat, 8, info(k).group, 2), k);
        const AlgebraSet alg = algebra_of(info(k).group);
        for (int mu = 0; mu < 2; ++mu) EXPECT_TRUE(membership_failures((*t.A)[mu], alg, 1e-12).empty()) << to_string(k);
    }
}

TEST(ApplyGauge, GroupMismatchRejected) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    const FieldConfig c = random_config(SystemKind::neutrino2, lat, 1, 1);
    EXPECT_THROW(apply_gauge(c, random_gauge(lat, 2, GaugeGroup::U2, 1), SystemKind::neutrino2), GroupMismatch);
    EXPECT_THROW(make_gauge(MatrixField::constant(lat, 2.0 * s0), GaugeGroup::U2), MembershipLost);
}

TEST(ApplyGauge, CompositionForConstantFields) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    std::mt19937_64 rng(9);
    const Mat2 v1 = random_U2(rng), v2 = random_U2(rng);
    const FieldConfig c = random_config(SystemKind::electron3, lat, 10, 2);
    const auto g = [&](const Mat2& v) { return constant_gauge(lat, v, GaugeGroup::U2); };
    const FieldConfig twice = apply_gauge(apply_gauge(c, g(v1), SystemKind::electron3), g(v2), SystemKind::electron3);
    const FieldConfig once = apply_gauge(c, g(v1 * v2), SystemKind::electron3);
    EXPECT_LE(max_distance(*twice.phi, *once.phi), 1e-11);
    EXPECT_LE(max_distance(*twice.N, *once.N), 1e-11);
    for (int mu = 0; mu < 2; ++mu) EXPECT_LE(max_distance((*twice.A)[mu], (*once.A)[mu]), 1e-11);
}

TEST(Covariance, ConstantGaugeIsExactForEveryKind) {
    std::mt19937_64 rng(12);
    for (int dim : {2, 4}) {
        const Lattice lat = Lattice::spacetime_cube(dim, dim == 2 ? 16 : 8, 1.0);
        for (SystemKind k : kAllKinds) {
            const FieldConfig c = random_config(k, lat, 13, 1);
            const GaugeField v = constant_gauge(lat, group_element(rng, info(k).group), info(k).group);
            const CovarianceReport r = covariance_check(k, c, v);
            EXPECT_LE(r.deviation, 1e-11) << to_string(k) << " dim " << dim;
        }
    }
}

TEST(Covariance, SpinorResidualNormInvariantUnderConstantGauge) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    std::mt19937_64 rng(14);
    const FieldConfig c = random_config(SystemKind::electron2, lat, 15, 2);
    const GaugeField v = constant_gauge(lat, random_U2(rng), GaugeGroup::U2);
    const ResidualBundle a = assemble(SystemKind::electron2, c);
    const ResidualBundle b = assemble(SystemKind::electron2, apply_gauge(c, v, SystemKind::electron2));
    for (const char* name : {"spinor_phi", "spinor_theta"}) {
        const MatrixField& x = a.field(name);
        const MatrixField& y = b.field(name);
        for (std::size_t s = 0; s < lat.size(); ++s) EXPECT_NEAR(norm(x.at(s)), norm(y.at(s)), 1e-11);
    }
}

TEST(Covariance, SmoothGaugeDeviationConvergesAtSecondOrder) {
    for (SystemKind k : {SystemKind::neutrino3, SystemKind::electron2, SystemKind::ym_scalar}) {
        const IdentityReport r = convergence_study("cov", refinement(2, {32, 64, 128}), [&](const Lattice& lat) {
            return covariance_check(k, random_config(k, lat, 16, 1), random_gauge(lat, 17, info(k).group, 1, 0.3)).deviation;
        });
        EXPECT_GE(r.order, 1.8) << to_string(k);
        EXPECT_LE(r.order, 2.3) << to_string(k);
        EXPECT_NEAR(r.deviations[0] / r.deviations[1], 4.0, 0.6) << to_string(k);
    }
}

TEST(Covariance, FieldStrengthCovariance) {
    auto dev = [](int n) {
        const Lattice lat = Lattice::spacetime_cube(2, n, 1.0);
        const FieldConfig c = random_config(SystemKind::neutrino2, lat, 18, 1);
        const GaugeField v = random_gauge(lat, 19, GaugeGroup::SU2, 1, 0.3);
        const FieldConfig t = apply_gauge(c, v, SystemKind::neutrino2);
        return max_distance(field_strength(*t.A).upper(0, 1), adjoint_action(field_strength(*c.A).upper(0, 1), v.V));
    };
    EXPECT_NEAR(dev(32) / dev(64), 4.0, 0.6);
}
