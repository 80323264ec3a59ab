#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lepton/systems.hpp"

using namespace lepton;
using pauli::s0;
using pauli::s1;
using pauli::s2;
using pauli::s3;

namespace {

constexpr double kPi = std::numbers::pi;

FieldConfig zero_fields(SystemKind kind, const Lattice& lat) {
    const KindInfo& ki = info(kind);
    FieldConfig c(lat);
    c.params.m = 0.0;
    c.params.alpha = 0.0;
    c.params.beta = 0.3;
    if (ki.phi) c.phi = MatrixField(lat);
    if (ki.theta) c.theta = MatrixField(lat);
    c.N = ki.n_is_minus ? MatrixField(lat) : MatrixField::constant(lat, I * s3);
    return c;
}

} // namespace

TEST(ResidualSpinor, ConstantIdentitySpinor) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    const MatrixField e = MatrixField::constant(lat, s0);
    const GaugePotential zero = GaugePotential::zero(lat, AlgebraSet::u2);
    const Mat2 nval = make_N(2.0, s0).value;
    const MatrixField n = MatrixField::constant(lat, nval);
    EXPECT_EQ(max_norm(residual_spinor(Chirality::left, e, zero, n, 0.0, cplx(1.0))), 0.0);
    // e^ = e, so the residual is m N
    EXPECT_LE(max_distance(residual_spinor(Chirality::left, e, zero, n, 1.7, cplx(1.0)),
                           MatrixField::constant(lat, 1.7 * nval)),
              1e-15);
}

TEST(ResidualSpinor, SingularSpinorReportsSites) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    MatrixField s = MatrixField::constant(lat, s0);
    s.set(5, Mat2{1.0, 1.0, 1.0, 1.0});
    const GaugePotential zero = GaugePotential::zero(lat, AlgebraSet::u2);
    try {
        residual_spinor(Chirality::left, s, zero, MatrixField::constant(lat, I * s3), 1.0, cplx(1.0));
        FAIL() << "expected SingularField";
    } catch (const SingularField& e) {
        ASSERT_EQ(e.sites().size(), 1u);
        EXPECT_EQ(e.sites()[0], 5u);
    }
}

TEST(ResidualSpinor, PlaneWaveSolvesContinuumEquation) {
    // c exp(i p.x) e with p_0 = -m n0, p_1 = m n1 and N = i(n0 e + n1 s1),
    // n1^2 - n0^2 = 1: i(p_0 e - p_1 s1) + m N = 0.
    for (double rap : {0.0, 0.5, -1.1}) {
        const PlaneWave w = plane_wave_1p1(Chirality::left, 1.0, 2, rap);
        const Mat2 lhs = I * (w.p0 * pauli::sigma_tilde[0] + w.p1 * pauli::sigma_tilde[1]) + w.m * w.N;
        EXPECT_LE(norm(lhs), 1e-12);
        EXPECT_TRUE(check_N(w.N).ok);
    }
}

TEST(ResidualSpinor, PlaneWaveDiscreteResidualMatchesStencilOracle) {
    for (Chirality chir : {Chirality::left, Chirality::right}) {
        double prev = 0.0;
        for (int n : {32, 64, 128}) {
            const PlaneWave w = plane_wave_1p1(chir, 1.0, 1, 0.5, cplx(0.8, 0.3));
            const Lattice lat = w.lattice(n, n);
            const MatrixField s = w.field(lat);
            const MatrixField nn = chir == Chirality::left ? MatrixField::constant(lat, w.N)
                                                           : MatrixField::constant(lat, star(w.N));
            const MatrixField r =
                residual_spinor(chir, s, GaugePotential::zero(lat, AlgebraSet::u2), nn, w.m, cplx(1.0));
            // central differences turn p_mu into sin(p_mu h_mu) / h_mu
            const double q0 = std::sin(w.p0 * lat.spacing(0)) / lat.spacing(0);
            const double q1 = std::sin(w.p1 * lat.spacing(1)) / lat.spacing(1);
            const auto& sg = chir == Chirality::left ? pauli::sigma_tilde : pauli::sigma;
            const Mat2 k = I * ((q0 - w.p0) * sg[0] + (q1 - w.p1) * sg[1]);
            double worst = 0.0;
            for (std::size_t x = 0; x < lat.size(); ++x) worst = std::max(worst, norm(r.at(x) - s.at(x) * k));
            EXPECT_LE(worst, 1e-10);
            if (prev > 0.0) { EXPECT_NEAR(prev / max_norm(r), 4.0, 0.1); }
            prev = max_norm(r);
        }
    }
}

TEST(ResidualScalar, Examples) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const GaugePotential zero = GaugePotential::zero(lat, AlgebraSet::su2);
    EXPECT_EQ(max_norm(residual_scalar(MatrixField(lat), zero, 1.3)), 0.0);
    const MatrixField c = MatrixField::constant(lat, I * s2 + 0.5 * I * s1);
    EXPECT_LE(max_distance(residual_scalar(c, zero, 1.3), MatrixField::constant(lat, 1.69 * (I * s2 + 0.5 * I * s1))),
              1e-14);
    EXPECT_THROW(residual_scalar(MatrixField::constant(lat, s1), zero, 1.0), NotAntiHermitian);
}

TEST(ResidualScalar, KleinGordonPlaneWave) {
    const double m0 = 1.5, k = 2 * kPi, omega = std::sqrt(k * k + m0 * m0);
    double prev = 0.0;
    for (int n : {32, 64, 128}) {
        const double ht = (2 * kPi / omega) / n, hx = 1.0 / n;
        const Lattice lat = Lattice::spacetime({n, n}, {ht, hx});
        const MatrixField nm = MatrixField::generate(lat, [&](std::size_t s) {
            return std::sin(omega * lat.coord(s, 0) - k * lat.coord(s, 1)) * (I * s3);
        });
        const MatrixField r = residual_scalar(nm, GaugePotential::zero(lat, AlgebraSet::su2), m0);
        // wide second difference: -(sin(w h)/h)^2 per axis
        const double qt = std::sin(omega * ht) / ht, qx = std::sin(k * hx) / hx;
        const double factor = -qt * qt + qx * qx + m0 * m0;
        EXPECT_LE(max_distance(r, cplx(factor) * nm), 1e-9);
        if (prev > 0.0) { EXPECT_NEAR(prev / max_norm(r), 4.0, 0.1); }
        prev = max_norm(r);
    }
}

TEST(ResidualYm, Examples) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const GaugePotential zero = GaugePotential::zero(lat, AlgebraSet::su2);
    CurrentSet j;
    for (int nu = 0; nu < 2; ++nu) j.total.emplace_back(lat);
    const ResidualBundle b0 = residual_ym(zero, field_strength(zero), j);
    EXPECT_EQ(b0.max_equation_norm(), 0.0);

    const GaugePotential a = smooth_random_potential(lat, 3, AlgebraSet::su2, 2, 0.5);
    const FieldStrength f = field_strength(a);
    CurrentSet self;
    self.total = ym_divergence(a, f);
    const ResidualBundle b = residual_ym(a, f, self);
    EXPECT_LE(max_norm(b.field("fdef_01")), 1e-12);
    EXPECT_LE(max_norm(b.field("ym_0")), 1e-12);
    EXPECT_LE(max_norm(b.field("ym_1")), 1e-12);
}

TEST(Current, SpinorExamples) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    FieldConfig c = zero_fields(SystemKind::neutrino2, lat);
    Coefficients co;
    EXPECT_EQ(max_norm(current(SystemKind::neutrino2, c, co).spinor[0]), 0.0);

    c.phi = MatrixField::constant(lat, s0);
    FieldConfig l = zero_fields(SystemKind::left_conservative, lat);
    l.phi = c.phi;
    // i e^dagger e e = i e: the pi_- part vanishes
    EXPECT_LE(max_distance(current(SystemKind::left_conservative, l, co).total[0], MatrixField::constant(lat, I * s0)),
              1e-15);
    const CurrentSet nj = current(SystemKind::neutrino2, c, co);
    EXPECT_LE(max_norm(nj.total[0]), 1e-15);

    FieldConfig e = zero_fields(SystemKind::electron2, lat);
    e.phi = MatrixField::constant(lat, s0);
    e.theta = MatrixField::constant(lat, s0);
    EXPECT_LE(max_distance(current(SystemKind::electron2, e, co).total[0], MatrixField::constant(lat, 2.0 * I * s0)),
              1e-15);
}

TEST(Current, ScalarPartVanishesForConstantNMinus) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    FieldConfig c = random_config(SystemKind::neutrino3, lat, 4, 1);
    c.A.reset();
    const Mat2 nm = 1.4 * I * s2;
    c.N = MatrixField::constant(lat, n_plus_from_minus(nm, Sign::plus) + nm);
    Coefficients co;
    co.alpha = 0.7;
    co.beta = 2.5;
    const CurrentSet j = current(SystemKind::neutrino3, c, co);
    for (int nu = 0; nu < 2; ++nu) {
        EXPECT_EQ(max_norm(j.scalar[nu]), 0.0);
        const MatrixField expect = MatrixField::generate(lat, [&](std::size_t s) {
            return proj_minus(I * (dagger(c.phi->at(s)) * pauli::sigma_tilde[nu] * c.phi->at(s)));
        });
        EXPECT_LE(max_distance(j.total[nu], expect), 1e-15);
    }
}

TEST(Current, AlgebraMembershipPerKind) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    for (SystemKind k : kAllKinds) {
        const FieldConfig c = random_config(k, lat, 8, 2);
        Coefficients co;
        co.alpha = 0.4;
        co.beta = 0.3;
        const CurrentSet j = current(k, c, co);
        const bool su2 = info(k).group == GaugeGroup::SU2;
        for (int nu = 0; nu < 2; ++nu) {
            EXPECT_TRUE(membership_failures(j.minus[nu], AlgebraSet::su2, 1e-12).empty()) << to_string(k);
            EXPECT_TRUE(membership_failures(j.plus[nu], AlgebraSet::u1_center, 1e-12).empty()) << to_string(k);
            if (su2) { EXPECT_LE(max_norm(j.plus[nu]), 1e-12) << to_string(k); }
        }
    }
}

TEST(Current, Electron2DecompositionIsExact) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const Mat2 p = random_mat(rng), t = random_mat(rng);
        for (int mu = 0; mu < 2; ++mu) {
            const Mat2 jp = spinor_current(Chirality::left, p, mu), jt = spinor_current(Chirality::right, t, mu);
            const Mat2 lhs = spinor_current_part(SystemKind::electron2, &p, &t, mu);
            EXPECT_LE(norm(lhs - (proj_minus(jp) + (proj_plus(jp) + proj_plus(jt)))), 1e-13);
        }
    }
}

TEST(Closure, WorkedExample) {
    const ClosureResult r = closure(0.6, 1.0, 2.0, {1.0}, {1.0}, Sign::plus, Sign::plus);
    EXPECT_DOUBLE_EQ(r.alpha, 2.0 * 1.0 * 0.6 / 4.0);
    EXPECT_NEAR(std::abs(r.lambda1[0] - cplx(0.8, 0.6)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(r.lambda2[0] - cplx(0.8, -0.6)), 0.0, 1e-15);
    const ClosureResult m = closure(0.6, 1.0, 2.0, {1.0}, {1.0}, Sign::minus, Sign::minus);
    EXPECT_NEAR(std::abs(m.lambda1[0] - cplx(-0.8, 0.6)), 0.0, 1e-15);
}

TEST(Closure, BoundaryAndDegenerateInputsRejected) {
    EXPECT_THROW(closure(0.6, 1.0, 2.0, {0.6}, {}, Sign::plus, Sign::plus), ConstraintViolation);
    EXPECT_THROW(closure(-0.6, 1.0, 2.0, {1.0}, {0.5}, Sign::plus, Sign::plus), ConstraintViolation);
    EXPECT_THROW(closure(0.0, 1.0, 2.0, {1.0}, {}, Sign::plus, Sign::plus), InvalidArgument);
    try {
        closure(0.5, 1.0, 1.0, {1.0, 0.2, 2.0, 0.5}, {}, Sign::plus, Sign::plus);
        FAIL();
    } catch (const ConstraintViolation& e) {
        EXPECT_EQ(e.sites(), (std::vector<std::size_t>{1, 3}));
    }
}

TEST(Closure, UnitModulusAndEpsilonRelation) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int i = 0; i < 300; ++i) {
        const double eps = u(rng) * (i % 2 ? 1 : -1);
        const double dp = std::abs(eps) * (1.0 + u(rng)), dt = std::abs(eps) * (1.0 + u(rng));
        const ClosureResult r = closure(eps, u(rng), u(rng), {dp}, {dt}, i % 3 ? Sign::plus : Sign::minus, Sign::plus);
        EXPECT_NEAR(std::abs(r.lambda1[0]), 1.0, 1e-14);
        EXPECT_NEAR(std::abs(r.lambda2[0]), 1.0, 1e-14);
        EXPECT_NEAR(r.lambda1[0].imag() * dp, eps, 1e-13);
        EXPECT_NEAR(r.lambda2[0].imag() * dt, -eps, 1e-13);
    }
}

TEST(Assemble, ZeroFieldsGiveZeroResiduals) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    for (SystemKind k : kAllKinds) {
        if (info(k).third) continue; // closure needs |det Phi| > |eps|
        const ResidualBundle b = assemble(k, zero_fields(k, lat));
        EXPECT_TRUE(b.violations.empty()) << to_string(k);
        for (const auto& e : b.entries) EXPECT_EQ(e.summary.max_norm, 0.0) << to_string(k) << " " << e.name;
    }
}

TEST(Assemble, OmittedCurrentShiftsYmResidualByJ) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const FieldConfig c = random_config(SystemKind::electron3, lat, 5, 2);
    const ResidualBundle with = assemble(SystemKind::electron3, c);
    AssembleOptions o;
    o.include_current = false;
    const ResidualBundle without = assemble(SystemKind::electron3, c, o);
    const Coefficients co = resolve_coefficients(SystemKind::electron3, c.params, &*c.phi, &*c.theta, lat.size());
    const CurrentSet j = current(SystemKind::electron3, c, co);
    for (int nu = 0; nu < 2; ++nu) {
        const std::string name = "ym_" + std::to_string(nu);
        EXPECT_LE(max_distance(without.field(name) - with.field(name), j.total[nu]), 1e-13);
    }
}

TEST(Assemble, ConstraintsReportedNotEnforced) {
    const Lattice lat = Lattice::spacetime_cube(2, 8, 1.0);
    FieldConfig c = zero_fields(SystemKind::neutrino2, lat);
    c.N = MatrixField::constant(lat, 2.0 * I * s3); // det = 4
    const ResidualBundle b = assemble(SystemKind::neutrino2, c);
    EXPECT_NEAR(max_norm(b.field("det_N")), std::sqrt(2.0) * 3.0, 1e-14);
    EXPECT_EQ(max_norm(b.field("N_antihermitian")), 0.0);
}

TEST(Assemble, ClosureViolationRecorded) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    FieldConfig c = random_config(SystemKind::neutrino3, lat, 2, 1);
    c.params.epsilon = 10.0;
    const ResidualBundle b = assemble(SystemKind::neutrino3, c);
    ASSERT_FALSE(b.violations.empty());
    EXPECT_EQ(b.violations.front().equation, "closure");
    EXPECT_EQ(b.violations.front().sites.size(), lat.size());
}

TEST(Assemble, ClosureModulusResidualsVanish) {
    const Lattice lat = Lattice::spacetime_cube(2, 16, 1.0);
    const ResidualBundle b = assemble(SystemKind::electron3, random_config(SystemKind::electron3, lat, 3, 2));
    EXPECT_TRUE(b.closure_mode);
    EXPECT_LE(max_norm(b.field("lambda_phi_modulus")), 1e-14);
    EXPECT_LE(max_norm(b.field("lambda_theta_modulus")), 1e-14);
}

TEST(Duality, StarMapsNeutrinoToAntineutrinoAndElectronToPositron) {
    for (int dim : {2, 4}) {
        const Lattice lat = Lattice::spacetime_cube(dim, dim == 2 ? 16 : 8, 1.0);
        for (SystemKind k : {SystemKind::neutrino3, SystemKind::electron3, SystemKind::antineutrino3}) {
            const FieldConfig c = random_config(k, lat, 6, 1);
            EXPECT_LE(star_duality_deviation(k, c), 1e-12) << to_string(k) << " dim " << dim;
        }
    }
    EXPECT_FALSE(star_dual(SystemKind::ym_scalar).has_value());
}

TEST(Kinds, NamesRoundTrip) {
    for (SystemKind k : kAllKinds) EXPECT_EQ(parse_kind(to_string(k)), k);
    EXPECT_FALSE(parse_kind("muon").has_value());
}
