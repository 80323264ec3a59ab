#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lepton/algebra.hpp"
#include "lepton/error.hpp"

using namespace lepton;
using pauli::s0;
using pauli::s1;
using pauli::s2;
using pauli::s3;

namespace {

double dist(const Mat2& a, const Mat2& b) { return norm(a - b); }

// Truncated Taylor series; independent of the closed form used by exp().
Mat2 taylor_exp(const Mat2& a, int terms = 40) {
    Mat2 sum = s0, term = s0;
    for (int k = 1; k < terms; ++k) {
        term = (term * a) * (1.0 / k);
        sum += term;
    }
    return sum;
}

Mat2 diag(cplx a, cplx b) { return {a, 0.0, 0.0, b}; }

} // namespace

TEST(PauliBasis, DecomposeBasisAndIdentity) {
    const auto c1 = pauli_decompose(s1);
    EXPECT_EQ(c1.a0, cplx(0.0));
    EXPECT_EQ(c1.a1, cplx(1.0));
    EXPECT_EQ(c1.a2, cplx(0.0));
    EXPECT_EQ(c1.a3, cplx(0.0));
    const auto ce = pauli_decompose(s0);
    EXPECT_EQ(ce.a0, cplx(1.0));
    EXPECT_EQ(ce.a3, cplx(0.0));
}

TEST(PauliBasis, DecomposeHandExpansion) {
    // 3e + 2i sigma3 = diag(3 + 2i, 3 - 2i)
    const auto c = pauli_decompose(diag({3.0, 2.0}, {3.0, -2.0}));
    EXPECT_NEAR(std::abs(c.a0 - cplx(3.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(c.a1), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(c.a2), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(c.a3 - cplx(0.0, 2.0)), 0.0, 1e-15);
}

TEST(PauliBasis, RoundTripAndDeterminantFormula) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const Mat2 a = random_mat(rng);
        const auto c = pauli_decompose(a);
        EXPECT_LE(dist(pauli_compose(c), a), 1e-14 * norm(a));
        EXPECT_NEAR(std::abs(c.a0 - 0.5 * a.trace()), 0.0, 1e-15);
        const cplx det = c.a0 * c.a0 - c.a1 * c.a1 - c.a2 * c.a2 - c.a3 * c.a3;
        EXPECT_NEAR(std::abs(det - a.det()), 0.0, 1e-13);
    }
}

TEST(Projectors, Examples) {
    EXPECT_LE(norm(proj_plus(s3)), 1e-16);
    EXPECT_LE(dist(proj_plus(s0), s0), 1e-16);
    EXPECT_LE(dist(proj_minus(3.0 * s0 + s1), s1), 1e-15);
}

TEST(Projectors, AlgebraOnRandomMatrices) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Mat2 a = random_mat(rng);
        EXPECT_LE(dist(proj_plus(a) + proj_minus(a), a), 1e-14);
        EXPECT_LE(norm(proj_plus(proj_minus(a))), 1e-14);
        EXPECT_LE(dist(proj_plus(proj_plus(a)), proj_plus(a)), 1e-14);
        EXPECT_LE(dist(proj_minus(proj_minus(a)), proj_minus(a)), 1e-14);
        EXPECT_LE(std::abs(proj_minus(a).trace()), 1e-14);
        EXPECT_LE(dist(tilde(a), proj_plus(a) - proj_minus(a)), 1e-14);
    }
}

TEST(Conjugations, Examples) {
    EXPECT_LE(dist(conjugate(s1, Conjugation::tilde), -s1), 1e-16);
    EXPECT_LE(dist(conjugate(s0, Conjugation::hat), s0), 1e-16);
    EXPECT_LE(dist(conjugate(I * s3, Conjugation::star), I * s3), 1e-16);
}

TEST(Conjugations, HatOfSingularThrows) {
    EXPECT_THROW(conjugate(Mat2{1.0, 1.0, 1.0, 1.0}, Conjugation::hat), SingularMatrix);
    EXPECT_THROW(hat(Mat2{}), SingularMatrix);
}

TEST(Conjugations, MultiplicativityLaws) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const Mat2 a = random_mat(rng), b = random_mat(rng);
        const double sc = norm(a) * norm(b);
        EXPECT_LE(dist(dagger(a * b), dagger(b) * dagger(a)), 1e-12 * sc);
        EXPECT_LE(dist(tilde(a * b), tilde(b) * tilde(a)), 1e-12 * sc);
        EXPECT_LE(dist(star(a * b), star(a) * star(b)), 1e-12 * sc);
        EXPECT_LE(dist(hat(a * b), hat(a) * hat(b)), 1e-12 * sc);
        EXPECT_LE(dist(tilde(a) * a, a.det() * s0), 1e-12 * norm(a) * norm(a));
    }
}

TEST(Conjugations, StarFixesSu2AndHatIdentity) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 200; ++i) {
        const Mat2 x = random_su2_algebra(rng);
        EXPECT_LE(dist(star(x), x), 1e-14);
        const Mat2 p = random_mat(rng);
        // Phi^dagger Phi^ = |det Phi| e
        EXPECT_LE(dist(dagger(p) * hat(p), std::abs(p.det()) * s0), 1e-12 * norm(p) * norm(p));
    }
}

TEST(Membership, Examples) {
    EXPECT_TRUE(membership(I * s2, AlgebraSet::su2, 1e-12));
    EXPECT_FALSE(membership(s1, AlgebraSet::u2, 1e-12));
    EXPECT_TRUE(membership(taylor_exp(0.3 * I * s3), AlgebraSet::SU2, 1e-12));
    EXPECT_TRUE(membership(2.0 * I * s0, AlgebraSet::u1_center, 1e-12));
    EXPECT_FALSE(membership(I * s1, AlgebraSet::u1_center, 1e-12));
    EXPECT_FALSE(membership(I * s0, AlgebraSet::su2, 1e-12));
    EXPECT_TRUE(membership(I * s0, AlgebraSet::U2, 1e-12));
    EXPECT_FALSE(membership(I * s0, AlgebraSet::SU2, 1e-12));
}

TEST(Exponential, MatchesTaylorSeries) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 100; ++i) {
        const Mat2 a = random_mat(rng, 0.7);
        EXPECT_LE(dist(lepton::exp(a), taylor_exp(a)), 1e-12);
    }
}

TEST(NMatrix, DiagonalExamples) {
    const NMatrix n2 = make_N(2.0, s0);
    EXPECT_LE(dist(n2.value, diag({0.0, 2.0}, {0.0, -0.5})), 1e-15);
    EXPECT_DOUBLE_EQ(n2.rho, 1.5);
    const NMatrix n1 = make_N(1.0, s0);
    EXPECT_LE(dist(n1.value, I * s3), 1e-15);
    EXPECT_DOUBLE_EQ(n1.rho, 0.0);
}

TEST(NMatrix, SimilarityOracle) {
    std::mt19937_64 rng(19);
    for (int i = 0; i < 100; ++i) {
        const Mat2 v = random_SU2(rng);
        const NMatrix n = make_N(2.0, v);
        // explicit V^{-1} D V with the adjugate inverse
        const Mat2 vinv{v[3], -v[1], -v[2], v[0]};
        const Mat2 expect = vinv * diag({0.0, 2.0}, {0.0, -0.5}) * v * (1.0 / v.det());
        EXPECT_LE(dist(n.value, expect), 1e-12);
        EXPECT_NEAR(std::abs(n.value.det() - 1.0), 0.0, 1e-12);
        EXPECT_TRUE(membership(n.value, AlgebraSet::u2, 1e-12));
    }
}

TEST(NMatrix, Errors) {
    EXPECT_THROW(make_N(0.0, s0), DegenerateLambda);
    EXPECT_THROW(make_N(2.0, 2.0 * s0), NotUnitary);
}

TEST(NMatrix, CheckN) {
    const NCheck a = check_N(I * s3);
    EXPECT_TRUE(a.ok);
    EXPECT_DOUBLE_EQ(a.rho, 0.0);
    EXPECT_FALSE(check_N(s3).ok);
    std::mt19937_64 rng(23);
    for (int i = 0; i < 50; ++i) {
        const Mat2 v = random_U2(rng);
        const NCheck c = check_N(inverse(v) * (I * s3) * v);
        EXPECT_TRUE(c.ok);
        EXPECT_NEAR(c.rho, 0.0, 1e-12);
    }
}

TEST(NPlus, Examples) {
    EXPECT_LE(dist(n_plus_from_minus(I * std::sqrt(2.0) * s1, Sign::plus), I * s0), 1e-14);
    EXPECT_LE(norm(n_plus_from_minus(I * s1, Sign::plus)), 1e-14);
    EXPECT_LE(dist(n_plus_from_minus(I * (s1 + s2 + s3), Sign::minus), -I * std::sqrt(2.0) * s0), 1e-14);
    EXPECT_THROW(n_plus_from_minus(0.5 * I * s1, Sign::plus), NoRealBranch);
    EXPECT_THROW(n_plus_from_minus(s1, Sign::plus), NotAntiHermitian);
}

TEST(NPlus, DeterminantOneOnRandomInputs) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(1.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        Mat2 x = random_su2_algebra(rng);
        const double r = std::sqrt(x.det().real()); // |n|
        x = x * (u(rng) / r);
        for (Sign b : {Sign::plus, Sign::minus}) {
            const Mat2 np = n_plus_from_minus(x, b);
            EXPECT_NEAR(std::abs((np + x).det() - 1.0), 0.0, 1e-12);
            EXPECT_EQ(np.trace().imag() >= 0.0, b == Sign::plus);
        }
    }
}

TEST(U2Split, Examples) {
    const U2Split a = split_u2_potential(2.0 * I * s0 + I * s1);
    EXPECT_DOUBLE_EQ(a.a, 2.0);
    EXPECT_LE(dist(a.adot, I * s1), 1e-15);
    const U2Split b = split_u2_potential(I * s2);
    EXPECT_DOUBLE_EQ(b.a, 0.0);
    EXPECT_LE(dist(b.adot, I * s2), 1e-15);
    EXPECT_LE(dist(star(2.0 * I * s0 + I * s1), -2.0 * I * s0 + I * s1), 1e-15);
    EXPECT_THROW(split_u2_potential(s1), NotAntiHermitian);
}

TEST(U2Structure, StatementsOnRandomSamples) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 300; ++i) {
        const Mat2 a = random_u2_algebra(rng);
        EXPECT_TRUE(membership(star(a), AlgebraSet::u2));
        // A* A = -e <=> det A = 1 for A in u(2); construct one of each
        const NMatrix n = make_N(1.0 + std::uniform_real_distribution<double>(0.1, 2.0)(rng), random_U2(rng));
        EXPECT_LE(dist(star(n.value) * n.value, -s0), 1e-10);
        if (std::abs(a.det() - 1.0) > 1e-3) { EXPECT_GT(dist(star(a) * a, -s0), 1e-10); }
        const Mat2 v = random_U2(rng);
        const Mat2 m = inverse(v) * n.value * v;
        EXPECT_TRUE(check_N(m).ok);
    }
}
