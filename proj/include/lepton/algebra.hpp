#pragma once

// Complex 2x2 matrix algebra Mat(2,C): Pauli basis, trace projectors, the
// four conjugations (dagger, tilde, star, hat), Lie-algebra and group
// membership predicates, and construction of the mass matrix N.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "lepton/error.hpp"

namespace lepton {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double kDefaultTol = 1e-10;

/// Complex 2x2 matrix stored row-major (a11, a12, a21, a22).
class Mat2 {
public:
    constexpr Mat2() = default;
    constexpr Mat2(cplx a11, cplx a12, cplx a21, cplx a22) : m_{a11, a12, a21, a22} {}

    static constexpr Mat2 zero() { return {}; }
    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 scalar(cplx c) { return {c, 0.0, 0.0, c}; }

    constexpr cplx operator()(int r, int c) const { return m_[2 * r + c]; }
    constexpr cplx& operator()(int r, int c) { return m_[2 * r + c]; }
    constexpr cplx operator[](int k) const { return m_[k]; }
    constexpr cplx& operator[](int k) { return m_[k]; }

    constexpr cplx trace() const { return m_[0] + m_[3]; }
    constexpr cplx det() const { return m_[0] * m_[3] - m_[1] * m_[2]; }

    Mat2& operator+=(const Mat2& o) {
        for (int k = 0; k < 4; ++k) m_[k] += o.m_[k];
        return *this;
    }
    Mat2& operator-=(const Mat2& o) {
        for (int k = 0; k < 4; ++k) m_[k] -= o.m_[k];
        return *this;
    }
    Mat2& operator*=(cplx s) {
        for (auto& v : m_) v *= s;
        return *this;
    }

    friend Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
    friend Mat2 operator-(Mat2 a, const Mat2& b) { return a -= b; }
    friend Mat2 operator-(const Mat2& a) { return {-a.m_[0], -a.m_[1], -a.m_[2], -a.m_[3]}; }
    friend Mat2 operator*(Mat2 a, cplx s) { return a *= s; }
    friend Mat2 operator*(cplx s, Mat2 a) { return a *= s; }
    friend Mat2 operator*(Mat2 a, double s) { return a *= cplx(s); }
    friend Mat2 operator*(double s, Mat2 a) { return a *= cplx(s); }
    friend Mat2 operator/(Mat2 a, cplx s) { return a *= (1.0 / s); }

    friend Mat2 operator*(const Mat2& a, const Mat2& b) {
        return {a.m_[0] * b.m_[0] + a.m_[1] * b.m_[2], a.m_[0] * b.m_[1] + a.m_[1] * b.m_[3],
                a.m_[2] * b.m_[0] + a.m_[3] * b.m_[2], a.m_[2] * b.m_[1] + a.m_[3] * b.m_[3]};
    }

    friend bool operator==(const Mat2&, const Mat2&) = default;

private:
    std::array<cplx, 4> m_{};
};

inline Mat2 commutator(const Mat2& a, const Mat2& b) { return a * b - b * a; }

/// Frobenius norm.
inline double norm(const Mat2& a) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += std::norm(a[k]);
    return std::sqrt(s);
}

inline double max_abs(const Mat2& a) {
    double m = 0.0;
    for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(a[k]));
    return m;
}

inline bool is_finite(const Mat2& a) {
    for (int k = 0; k < 4; ++k)
        if (!std::isfinite(a[k].real()) || !std::isfinite(a[k].imag())) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Pauli basis

namespace pauli {
inline constexpr Mat2 s0 = Mat2::identity();
inline constexpr Mat2 s1{0.0, 1.0, 1.0, 0.0};
inline constexpr Mat2 s2{0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0};
inline constexpr Mat2 s3{1.0, 0.0, 0.0, -1.0};

/// sigma^mu, mu = 0..3.
inline constexpr std::array<Mat2, 4> sigma{s0, s1, s2, s3};
/// tilde(sigma^mu) = (e, -sigma^1, -sigma^2, -sigma^3).
inline constexpr std::array<Mat2, 4> sigma_tilde{s0, Mat2{0.0, -1.0, -1.0, 0.0},
                                                 Mat2{0.0, cplx(0.0, 1.0), cplx(0.0, -1.0), 0.0},
                                                 Mat2{-1.0, 0.0, 0.0, 1.0}};
} // namespace pauli

/// Coefficients of A = a0 e + a1 sigma^1 + a2 sigma^2 + a3 sigma^3.
struct PauliCoeffs {
    cplx a0, a1, a2, a3;

    friend bool operator==(const PauliCoeffs&, const PauliCoeffs&) = default;
};

inline PauliCoeffs pauli_decompose(const Mat2& a) {
    return {0.5 * (a[0] + a[3]), 0.5 * (a[1] + a[2]), 0.5 * I * (a[1] - a[2]), 0.5 * (a[0] - a[3])};
}

inline Mat2 pauli_compose(const PauliCoeffs& c) {
    return {c.a0 + c.a3, c.a1 - I * c.a2, c.a1 + I * c.a2, c.a0 - c.a3};
}

// ---------------------------------------------------------------------------
// Projectors and conjugations

enum class Sign { plus, minus };

inline double sign_value(Sign s) { return s == Sign::plus ? 1.0 : -1.0; }

/// pi_+(A) = (tr A / 2) e; pi_-(A) = A - pi_+(A).
inline Mat2 proj(const Mat2& a, Sign s) {
    const Mat2 central = Mat2::scalar(0.5 * a.trace());
    return s == Sign::plus ? central : a - central;
}
inline Mat2 proj_plus(const Mat2& a) { return proj(a, Sign::plus); }
inline Mat2 proj_minus(const Mat2& a) { return proj(a, Sign::minus); }

inline Mat2 dagger(const Mat2& a) {
    return {std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])};
}

/// Quaternion conjugation pi_+(A) - pi_-(A); equals the adjugate of A.
inline Mat2 tilde(const Mat2& a) { return {a[3], -a[1], -a[2], a[0]}; }

/// A* = (tilde A)^dagger.
inline Mat2 star(const Mat2& a) {
    return {std::conj(a[3]), -std::conj(a[2]), -std::conj(a[1]), std::conj(a[0])};
}

/// Relative threshold below which hat() treats its argument as singular.
inline constexpr double kHatSingularity = 1e-13;

inline bool hat_defined(const Mat2& a) {
    const double n = norm(a);
    return std::abs(a.det()) > kHatSingularity * n * n;
}

/// A^ = (det A / |det A|) A*, defined for nonsingular A.
inline Mat2 hat(const Mat2& a) {
    if (!hat_defined(a)) throw SingularMatrix("hat conjugation of a (near-)singular matrix");
    const cplx d = a.det();
    return (d / std::abs(d)) * star(a);
}

enum class Conjugation { dagger, tilde, star, hat };

inline Mat2 conjugate(const Mat2& a, Conjugation kind) {
    switch (kind) {
    case Conjugation::dagger: return dagger(a);
    case Conjugation::tilde: return tilde(a);
    case Conjugation::star: return star(a);
    case Conjugation::hat: return hat(a);
    }
    return a;
}

inline Mat2 inverse(const Mat2& a) {
    const cplx d = a.det();
    if (std::abs(d) == 0.0) throw SingularMatrix("inverse of a singular matrix");
    return tilde(a) / d;
}

// ---------------------------------------------------------------------------
// Membership predicates

enum class AlgebraSet { u2, su2, u1_center, U2, SU2 };

inline std::string to_string(AlgebraSet s) {
    switch (s) {
    case AlgebraSet::u2: return "u2";
    case AlgebraSet::su2: return "su2";
    case AlgebraSet::u1_center: return "u1_center";
    case AlgebraSet::U2: return "U2";
    case AlgebraSet::SU2: return "SU2";
    }
    return "?";
}

inline bool membership(const Mat2& a, AlgebraSet set, double tol = kDefaultTol) {
    if (!(tol > 0.0)) throw InvalidArgument("membership tolerance must be positive");
    if (!is_finite(a)) return false;
    switch (set) {
    case AlgebraSet::u2: return max_abs(a + dagger(a)) <= tol;
    case AlgebraSet::su2: return max_abs(a + dagger(a)) <= tol && std::abs(a.trace()) <= tol;
    case AlgebraSet::u1_center:
        return max_abs(a + dagger(a)) <= tol && max_abs(proj_minus(a)) <= tol;
    case AlgebraSet::U2: return max_abs(dagger(a) * a - Mat2::identity()) <= tol;
    case AlgebraSet::SU2:
        return max_abs(dagger(a) * a - Mat2::identity()) <= tol && std::abs(a.det() - 1.0) <= tol;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Exponential and random sampling

/// exp(A) for any A: with A = a0 e + B, B traceless and B^2 = s^2 e,
/// exp(A) = e^{a0} (cosh s e + sinh(s)/s B).
inline Mat2 exp(const Mat2& a) {
    const cplx a0 = 0.5 * a.trace();
    const Mat2 b = a - Mat2::scalar(a0);
    const cplx s2 = -b.det();
    const cplx s = std::sqrt(s2);
    cplx ch, shc;
    if (std::abs(s2) < 1e-8) {
        ch = 1.0 + s2 / 2.0 + s2 * s2 / 24.0;
        shc = 1.0 + s2 / 6.0 + s2 * s2 / 120.0;
    } else {
        ch = std::cosh(s);
        shc = std::sinh(s) / s;
    }
    return std::exp(a0) * (Mat2::scalar(ch) + shc * b);
}

inline Mat2 random_mat(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Mat2 m;
    for (int k = 0; k < 4; ++k) m[k] = cplx(g(rng), g(rng));
    return m;
}

/// i (x1 sigma^1 + x2 sigma^2 + x3 sigma^3) from real coordinates.
inline Mat2 su2_from_coords(double x1, double x2, double x3) {
    return pauli_compose({0.0, I * x1, I * x2, I * x3});
}

/// Real coordinates n_k of an su(2) element i n_k sigma^k.
inline std::array<double, 3> su2_coords(const Mat2& a) {
    const PauliCoeffs c = pauli_decompose(a);
    return {c.a1.imag(), c.a2.imag(), c.a3.imag()};
}

inline Mat2 random_su2_algebra(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    const double x = g(rng), y = g(rng), z = g(rng);
    return su2_from_coords(x, y, z);
}

inline Mat2 random_u2_algebra(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    const double a0 = g(rng);
    return Mat2::scalar(I * a0) + random_su2_algebra(rng, scale);
}

/// Haar-uniform SU(2) element from a normalised real 4-vector.
inline Mat2 random_SU2(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    double q[4];
    double n = 0.0;
    do {
        n = 0.0;
        for (double& v : q) {
            v = g(rng);
            n += v * v;
        }
    } while (n < 1e-12);
    n = std::sqrt(n);
    return pauli_compose({q[0] / n, I * (q[1] / n), I * (q[2] / n), I * (q[3] / n)});
}

inline Mat2 random_U2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    const double phase = u(rng);
    return std::polar(1.0, phase) * random_SU2(rng);
}

// ---------------------------------------------------------------------------
// The mass matrix N: anti-Hermitian, det N = 1, tr N = i rho

struct NMatrix {
    Mat2 value;
    double rho = 0.0;
};

/// N = V^{-1} diag(i lambda, -i/lambda) V with V unitary; rho = lambda - 1/lambda.
inline NMatrix make_N(double lambda, const Mat2& v, double tol = kDefaultTol) {
    if (lambda == 0.0 || !std::isfinite(lambda)) throw DegenerateLambda("make_N requires lambda != 0");
    if (!membership(v, AlgebraSet::U2, tol)) throw NotUnitary("make_N requires a unitary V");
    const Mat2 d{I * lambda, 0.0, 0.0, -I / lambda};
    return {dagger(v) * d * v, lambda - 1.0 / lambda};
}

struct NCheck {
    bool ok = false;
    double rho = 0.0;
};

inline NCheck check_N(const Mat2& a, double tol = kDefaultTol) {
    const bool ok = membership(a, AlgebraSet::u2, tol) && std::abs(a.det() - 1.0) <= tol;
    return {ok, a.trace().imag()};
}

/// Reconstructs N_+ = i n0 e from N_- = i n_k sigma^k through det(N_+ + N_-) = 1,
/// n0 = +-sqrt(n1^2 + n2^2 + n3^2 - 1).
inline Mat2 n_plus_from_minus(const Mat2& n_minus, Sign branch, double tol = kDefaultTol) {
    if (!membership(n_minus, AlgebraSet::su2, tol))
        throw NotAntiHermitian("n_plus_from_minus requires N_- in su(2)");
    const auto n = su2_coords(n_minus);
    const double s = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    // Allow a few ulps of slack at the boundary s = 1.
    if (s < 1.0 - 4.0 * std::numeric_limits<double>::epsilon())
        throw NoRealBranch("n1^2 + n2^2 + n3^2 < 1: no real N_+");
    const double n0 = sign_value(branch) * std::sqrt(std::max(0.0, s - 1.0));
    return Mat2::scalar(I * n0);
}

struct U2Split {
    double a = 0.0; ///< u(1) part: A = i a e + Adot
    Mat2 adot;      ///< su(2) part
};

inline U2Split split_u2_potential(const Mat2& a, double tol = kDefaultTol) {
    if (!membership(a, AlgebraSet::u2, tol))
        throw NotAntiHermitian("split_u2_potential requires an anti-Hermitian matrix");
    return {0.5 * a.trace().imag(), proj_minus(a)};
}

} // namespace lepton
