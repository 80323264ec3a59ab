#pragma once

// Periodic lattices, Mat2-valued fields on them, central-difference and
// covariant derivatives, field strength, and band-limited random fields.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "lepton/algebra.hpp"
#include "lepton/parallel.hpp"

namespace lepton {

/// A periodic box. Axis a carries `extent(a)` sites with spacing
/// `spacing(a)`. On a spacetime lattice axis 0 is time and axis a is x^a;
/// on a spatial slice axis a is x^{a+1}. Sites are numbered with the last
/// axis fastest: site = ((i0 * n1 + i1) * n2 + i2) * n3 + i3.
class Lattice {
public:
    static constexpr int kMinExtent = 8;

    static Lattice spacetime(std::vector<int> extents, std::vector<double> spacings) {
        if (extents.size() != 2 && extents.size() != 4)
            throw InvalidArgument("spacetime lattice must be 1+1 or 1+3 dimensional");
        return Lattice(std::move(extents), std::move(spacings), true);
    }

    static Lattice spatial(std::vector<int> extents, std::vector<double> spacings) {
        if (extents.size() != 1 && extents.size() != 3)
            throw InvalidArgument("spatial slice must have 1 or 3 axes");
        return Lattice(std::move(extents), std::move(spacings), false);
    }

    /// dim axes of n sites each covering a period of `length`.
    static Lattice spacetime_cube(int dim, int n, double length) {
        return spacetime(std::vector<int>(dim, n), std::vector<double>(dim, length / n));
    }
    static Lattice spatial_cube(int dim, int n, double length) {
        return spatial(std::vector<int>(dim, n), std::vector<double>(dim, length / n));
    }

    int dim() const { return static_cast<int>(extents_.size()); }
    bool has_time() const { return has_time_; }
    int extent(int axis) const { return extents_.at(axis); }
    double spacing(int axis) const { return spacings_.at(axis); }
    double length(int axis) const { return extent(axis) * spacing(axis); }
    std::size_t size() const { return size_; }
    const std::vector<int>& extents() const { return extents_; }
    const std::vector<double>& spacings() const { return spacings_; }

    double min_spacing() const {
        double h = spacings_.front();
        for (double s : spacings_) h = std::min(h, s);
        return h;
    }

    double cell_volume() const {
        double v = 1.0;
        for (double s : spacings_) v *= s;
        return v;
    }

    /// Index mu into sigma^mu for this axis.
    int sigma_index(int axis) const { return has_time_ ? axis : axis + 1; }

    /// Diagonal Minkowski metric eta = diag(1, -1, -1, -1) restricted to the axes.
    double metric(int axis) const {
        check_axis(axis);
        return sigma_index(axis) == 0 ? 1.0 : -1.0;
    }

    int coord_index(std::size_t site, int axis) const {
        return static_cast<int>((site / strides_[axis]) % extents_[axis]);
    }

    double coord(std::size_t site, int axis) const { return coord_index(site, axis) * spacings_[axis]; }

    std::size_t neighbor(std::size_t site, int axis, int step) const {
        const int n = extents_[axis];
        const int i = coord_index(site, axis);
        const int j = ((i + step) % n + n) % n;
        return site + static_cast<std::size_t>(j - i) * strides_[axis];
    }

    void check_axis(int axis) const {
        if (axis < 0 || axis >= dim()) throw InvalidArgument("axis " + std::to_string(axis) + " out of range");
    }

    friend bool operator==(const Lattice& a, const Lattice& b) {
        return a.has_time_ == b.has_time_ && a.extents_ == b.extents_ && a.spacings_ == b.spacings_;
    }

private:
    Lattice(std::vector<int> extents, std::vector<double> spacings, bool has_time)
        : extents_(std::move(extents)), spacings_(std::move(spacings)), has_time_(has_time) {
        if (extents_.size() != spacings_.size()) throw InvalidArgument("extents and spacings differ in length");
        for (int n : extents_)
            if (n < kMinExtent) throw InvalidArgument("lattice extents must be >= 8");
        for (double h : spacings_)
            if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("lattice spacings must be positive");
        strides_.assign(extents_.size(), 1);
        for (int a = dim() - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * extents_[a + 1];
        size_ = strides_[0] * extents_[0];
    }

    std::vector<int> extents_;
    std::vector<double> spacings_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
    bool has_time_ = true;
};

/// One Mat2 per site, stored structure-of-arrays (one array per entry).
class MatrixField {
public:
    MatrixField(Lattice lattice, std::string label = {})
        : lattice_(std::move(lattice)), label_(std::move(label)) {
        for (auto& e : entries_) e.assign(lattice_.size(), cplx{});
    }

    template <class Fn>
        requires std::is_invocable_r_v<Mat2, Fn, std::size_t>
    static MatrixField generate(const Lattice& lattice, Fn&& fn, std::string label = {}) {
        MatrixField f(lattice, std::move(label));
        parallel_for(lattice.size(), [&](std::size_t s) { f.set(s, fn(s)); });
        return f;
    }

    static MatrixField constant(const Lattice& lattice, const Mat2& value, std::string label = {}) {
        MatrixField f(lattice, std::move(label));
        for (std::size_t s = 0; s < lattice.size(); ++s) f.set(s, value);
        return f;
    }

    const Lattice& lattice() const { return lattice_; }
    std::size_t size() const { return lattice_.size(); }
    const std::string& label() const { return label_; }
    MatrixField& relabel(std::string l) {
        label_ = std::move(l);
        return *this;
    }

    Mat2 at(std::size_t site) const {
        return {entries_[0][site], entries_[1][site], entries_[2][site], entries_[3][site]};
    }
    void set(std::size_t site, const Mat2& m) {
        for (int k = 0; k < 4; ++k) entries_[k][site] = m[k];
    }

    /// Entry k (row-major) across all sites.
    std::span<const cplx> entry(int k) const { return entries_.at(k); }

    bool all_finite() const {
        for (std::size_t s = 0; s < size(); ++s)
            if (!is_finite(at(s))) return false;
        return true;
    }

private:
    Lattice lattice_;
    std::string label_;
    std::array<std::vector<cplx>, 4> entries_;
};

inline void require_same_lattice(const Lattice& a, const Lattice& b) {
    if (!(a == b)) throw LatticeMismatch("fields live on different lattices");
}

// ---------------------------------------------------------------------------
// Sitewise arithmetic

template <class Fn>
MatrixField map(const MatrixField& a, Fn&& fn) {
    return MatrixField::generate(a.lattice(), [&](std::size_t s) { return fn(a.at(s)); });
}

template <class Fn>
MatrixField zip(const MatrixField& a, const MatrixField& b, Fn&& fn) {
    require_same_lattice(a.lattice(), b.lattice());
    return MatrixField::generate(a.lattice(), [&](std::size_t s) { return fn(a.at(s), b.at(s)); });
}

inline MatrixField operator+(const MatrixField& a, const MatrixField& b) {
    return zip(a, b, [](const Mat2& x, const Mat2& y) { return x + y; });
}
inline MatrixField operator-(const MatrixField& a, const MatrixField& b) {
    return zip(a, b, [](const Mat2& x, const Mat2& y) { return x - y; });
}
inline MatrixField operator*(const MatrixField& a, const MatrixField& b) {
    return zip(a, b, [](const Mat2& x, const Mat2& y) { return x * y; });
}
inline MatrixField operator*(cplx c, const MatrixField& a) {
    return map(a, [c](const Mat2& x) { return c * x; });
}
inline MatrixField commutator(const MatrixField& a, const MatrixField& b) {
    return zip(a, b, [](const Mat2& x, const Mat2& y) { return commutator(x, y); });
}

/// Largest sitewise Frobenius norm.
inline double max_norm(const MatrixField& f) {
    double m = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) m = std::max(m, norm(f.at(s)));
    return m;
}

/// Root-mean-square of the sitewise Frobenius norm.
inline double rms_norm(const MatrixField& f) {
    double acc = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
        const double n = norm(f.at(s));
        acc += n * n;
    }
    return std::sqrt(acc / static_cast<double>(f.size()));
}

inline double max_distance(const MatrixField& a, const MatrixField& b) {
    require_same_lattice(a.lattice(), b.lattice());
    double m = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) m = std::max(m, norm(a.at(s) - b.at(s)));
    return m;
}

/// Sites at which the field leaves `set` by more than tol.
inline std::vector<std::size_t> membership_failures(const MatrixField& f, AlgebraSet set, double tol = kDefaultTol) {
    std::vector<std::size_t> bad;
    for (std::size_t s = 0; s < f.size(); ++s)
        if (!membership(f.at(s), set, tol)) bad.push_back(s);
    return bad;
}

// ---------------------------------------------------------------------------
// Derivatives

/// Second-order central difference along `axis` with periodic wrap.
inline MatrixField partial(const MatrixField& f, int axis) {
    const Lattice& lat = f.lattice();
    lat.check_axis(axis);
    const double inv = 1.0 / (2.0 * lat.spacing(axis));
    return MatrixField::generate(lat, [&](std::size_t s) {
        return (f.at(lat.neighbor(s, axis, +1)) - f.at(lat.neighbor(s, axis, -1))) * inv;
    });
}

/// Lie-algebra valued potential A_mu, one component per lattice axis.
struct GaugePotential {
    std::vector<MatrixField> components;
    AlgebraSet algebra = AlgebraSet::su2;

    static GaugePotential zero(const Lattice& lattice, AlgebraSet algebra) {
        GaugePotential a;
        a.algebra = algebra;
        for (int mu = 0; mu < lattice.dim(); ++mu)
            a.components.emplace_back(lattice, "A" + std::to_string(mu));
        return a;
    }

    const Lattice& lattice() const { return components.front().lattice(); }
    int dim() const { return static_cast<int>(components.size()); }
    const MatrixField& operator[](int mu) const { return components.at(mu); }
    MatrixField& operator[](int mu) { return components.at(mu); }
};

inline void require_compatible(const MatrixField& x, const GaugePotential& a) {
    if (a.dim() != x.lattice().dim()) throw LatticeMismatch("gauge potential has the wrong number of components");
    for (const auto& c : a.components) require_same_lattice(c.lattice(), x.lattice());
}

/// d_mu X - [A_mu, X].
inline MatrixField cov_adjoint(const MatrixField& x, const GaugePotential& a, int axis) {
    require_compatible(x, a);
    const MatrixField dx = partial(x, axis);
    const MatrixField& am = a[axis];
    return MatrixField::generate(x.lattice(), [&](std::size_t s) {
        return dx.at(s) - commutator(am.at(s), x.at(s));
    });
}

/// d_mu S + S A_mu.
inline MatrixField cov_spinor(const MatrixField& sp, const GaugePotential& a, int axis) {
    require_compatible(sp, a);
    const MatrixField ds = partial(sp, axis);
    const MatrixField& am = a[axis];
    return MatrixField::generate(sp.lattice(), [&](std::size_t s) { return ds.at(s) + sp.at(s) * am.at(s); });
}

/// Antisymmetric family F_{mu nu}; only mu < nu is stored.
class FieldStrength {
public:
    explicit FieldStrength(const Lattice& lattice) : dim_(lattice.dim()) {
        for (int mu = 0; mu < dim_; ++mu)
            for (int nu = mu + 1; nu < dim_; ++nu)
                comps_.emplace_back(lattice, "F" + std::to_string(mu) + std::to_string(nu));
    }

    int dim() const { return dim_; }
    const Lattice& lattice() const { return comps_.front().lattice(); }

    MatrixField& upper(int mu, int nu) { return comps_.at(index(mu, nu)); }
    const MatrixField& upper(int mu, int nu) const { return comps_.at(index(mu, nu)); }

    /// F_{mu nu} at a site, with F_{nu mu} = -F_{mu nu} and F_{mu mu} = 0.
    Mat2 at(int mu, int nu, std::size_t site) const {
        if (mu == nu) return {};
        return mu < nu ? upper(mu, nu).at(site) : -upper(nu, mu).at(site);
    }

    std::vector<MatrixField>& components() { return comps_; }
    const std::vector<MatrixField>& components() const { return comps_; }

private:
    std::size_t index(int mu, int nu) const {
        if (!(0 <= mu && mu < nu && nu < dim_)) throw InvalidArgument("field strength index must satisfy mu < nu");
        std::size_t k = 0;
        for (int a = 0; a < mu; ++a) k += dim_ - a - 1;
        return k + (nu - mu - 1);
    }

    int dim_;
    std::vector<MatrixField> comps_;
};

/// F_{mu nu} = d_mu A_nu - d_nu A_mu - [A_mu, A_nu].
inline FieldStrength field_strength(const GaugePotential& a) {
    const Lattice& lat = a.lattice();
    FieldStrength f(lat);
    std::vector<std::vector<MatrixField>> d;
    d.reserve(a.dim());
    for (int mu = 0; mu < a.dim(); ++mu) {
        d.emplace_back();
        for (int nu = 0; nu < a.dim(); ++nu) d.back().push_back(partial(a[nu], mu));
    }
    for (int mu = 0; mu < a.dim(); ++mu)
        for (int nu = mu + 1; nu < a.dim(); ++nu) {
            auto& out = f.upper(mu, nu);
            parallel_for(lat.size(), [&](std::size_t s) {
                out.set(s, d[mu][nu].at(s) - d[nu][mu].at(s) - commutator(a[mu].at(s), a[nu].at(s)));
            });
        }
    return f;
}

// ---------------------------------------------------------------------------
// Band-limited random fields

enum class FieldConstraint { none, u2, su2 };

/// Real Fourier series on the periodic box with integer modes |k_a| <= cutoff.
/// Coefficients depend only on (seed, dim, cutoff, component count), so the
/// same continuum function is sampled at every resolution of a box of
/// fixed physical size.
class BandLimitedSeries {
public:
    BandLimitedSeries(std::uint64_t seed, int dim, int cutoff, int components, double amplitude)
        : dim_(dim), cutoff_(cutoff), components_(components) {
        if (cutoff < 0) throw InvalidArgument("mode cutoff must be non-negative");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        enumerate_modes();
        double wsum = 0.0;
        for (const auto& k : modes_) {
            const double w = weight(k);
            wsum += w * w;
        }
        const double scale = amplitude / std::sqrt(std::max(wsum, 1e-300));
        coeffs_.resize(static_cast<std::size_t>(components) * modes_.size());
        for (int c = 0; c < components; ++c)
            for (std::size_t m = 0; m < modes_.size(); ++m) {
                const double w = weight(modes_[m]) * scale;
                const double a = g(rng) * w;
                const double b = g(rng) * w;
                coeffs_[c * modes_.size() + m] = {a, b};
            }
    }

    int cutoff() const { return cutoff_; }

    /// Values of all components at a site.
    std::vector<double> evaluate(const Lattice& lat, std::size_t site) const {
        std::vector<double> out(components_, 0.0);
        std::vector<double> frac(dim_);
        for (int a = 0; a < dim_; ++a)
            frac[a] = 2.0 * std::numbers::pi * lat.coord_index(site, a) / lat.extent(a);
        for (std::size_t m = 0; m < modes_.size(); ++m) {
            double th = 0.0;
            for (int a = 0; a < dim_; ++a) th += modes_[m][a] * frac[a];
            const double c = std::cos(th), s = std::sin(th);
            for (int k = 0; k < components_; ++k) {
                const auto& ab = coeffs_[k * modes_.size() + m];
                out[k] += ab.first * c + ab.second * s;
            }
        }
        return out;
    }

private:
    static double weight(const std::vector<int>& k) {
        double k2 = 0.0;
        for (int v : k) k2 += v * v;
        return 1.0 / (1.0 + k2);
    }

    void enumerate_modes() {
        std::vector<int> k(dim_, -cutoff_);
        while (true) {
            modes_.push_back(k);
            int a = dim_ - 1;
            while (a >= 0 && k[a] == cutoff_) k[a--] = -cutoff_;
            if (a < 0) break;
            ++k[a];
        }
    }

    int dim_, cutoff_, components_;
    std::vector<std::vector<int>> modes_;
    std::vector<std::pair<double, double>> coeffs_;
};

/// Band-limited periodic field, deterministic per seed, satisfying the
/// requested pointwise constraint by construction.
inline MatrixField smooth_random_field(const Lattice& lattice, std::uint64_t seed, FieldConstraint constraint,
                                       int cutoff, double amplitude = 1.0, std::string label = {}) {
    for (int a = 0; a < lattice.dim(); ++a)
        if (2 * cutoff >= lattice.extent(a)) throw InvalidArgument("mode cutoff must be below extent/2");
    const int comps = constraint == FieldConstraint::su2 ? 3 : constraint == FieldConstraint::u2 ? 4 : 8;
    const BandLimitedSeries series(seed, lattice.dim(), cutoff, comps, amplitude);
    return MatrixField::generate(
        lattice,
        [&](std::size_t s) -> Mat2 {
            const auto v = series.evaluate(lattice, s);
            switch (constraint) {
            case FieldConstraint::su2: return su2_from_coords(v[0], v[1], v[2]);
            case FieldConstraint::u2: return Mat2::scalar(I * v[3]) + su2_from_coords(v[0], v[1], v[2]);
            case FieldConstraint::none:
                return {cplx(v[0], v[1]), cplx(v[2], v[3]), cplx(v[4], v[5]), cplx(v[6], v[7])};
            }
            return {};
        },
        std::move(label));
}

/// scale * exp(R) with R band-limited; det = scale^2 exp(tr R) never vanishes.
inline MatrixField smooth_nonsingular_field(const Lattice& lattice, std::uint64_t seed, int cutoff, double scale,
                                            double amplitude, std::string label = {}) {
    const MatrixField r = smooth_random_field(lattice, seed, FieldConstraint::none, cutoff, amplitude);
    return map(r, [scale](const Mat2& x) { return scale * lepton::exp(x); }).relabel(std::move(label));
}

inline GaugePotential smooth_random_potential(const Lattice& lattice, std::uint64_t seed, AlgebraSet algebra,
                                              int cutoff, double amplitude = 1.0) {
    GaugePotential a;
    a.algebra = algebra;
    const auto constraint = algebra == AlgebraSet::su2 ? FieldConstraint::su2 : FieldConstraint::u2;
    for (int mu = 0; mu < lattice.dim(); ++mu)
        a.components.push_back(
            smooth_random_field(lattice, seed * 7919 + 101 * mu + 1, constraint, cutoff, amplitude, "A" + std::to_string(mu)));
    return a;
}

// ---------------------------------------------------------------------------
// Snapshot CSV

inline std::string csv_header(const Lattice& lat) {
    std::string h = "site_index";
    for (int a = 0; a < lat.dim(); ++a) h += ",coord" + std::to_string(a);
    h += ",label,re11,im11,re12,im12,re21,im21,re22,im22";
    return h;
}

/// One row per site per field, fields in the given order, sites ascending.
inline void write_snapshot_csv(std::ostream& os, std::span<const MatrixField* const> fields, bool header = true) {
    if (fields.empty()) return;
    const Lattice& lat = fields.front()->lattice();
    if (header) os << csv_header(lat) << '\n';
    std::ostringstream line;
    line << std::setprecision(17);
    for (const MatrixField* f : fields) {
        require_same_lattice(lat, f->lattice());
        for (std::size_t s = 0; s < lat.size(); ++s) {
            line.str({});
            line << s;
            for (int a = 0; a < lat.dim(); ++a) line << ',' << lat.coord(s, a);
            line << ',' << f->label();
            const Mat2 m = f->at(s);
            for (int k = 0; k < 4; ++k) line << ',' << m[k].real() << ',' << m[k].imag();
            os << line.str() << '\n';
        }
    }
}

} // namespace lepton
