#pragma once

#include "loopss/ring.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loopss {

using Vec = std::vector<Scalar>;

/// Raised when a boundary lattice is not contained in its cycle lattice.
class ContainmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool is_zero(const Vec& v)
{
    return std::all_of(v.begin(), v.end(), [](const Scalar& s) { return s == 0; });
}

/**
 * Dense matrix of exact scalars over a fixed ring, stored row-major.
 * Entries are kept canonical for the ring at every mutation through set().
 */
class ExactMatrix {
public:
    ExactMatrix() : ring_(Ring::integers()) {}
    ExactMatrix(Ring ring, std::size_t rows, std::size_t cols)
        : ring_(std::move(ring)), rows_(rows), cols_(cols), data_(rows * cols)
    {
    }

    static ExactMatrix identity(const Ring& ring, std::size_t n)
    {
        ExactMatrix m(ring, n, n);
        for (std::size_t i = 0; i < n; ++i)
            m.data_[i * n + i] = 1;
        return m;
    }

    static ExactMatrix from_rows(const Ring& ring, const std::vector<Vec>& rows)
    {
        std::size_t c = rows.empty() ? 0 : rows.front().size();
        ExactMatrix m(ring, rows.size(), c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != c)
                throw std::invalid_argument("ragged row list");
            for (std::size_t j = 0; j < c; ++j)
                m.set(i, j, rows[i][j]);
        }
        return m;
    }

    /// Columns must all have length `rows`; an empty list gives rows x 0.
    static ExactMatrix from_columns(const Ring& ring, std::size_t rows, const std::vector<Vec>& cols)
    {
        ExactMatrix m(ring, rows, cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (cols[j].size() != rows)
                throw std::invalid_argument("column length does not match row count");
            for (std::size_t i = 0; i < rows; ++i)
                m.set(i, j, cols[j][i]);
        }
        return m;
    }

    const Ring& ring() const { return ring_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    const Scalar& at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    void set(std::size_t i, std::size_t j, const Scalar& v) { data_[i * cols_ + j] = ring_.reduce(v); }

    Vec column(std::size_t j) const
    {
        Vec v(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            v[i] = at(i, j);
        return v;
    }

    std::vector<Vec> columns() const
    {
        std::vector<Vec> out;
        out.reserve(cols_);
        for (std::size_t j = 0; j < cols_; ++j)
            out.push_back(column(j));
        return out;
    }

    Vec row(std::size_t i) const { return Vec(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_); }

    bool is_zero() const { return loopss::is_zero(data_); }

    ExactMatrix transposed() const
    {
        ExactMatrix t(ring_, cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                t.data_[j * rows_ + i] = at(i, j);
        return t;
    }

    Vec apply(const Vec& x) const
    {
        if (x.size() != cols_)
            throw std::invalid_argument("vector length does not match column count");
        Vec y(rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            Scalar acc = 0;
            for (std::size_t j = 0; j < cols_; ++j)
                if (at(i, j) != 0 && x[j] != 0)
                    acc += at(i, j) * x[j];
            y[i] = ring_.reduce(acc);
        }
        return y;
    }

    ExactMatrix operator*(const ExactMatrix& o) const
    {
        if (!(ring_ == o.ring_))
            throw RingMismatch("matrix product over different rings");
        if (cols_ != o.rows_)
            throw std::invalid_argument("matrix product dimension mismatch");
        ExactMatrix r(ring_, rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const Scalar& a = at(i, k);
                if (a == 0)
                    continue;
                for (std::size_t j = 0; j < o.cols_; ++j)
                    if (o.at(k, j) != 0)
                        r.data_[i * o.cols_ + j] += a * o.at(k, j);
            }
        for (auto& v : r.data_)
            v = ring_.reduce(v);
        return r;
    }

    bool operator==(const ExactMatrix& o) const
    {
        return ring_ == o.ring_ && rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    std::string to_string() const
    {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < rows_; ++i) {
            os << (i ? "; " : "");
            for (std::size_t j = 0; j < cols_; ++j)
                os << (j ? " " : "") << at(i, j).get_str();
        }
        os << "]";
        return os.str();
    }

private:
    Ring ring_;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Scalar> data_;
};

namespace detail {

inline std::optional<std::size_t> leading_index(const Vec& v, std::size_t limit)
{
    for (std::size_t i = 0; i < limit && i < v.size(); ++i)
        if (v[i] != 0)
            return i;
    return std::nullopt;
}

inline void axpy(const Ring& ring, Vec& y, const Scalar& c, const Vec& x)
{
    if (c == 0)
        return;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (x[i] != 0)
            y[i] = ring.reduce(y[i] + c * x[i]);
}

inline void negate(const Ring& ring, Vec& v)
{
    for (auto& s : v)
        s = ring.neg(s);
}

/**
 * Column echelon reduction restricted to the first `pivot_rows` coordinates.
 * Reorders and combines `cols` by invertible column operations. On return the
 * first k columns carry strictly increasing pivot rows, canonically reduced
 * (Z: positive pivots, entries to the left of a pivot in [0, pivot); fields:
 * unit pivots, zeros elsewhere in the pivot row). The remaining columns vanish
 * on the first `pivot_rows` coordinates. Returns k.
 */
inline std::size_t column_echelon(const Ring& ring, std::vector<Vec>& cols, std::size_t pivot_rows)
{
    std::size_t k = 0;
    for (std::size_t r = 0; r < pivot_rows && k < cols.size(); ++r) {
        if (ring.is_field()) {
            std::size_t j = k;
            while (j < cols.size() && cols[j][r] == 0)
                ++j;
            if (j == cols.size())
                continue;
            std::swap(cols[k], cols[j]);
            Scalar inv = ring.inverse(cols[k][r]);
            for (auto& s : cols[k])
                s = ring.mul(s, inv);
            for (std::size_t i = 0; i < cols.size(); ++i)
                if (i != k && cols[i][r] != 0)
                    axpy(ring, cols[i], ring.neg(cols[i][r]), cols[k]);
        } else {
            for (;;) {
                std::size_t best = cols.size();
                for (std::size_t j = k; j < cols.size(); ++j)
                    if (cols[j][r] != 0 && (best == cols.size() || abs(cols[j][r]) < abs(cols[best][r])))
                        best = j;
                if (best == cols.size())
                    break;
                std::swap(cols[k], cols[best]);
                bool clean = true;
                for (std::size_t j = k + 1; j < cols.size(); ++j) {
                    if (cols[j][r] == 0)
                        continue;
                    axpy(ring, cols[j], -ring.reduction_quotient(cols[j][r], cols[k][r]), cols[k]);
                    if (cols[j][r] != 0)
                        clean = false;
                }
                if (clean)
                    break;
            }
            if (k == cols.size() || cols[k][r] == 0)
                continue;
            if (cols[k][r] < 0)
                negate(ring, cols[k]);
            for (std::size_t i = 0; i < k; ++i)
                if (cols[i][r] != 0)
                    axpy(ring, cols[i], -ring.reduction_quotient(cols[i][r], cols[k][r]), cols[k]);
        }
        ++k;
    }
    return k;
}

} // namespace detail

/// Canonical column basis of the column span of M (column HNF over Z,
/// reduced column echelon form over a field). Zero columns are dropped.
inline ExactMatrix column_basis(const ExactMatrix& m)
{
    auto cols = m.columns();
    std::size_t k = detail::column_echelon(m.ring(), cols, m.rows());
    cols.resize(k);
    return ExactMatrix::from_columns(m.ring(), m.rows(), cols);
}

inline ExactMatrix hermite_normal_form(const ExactMatrix& m)
{
    if (!m.ring().is_integers())
        throw RingMismatch("hermite_normal_form requires integer matrices, got " + m.ring().name());
    return column_basis(m);
}

inline std::size_t rank(const ExactMatrix& m) { return column_basis(m).cols(); }

/// Free rank plus invariant factors d_1 | d_2 | ... (each > 1).
struct SubquotientInvariants {
    std::size_t free_rank = 0;
    std::vector<mpz_class> torsion;

    bool is_zero() const { return free_rank == 0 && torsion.empty(); }
    bool operator==(const SubquotientInvariants&) const = default;

    std::string to_string() const
    {
        std::ostringstream os;
        if (free_rank > 0 || torsion.empty())
            os << free_rank;
        if (!torsion.empty()) {
            if (free_rank > 0)
                os << "+";
            os << "T(";
            for (std::size_t i = 0; i < torsion.size(); ++i)
                os << (i ? "," : "") << torsion[i].get_str();
            os << ")";
        }
        return os.str();
    }
};

/// Diagonalization U * M * V = D together with U^{-1}, whose columns generate
/// the cyclic summands of coker(M).
struct SmithDecomposition {
    std::vector<Scalar> diagonal; // nonzero pivots, in order
    ExactMatrix left_inverse;     // U^{-1}, rows(M) x rows(M)
};

inline SmithDecomposition smith_decomposition(const ExactMatrix& m)
{
    const Ring& ring = m.ring();
    const std::size_t nr = m.rows();
    const std::size_t nc = m.cols();
    std::vector<Vec> a(nr, Vec(nc));
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j)
            a[i][j] = m.at(i, j);
    // uinv stored by columns
    std::vector<Vec> uinv(nr, Vec(nr));
    for (std::size_t i = 0; i < nr; ++i)
        uinv[i][i] = 1;

    // row_i += c * row_j, mirrored as col_j -= c * col_i on U^{-1}
    auto row_add = [&](std::size_t i, std::size_t j, const Scalar& c) {
        if (c == 0)
            return;
        detail::axpy(ring, a[i], c, a[j]);
        detail::axpy(ring, uinv[j], ring.neg(c), uinv[i]);
    };
    auto row_swap = [&](std::size_t i, std::size_t j) {
        if (i == j)
            return;
        std::swap(a[i], a[j]);
        std::swap(uinv[i], uinv[j]);
    };
    auto row_scale = [&](std::size_t i, const Scalar& unit) {
        for (auto& s : a[i])
            s = ring.mul(s, unit);
        Scalar inv = ring.inverse(unit);
        for (auto& s : uinv[i])
            s = ring.mul(s, inv);
    };
    auto col_add = [&](std::size_t i, std::size_t j, const Scalar& c) {
        if (c == 0)
            return;
        for (std::size_t r = 0; r < nr; ++r)
            if (a[r][j] != 0)
                a[r][i] = ring.reduce(a[r][i] + c * a[r][j]);
    };
    auto col_swap = [&](std::size_t i, std::size_t j) {
        if (i == j)
            return;
        for (std::size_t r = 0; r < nr; ++r)
            std::swap(a[r][i], a[r][j]);
    };

    SmithDecomposition out;
    std::size_t t = 0;
    while (t < nr && t < nc) {
        // pivot: smallest magnitude over Z, any nonzero over a field
        std::size_t pi = nr, pj = nc;
        for (std::size_t i = t; i < nr; ++i)
            for (std::size_t j = t; j < nc; ++j)
                if (a[i][j] != 0 && (pi == nr || (!ring.is_field() && abs(a[i][j]) < abs(a[pi][pj])))) {
                    pi = i;
                    pj = j;
                }
        if (pi == nr)
            break;
        row_swap(t, pi);
        col_swap(t, pj);
        for (;;) {
            bool dirty = false;
            for (std::size_t i = t + 1; i < nr; ++i) {
                if (a[i][t] == 0)
                    continue;
                row_add(i, t, ring.neg(ring.reduction_quotient(a[i][t], a[t][t])));
                if (a[i][t] != 0) {
                    dirty = true;
                    if (abs(a[i][t]) < abs(a[t][t]))
                        row_swap(t, i);
                }
            }
            for (std::size_t j = t + 1; j < nc; ++j) {
                if (a[t][j] == 0)
                    continue;
                col_add(j, t, ring.neg(ring.reduction_quotient(a[t][j], a[t][t])));
                if (a[t][j] != 0) {
                    dirty = true;
                    if (abs(a[t][j]) < abs(a[t][t]))
                        col_swap(t, j);
                }
            }
            if (dirty)
                continue;
            if (!ring.is_field()) {
                // divisibility: fold an offending row into row t and retry
                std::size_t bad = nr;
                for (std::size_t i = t + 1; i < nr && bad == nr; ++i)
                    for (std::size_t j = t + 1; j < nc; ++j)
                        if (a[i][j] != 0 && a[i][j].get_num() % a[t][t].get_num() != 0) {
                            bad = i;
                            break;
                        }
                if (bad != nr) {
                    row_add(t, bad, 1);
                    continue;
                }
            }
            break;
        }
        if (ring.is_field())
            row_scale(t, ring.inverse(a[t][t]));
        else if (a[t][t] < 0)
            row_scale(t, -1);
        out.diagonal.push_back(a[t][t]);
        ++t;
    }
    out.left_inverse = ExactMatrix::from_columns(ring, nr, uinv);
    return out;
}

/// Invariants of coker(M): free_rank = rows - rank(M); unit factors dropped.
inline SubquotientInvariants smith_invariants(const ExactMatrix& m)
{
    if (!m.ring().is_integers())
        throw RingMismatch("smith_invariants requires integer matrices, got " + m.ring().name());
    auto d = smith_decomposition(m);
    SubquotientInvariants inv;
    inv.free_rank = m.rows() - d.diagonal.size();
    for (const auto& s : d.diagonal)
        if (s != 1)
            inv.torsion.push_back(s.get_num());
    return inv;
}

/**
 * A sublattice of R^n (over a field, a subspace), held as a canonical column
 * basis so that equal lattices compare equal.
 */
class Lattice {
public:
    Lattice() : basis_(Ring::integers(), 0, 0) {}

    static Lattice span(const Ring& ring, std::size_t ambient, const std::vector<Vec>& generators)
    {
        return Lattice(column_basis(ExactMatrix::from_columns(ring, ambient, generators)));
    }
    static Lattice span(const ExactMatrix& generators) { return Lattice(column_basis(generators)); }
    static Lattice full(const Ring& ring, std::size_t ambient)
    {
        return Lattice(ExactMatrix::identity(ring, ambient));
    }
    static Lattice zero(const Ring& ring, std::size_t ambient) { return Lattice(ExactMatrix(ring, ambient, 0)); }

    const Ring& ring() const { return basis_.ring(); }
    std::size_t ambient_rank() const { return basis_.rows(); }
    std::size_t rank() const { return basis_.cols(); }
    const ExactMatrix& basis() const { return basis_; }
    std::vector<Vec> basis_vectors() const { return basis_.columns(); }

    /// Coefficients of v in the basis, or nullopt when v is not a member.
    std::optional<Vec> coordinates(Vec v) const
    {
        if (v.size() != ambient_rank())
            throw std::invalid_argument("vector does not live in the lattice ambient");
        const Ring& r = ring();
        Vec coeff(rank());
        for (std::size_t j = 0; j < rank(); ++j) {
            Vec col = basis_.column(j);
            std::size_t piv = *detail::leading_index(col, col.size());
            for (std::size_t i = 0; i < piv; ++i)
                if (v[i] != 0)
                    return std::nullopt;
            if (v[piv] == 0)
                continue;
            Scalar c;
            if (r.is_field()) {
                c = r.mul(v[piv], r.inverse(col[piv]));
            } else {
                if (v[piv].get_num() % col[piv].get_num() != 0)
                    return std::nullopt;
                c = Scalar(mpz_class(v[piv].get_num() / col[piv].get_num()));
            }
            coeff[j] = c;
            detail::axpy(r, v, r.neg(c), col);
        }
        if (!is_zero(v))
            return std::nullopt;
        return coeff;
    }

    bool contains(const Vec& v) const { return coordinates(v).has_value(); }

    bool contains(const Lattice& o) const
    {
        for (const auto& v : o.basis_vectors())
            if (!contains(v))
                return false;
        return true;
    }

    Lattice operator+(const Lattice& o) const
    {
        auto gens = basis_vectors();
        for (auto& v : o.basis_vectors())
            gens.push_back(std::move(v));
        return span(ring(), ambient_rank(), gens);
    }

    bool operator==(const Lattice& o) const { return basis_ == o.basis_; }

private:
    explicit Lattice(ExactMatrix basis) : basis_(std::move(basis)) {}

    ExactMatrix basis_;
};

/// {x : Mx = 0}. Over Z the result is saturated.
inline Lattice kernel(const ExactMatrix& m)
{
    const Ring& ring = m.ring();
    const std::size_t nr = m.rows();
    const std::size_t nc = m.cols();
    std::vector<Vec> cols(nc, Vec(nr + nc));
    for (std::size_t j = 0; j < nc; ++j) {
        for (std::size_t i = 0; i < nr; ++i)
            cols[j][i] = m.at(i, j);
        cols[j][nr + j] = 1;
    }
    std::size_t k = detail::column_echelon(ring, cols, nr);
    std::vector<Vec> ker;
    for (std::size_t j = k; j < nc; ++j)
        ker.emplace_back(cols[j].begin() + nr, cols[j].end());
    return Lattice::span(ring, nc, ker);
}

/// {x : Mx in L}, computed as the projection of ker [M | -L].
inline Lattice lattice_preimage(const ExactMatrix& m, const Lattice& target)
{
    if (target.ambient_rank() != m.rows())
        throw std::invalid_argument("lattice_preimage: lattice ambient " + std::to_string(target.ambient_rank())
                                    + " does not match matrix rows " + std::to_string(m.rows()));
    if (!(target.ring() == m.ring()))
        throw RingMismatch("lattice_preimage: ring mismatch");
    const Ring& ring = m.ring();
    const std::size_t n = m.cols();
    const std::size_t k = target.rank();
    ExactMatrix stacked(ring, m.rows(), n + k);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j)
            stacked.set(i, j, m.at(i, j));
        for (std::size_t j = 0; j < k; ++j)
            stacked.set(i, n + j, ring.neg(target.basis().at(i, j)));
    }
    std::vector<Vec> proj;
    for (const auto& v : kernel(stacked).basis_vectors())
        proj.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
    return Lattice::span(ring, n, proj);
}

/// C/B written as a direct sum of cyclic pieces with ambient representatives.
struct SubquotientDecomposition {
    SubquotientInvariants invariants;
    std::vector<Vec> free_generators;
    std::vector<Vec> torsion_generators; // parallel to invariants.torsion
};

inline SubquotientDecomposition subquotient_decomposition(const Lattice& cycles, const Lattice& boundaries)
{
    if (cycles.ambient_rank() != boundaries.ambient_rank())
        throw std::invalid_argument("subquotient: ambient mismatch");
    const Ring& ring = cycles.ring();
    std::vector<Vec> coords;
    for (const auto& b : boundaries.basis_vectors()) {
        auto c = cycles.coordinates(b);
        if (!c)
            throw ContainmentError("boundaries not inside cycles");
        coords.push_back(std::move(*c));
    }
    auto inclusion = ExactMatrix::from_columns(ring, cycles.rank(), coords);
    auto snf = smith_decomposition(inclusion);
    SubquotientDecomposition out;
    const auto& zb = cycles.basis();
    auto lift = [&](std::size_t i) { return zb.apply(snf.left_inverse.column(i)); };
    for (std::size_t i = 0; i < snf.diagonal.size(); ++i)
        if (!ring.is_unit(snf.diagonal[i])) {
            out.invariants.torsion.push_back(snf.diagonal[i].get_num());
            out.torsion_generators.push_back(lift(i));
        }
    for (std::size_t i = snf.diagonal.size(); i < cycles.rank(); ++i)
        out.free_generators.push_back(lift(i));
    out.invariants.free_rank = out.free_generators.size();
    return out;
}

inline SubquotientInvariants subquotient(const Lattice& cycles, const Lattice& boundaries)
{
    return subquotient_decomposition(cycles, boundaries).invariants;
}

} // namespace loopss
