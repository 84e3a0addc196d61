#pragma once
// Naive reference computations. Nothing here calls the library's echelon,
// Hermite or Smith code, so disagreements point at one side or the other.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

namespace oracle {

using IntMatrix = std::vector<std::vector<mpz_class>>; // row-major

inline mpz_class bareiss_det(IntMatrix a)
{
    std::size_t n = a.size();
    if (n == 0)
        return 1;
    mpz_class prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a[k][k] == 0) {
            std::size_t s = k + 1;
            while (s < n && a[s][k] == 0)
                ++s;
            if (s == n)
                return 0;
            std::swap(a[k], a[s]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) {
                mpz_class t = a[i][j] * a[k][k] - a[i][k] * a[k][j];
                mpz_divexact(t.get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
                a[i][j] = t;
            }
        prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
}

inline void for_each_subset(std::size_t n, std::size_t k, const std::function<void(const std::vector<std::size_t>&)>& fn)
{
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    if (k > n)
        return;
    while (true) {
        fn(idx);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1)
            --i;
        if (i == 0)
            return;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j)
            idx[j] = idx[j - 1] + 1;
    }
}

/// d_k = gcd of all k x k minors, for k = 1..rank.
inline std::vector<mpz_class> determinantal_divisors(const IntMatrix& m)
{
    std::size_t rows = m.size(), cols = rows ? m[0].size() : 0;
    std::vector<mpz_class> out;
    for (std::size_t k = 1; k <= std::min(rows, cols); ++k) {
        mpz_class g = 0;
        for_each_subset(rows, k, [&](const std::vector<std::size_t>& ri) {
            for_each_subset(cols, k, [&](const std::vector<std::size_t>& ci) {
                IntMatrix sub(k, std::vector<mpz_class>(k));
                for (std::size_t a = 0; a < k; ++a)
                    for (std::size_t b = 0; b < k; ++b)
                        sub[a][b] = m[ri[a]][ci[b]];
                mpz_class d = bareiss_det(sub);
                mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), d.get_mpz_t());
            });
        });
        if (g == 0)
            break;
        out.push_back(g);
    }
    return out;
}

/// Invariant factors d_k / d_{k-1}; their count is the rank.
inline std::vector<mpz_class> invariant_factors(const IntMatrix& m)
{
    auto d = determinantal_divisors(m);
    std::vector<mpz_class> out;
    mpz_class prev = 1;
    for (const auto& x : d) {
        out.push_back(x / prev);
        prev = x;
    }
    return out;
}

/// Non-unit invariant factors only.
inline std::vector<mpz_class> torsion_of_cokernel(const IntMatrix& m)
{
    std::vector<mpz_class> out;
    for (const auto& f : invariant_factors(m))
        if (f != 1)
            out.push_back(f);
    return out;
}

/// Rank over Q (p == 0) or F_p by fraction-free elimination on a copy.
inline std::size_t rank(IntMatrix a, unsigned long p = 0)
{
    std::size_t rows = a.size(), cols = rows ? a[0].size() : 0, r = 0;
    auto norm = [&](mpz_class x) {
        if (p) {
            x %= p;
            if (x < 0)
                x += p;
        }
        return x;
    };
    for (auto& row : a)
        for (auto& x : row)
            x = norm(x);
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t piv = r;
        while (piv < rows && a[piv][c] == 0)
            ++piv;
        if (piv == rows)
            continue;
        std::swap(a[r], a[piv]);
        for (std::size_t i = r + 1; i < rows; ++i) {
            if (a[i][c] == 0)
                continue;
            mpz_class f = a[i][c], g = a[r][c];
            for (std::size_t j = c; j < cols; ++j)
                a[i][j] = norm(a[i][j] * g - a[r][j] * f);
        }
        ++r;
    }
    return r;
}

/// #Hom(Z^n / span(relations), Z/m), by enumerating (Z/m)^n.
inline std::uint64_t hom_count(std::size_t n, const IntMatrix& relations, long m)
{
    std::uint64_t count = 0;
    std::vector<long> x(n, 0);
    while (true) {
        bool ok = true;
        for (const auto& rel : relations) {
            mpz_class s = 0;
            for (std::size_t i = 0; i < n; ++i)
                s += rel[i] * x[i];
            if (s % m != 0) {
                ok = false;
                break;
            }
        }
        count += ok;
        std::size_t i = 0;
        while (i < n && ++x[i] == m)
            x[i++] = 0;
        if (i == n)
            break;
    }
    return count;
}

/// #Hom(Z^r + sum Z/d_i, Z/m) = m^r * prod gcd(d_i, m).
inline std::uint64_t predicted_hom_count(std::size_t free_rank, const std::vector<mpz_class>& torsion, long m)
{
    std::uint64_t c = 1;
    for (std::size_t i = 0; i < free_rank; ++i)
        c *= static_cast<std::uint64_t>(m);
    for (const auto& d : torsion) {
        mpz_class g;
        mpz_class mm = m;
        mpz_gcd(g.get_mpz_t(), d.get_mpz_t(), mm.get_mpz_t());
        c *= g.get_ui();
    }
    return c;
}

/// Poincare series coefficients up to degree `top` of a product of
/// one-generator algebras, each given by (degree, max exponent or -1).
inline std::vector<long> poincare_series(const std::vector<std::pair<int, int>>& factors, int top)
{
    std::vector<long> series(static_cast<std::size_t>(top + 1), 0);
    series[0] = 1;
    for (auto [deg, maxe] : factors) {
        std::vector<long> next(series.size(), 0);
        for (int d = 0; d <= top; ++d) {
            if (!series[static_cast<std::size_t>(d)])
                continue;
            for (int e = 0; d + e * deg <= top && (maxe < 0 || e <= maxe); ++e)
                next[static_cast<std::size_t>(d + e * deg)] += series[static_cast<std::size_t>(d)];
        }
        series = next;
    }
    return series;
}

} // namespace oracle
