#pragma once

#include "loopss/linalg.hpp"
#include "loopss/ring.hpp"

#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace loopss {

enum class GeneratorKind { Exterior, Polynomial, Truncated, DividedPower };

inline std::string to_string(GeneratorKind k)
{
    switch (k) {
    case GeneratorKind::Exterior:
        return "exterior";
    case GeneratorKind::Polynomial:
        return "polynomial";
    case GeneratorKind::Truncated:
        return "truncated";
    case GeneratorKind::DividedPower:
        return "divided_power";
    }
    return "?";
}

inline GeneratorKind parse_generator_kind(const std::string& s)
{
    if (s == "exterior")
        return GeneratorKind::Exterior;
    if (s == "polynomial")
        return GeneratorKind::Polynomial;
    if (s == "truncated")
        return GeneratorKind::Truncated;
    if (s == "divided_power")
        return GeneratorKind::DividedPower;
    throw std::invalid_argument("unknown generator kind '" + s + "'");
}

struct Generator {
    std::string name;
    int degree = 0;
    GeneratorKind kind = GeneratorKind::Polynomial;
    int height = 0; // Truncated only: g^height = 0

    bool operator==(const Generator&) const = default;
};

class PresentationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GradedAlgebraPresentation {
    std::vector<Generator> generators;
    std::string description;

    bool operator==(const GradedAlgebraPresentation&) const = default;

    std::optional<std::size_t> index_of(const std::string& name) const
    {
        for (std::size_t i = 0; i < generators.size(); ++i)
            if (generators[i].name == name)
                return i;
        return std::nullopt;
    }

    /// Top nonzero degree when every generator is nilpotent, else nullopt.
    std::optional<int> top_degree() const
    {
        int top = 0;
        for (const auto& g : generators) {
            switch (g.kind) {
            case GeneratorKind::Exterior:
                top += g.degree;
                break;
            case GeneratorKind::Truncated:
                top += (g.height - 1) * g.degree;
                break;
            default:
                return std::nullopt;
            }
        }
        return top;
    }

    void validate(const Ring& ring) const
    {
        const bool char2 = ring.kind() == Ring::Kind::PrimeField && ring.characteristic() == 2;
        for (std::size_t i = 0; i < generators.size(); ++i) {
            const auto& g = generators[i];
            if (g.name.empty() || !(std::isalpha(static_cast<unsigned char>(g.name[0])) || g.name[0] == '_'))
                throw PresentationError("generator name '" + g.name + "' is not an identifier");
            for (char c : g.name)
                if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
                    throw PresentationError("generator name '" + g.name + "' is not an identifier");
            for (std::size_t j = 0; j < i; ++j)
                if (generators[j].name == g.name)
                    throw PresentationError("duplicate generator name '" + g.name + "'");
            if (g.degree <= 0)
                throw PresentationError("generator '" + g.name + "' must have positive degree");
            const bool odd = g.degree % 2 != 0;
            if (g.kind == GeneratorKind::Exterior && !odd && !char2)
                throw PresentationError("exterior generator '" + g.name + "' needs odd degree outside characteristic 2");
            if (g.kind != GeneratorKind::Exterior && odd && !char2)
                throw PresentationError(to_string(g.kind) + " generator '" + g.name
                                        + "' needs even degree outside characteristic 2");
            if (g.kind == GeneratorKind::Truncated && g.height < 2)
                throw PresentationError("truncated generator '" + g.name + "' needs height >= 2");
        }
    }
};

/// Exponent vector in presentation order. For a divided-power generator the
/// entry k stands for gamma_k.
struct Monomial {
    std::vector<int> exponents;

    bool operator==(const Monomial&) const = default;
    bool is_unit() const
    {
        for (int e : exponents)
            if (e != 0)
                return false;
        return true;
    }
};

/// Orders monomials by descending exponent vector (c1^2 before c1*c2 before c2^2).
struct MonomialOrder {
    bool operator()(const Monomial& a, const Monomial& b) const { return a.exponents > b.exponents; }
};

/// Finite linear combination of monomials; zero coefficients are never stored.
struct Element {
    std::map<Monomial, Scalar, MonomialOrder> terms;

    bool is_zero() const { return terms.empty(); }
    bool operator==(const Element&) const = default;
};

class AlgebraError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parse failure in the monomial grammar; `column` is a 0-based offset.
class ElementParseError : public std::invalid_argument {
public:
    ElementParseError(const std::string& what, std::size_t column)
        : std::invalid_argument(what + " (column " + std::to_string(column + 1) + ")"), column(column)
    {
    }
    std::size_t column;
};

/**
 * A graded-commutative algebra over a coefficient ring, given by a
 * presentation. Products are normal-ordered with the Koszul sign
 * (-1)^{|a||b|} for every transposition of homogeneous factors.
 */
class Algebra {
public:
    Algebra(GradedAlgebraPresentation presentation, Ring ring)
        : pres_(std::move(presentation)), ring_(std::move(ring))
    {
        pres_.validate(ring_);
    }

    const GradedAlgebraPresentation& presentation() const { return pres_; }
    const Ring& ring() const { return ring_; }
    std::size_t arity() const { return pres_.generators.size(); }

    Monomial unit_monomial() const { return Monomial{std::vector<int>(arity(), 0)}; }

    Element unit() const { return scalar(1); }

    Element scalar(const Scalar& c) const
    {
        Element e;
        add_term(e, unit_monomial(), c);
        return e;
    }

    Element monomial(const Monomial& m, const Scalar& c = 1) const
    {
        check(m);
        Element e;
        if (valid_exponents(m))
            add_term(e, m, c);
        return e;
    }

    /// The generator itself (gamma_1 for divided powers).
    Element generator(std::size_t i) const { return power_index(i, 1); }

    /// g^k for ordinary generators, gamma_k(g) for divided powers.
    Element power_index(std::size_t i, int k) const
    {
        Monomial m = unit_monomial();
        m.exponents.at(i) = k;
        return monomial(m);
    }

    int degree(const Monomial& m) const
    {
        check(m);
        int d = 0;
        for (std::size_t i = 0; i < arity(); ++i)
            d += m.exponents[i] * pres_.generators[i].degree;
        return d;
    }

    /// Degree when all monomials agree; nullopt for zero or inhomogeneous.
    std::optional<int> homogeneous_degree(const Element& e) const
    {
        std::optional<int> d;
        for (const auto& [m, c] : e.terms) {
            int dm = degree(m);
            if (d && *d != dm)
                return std::nullopt;
            d = dm;
        }
        return d;
    }

    bool valid_exponents(const Monomial& m) const
    {
        for (std::size_t i = 0; i < arity(); ++i) {
            const auto& g = pres_.generators[i];
            int e = m.exponents[i];
            if (e < 0)
                return false;
            if (g.kind == GeneratorKind::Exterior && e > 1)
                return false;
            if (g.kind == GeneratorKind::Truncated && e >= g.height)
                return false;
        }
        return true;
    }

    /// Product of two monomials as coefficient * monomial; nullopt if zero.
    std::optional<std::pair<Scalar, Monomial>> multiply(const Monomial& a, const Monomial& b) const
    {
        check(a);
        check(b);
        Monomial out = unit_monomial();
        Scalar coeff = 1;
        for (std::size_t i = 0; i < arity(); ++i) {
            const auto& g = pres_.generators[i];
            int s = a.exponents[i] + b.exponents[i];
            if (g.kind == GeneratorKind::DividedPower && a.exponents[i] > 0 && b.exponents[i] > 0)
                coeff *= Scalar(binomial(static_cast<unsigned long>(s), static_cast<unsigned long>(a.exponents[i])));
            out.exponents[i] = s;
        }
        if (!valid_exponents(out))
            return std::nullopt;
        // moving each factor of b leftwards past the later factors of a
        long parity = 0;
        long a_tail = 0;
        for (std::size_t i = arity(); i-- > 0;) {
            long db = static_cast<long>(b.exponents[i]) * pres_.generators[i].degree;
            parity += (db % 2) * (a_tail % 2);
            a_tail += static_cast<long>(a.exponents[i]) * pres_.generators[i].degree;
        }
        if (parity % 2 != 0)
            coeff = -coeff;
        coeff = ring_.reduce(coeff);
        if (coeff == 0)
            return std::nullopt;
        return std::make_pair(coeff, out);
    }

    Element multiply(const Element& a, const Element& b) const
    {
        Element out;
        for (const auto& [ma, ca] : a.terms)
            for (const auto& [mb, cb] : b.terms)
                if (auto p = multiply(ma, mb))
                    add_term(out, p->second, ring_.mul(ring_.mul(ca, cb), p->first));
        return out;
    }

    Element add(const Element& a, const Element& b) const
    {
        Element out = a;
        for (const auto& [m, c] : b.terms)
            add_term(out, m, c);
        return out;
    }

    Element scale(const Element& a, const Scalar& c) const
    {
        Element out;
        for (const auto& [m, x] : a.terms)
            add_term(out, m, ring_.mul(x, c));
        return out;
    }

    Element subtract(const Element& a, const Element& b) const { return add(a, scale(b, -1)); }

    Element pow(const Element& a, int k) const
    {
        Element out = unit();
        for (int i = 0; i < k; ++i)
            out = multiply(out, a);
        return out;
    }

    void add_term(Element& e, const Monomial& m, const Scalar& c) const
    {
        check(m);
        Scalar v = ring_.reduce(c);
        if (v == 0)
            return;
        auto it = e.terms.find(m);
        if (it == e.terms.end()) {
            e.terms.emplace(m, v);
            return;
        }
        it->second = ring_.add(it->second, v);
        if (it->second == 0)
            e.terms.erase(it);
    }

    /// Normal-form monomials of degree d in descending lexicographic order.
    std::vector<Monomial> basis_in_degree(int d) const
    {
        std::vector<Monomial> out;
        if (d < 0)
            return out;
        Monomial cur = unit_monomial();
        enumerate(0, d, cur, out);
        return out;
    }

    std::string render(const Monomial& m) const
    {
        check(m);
        std::string s;
        for (std::size_t i = 0; i < arity(); ++i) {
            int e = m.exponents[i];
            if (e == 0)
                continue;
            const auto& g = pres_.generators[i];
            if (!s.empty())
                s += "*";
            s += g.name;
            if (g.kind == GeneratorKind::DividedPower) {
                if (e > 1)
                    s += "[" + std::to_string(e) + "]";
            } else if (e > 1) {
                s += "^" + std::to_string(e);
            }
        }
        return s.empty() ? "1" : s;
    }

    /// Canonical text: terms in monomial order, non-unit coefficients as `(c)·m`.
    std::string render(const Element& e) const
    {
        if (e.is_zero())
            return "0";
        std::string s;
        bool first = true;
        for (const auto& [m, c] : e.terms) {
            bool neg = c < 0;
            Scalar a = neg ? Scalar(-c) : c;
            if (first)
                s += neg ? "-" : "";
            else
                s += neg ? " - " : " + ";
            first = false;
            if (m.is_unit())
                s += a.get_str();
            else if (a == 1)
                s += render(m);
            else
                s += "(" + a.get_str() + ")·" + render(m);
        }
        return s;
    }

    using AliasTable = std::map<std::string, Element>;

    /**
     * Parses the monomial grammar:
     *   expr   := [sign] term { sign term }
     *   term   := coeff [ ('*' | '·') factors ] | factors
     *   coeff  := INT [ '/' INT ] | '(' [sign] INT [ '/' INT ] ')'
     *   factor := NAME [ '^' INT | '[' INT ']' ]
     * NAME is a generator or an alias; `g[k]` is the k-th divided power.
     */
    Element parse(const std::string& text, const AliasTable* aliases = nullptr) const
    {
        Parser p{*this, text, aliases};
        return p.run();
    }

    void check(const Monomial& m) const
    {
        if (m.exponents.size() != arity())
            throw AlgebraError("presentation mismatch: monomial has " + std::to_string(m.exponents.size())
                               + " exponents, algebra has " + std::to_string(arity()) + " generators");
    }

    void check(const Element& e) const
    {
        for (const auto& [m, c] : e.terms)
            check(m);
    }

private:
    void enumerate(std::size_t i, int remaining, Monomial& cur, std::vector<Monomial>& out) const
    {
        if (i == arity()) {
            if (remaining == 0)
                out.push_back(cur);
            return;
        }
        const auto& g = pres_.generators[i];
        int maxe = remaining / g.degree;
        if (g.kind == GeneratorKind::Exterior)
            maxe = std::min(maxe, 1);
        if (g.kind == GeneratorKind::Truncated)
            maxe = std::min(maxe, g.height - 1);
        for (int e = maxe; e >= 0; --e) {
            cur.exponents[i] = e;
            enumerate(i + 1, remaining - e * g.degree, cur, out);
        }
        cur.exponents[i] = 0;
    }

    struct Parser {
        const Algebra& alg;
        const std::string& s;
        const AliasTable* aliases;
        std::size_t pos = 0;

        [[noreturn]] void fail(const std::string& msg) const { throw ElementParseError(msg, pos); }

        void skip()
        {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
                ++pos;
        }
        bool at_end()
        {
            skip();
            return pos >= s.size();
        }
        bool accept(const std::string& tok)
        {
            skip();
            if (s.compare(pos, tok.size(), tok) == 0) {
                pos += tok.size();
                return true;
            }
            return false;
        }
        bool peek_digit()
        {
            skip();
            return pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]));
        }
        bool peek_name()
        {
            skip();
            return pos < s.size() && (std::isalpha(static_cast<unsigned char>(s[pos])) || s[pos] == '_');
        }
        mpz_class integer()
        {
            skip();
            std::size_t start = pos;
            while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
                ++pos;
            if (start == pos)
                fail("expected integer");
            return mpz_class(s.substr(start, pos - start));
        }
        std::string name()
        {
            skip();
            std::size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                ++pos;
            if (start == pos)
                fail("expected generator name");
            return s.substr(start, pos - start);
        }
        Scalar rational()
        {
            mpz_class num = integer();
            mpz_class den = 1;
            if (accept("/")) {
                den = integer();
                if (den == 0)
                    fail("zero denominator");
            }
            Scalar q(num, den);
            q.canonicalize();
            return q;
        }
        Scalar coefficient()
        {
            if (accept("(")) {
                bool neg = false;
                if (accept("-"))
                    neg = true;
                else
                    accept("+");
                Scalar q = rational();
                if (!accept(")"))
                    fail("expected ')'");
                return neg ? Scalar(-q) : q;
            }
            return rational();
        }
        Element factor()
        {
            std::size_t start = pos;
            std::string n = name();
            auto idx = alg.pres_.index_of(n);
            if (!idx) {
                if (aliases) {
                    auto it = aliases->find(n);
                    if (it != aliases->end()) {
                        if (accept("^")) {
                            mpz_class e = integer();
                            return alg.pow(it->second, static_cast<int>(e.get_si()));
                        }
                        return it->second;
                    }
                }
                pos = start;
                fail("unknown generator '" + n + "'");
            }
            const auto& g = alg.pres_.generators[*idx];
            if (accept("[")) {
                if (g.kind != GeneratorKind::DividedPower) {
                    pos = start;
                    fail("'" + n + "[k]' needs a divided-power generator");
                }
                mpz_class k = integer();
                if (!accept("]"))
                    fail("expected ']'");
                return alg.power_index(*idx, static_cast<int>(k.get_si()));
            }
            if (accept("^")) {
                mpz_class e = integer();
                if (g.kind == GeneratorKind::DividedPower)
                    return alg.pow(alg.generator(*idx), static_cast<int>(e.get_si()));
                return alg.power_index(*idx, static_cast<int>(e.get_si()));
            }
            return alg.generator(*idx);
        }
        Element factors()
        {
            Element e = factor();
            while (accept("*"))
                e = alg.multiply(e, factor());
            return e;
        }
        Element term()
        {
            if (peek_digit() || (skip(), pos < s.size() && s[pos] == '(')) {
                Scalar c = coefficient();
                if (accept("*") || accept("·") || peek_name())
                    return alg.scale(factors(), c);
                return alg.scalar(c);
            }
            if (!peek_name())
                fail("expected term");
            return factors();
        }
        Element run()
        {
            if (at_end())
                fail("empty expression");
            Element out;
            bool neg = false;
            if (accept("-"))
                neg = true;
            else
                accept("+");
            for (;;) {
                Element t = term();
                out = alg.add(out, neg ? alg.scale(t, -1) : t);
                if (at_end())
                    break;
                if (accept("+"))
                    neg = false;
                else if (accept("-"))
                    neg = true;
                else
                    fail("expected '+' or '-'");
            }
            return out;
        }
    };

    GradedAlgebraPresentation pres_;
    Ring ring_;
};

/// Coordinates of a homogeneous element in basis_in_degree(d).
inline Vec coordinates_in(const Algebra& alg, const std::vector<Monomial>& basis, const Element& e)
{
    Vec v(basis.size());
    for (const auto& [m, c] : e.terms) {
        auto it = std::find(basis.begin(), basis.end(), m);
        if (it == basis.end())
            throw AlgebraError("element term " + alg.render(m) + " is outside the requested basis");
        v[static_cast<std::size_t>(it - basis.begin())] = c;
    }
    return v;
}

inline Element element_from(const Algebra& alg, const std::vector<Monomial>& basis, const Vec& v)
{
    Element e;
    for (std::size_t i = 0; i < basis.size(); ++i)
        alg.add_term(e, basis[i], v[i]);
    return e;
}

/**
 * Rewrites elements in terms of new generators (e.g. v = c1 - c2, w = c1).
 * The new generators span a free graded-commutative algebra (exterior for odd
 * degree, polynomial for even) mapped onto the old algebra; surjectivity is
 * checked degree by degree up to `max_degree`. Expressions are canonical:
 * the chosen preimage is reduced modulo the kernel's canonical basis.
 */
class BasisChange {
public:
    BasisChange(Algebra old_alg, std::vector<std::pair<std::string, Element>> new_gens, int max_degree)
        : old_(std::move(old_alg)), new_(make_new(old_, new_gens)), images_(), max_degree_(max_degree)
    {
        for (auto& [n, e] : new_gens)
            images_.push_back(e);
        for (int d = 0; d <= max_degree; ++d)
            solvers_.push_back(make_solver(d));
    }

    const Algebra& old_algebra() const { return old_; }
    const Algebra& new_algebra() const { return new_; }

    /// Substitutes the defining elements for the new generators.
    Element evaluate(const Element& e) const
    {
        Element out;
        for (const auto& [m, c] : e.terms) {
            Element t = old_.scalar(c);
            for (std::size_t i = 0; i < new_.arity(); ++i)
                if (m.exponents[i] > 0)
                    t = old_.multiply(t, old_.pow(images_[i], m.exponents[i]));
            out = old_.add(out, t);
        }
        return out;
    }

    Element express(const Element& e) const
    {
        std::map<int, Element> by_degree;
        for (const auto& [m, c] : e.terms)
            old_.add_term(by_degree[old_.degree(m)], m, c);
        Element out;
        for (const auto& [d, part] : by_degree) {
            if (d > max_degree_)
                throw AlgebraError("degree " + std::to_string(d) + " is outside the validated basis window");
            const auto& sv = solvers_[static_cast<std::size_t>(d)];
            Vec target = coordinates_in(old_, sv.old_basis, part);
            Vec x(sv.new_basis.size());
            for (std::size_t j = 0; j < target.size(); ++j)
                detail::axpy(old_.ring(), x, target[j], sv.right_inverse[j]);
            for (const auto& k : sv.kernel.basis_vectors()) {
                std::size_t piv = *detail::leading_index(k, k.size());
                detail::axpy(old_.ring(), x, old_.ring().neg(old_.ring().reduction_quotient(x[piv], k[piv])), k);
            }
            out = new_.add(out, element_from(new_, sv.new_basis, x));
        }
        return out;
    }

private:
    struct Solver {
        std::vector<Monomial> old_basis;
        std::vector<Monomial> new_basis;
        std::vector<Vec> right_inverse; // column j: preimage of the j-th old basis vector
        Lattice kernel;
    };

    static Algebra make_new(const Algebra& old_alg, const std::vector<std::pair<std::string, Element>>& gens)
    {
        GradedAlgebraPresentation p;
        p.description = "change of generators";
        for (const auto& [n, e] : gens) {
            auto d = old_alg.homogeneous_degree(e);
            if (!d)
                throw AlgebraError("new generator '" + n + "' must be a nonzero homogeneous element");
            p.generators.push_back(
                {n, *d, (*d % 2 != 0) ? GeneratorKind::Exterior : GeneratorKind::Polynomial, 0});
        }
        return Algebra(p, old_alg.ring());
    }

    Solver make_solver(int d) const
    {
        Solver sv;
        sv.old_basis = old_.basis_in_degree(d);
        sv.new_basis = new_.basis_in_degree(d);
        const Ring& ring = old_.ring();
        const std::size_t n = sv.old_basis.size();
        std::vector<Vec> cols;
        for (const auto& m : sv.new_basis) {
            Vec img = coordinates_in(old_, sv.old_basis, evaluate(new_.monomial(m)));
            Vec aug(n + sv.new_basis.size());
            std::copy(img.begin(), img.end(), aug.begin());
            aug[n + cols.size()] = 1;
            cols.push_back(std::move(aug));
        }
        std::size_t k = detail::column_echelon(ring, cols, n);
        bool full = k == n;
        for (std::size_t j = 0; full && j < k; ++j)
            full = cols[j][j] == 1;
        if (!full)
            throw AlgebraError("not a basis in window: new generators do not span degree " + std::to_string(d));
        for (std::size_t j = 0; j < n; ++j)
            sv.right_inverse.emplace_back(cols[j].begin() + static_cast<std::ptrdiff_t>(n), cols[j].end());
        std::vector<Vec> ker;
        for (std::size_t j = n; j < cols.size(); ++j)
            ker.emplace_back(cols[j].begin() + static_cast<std::ptrdiff_t>(n), cols[j].end());
        sv.kernel = Lattice::span(ring, sv.new_basis.size(), ker);
        return sv;
    }

    Algebra old_;
    Algebra new_;
    std::vector<Element> images_;
    int max_degree_;
    std::vector<Solver> solvers_;
};

} // namespace loopss
