#pragma once

#include <gmpxx.h>

#include <compare>
#include <stdexcept>
#include <string>

namespace loopss {

/// Exact scalar. Over Z and F_p the denominator is always 1.
using Scalar = mpq_class;

/// Thrown when an operation receives data over the wrong coefficient ring.
class RingMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline bool is_probable_prime(const mpz_class& p)
{
    return p >= 2 && mpz_probab_prime_p(p.get_mpz_t(), 30) > 0;
}

/**
 * Coefficient ring: the integers, the rationals, or a prime field F_p.
 * All scalars handed out by a Ring are in canonical form (F_p residues in
 * [0, p), rationals in lowest terms).
 */
class Ring {
public:
    enum class Kind { Integers, Rationals, PrimeField };

    static Ring integers() { return Ring(Kind::Integers, 0); }
    static Ring rationals() { return Ring(Kind::Rationals, 0); }
    static Ring prime_field(const mpz_class& p)
    {
        if (!is_probable_prime(p))
            throw std::invalid_argument("F_p requires a prime modulus, got " + p.get_str());
        return Ring(Kind::PrimeField, p);
    }

    /// Parses "Z", "Q" or "F_p" (also "F<p>" and "GF(p)").
    static Ring parse(const std::string& text)
    {
        if (text == "Z")
            return integers();
        if (text == "Q")
            return rationals();
        std::string digits;
        if (text.rfind("F_", 0) == 0)
            digits = text.substr(2);
        else if (text.rfind("GF(", 0) == 0 && text.back() == ')')
            digits = text.substr(3, text.size() - 4);
        else if (text.size() > 1 && text[0] == 'F')
            digits = text.substr(1);
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("unknown coefficient ring '" + text + "'");
        return prime_field(mpz_class(digits));
    }

    Kind kind() const { return kind_; }
    const mpz_class& characteristic() const { return char_; }
    bool is_field() const { return kind_ != Kind::Integers; }
    bool is_integers() const { return kind_ == Kind::Integers; }

    std::string name() const
    {
        switch (kind_) {
        case Kind::Integers:
            return "Z";
        case Kind::Rationals:
            return "Q";
        case Kind::PrimeField:
            return "F_" + char_.get_str();
        }
        return "?";
    }

    Scalar reduce(Scalar x) const
    {
        x.canonicalize();
        switch (kind_) {
        case Kind::Integers:
            if (x.get_den() != 1)
                throw RingMismatch("non-integral scalar " + x.get_str() + " over Z");
            break;
        case Kind::Rationals:
            break;
        case Kind::PrimeField: {
            mpz_class num = x.get_num() % char_;
            if (x.get_den() != 1) {
                mpz_class den = x.get_den() % char_;
                if (den == 0)
                    throw RingMismatch("denominator divisible by " + char_.get_str());
                mpz_class inv;
                mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), char_.get_mpz_t());
                num = (num * inv) % char_;
            }
            if (num < 0)
                num += char_;
            x = Scalar(num);
            break;
        }
        }
        return x;
    }

    Scalar add(const Scalar& a, const Scalar& b) const { return reduce(a + b); }
    Scalar sub(const Scalar& a, const Scalar& b) const { return reduce(a - b); }
    Scalar mul(const Scalar& a, const Scalar& b) const { return reduce(a * b); }
    Scalar neg(const Scalar& a) const { return reduce(-a); }

    bool is_unit(const Scalar& a) const
    {
        if (is_field())
            return a != 0;
        return a == 1 || a == -1;
    }

    Scalar inverse(const Scalar& a) const
    {
        if (!is_unit(a))
            throw std::domain_error("scalar " + a.get_str() + " is not invertible over " + name());
        if (kind_ == Kind::PrimeField) {
            mpz_class inv;
            mpz_class num = a.get_num();
            mpz_invert(inv.get_mpz_t(), num.get_mpz_t(), char_.get_mpz_t());
            return Scalar(inv);
        }
        return reduce(1 / a);
    }

    /// Quotient used when clearing an entry against a pivot: exact over a
    /// field, floor division over Z (leaves a remainder in [0, |pivot|)).
    Scalar reduction_quotient(const Scalar& entry, const Scalar& pivot) const
    {
        if (is_field())
            return mul(entry, inverse(pivot));
        mpz_class q;
        mpz_fdiv_q(q.get_mpz_t(), entry.get_num_mpz_t(), pivot.get_num_mpz_t());
        return Scalar(q);
    }

    bool operator==(const Ring& o) const { return kind_ == o.kind_ && char_ == o.char_; }

private:
    Ring(Kind k, mpz_class p) : kind_(k), char_(std::move(p)) {}

    Kind kind_;
    mpz_class char_;
};

inline mpz_class binomial(unsigned long n, unsigned long k)
{
    mpz_class r;
    mpz_bin_uiui(r.get_mpz_t(), n, k);
    return r;
}

} // namespace loopss
