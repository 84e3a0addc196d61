#include "loopss/linalg.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace loopss;

namespace {

const Ring Z = Ring::integers();
const Ring Q = Ring::rationals();

SubquotientInvariants inv(std::size_t free, std::vector<long> torsion)
{
    SubquotientInvariants s;
    s.free_rank = free;
    for (long t : torsion)
        s.torsion.emplace_back(t);
    return s;
}

} // namespace

TEST(Ring, ParsesNames)
{
    EXPECT_EQ(Ring::parse("Z"), Z);
    EXPECT_EQ(Ring::parse("Q"), Q);
    EXPECT_EQ(Ring::parse("F_5").characteristic(), 5);
    EXPECT_EQ(Ring::parse("GF(7)").name(), "F_7");
    EXPECT_THROW(Ring::parse("F_6"), std::invalid_argument);
    EXPECT_THROW(Ring::parse("R"), std::invalid_argument);
}

TEST(Ring, PrimeFieldArithmetic)
{
    Ring f = Ring::prime_field(5);
    EXPECT_EQ(f.reduce(-1), 4);
    EXPECT_EQ(f.mul(3, 4), 2);
    EXPECT_EQ(f.inverse(2), 3);
    EXPECT_FALSE(Z.is_unit(2));
    EXPECT_TRUE(Z.is_unit(-1));
}

TEST(Hermite, TwoByTwoExample)
{
    auto m = ExactMatrix::from_columns(Z, 2, {{2, 0}, {3, 3}});
    auto h = hermite_normal_form(m);
    EXPECT_EQ(h, ExactMatrix::from_columns(Z, 2, {{1, 3}, {0, 6}}));
}

TEST(Hermite, IsCanonicalForTheSpan)
{
    auto a = ExactMatrix::from_columns(Z, 3, {{4, 2, 0}, {0, 6, 3}, {2, 1, 1}});
    auto b = ExactMatrix::from_columns(Z, 3, {{2, 1, 1}, {4, 2, 0}, {2, 7, 4}, {0, 6, 3}});
    EXPECT_EQ(hermite_normal_form(a), hermite_normal_form(b));
}

TEST(Hermite, RejectsFields) { EXPECT_THROW(hermite_normal_form(ExactMatrix::identity(Q, 2)), RingMismatch); }

TEST(Smith, TextbookExample)
{
    auto a = ExactMatrix::from_rows(Z, {{2, 4, 4}, {-6, 6, 12}, {10, -4, -16}});
    EXPECT_EQ(smith_invariants(a), inv(0, {2, 6, 12}));
}

TEST(Smith, CokernelWithFreePart)
{
    // Z^3 / <(2,0,0), (0,3,0)> = Z + Z/6
    auto a = ExactMatrix::from_columns(Z, 3, {{2, 0, 0}, {0, 3, 0}});
    EXPECT_EQ(smith_invariants(a), inv(1, {6}));
}

TEST(Smith, LeftInverseCarriesCokernelGenerators)
{
    auto m = ExactMatrix::from_columns(Z, 2, {{2, 4}, {6, 6}});
    auto d = smith_decomposition(m);
    ASSERT_EQ(d.diagonal.size(), 2u);
    EXPECT_EQ(d.diagonal[0], 2);
    EXPECT_EQ(d.diagonal[1], 6);
    // columns of U^{-1} span Z^2
    EXPECT_EQ(Lattice::span(d.left_inverse), Lattice::full(Z, 2));
}

TEST(Smith, AgreesWithDeterminantalDivisors)
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> e(-6, 6), dim(1, 4);
    for (int t = 0; t < 150; ++t) {
        std::size_t r = static_cast<std::size_t>(dim(rng)), c = static_cast<std::size_t>(dim(rng));
        std::vector<std::vector<Scalar>> rows(r, std::vector<Scalar>(c));
        oracle::IntMatrix im(r, std::vector<mpz_class>(c));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                int v = e(rng);
                rows[i][j] = v;
                im[i][j] = v;
            }
        auto got = smith_invariants(ExactMatrix::from_rows(Z, rows));
        auto factors = oracle::invariant_factors(im);
        SubquotientInvariants want;
        want.free_rank = r - factors.size();
        for (const auto& f : factors)
            if (f != 1)
                want.torsion.push_back(f);
        EXPECT_EQ(got, want) << "trial " << t;
    }
}

TEST(Kernel, OfIntegerMatrix)
{
    auto m = ExactMatrix::from_rows(Z, {{1, 2, 3}, {2, 4, 6}});
    Lattice k = kernel(m);
    EXPECT_EQ(k.rank(), 2u);
    for (const auto& v : k.basis_vectors())
        EXPECT_TRUE(is_zero(m.apply(v)));
    // saturated: (1,1,-1) is in the kernel
    EXPECT_TRUE(k.contains(Vec{1, 1, -1}));
}

TEST(Preimage, IntegerLattice)
{
    auto m = ExactMatrix::from_rows(Z, {{2, 0}, {0, 1}});
    Lattice target = Lattice::span(Z, 2, {{4, 0}, {0, 3}});
    Lattice pre = lattice_preimage(m, target);
    EXPECT_EQ(pre, Lattice::span(Z, 2, {{2, 0}, {0, 3}}));
    EXPECT_THROW(lattice_preimage(m, Lattice::full(Z, 3)), std::invalid_argument);
}

TEST(Lattice, MembershipAndSum)
{
    Lattice a = Lattice::span(Z, 2, {{2, 0}});
    Lattice b = Lattice::span(Z, 2, {{0, 3}});
    EXPECT_FALSE(a.contains(Vec{1, 0}));
    EXPECT_TRUE((a + b).contains(Vec{2, 3}));
    EXPECT_EQ(*(a + b).coordinates(Vec{4, 6}), (Vec{2, 2}));
    EXPECT_TRUE((a + b).contains(a));
}

TEST(Subquotient, Examples)
{
    EXPECT_EQ(subquotient(Lattice::full(Z, 2), Lattice::span(Z, 2, {{3, 0}})), inv(1, {3}));
    EXPECT_EQ(subquotient(Lattice::full(Z, 1), Lattice::full(Z, 1)), inv(0, {}));
    EXPECT_EQ(subquotient(Lattice::full(Q, 3), Lattice::span(Q, 3, {{3, 0, 0}})), inv(2, {}));
    EXPECT_EQ(inv(1, {2}).to_string(), "1+T(2)");
    EXPECT_EQ(inv(0, {3}).to_string(), "T(3)");
    EXPECT_EQ(inv(0, {}).to_string(), "0");
}

TEST(Subquotient, RejectsBoundariesOutsideCycles)
{
    EXPECT_THROW(subquotient(Lattice::span(Z, 2, {{2, 0}}), Lattice::span(Z, 2, {{1, 0}})), ContainmentError);
}

TEST(Subquotient, GeneratorsRepresentTheQuotient)
{
    Lattice c = Lattice::full(Z, 2);
    Lattice b = Lattice::span(Z, 2, {{2, 2}});
    auto dec = subquotient_decomposition(c, b);
    EXPECT_EQ(dec.invariants, inv(1, {2}));
    ASSERT_EQ(dec.torsion_generators.size(), 1u);
    Vec t = dec.torsion_generators[0];
    EXPECT_FALSE(b.contains(t));
    Vec twice{2 * t[0], 2 * t[1]};
    EXPECT_TRUE(b.contains(twice));
}
