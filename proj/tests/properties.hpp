#pragma once
// Randomized property checks with fixed seeds. Each returns a list of
// failure descriptions; empty means the property held on every trial.

#include "loopss/loopss.hpp"
#include "oracles.hpp"

#include <random>
#include <string>
#include <vector>

namespace props {

using namespace loopss;
using Failures = std::vector<std::string>;

inline oracle::IntMatrix to_int(const ExactMatrix& m)
{
    oracle::IntMatrix out(m.rows(), std::vector<mpz_class>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out[i][j] = m.at(i, j).get_num();
    return out;
}

inline int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Ring random_ring(std::mt19937_64& rng)
{
    switch (uniform(rng, 0, 4)) {
    case 0: return Ring::integers();
    case 1: return Ring::rationals();
    case 2: return Ring::prime_field(2);
    case 3: return Ring::prime_field(3);
    default: return Ring::prime_field(5);
    }
}

inline Element random_homogeneous(std::mt19937_64& rng, const Algebra& alg, int degree)
{
    Element e;
    for (const auto& m : alg.basis_in_degree(degree))
        if (uniform(rng, 0, 2) > 0)
            alg.add_term(e, m, uniform(rng, -3, 3));
    return e;
}

// ---------------------------------------------------------------------------

inline GradedAlgebraPresentation random_presentation(std::mt19937_64& rng)
{
    GradedAlgebraPresentation p;
    int count = uniform(rng, 1, 4);
    for (int i = 0; i < count; ++i) {
        Generator g;
        g.name = "g" + std::to_string(i);
        switch (uniform(rng, 0, 3)) {
        case 0: g.kind = GeneratorKind::Exterior; g.degree = 2 * uniform(rng, 0, 2) + 1; break;
        case 1: g.kind = GeneratorKind::Polynomial; g.degree = 2 * uniform(rng, 1, 2); break;
        case 2:
            g.kind = GeneratorKind::Truncated;
            g.degree = 2 * uniform(rng, 1, 2);
            g.height = uniform(rng, 2, 4);
            break;
        default: g.kind = GeneratorKind::DividedPower; g.degree = 2 * uniform(rng, 1, 2); break;
        }
        p.generators.push_back(g);
    }
    return p;
}

/// Associativity, graded commutativity, distributivity, the divided power
/// product rule and basis counts against the Poincare series.
inline Failures algebra_laws(std::uint64_t seed, int trials)
{
    Failures f;
    std::mt19937_64 rng(seed);
    for (int t = 0; t < trials; ++t) {
        Ring ring = random_ring(rng);
        auto pres = random_presentation(rng);
        Algebra alg(pres, ring);
        std::string ctx = "trial " + std::to_string(t) + " over " + ring.name() + ": ";
        int da = uniform(rng, 0, 6), db = uniform(rng, 0, 6), dc = uniform(rng, 0, 6);
        Element a = random_homogeneous(rng, alg, da), b = random_homogeneous(rng, alg, db),
                c = random_homogeneous(rng, alg, dc);
        if (alg.multiply(alg.multiply(a, b), c) != alg.multiply(a, alg.multiply(b, c)))
            f.push_back(ctx + "associativity fails for " + alg.render(a) + ", " + alg.render(b) + ", "
                        + alg.render(c));
        Element ba = alg.multiply(b, a);
        if ((da * db) % 2)
            ba = alg.scale(ba, -1);
        if (alg.multiply(a, b) != ba)
            f.push_back(ctx + "graded commutativity fails for " + alg.render(a) + ", " + alg.render(b));
        Element bc = random_homogeneous(rng, alg, db);
        if (alg.multiply(a, alg.add(b, bc)) != alg.add(alg.multiply(a, b), alg.multiply(a, bc)))
            f.push_back(ctx + "distributivity fails");
        if (alg.multiply(alg.unit(), a) != a)
            f.push_back(ctx + "unit law fails");

        std::vector<std::pair<int, int>> factors;
        for (std::size_t i = 0; i < pres.generators.size(); ++i) {
            const auto& g = pres.generators[i];
            int maxe = g.kind == GeneratorKind::Exterior ? 1 : g.kind == GeneratorKind::Truncated ? g.height - 1 : -1;
            factors.push_back({g.degree, maxe});
            if (g.kind == GeneratorKind::DividedPower) {
                int x = uniform(rng, 0, 3), y = uniform(rng, 0, 3);
                Element lhs = alg.multiply(alg.power_index(i, x), alg.power_index(i, y));
                Element rhs = alg.scale(alg.power_index(i, x + y), Scalar(binomial(x + y, x)));
                if (lhs != rhs)
                    f.push_back(ctx + "divided power rule fails for " + std::to_string(x) + "," + std::to_string(y));
            }
        }
        auto series = oracle::poincare_series(factors, 12);
        for (int d = 0; d <= 12; ++d)
            if (static_cast<long>(alg.basis_in_degree(d).size()) != series[static_cast<std::size_t>(d)])
                f.push_back(ctx + "basis count mismatch in degree " + std::to_string(d));
    }
    return f;
}

// ---------------------------------------------------------------------------

/**
 * Koszul-type scenario: exterior fiber generators of one odd degree 2k-1
 * transgressing on page 2k to random base elements. Returns nullopt if the
 * window would exceed `max_basis` E2 basis elements.
 */
inline std::optional<Scenario> random_koszul(std::mt19937_64& rng, std::size_t max_basis = 40)
{
    Scenario s;
    s.ring = random_ring(rng);
    int k = uniform(rng, 1, 2);
    int nf = uniform(rng, 1, 3), nb = uniform(rng, 1, 2);
    for (int i = 0; i < nf; ++i)
        s.fiber.generators.push_back({"u" + std::to_string(i + 1), 2 * k - 1, GeneratorKind::Exterior, 0});
    bool finite = true;
    for (int i = 0; i < nb; ++i) {
        if (uniform(rng, 0, 3) == 0) {
            s.base.generators.push_back({"x" + std::to_string(i + 1), 2, GeneratorKind::Polynomial, 0});
            finite = false;
        } else {
            s.base.generators.push_back({"x" + std::to_string(i + 1), 2, GeneratorKind::Truncated, uniform(rng, 2, 4)});
        }
    }
    s.window.q_max = nf * (2 * k - 1);
    s.window.p_max = finite ? *s.base.top_degree() : 6;
    E2Layout layout(s);
    std::size_t total = 0;
    for (std::size_t i = 0; i < layout.cell_count(); ++i)
        total += layout.rank(layout.cell_at(i));
    if (total > max_basis)
        return std::nullopt;
    Algebra base(s.base, s.ring);
    const Algebra& alg = layout.algebra();
    for (int i = 0; i < nf; ++i) {
        Element img_base = random_homogeneous(rng, base, 2 * k);
        // lift into the combined algebra: fiber exponents first
        Element img;
        for (const auto& [m, c] : img_base.terms) {
            Monomial full = alg.unit_monomial();
            for (std::size_t j = 0; j < m.exponents.size(); ++j)
                full.exponents[static_cast<std::size_t>(nf) + j] = m.exponents[j];
            alg.add_term(img, full, c);
        }
        DifferentialAssignment a;
        a.page = 2 * k;
        a.source = alg.generator(static_cast<std::size_t>(i));
        a.image = img;
        a.explicit_zero = img.is_zero();
        s.assignments.push_back(a);
    }
    return s;
}

/// Koszul differential computed directly: d(u_S b) = sum_j (-1)^(j-1) u_{S-j} d(u_j) b.
inline Element naive_koszul_d(const Scenario& s, const Algebra& alg, const Monomial& m)
{
    std::size_t nf = s.fiber.generators.size();
    Element out;
    int seen = 0;
    for (std::size_t i = 0; i < nf; ++i) {
        if (m.exponents[i] == 0)
            continue;
        Monomial rest = m;
        rest.exponents[i] = 0;
        Element term = alg.multiply(alg.monomial(rest), s.assignments[i].image);
        out = alg.add(out, seen % 2 ? alg.scale(term, -1) : term);
        ++seen;
    }
    return out;
}

/// turn_page against whole-window homology of the first nonzero page,
/// computed from naive matrices with ranks and determinantal divisors.
inline Failures turn_page_oracle(std::uint64_t seed, int trials)
{
    Failures f;
    std::mt19937_64 rng(seed);
    int done = 0;
    while (done < trials) {
        auto maybe = random_koszul(rng);
        if (!maybe)
            continue;
        ++done;
        const Scenario& s = *maybe;
        Run run = run_to_limit(s);
        const E2Layout& layout = *run.layout;
        const Algebra& alg = layout.algebra();
        int r = s.assignments.front().page;
        std::string ctx = "trial " + std::to_string(done) + " over " + s.ring.name() + ": ";
        int after = std::min(r + 1, run.last_page());
        for (int k = 2; k < std::min(r, after + 1); ++k)
            for (std::size_t i = 0; i < layout.cell_count(); ++i) {
                const Cell& c = run.page(k).cells[i];
                if (c.cycles.rank() != layout.rank(layout.cell_at(i)) || c.boundaries.rank() != 0)
                    f.push_back(ctx + "page " + std::to_string(k) + " differs from E_2");
            }
        auto naive = [&](Bidegree b) {
            Bidegree t{b.p + r, b.q - r + 1};
            const auto& basis = layout.basis(b);
            oracle::IntMatrix m(layout.rank(t), std::vector<mpz_class>(basis.size()));
            for (std::size_t j = 0; j < basis.size(); ++j) {
                Vec col = layout.coordinates(t, naive_koszul_d(s, alg, basis[j]));
                for (std::size_t i = 0; i < col.size(); ++i)
                    m[i][j] = col[i].get_num();
            }
            return m;
        };
        unsigned long p = mpz_class(s.ring.characteristic()).get_ui();
        for (std::size_t i = 0; i < layout.cell_count(); ++i) {
            Bidegree b = layout.cell_at(i);
            Bidegree src{b.p - r, b.q + r - 1}, tgt{b.p + r, b.q - r + 1};
            auto known = [&](Bidegree x) { return layout.in_window(x) || layout.known_zero(x); };
            if (!known(src) || !known(tgt))
                continue;
            std::size_t dim = layout.rank(b);
            std::size_t rout = layout.in_window(tgt) ? oracle::rank(naive(b), p) : 0;
            std::size_t rin = 0;
            std::vector<mpz_class> torsion;
            if (layout.in_window(src)) {
                auto in = naive(src);
                rin = oracle::rank(in, p);
                if (s.ring.is_integers())
                    torsion = oracle::torsion_of_cokernel(in);
            }
            SubquotientInvariants want{dim - rout - rin, torsion};
            auto got = cell_invariants(run.page(after).at(layout, b));
            if (!(got.free_rank == want.free_rank && got.torsion == want.torsion))
                f.push_back(ctx + "E_" + std::to_string(r + 1) + b.to_string() + " is " + got.to_string()
                            + ", oracle says " + want.to_string());
        }
    }
    return f;
}

// ---------------------------------------------------------------------------

/// subquotient(C, B) against determinantal divisors and Hom counts, with
/// C = A Z^k (A injective, entries in [-4,4]) and B = A R.
inline Failures subquotient_oracle(std::uint64_t seed, int trials)
{
    Failures f;
    std::mt19937_64 rng(seed);
    int done = 0;
    while (done < trials) {
        std::size_t n = static_cast<std::size_t>(uniform(rng, 1, 3));
        std::size_t k = static_cast<std::size_t>(uniform(rng, 1, static_cast<int>(n)));
        std::size_t j = static_cast<std::size_t>(uniform(rng, 0, 3));
        oracle::IntMatrix a(n, std::vector<mpz_class>(k)), rel(k, std::vector<mpz_class>(j));
        for (auto& row : a)
            for (auto& x : row)
                x = uniform(rng, -4, 4);
        for (auto& row : rel)
            for (auto& x : row)
                x = uniform(rng, -4, 4);
        if (oracle::rank(a) != k)
            continue;
        ++done;
        Ring z = Ring::integers();
        std::vector<Vec> cgens, bgens;
        for (std::size_t c = 0; c < k; ++c) {
            Vec v(n);
            for (std::size_t i = 0; i < n; ++i)
                v[i] = Scalar(a[i][c]);
            cgens.push_back(v);
        }
        if (k >= 2) { // a redundant generator must not matter
            Vec extra(n);
            for (std::size_t i = 0; i < n; ++i)
                extra[i] = cgens[0][i] + cgens[1][i];
            cgens.push_back(extra);
        }
        for (std::size_t c = 0; c < j; ++c) {
            Vec v(n, 0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t t = 0; t < k; ++t)
                    v[i] += Scalar(a[i][t] * rel[t][c]);
            bgens.push_back(v);
        }
        auto got = subquotient(Lattice::span(z, n, cgens), Lattice::span(z, n, bgens));
        std::size_t rk = j ? oracle::rank(rel) : 0;
        SubquotientInvariants want{k - rk, j ? oracle::torsion_of_cokernel(rel) : std::vector<mpz_class>{}};
        if (!(got.free_rank == want.free_rank && got.torsion == want.torsion))
            f.push_back("trial " + std::to_string(done) + ": subquotient " + got.to_string() + ", divisors say "
                        + want.to_string());
        oracle::IntMatrix rel_rows; // relations as rows for hom counting
        for (std::size_t c = 0; c < j; ++c) {
            std::vector<mpz_class> row(k);
            for (std::size_t t = 0; t < k; ++t)
                row[t] = rel[t][c];
            rel_rows.push_back(row);
        }
        for (long m = 2; m <= 6; ++m)
            if (oracle::hom_count(k, rel_rows, m) != oracle::predicted_hom_count(got.free_rank, got.torsion, m))
                f.push_back("trial " + std::to_string(done) + ": Hom count mismatch mod " + std::to_string(m));
    }
    return f;
}

// ---------------------------------------------------------------------------

inline std::vector<Scenario> leibniz_corpus(std::uint64_t seed)
{
    std::vector<Scenario> out;
    for (int n = 1; n <= 3; ++n) {
        out.push_back(path_cpn_diag(n));
        out.push_back(pair_with_morphism(n));
    }
    out.push_back(path_cpn_diag(2, Ring::prime_field(3)));
    out.push_back(free_loop_rank_one(1, 3));
    out.push_back(free_loop_rank_one(2, 2));
    std::mt19937_64 rng(seed);
    while (out.size() < 16)
        if (auto s = random_koszul(rng, 60))
            out.push_back(*s);
    return out;
}

/// Leibniz identity on random monomial pairs, and d o d = 0 plus cycles to
/// cycles on every computed page.
inline Failures leibniz_and_dd(std::uint64_t seed)
{
    Failures f;
    std::mt19937_64 rng(seed);
    int idx = 0;
    for (const Scenario& s0 : leibniz_corpus(seed)) {
        ++idx;
        DocumentRun doc = run_document(s0);
        const Run& run = doc.run;
        const Scenario& s = *run.scenario;
        const E2Layout& layout = *run.layout;
        const Algebra& alg = layout.algebra();
        std::string ctx = "scenario " + std::to_string(idx) + ": ";
        for (const Page& page : run.pages) {
            int r = page.index;
            Derivation d(s, layout, r);
            for (int t = 0; t < 12; ++t) {
                Bidegree b1 = layout.cell_at(static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(layout.cell_count()) - 1)));
                Bidegree b2 = layout.cell_at(static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(layout.cell_count()) - 1)));
                const auto& B1 = layout.basis(b1);
                const auto& B2 = layout.basis(b2);
                if (B1.empty() || B2.empty())
                    continue;
                const Monomial& a = B1[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(B1.size()) - 1))];
                const Monomial& b = B2[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(B2.size()) - 1))];
                Element ea = alg.monomial(a), eb = alg.monomial(b);
                Element lhs = d.apply(alg.multiply(ea, eb));
                Element second = alg.multiply(ea, d.apply(eb));
                if (alg.degree(a) % 2)
                    second = alg.scale(second, -1);
                Element rhs = alg.add(alg.multiply(d.apply(ea), eb), second);
                if (lhs != rhs)
                    f.push_back(ctx + "Leibniz fails on page " + std::to_string(r) + " for " + alg.render(a) + " * "
                                + alg.render(b));
            }
            if (page.differentials.empty())
                continue;
            for (std::size_t i = 0; i < layout.cell_count(); ++i) {
                Bidegree b = layout.cell_at(i);
                Bidegree t{b.p + r, b.q - r + 1}, t2{b.p + 2 * r, b.q - 2 * r + 2};
                if (!layout.in_window(t))
                    continue;
                ExactMatrix dz = image_of_cycles(page, layout, b);
                for (const auto& col : dz.columns())
                    if (!page.at(layout, t).cycles.contains(col))
                        f.push_back(ctx + "d_" + std::to_string(r) + " sends a cycle of " + b.to_string()
                                    + " outside the cycles");
                if (!layout.in_window(t2))
                    continue;
                ExactMatrix ddz = page.differentials.at(layout.slot(t)) * dz;
                for (const auto& col : ddz.columns())
                    if (!page.at(layout, t2).boundaries.contains(col))
                        f.push_back(ctx + "d o d != 0 on page " + std::to_string(r) + " from " + b.to_string());
            }
        }
    }
    return f;
}

// ---------------------------------------------------------------------------

inline Failures naturality_pair()
{
    Failures f;
    for (const Ring& ring : {Ring::integers(), Ring::prime_field(2), Ring::prime_field(3), Ring::rationals()})
        for (int n = 1; n <= 3; ++n) {
            DocumentRun doc = run_document(pair_with_morphism(n, ring));
            for (const auto& v : doc.naturality)
                f.push_back("n=" + std::to_string(n) + " over " + ring.name() + ": page " + std::to_string(v.page)
                            + " cell " + v.cell.to_string() + ": " + v.detail);
            // the identity on the path fibration is natural too
            auto src = doc.source_run;
            auto id = FibrationMorphism::identity(src->layout);
            for (const auto& v : check_naturality(*src, *src, id))
                f.push_back("identity, n=" + std::to_string(n) + ": " + v.detail);
        }
    return f;
}

inline std::string report_for(const Scenario& s, unsigned threads = 1)
{
    std::string text = serialize_scenario(s);
    Scenario parsed = parse_scenario(text);
    RunOptions o;
    o.threads = threads;
    DocumentRun doc = run_document(parsed, o);
    return report_text(build_report(doc, text, parse_page_list("all", doc.run.last_page())));
}

/// Byte-identical reports across runs and thread counts; JSON closure.
inline Failures report_determinism()
{
    Failures f;
    std::vector<Scenario> corpus = {pair_with_morphism(2), path_cpn_diag(2), free_loop_rank_one(1, 3),
                                    pair_with_morphism(3, Ring::prime_field(2))};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::string a = report_for(corpus[i]), b = report_for(corpus[i]), c = report_for(corpus[i], 3);
        if (a != b)
            f.push_back("scenario " + std::to_string(i) + ": two runs differ");
        if (a != c)
            f.push_back("scenario " + std::to_string(i) + ": 3 threads differ from 1");
        RunReport rep = parse_report(a);
        if (report_text(rep) != a || parse_report(render_json(rep, std::nullopt)) != rep)
            f.push_back("scenario " + std::to_string(i) + ": JSON closure fails");
    }
    return f;
}

/// Shuffles generator order inside every presentation of a scenario document.
inline std::string permute_generators(const std::string& text, std::mt19937_64& rng)
{
    auto j = nlohmann::ordered_json::parse(text);
    std::function<void(nlohmann::ordered_json&)> walk = [&](nlohmann::ordered_json& doc) {
        for (const char* part : {"fiber", "base"}) {
            auto& gens = doc[part]["generators"];
            std::vector<nlohmann::ordered_json> v(gens.begin(), gens.end());
            std::shuffle(v.begin(), v.end(), rng);
            gens = v;
        }
        if (doc.contains("source"))
            walk(doc["source"]);
    };
    walk(j);
    return j.dump(2);
}

inline Failures permutation_invariance(std::uint64_t seed)
{
    Failures f;
    std::mt19937_64 rng(seed);
    std::vector<Scenario> corpus = {pair_with_morphism(1), pair_with_morphism(2), pair_with_morphism(3),
                                    free_loop_rank_one(1, 2), free_loop_rank_one(2, 2), free_loop_rank_one(1, 3),
                                    pair_with_morphism(2, Ring::prime_field(5))};
    for (int t = 0; t < 3; ++t)
        if (auto s = random_koszul(rng))
            corpus.push_back(*s);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        std::string text = serialize_scenario(corpus[i]);
        CollapseResult base = collapse_report(run_document(parse_scenario(text)).run);
        for (int t = 0; t < 3; ++t) {
            CollapseResult other = collapse_report(run_document(parse_scenario(permute_generators(text, rng))).run);
            if (base.collapses != other.collapses || base.page != other.page || base.source != other.source)
                f.push_back("scenario " + std::to_string(i) + ": collapse_report moved under a generator permutation");
        }
    }
    return f;
}

} // namespace props
