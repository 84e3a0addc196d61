#pragma once

#include "loopss/algebra.hpp"
#include "loopss/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <compare>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace loopss {

struct Bidegree {
    int p = 0;
    int q = 0;
    auto operator<=>(const Bidegree&) const = default;
    std::string to_string() const { return "(" + std::to_string(p) + "," + std::to_string(q) + ")"; }
};

/// Malformed or semantically invalid scenario input.
class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The computation contradicts itself: an assignment is not a valid
/// differential on the pages it lands on.
class ConsistencyError : public std::runtime_error {
public:
    ConsistencyError(const std::string& what, int page, std::optional<Bidegree> cell)
        : std::runtime_error(what + " [page " + std::to_string(page)
                             + (cell ? ", cell " + cell->to_string() : std::string()) + "]"),
          page(page), cell(cell)
    {
    }
    int page;
    std::optional<Bidegree> cell;
};

struct Window {
    int p_max = 0;
    int q_max = 0;
    bool operator==(const Window&) const = default;
};

struct DifferentialAssignment {
    int page = 2;
    Element source; // a generator class: g, or gamma_k(g) for divided powers
    Element image;
    bool explicit_zero = false; // the image was deliberately zero
    bool transported = false;
    bool operator==(const DifferentialAssignment&) const = default;
};

struct TargetCohomology {
    std::map<int, SubquotientInvariants> degrees; // absent degrees are zero
    bool operator==(const TargetCohomology&) const = default;

    SubquotientInvariants in_degree(int n) const
    {
        auto it = degrees.find(n);
        return it == degrees.end() ? SubquotientInvariants{} : it->second;
    }
};

struct Scenario;

/// Generator-wise map from a source scenario's E2 to this scenario's E2, plus
/// the declared class correspondences used for transport.
struct MorphismSpec {
    std::map<std::string, Element> images; // source generator name -> element of this E2
    struct Pair {
        Element source; // in the source E2
        Element target; // in this E2
        bool operator==(const Pair&) const = default;
    };
    std::vector<Pair> transport;
    bool operator==(const MorphismSpec&) const = default;
};

struct Scenario {
    Ring ring = Ring::integers();
    GradedAlgebraPresentation fiber;
    GradedAlgebraPresentation base;
    Window window;
    std::vector<DifferentialAssignment> assignments;
    std::optional<TargetCohomology> target;
    bool divided_power_leibniz = true;
    std::map<std::string, Element> aliases;
    std::vector<std::string> warnings;

    std::shared_ptr<const Scenario> source;
    std::optional<MorphismSpec> morphism;

    bool operator==(const Scenario& o) const
    {
        bool same_source = (!source && !o.source) || (source && o.source && *source == *o.source);
        return ring == o.ring && fiber == o.fiber && base == o.base && window == o.window
               && assignments == o.assignments && target == o.target
               && divided_power_leibniz == o.divided_power_leibniz && aliases == o.aliases && same_source
               && morphism == o.morphism;
    }
};

inline GradedAlgebraPresentation combined_presentation(const Scenario& s)
{
    GradedAlgebraPresentation p;
    p.description = "E2 = fiber (x) base";
    p.generators = s.fiber.generators;
    p.generators.insert(p.generators.end(), s.base.generators.begin(), s.base.generators.end());
    return p;
}

/**
 * Coordinates of the E2 term inside the window: cell (p,q) is spanned by
 * (fiber monomial of degree q) x (base monomial of degree p), fiber-major.
 */
class E2Layout {
public:
    explicit E2Layout(const Scenario& s)
        : alg_(make_algebra(s)), fiber_arity_(s.fiber.generators.size()), window_(s.window)
    {
        if (window_.p_max < 0 || window_.q_max < 0)
            throw ScenarioError("window bounds must be non-negative");
        auto top = s.base.top_degree();
        if (top && window_.p_max < *top)
            throw ScenarioError("window p_max " + std::to_string(window_.p_max)
                                + " is below the top base degree " + std::to_string(*top));
        base_covered_ = top.has_value();
        auto ftop = s.fiber.top_degree();
        fiber_covered_ = ftop && *ftop <= window_.q_max;
        Algebra fib(s.fiber, s.ring);
        Algebra bas(s.base, s.ring);
        cells_.resize(static_cast<std::size_t>((window_.p_max + 1) * (window_.q_max + 1)));
        for (int p = 0; p <= window_.p_max; ++p) {
            auto bb = bas.basis_in_degree(p);
            for (int q = 0; q <= window_.q_max; ++q) {
                auto& c = cells_[slot({p, q})];
                for (const auto& f : fib.basis_in_degree(q))
                    for (const auto& b : bb) {
                        Monomial m = f;
                        m.exponents.insert(m.exponents.end(), b.exponents.begin(), b.exponents.end());
                        c.index.emplace(m, c.basis.size());
                        c.basis.push_back(std::move(m));
                    }
            }
        }
    }

    const Algebra& algebra() const { return alg_; }
    const Ring& ring() const { return alg_.ring(); }
    const Window& window() const { return window_; }
    std::size_t fiber_arity() const { return fiber_arity_; }
    /// True when the base is finite and the window holds all of it.
    bool base_covered() const { return base_covered_; }
    /// The fiber is finite and its top degree fits below q_max.
    bool fiber_covered() const { return fiber_covered_; }

    bool in_window(Bidegree b) const
    {
        return b.p >= 0 && b.q >= 0 && b.p <= window_.p_max && b.q <= window_.q_max;
    }
    /// A cell outside the window that is known to vanish.
    bool known_zero(Bidegree b) const
    {
        return b.p < 0 || b.q < 0 || (b.p > window_.p_max && base_covered_)
               || (b.q > window_.q_max && fiber_covered_);
    }

    Bidegree bidegree(const Monomial& m) const
    {
        Bidegree b;
        const auto& gens = alg_.presentation().generators;
        for (std::size_t i = 0; i < gens.size(); ++i)
            (i < fiber_arity_ ? b.q : b.p) += m.exponents[i] * gens[i].degree;
        return b;
    }

    std::optional<Bidegree> bidegree(const Element& e) const
    {
        std::optional<Bidegree> out;
        for (const auto& [m, c] : e.terms) {
            Bidegree b = bidegree(m);
            if (out && *out != b)
                return std::nullopt;
            out = b;
        }
        return out;
    }

    const std::vector<Monomial>& basis(Bidegree b) const
    {
        static const std::vector<Monomial> empty;
        return in_window(b) ? cells_[slot(b)].basis : empty;
    }
    std::size_t rank(Bidegree b) const { return basis(b).size(); }

    Vec coordinates(Bidegree b, const Element& e) const
    {
        Vec v(rank(b));
        if (!in_window(b)) {
            if (!e.is_zero())
                throw ScenarioError("element " + alg_.render(e) + " lies outside the window at " + b.to_string());
            return v;
        }
        const auto& idx = cells_[slot(b)].index;
        for (const auto& [m, c] : e.terms) {
            auto it = idx.find(m);
            if (it == idx.end())
                throw ScenarioError("term " + alg_.render(m) + " is not in cell " + b.to_string());
            v[it->second] = c;
        }
        return v;
    }

    Element element(Bidegree b, const Vec& v) const { return element_from(alg_, basis(b), v); }

    std::size_t slot(Bidegree b) const { return static_cast<std::size_t>(b.p * (window_.q_max + 1) + b.q); }
    std::size_t cell_count() const { return cells_.size(); }
    Bidegree cell_at(std::size_t slot) const
    {
        return {static_cast<int>(slot) / (window_.q_max + 1), static_cast<int>(slot) % (window_.q_max + 1)};
    }

private:
    static Algebra make_algebra(const Scenario& s)
    {
        try {
            return Algebra(combined_presentation(s), s.ring);
        } catch (const PresentationError& e) {
            throw ScenarioError(e.what());
        }
    }

    struct CellBasis {
        std::vector<Monomial> basis;
        std::map<Monomial, std::size_t, MonomialOrder> index;
    };

    Algebra alg_;
    std::size_t fiber_arity_;
    Window window_;
    bool base_covered_ = false;
    bool fiber_covered_ = false;
    std::vector<CellBasis> cells_;
};

/// The generator index and power index (gamma_k) named by an assignment source.
inline std::pair<std::size_t, int> source_generator(const Algebra& alg, const Element& source)
{
    if (source.terms.size() != 1 || source.terms.begin()->second != 1)
        throw ScenarioError("assignment source " + alg.render(source) + " must be a single generator class");
    const Monomial& m = source.terms.begin()->first;
    std::optional<std::size_t> gen;
    for (std::size_t i = 0; i < m.exponents.size(); ++i)
        if (m.exponents[i] != 0) {
            if (gen)
                throw ScenarioError("assignment source " + alg.render(source) + " must be a single generator class");
            gen = i;
        }
    if (!gen)
        throw ScenarioError("assignment source cannot be the unit");
    int k = m.exponents[*gen];
    if (k != 1 && alg.presentation().generators[*gen].kind != GeneratorKind::DividedPower)
        throw ScenarioError("assignment source " + alg.render(source) + " must be a generator, not a power");
    return {*gen, k};
}

/**
 * The page-r derivation on E2 representatives: explicit values on generator
 * classes, zero on everything unassigned, extended by the Leibniz rule
 * d(ab) = d(a)b + (-1)^{|a|} a d(b).
 */
class Derivation {
public:
    Derivation(const Scenario& s, const E2Layout& layout, int page)
        : layout_(&layout), page_(page), dp_rule_(s.divided_power_leibniz)
    {
        const Algebra& alg = layout.algebra();
        for (const auto& a : s.assignments) {
            if (a.page != page)
                continue;
            auto key = source_generator(alg, a.source);
            if (values_.count(key))
                throw ScenarioError("duplicate assignment for " + alg.render(a.source) + " on page "
                                    + std::to_string(page));
            values_.emplace(key, a.image);
        }
    }

    int page() const { return page_; }

    Element on_generator_power(std::size_t gen, int k) const
    {
        const Algebra& alg = layout_->algebra();
        const auto& g = alg.presentation().generators[gen];
        if (k == 0)
            return {};
        if (g.kind == GeneratorKind::DividedPower) {
            auto it = values_.find({gen, k});
            if (it != values_.end())
                return it->second;
            if (k == 1 || !dp_rule_)
                return {};
            return alg.multiply(alg.power_index(gen, k - 1), on_generator_power(gen, 1));
        }
        auto it = values_.find({gen, 1});
        if (it == values_.end())
            return {};
        if (k == 1)
            return it->second;
        // even generator (or characteristic 2): d(g^k) = k g^{k-1} d(g)
        return alg.scale(alg.multiply(alg.power_index(gen, k - 1), it->second), k);
    }

    Element apply(const Monomial& m) const
    {
        const Algebra& alg = layout_->algebra();
        Element out;
        Monomial prefix = alg.unit_monomial();
        int prefix_degree = 0;
        const auto& gens = alg.presentation().generators;
        for (std::size_t i = 0; i < m.exponents.size(); ++i) {
            int e = m.exponents[i];
            if (e == 0)
                continue;
            Element df = on_generator_power(i, e);
            if (!df.is_zero()) {
                Monomial suffix = alg.unit_monomial();
                for (std::size_t j = i + 1; j < m.exponents.size(); ++j)
                    suffix.exponents[j] = m.exponents[j];
                Element term = alg.multiply(alg.multiply(alg.monomial(prefix), df), alg.monomial(suffix));
                out = alg.add(out, prefix_degree % 2 ? alg.scale(term, -1) : term);
            }
            prefix.exponents[i] = e;
            prefix_degree += e * gens[i].degree;
        }
        return out;
    }

    Element apply(const Element& x) const
    {
        const Algebra& alg = layout_->algebra();
        Element out;
        for (const auto& [m, c] : x.terms)
            out = alg.add(out, alg.scale(apply(m), c));
        return out;
    }

    /// Matrix of the derivation from cell b to cell b + (r, 1-r) in E2 coordinates.
    ExactMatrix matrix(Bidegree b) const
    {
        Bidegree t{b.p + page_, b.q - page_ + 1};
        const auto& src = layout_->basis(b);
        std::size_t rows = layout_->in_window(t) ? layout_->rank(t) : 0;
        ExactMatrix m(layout_->ring(), rows, src.size());
        if (rows == 0)
            return m;
        for (std::size_t j = 0; j < src.size(); ++j) {
            Vec col = layout_->coordinates(t, apply(src[j]));
            for (std::size_t i = 0; i < rows; ++i)
                if (col[i] != 0)
                    m.set(i, j, col[i]);
        }
        return m;
    }

private:
    const E2Layout* layout_;
    int page_;
    bool dp_rule_;
    std::map<std::pair<std::size_t, int>, Element> values_;
};

struct Cell {
    Lattice cycles;
    Lattice boundaries;
    bool reliable = true;
};

struct Page {
    int index = 2;
    Window window;
    std::vector<Cell> cells;                // indexed by E2Layout::slot
    std::vector<ExactMatrix> differentials; // d_r out of each cell, E2 coordinates; empty until extended

    const Cell& at(const E2Layout& layout, Bidegree b) const { return cells.at(layout.slot(b)); }
};

struct RunOptions {
    unsigned threads = 1;
};

namespace detail {

/// Runs fn(i) for i in [0, n); the exception of the lowest failing index wins.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    auto body = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n));
        for (unsigned t = 0; t < count; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++)
                    body(i);
            });
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace detail

/**
 * Whether cell b of page r can be trusted despite the window truncation.
 * Incoming d_{r'} (r' < r) from (p - r', q + r' - 1) must start inside the
 * q-window; when the base is not fully inside the window, outgoing d_{r'}
 * must also land inside it.
 */
inline bool cell_reliable(const E2Layout& layout, Bidegree b, int r)
{
    const Window& w = layout.window();
    if (!layout.in_window(b))
        return false;
    int incoming = std::min(b.p, r - 1);
    if (incoming >= 2 && b.q + incoming - 1 > w.q_max && !layout.fiber_covered())
        return false;
    if (!layout.base_covered()) {
        int outgoing = std::min(b.q + 1, r - 1);
        if (outgoing >= 2 && b.p + outgoing > w.p_max)
            return false;
    }
    return true;
}

inline Page build_e2(const Scenario& s, const E2Layout& layout)
{
    const Ring& ring = s.ring;
    const Algebra& alg = layout.algebra();
    for (const auto& a : s.assignments) {
        auto sb = layout.bidegree(a.source);
        if (!sb)
            throw ScenarioError("assignment source " + alg.render(a.source) + " is not homogeneous");
        if (!layout.in_window(*sb))
            throw ScenarioError("window too small: assignment source " + alg.render(a.source) + " at "
                                + sb->to_string() + " lies outside it");
        Bidegree tb{sb->p + a.page, sb->q - a.page + 1};
        if (!a.image.is_zero()) {
            if (!layout.in_window(tb))
                throw ScenarioError("window too small: image of " + alg.render(a.source) + " at "
                                    + tb.to_string() + " lies outside it");
        }
    }
    Page e2;
    e2.index = 2;
    e2.window = layout.window();
    e2.cells.resize(layout.cell_count());
    for (std::size_t i = 0; i < layout.cell_count(); ++i) {
        Bidegree b = layout.cell_at(i);
        e2.cells[i].cycles = Lattice::full(ring, layout.rank(b));
        e2.cells[i].boundaries = Lattice::zero(ring, layout.rank(b));
        e2.cells[i].reliable = cell_reliable(layout, b, 2);
    }
    return e2;
}

/// Columns of D restricted to the cycle lattice (E2 coordinates of d_r(z_j)).
inline ExactMatrix image_of_cycles(const Page& page, const E2Layout& layout, Bidegree b)
{
    const auto& d = page.differentials.at(layout.slot(b));
    return d * page.at(layout, b).cycles.basis();
}

/**
 * Installs the page-r derivation: validates every assignment source as a
 * surviving class, computes the differential matrices, and checks that they
 * carry cycles to cycles and boundaries to boundaries.
 */
inline void extend_leibniz(Page& page, const Scenario& s, const E2Layout& layout, const RunOptions& opts = {})
{
    const int r = page.index;
    const Algebra& alg = layout.algebra();
    Derivation der(s, layout, r);
    for (const auto& a : s.assignments) {
        if (a.page != r)
            continue;
        Bidegree sb = *layout.bidegree(a.source);
        const Cell& c = page.at(layout, sb);
        Vec v = layout.coordinates(sb, a.source);
        if (!c.cycles.contains(v) || c.boundaries.contains(v))
            throw ConsistencyError("assignment source " + alg.render(a.source)
                                       + " is not a surviving nonzero class",
                                   r, sb);
        // truncated generators must respect g^h = 0
        auto [gen, k] = source_generator(alg, a.source);
        const auto& g = alg.presentation().generators[gen];
        if (g.kind == GeneratorKind::Truncated && !a.image.is_zero()) {
            Element rel = alg.scale(alg.multiply(alg.power_index(gen, g.height - 1), a.image), g.height);
            if (!rel.is_zero())
                throw ConsistencyError("differential on " + g.name + " does not respect " + g.name + "^"
                                           + std::to_string(g.height) + " = 0",
                                       r, sb);
        }
    }
    page.differentials.assign(layout.cell_count(), ExactMatrix());
    detail::parallel_for(layout.cell_count(), opts.threads,
                         [&](std::size_t i) { page.differentials[i] = der.matrix(layout.cell_at(i)); });
    detail::parallel_for(layout.cell_count(), opts.threads, [&](std::size_t i) {
        Bidegree b = layout.cell_at(i);
        Bidegree t{b.p + r, b.q - r + 1};
        if (!layout.in_window(t))
            return;
        const auto& d = page.differentials[i];
        const Cell& src = page.cells[i];
        const Cell& dst = page.at(layout, t);
        for (const auto& z : src.cycles.basis_vectors())
            if (!dst.cycles.contains(d.apply(z)))
                throw ConsistencyError("ill-defined differential: image of a cycle is not a cycle", r, b);
        for (const auto& x : src.boundaries.basis_vectors())
            if (!dst.boundaries.contains(d.apply(x)))
                throw ConsistencyError("ill-defined differential: boundaries not sent to boundaries", r, b);
    });
}

/// E_{r+1} = ker d_r / im d_r, cell by cell, in E2 coordinates.
inline Page turn_page(const Page& page, const E2Layout& layout, const RunOptions& opts = {})
{
    if (page.differentials.size() != layout.cell_count())
        throw std::logic_error("turn_page: differentials not extended on page " + std::to_string(page.index));
    const int r = page.index;
    Page next;
    next.index = r + 1;
    next.window = page.window;
    next.cells.resize(layout.cell_count());
    detail::parallel_for(layout.cell_count(), opts.threads, [&](std::size_t i) {
        Bidegree b = layout.cell_at(i);
        const Cell& old = page.cells[i];
        Cell& out = next.cells[i];
        Bidegree t{b.p + r, b.q - r + 1};
        if (layout.in_window(t)) {
            ExactMatrix dz = image_of_cycles(page, layout, b);
            Lattice pre = lattice_preimage(dz, page.at(layout, t).boundaries);
            out.cycles = Lattice::span(old.cycles.basis() * pre.basis());
        } else {
            out.cycles = old.cycles;
        }
        Bidegree s{b.p - r, b.q + r - 1};
        if (layout.in_window(s)) {
            ExactMatrix dz = image_of_cycles(page, layout, s);
            out.boundaries = old.boundaries + Lattice::span(dz);
        } else {
            out.boundaries = old.boundaries;
        }
        if (!out.cycles.contains(out.boundaries))
            throw ConsistencyError("boundaries not inside cycles (d o d != 0)", r + 1, b);
        out.reliable = cell_reliable(layout, b, r + 1);
    });
    return next;
}

struct Run {
    std::shared_ptr<const Scenario> scenario;
    std::shared_ptr<const E2Layout> layout;
    std::vector<Page> pages; // pages[i] has index i + 2; the last one is E_infinity
    std::vector<std::string> audit_trail;

    int first_page() const { return 2; }
    int last_page() const { return pages.back().index; }
    const Page& page(int r) const
    {
        if (r < 2 || r > last_page())
            throw std::out_of_range("page " + std::to_string(r) + " is not part of this run");
        return pages[static_cast<std::size_t>(r - 2)];
    }
    const Page& e_infinity() const { return pages.back(); }
};

/// All pages E_2 .. E_{P_max+1}; in-window differentials vanish beyond P_max.
inline Run run_to_limit(const Scenario& s, const RunOptions& opts = {})
{
    Run run;
    run.scenario = std::make_shared<Scenario>(s);
    run.layout = std::make_shared<E2Layout>(s);
    const E2Layout& layout = *run.layout;
    const Algebra& alg = layout.algebra();
    for (const auto& a : s.assignments) {
        std::string line = "d_" + std::to_string(a.page) + "(" + alg.render(a.source) + ") = " + alg.render(a.image);
        if (a.transported)
            line += "  [transported]";
        if (a.image.is_zero())
            line += "  [explicit zero]";
        run.audit_trail.push_back(line);
    }
    run.pages.push_back(build_e2(s, layout));
    const int last = std::max(2, s.window.p_max + 1);
    for (int r = 2; r < last; ++r) {
        extend_leibniz(run.pages.back(), s, layout, opts);
        Page next = turn_page(run.pages.back(), layout, opts);
        run.pages.push_back(std::move(next));
    }
    extend_leibniz(run.pages.back(), s, layout, opts);
    return run;
}

inline SubquotientInvariants cell_invariants(const Cell& c) { return subquotient(c.cycles, c.boundaries); }

/// True when d_r out of cell b is nonzero on E_r (some cycle escapes the target boundaries).
inline bool differential_nonzero(const Page& page, const E2Layout& layout, Bidegree b)
{
    Bidegree t{b.p + page.index, b.q - page.index + 1};
    if (!layout.in_window(t))
        return false;
    ExactMatrix dz = image_of_cycles(page, layout, b);
    const Lattice& bt = page.at(layout, t).boundaries;
    for (const auto& col : dz.columns())
        if (!bt.contains(col))
            return true;
    return false;
}

struct Discrepancy {
    int degree = 0;
    SubquotientInvariants expected;
    SubquotientInvariants found;
    std::string mode; // "exact" or "strict"
    std::vector<Bidegree> cells; // nonzero E_infinity cells in this degree
};

struct AuditResult {
    std::vector<int> audited_degrees;
    std::vector<Discrepancy> discrepancies;
};

inline bool total_degree_reliable(const Run& run, int n)
{
    const E2Layout& layout = *run.layout;
    const Page& inf = run.e_infinity();
    for (int p = 0; p <= n; ++p) {
        Bidegree b{p, n - p};
        if (layout.known_zero(b))
            continue;
        if (!layout.in_window(b) || !inf.at(layout, b).reliable)
            return false;
    }
    return true;
}

inline mpz_class torsion_order(const std::vector<mpz_class>& t)
{
    mpz_class o = 1;
    for (const auto& d : t)
        o *= d;
    return o;
}

/**
 * Compares the associated graded of E_infinity with the expected cohomology
 * on every reliable total degree. Torsion-free targets are compared exactly;
 * otherwise ranks and total torsion orders must agree (extensions unknown).
 */
inline AuditResult audit_convergence(const Run& run, const TargetCohomology& target)
{
    AuditResult res;
    const E2Layout& layout = *run.layout;
    const Page& inf = run.e_infinity();
    const Window& w = layout.window();
    for (int n = 0; n <= w.p_max + w.q_max; ++n) {
        if (!total_degree_reliable(run, n))
            continue;
        res.audited_degrees.push_back(n);
        SubquotientInvariants found;
        std::vector<Bidegree> cells;
        for (int p = 0; p <= n; ++p) {
            Bidegree b{p, n - p};
            if (!layout.in_window(b))
                continue;
            auto inv = cell_invariants(inf.at(layout, b));
            if (inv.is_zero())
                continue;
            cells.push_back(b);
            found.free_rank += inv.free_rank;
            found.torsion.insert(found.torsion.end(), inv.torsion.begin(), inv.torsion.end());
        }
        std::sort(found.torsion.begin(), found.torsion.end());
        SubquotientInvariants expected = target.in_degree(n);
        bool ok;
        std::string mode;
        if (expected.torsion.empty()) {
            mode = "exact";
            ok = found.free_rank == expected.free_rank && found.torsion.empty();
        } else {
            mode = "strict";
            ok = found.free_rank == expected.free_rank
                 && torsion_order(found.torsion) == torsion_order(expected.torsion);
        }
        if (!ok)
            res.discrepancies.push_back({n, expected, found, mode, cells});
    }
    return res;
}

struct AnnihilatorCandidate {
    int page = 0;
    bool incoming = false;
    Bidegree partner;
    std::vector<Element> partner_basis;
};

/// Generators of E_r at cell b (free first, then torsion), as E2 elements.
inline std::vector<Element> cell_representatives(const Page& page, const E2Layout& layout, Bidegree b)
{
    const Cell& c = page.at(layout, b);
    auto dec = subquotient_decomposition(c.cycles, c.boundaries);
    std::vector<Element> out;
    for (const auto& v : dec.free_generators)
        out.push_back(layout.element(b, v));
    for (const auto& v : dec.torsion_generators)
        out.push_back(layout.element(b, v));
    return out;
}

/**
 * Every differential d_{r'} (r' >= r) that could still hit or leave the given
 * class, judged by placement: the partner cell must be nonzero on page r'.
 * An empty result means the class is permanent inside the window.
 */
inline std::vector<AnnihilatorCandidate> annihilator_candidates(const Run& run, const Element& cls, Bidegree b,
                                                                int r)
{
    const E2Layout& layout = *run.layout;
    const Algebra& alg = layout.algebra();
    if (!layout.in_window(b))
        throw std::invalid_argument("class cell " + b.to_string() + " is outside the window");
    if (auto cb = layout.bidegree(cls); cls.is_zero() || !cb || *cb != b)
        throw std::invalid_argument("class " + alg.render(cls) + " does not live in cell " + b.to_string());
    Vec v = layout.coordinates(b, cls);
    int upto = std::min(r, run.last_page());
    for (int k = 2; k <= upto; ++k) {
        const Cell& c = run.page(k).at(layout, b);
        if (!c.cycles.contains(v) || c.boundaries.contains(v)) {
            if (k == 2)
                throw std::invalid_argument("class " + alg.render(cls) + " is zero on E_2");
            throw std::invalid_argument("class " + alg.render(cls) + " died on page " + std::to_string(k - 1));
        }
    }
    std::vector<AnnihilatorCandidate> out;
    const Window& w = layout.window();
    auto page_for = [&](int rr) -> const Page& { return run.page(std::min(rr, run.last_page())); };
    for (int rr = r; rr <= w.p_max + 1; ++rr) {
        Bidegree in{b.p - rr, b.q + rr - 1};
        if (layout.in_window(in) && !cell_invariants(page_for(rr).at(layout, in)).is_zero())
            out.push_back({rr, true, in, cell_representatives(page_for(rr), layout, in)});
        Bidegree o{b.p + rr, b.q - rr + 1};
        if (layout.in_window(o) && !cell_invariants(page_for(rr).at(layout, o)).is_zero())
            out.push_back({rr, false, o, cell_representatives(page_for(rr), layout, o)});
    }
    return out;
}

/// First page from which the cell's cycles and boundaries never change again.
inline int stable_from(const Run& run, Bidegree b)
{
    const E2Layout& layout = *run.layout;
    const Cell& last = run.e_infinity().at(layout, b);
    int r = run.last_page();
    while (r > 2) {
        const Cell& c = run.page(r - 1).at(layout, b);
        if (!(c.cycles == last.cycles && c.boundaries == last.boundaries))
            break;
        --r;
    }
    return r;
}

struct CollapseResult {
    bool collapses = true;
    int page = 0;
    Bidegree source;
    Bidegree target;
    ExactMatrix matrix; // d_r on the cycle basis, target E2 coordinates
    std::vector<Element> images;
};

/// First nonzero differential on a reliable cell, scanning pages upward and
/// cells lexicographically; otherwise the sequence collapses in the window.
inline CollapseResult collapse_report(const Run& run)
{
    const E2Layout& layout = *run.layout;
    for (const auto& page : run.pages) {
        if (page.differentials.empty())
            continue;
        for (std::size_t i = 0; i < layout.cell_count(); ++i) {
            Bidegree b = layout.cell_at(i);
            if (!page.cells[i].reliable || !differential_nonzero(page, layout, b))
                continue;
            CollapseResult res;
            res.collapses = false;
            res.page = page.index;
            res.source = b;
            res.target = {b.p + page.index, b.q - page.index + 1};
            res.matrix = image_of_cycles(page, layout, b);
            for (const auto& col : res.matrix.columns())
                res.images.push_back(layout.element(res.target, col));
            return res;
        }
    }
    return {};
}

} // namespace loopss
