#pragma once

#include "loopss/spectral_sequence.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace loopss {

/// A morphism whose induced map fails to respect cycles or boundaries.
class MorphismError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Algebra map E2(source) -> E2(target) induced by a map of fibrations, given
 * on generators. Fiber generators must land in the target fiber and base
 * generators in the target base, degree for degree.
 */
class FibrationMorphism {
public:
    FibrationMorphism(std::shared_ptr<const E2Layout> src, std::shared_ptr<const E2Layout> dst,
                      const std::map<std::string, Element>& images)
        : src_(std::move(src)), dst_(std::move(dst))
    {
        const Algebra& sa = src_->algebra();
        const Algebra& da = dst_->algebra();
        if (!(sa.ring() == da.ring()))
            throw MorphismError("morphism between scenarios over different rings");
        for (const auto& [name, img] : images)
            if (!sa.presentation().index_of(name))
                throw MorphismError("morphism names unknown source generator '" + name + "'");
        const auto& gens = sa.presentation().generators;
        for (std::size_t i = 0; i < gens.size(); ++i) {
            auto it = images.find(gens[i].name);
            if (it == images.end())
                throw MorphismError("morphism gives no image for generator '" + gens[i].name + "'");
            da.check(it->second);
            const Element& e = it->second;
            if (!e.is_zero()) {
                auto b = dst_->bidegree(e);
                bool fiber = i < src_->fiber_arity();
                if (!b)
                    throw MorphismError("image of '" + gens[i].name + "' is not homogeneous");
                Bidegree want = fiber ? Bidegree{0, gens[i].degree} : Bidegree{gens[i].degree, 0};
                if (*b != want)
                    throw MorphismError("image of '" + gens[i].name + "' has bidegree " + b->to_string()
                                        + ", expected " + want.to_string());
            }
            images_.push_back(e);
        }
        check_relations();
    }

    const E2Layout& source() const { return *src_; }
    const E2Layout& target() const { return *dst_; }
    const std::vector<Element>& generator_images() const { return images_; }

    /// Image of gamma_k / g^k of generator i.
    Element on_generator_power(std::size_t i, int k) const
    {
        const Algebra& da = dst_->algebra();
        const auto& g = src_->algebra().presentation().generators[i];
        const Element& img = images_[i];
        if (k == 0)
            return da.unit();
        if (g.kind != GeneratorKind::DividedPower || k == 1)
            return da.pow(img, k);
        if (img.is_zero())
            return {};
        // c * gamma_1(h)  ->  c^k * gamma_k(h)
        if (img.terms.size() == 1) {
            const auto& [m, c] = *img.terms.begin();
            std::optional<std::size_t> gen;
            bool single = true;
            for (std::size_t j = 0; j < m.exponents.size(); ++j)
                if (m.exponents[j] != 0) {
                    single = single && !gen && m.exponents[j] == 1;
                    gen = j;
                }
            if (single && gen && da.presentation().generators[*gen].kind == GeneratorKind::DividedPower) {
                Scalar ck = 1;
                for (int t = 0; t < k; ++t)
                    ck *= c;
                return da.scale(da.power_index(*gen, k), ck);
            }
        }
        if (da.ring().kind() == Ring::Kind::Rationals) {
            mpz_class fact = 1;
            for (int t = 2; t <= k; ++t)
                fact *= t;
            return da.scale(da.pow(img, k), Scalar(1) / Scalar(fact));
        }
        throw MorphismError("cannot extend the map to divided powers of '" + g.name + "'");
    }

    Element apply(const Monomial& m) const
    {
        const Algebra& da = dst_->algebra();
        Element out = da.unit();
        for (std::size_t i = 0; i < m.exponents.size() && !out.is_zero(); ++i)
            if (m.exponents[i] != 0)
                out = da.multiply(out, on_generator_power(i, m.exponents[i]));
        return out;
    }

    Element apply(const Element& e) const
    {
        src_->algebra().check(e);
        const Algebra& da = dst_->algebra();
        Element out;
        for (const auto& [m, c] : e.terms)
            out = da.add(out, da.scale(apply(m), c));
        return out;
    }

    /// phi_2 on cell b, in E2 monomial coordinates; zero rows when the target
    /// cell lies outside the target window.
    ExactMatrix matrix(Bidegree b) const
    {
        const auto& src = src_->basis(b);
        std::size_t rows = dst_->in_window(b) ? dst_->rank(b) : 0;
        ExactMatrix m(dst_->ring(), rows, src.size());
        if (rows == 0)
            return m;
        for (std::size_t j = 0; j < src.size(); ++j) {
            Vec col = dst_->coordinates(b, apply(src[j]));
            for (std::size_t i = 0; i < rows; ++i)
                if (col[i] != 0)
                    m.set(i, j, col[i]);
        }
        return m;
    }

    /// this o first, i.e. x -> this(first(x)).
    FibrationMorphism after(const FibrationMorphism& first) const
    {
        std::map<std::string, Element> imgs;
        const auto& gens = first.source().algebra().presentation().generators;
        for (std::size_t i = 0; i < gens.size(); ++i)
            imgs[gens[i].name] = apply(first.images_[i]);
        return FibrationMorphism(first.src_, dst_, imgs);
    }

    static FibrationMorphism identity(std::shared_ptr<const E2Layout> layout)
    {
        std::map<std::string, Element> imgs;
        const auto& gens = layout->algebra().presentation().generators;
        for (std::size_t i = 0; i < gens.size(); ++i)
            imgs[gens[i].name] = layout->algebra().generator(i);
        return FibrationMorphism(layout, layout, imgs);
    }

    static FibrationMorphism zero(std::shared_ptr<const E2Layout> src, std::shared_ptr<const E2Layout> dst)
    {
        std::map<std::string, Element> imgs;
        for (const auto& g : src->algebra().presentation().generators)
            imgs[g.name] = Element{};
        return FibrationMorphism(std::move(src), std::move(dst), imgs);
    }

private:
    void check_relations() const
    {
        const Algebra& da = dst_->algebra();
        const auto& gens = src_->algebra().presentation().generators;
        for (std::size_t i = 0; i < gens.size(); ++i) {
            const auto& g = gens[i];
            const Element& img = images_[i];
            if (g.kind == GeneratorKind::Exterior && !da.multiply(img, img).is_zero())
                throw MorphismError("image of exterior generator '" + g.name + "' does not square to zero");
            if (g.kind == GeneratorKind::Truncated && !da.pow(img, g.height).is_zero())
                throw MorphismError("image of '" + g.name + "' does not satisfy " + g.name + "^"
                                    + std::to_string(g.height) + " = 0");
            if (g.kind == GeneratorKind::DividedPower)
                (void)on_generator_power(i, 2);
        }
    }

    std::shared_ptr<const E2Layout> src_;
    std::shared_ptr<const E2Layout> dst_;
    std::vector<Element> images_;
};

/// phi_r on every cell present in both windows; checks that cycles map to
/// cycles and boundaries to boundaries.
inline std::map<Bidegree, ExactMatrix> induce_on_page(const FibrationMorphism& m, const Page& src, const Page& dst)
{
    if (src.index != dst.index)
        throw MorphismError("induce_on_page: page indices differ");
    const E2Layout& sl = m.source();
    const E2Layout& dl = m.target();
    std::map<Bidegree, ExactMatrix> out;
    for (std::size_t i = 0; i < sl.cell_count(); ++i) {
        Bidegree b = sl.cell_at(i);
        ExactMatrix phi = m.matrix(b);
        if (dl.in_window(b)) {
            const Cell& sc = src.at(sl, b);
            const Cell& dc = dst.at(dl, b);
            for (const auto& z : sc.cycles.basis_vectors())
                if (!dc.cycles.contains(phi.apply(z)))
                    throw MorphismError("morphism not compatible with pages: cycle not sent to a cycle on page "
                                        + std::to_string(src.index) + " at " + b.to_string());
            for (const auto& x : sc.boundaries.basis_vectors())
                if (!dc.boundaries.contains(phi.apply(x)))
                    throw MorphismError("morphism not compatible with pages: boundary not sent to a boundary on page "
                                        + std::to_string(src.index) + " at " + b.to_string());
        }
        out.emplace(b, std::move(phi));
    }
    return out;
}

struct TransportPair {
    Element source; // class in the source E2
    Element target; // its declared phi-image in the target E2
};

/**
 * For each declared pair and each page on which the source scenario assigns
 * d_r(source), emits d_r(target) = phi(d_r(source)). Zero images are kept as
 * explicit zeros.
 */
inline std::vector<DifferentialAssignment> transport_differentials(const Run& src_run, const FibrationMorphism& m,
                                                                   const std::vector<TransportPair>& pairs)
{
    const E2Layout& sl = *src_run.layout;
    const Algebra& sa = sl.algebra();
    const Algebra& da = m.target().algebra();
    std::vector<DifferentialAssignment> out;
    for (const auto& pr : pairs) {
        if (m.apply(pr.source) != pr.target)
            throw MorphismError("declared pair " + sa.render(pr.source) + " -> " + da.render(pr.target)
                                + " is not related by the morphism (phi gives " + da.render(m.apply(pr.source))
                                + ")");
        auto sb = sl.bidegree(pr.source);
        if (!sb)
            throw MorphismError("transport source " + sa.render(pr.source) + " is not homogeneous");
        Vec v = sl.coordinates(*sb, pr.source);
        for (const auto& a : src_run.scenario->assignments) {
            if (a.source != pr.source)
                continue;
            for (int k = 2; k <= std::min(a.page, src_run.last_page()); ++k) {
                const Cell& c = src_run.page(k).at(sl, *sb);
                if (!c.cycles.contains(v) || c.boundaries.contains(v))
                    throw MorphismError("transport source " + sa.render(pr.source) + " died before page "
                                        + std::to_string(a.page));
            }
            Derivation d(*src_run.scenario, sl, a.page);
            DifferentialAssignment t;
            t.page = a.page;
            t.source = pr.target;
            t.image = m.apply(d.apply(pr.source));
            t.explicit_zero = t.image.is_zero();
            t.transported = true;
            out.push_back(std::move(t));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const DifferentialAssignment& a, const DifferentialAssignment& b) { return a.page < b.page; });
    return out;
}

struct NaturalityViolation {
    int page = 0;
    Bidegree cell;
    std::string detail;
};

/// Checks phi_r d_r = dbar_r phi_r on every reliable cell of every common page.
inline std::vector<NaturalityViolation> check_naturality(const Run& src_run, const Run& dst_run,
                                                         const FibrationMorphism& m)
{
    const E2Layout& sl = *src_run.layout;
    const E2Layout& dl = *dst_run.layout;
    const Algebra& da = dl.algebra();
    std::vector<NaturalityViolation> out;
    int last = std::min(src_run.last_page(), dst_run.last_page());
    for (int r = 2; r <= last; ++r) {
        const Page& sp = src_run.page(r);
        const Page& dp = dst_run.page(r);
        for (std::size_t i = 0; i < sl.cell_count(); ++i) {
            Bidegree b = sl.cell_at(i);
            Bidegree t{b.p + r, b.q - r + 1};
            if (!dl.in_window(b) || !sp.cells[i].reliable || !dp.at(dl, b).reliable)
                continue;
            if (!sl.in_window(t) && !sl.known_zero(t))
                continue;
            if (dl.in_window(t) && !dp.at(dl, t).reliable)
                continue;
            ExactMatrix phi_src = m.matrix(b);
            for (const auto& z : sp.cells[i].cycles.basis_vectors()) {
                Vec fz = phi_src.apply(z);
                if (!dp.at(dl, b).cycles.contains(fz)) {
                    out.push_back({r, b, "phi does not send the cycle " + sl.algebra().render(sl.element(b, z))
                                             + " to a cycle"});
                    continue;
                }
                if (!dl.in_window(t))
                    continue;
                Vec lhs = sl.in_window(t) ? m.matrix(t).apply(sp.differentials[i].apply(z)) : Vec(dl.rank(t));
                Vec rhs = dp.differentials[dl.slot(b)].apply(fz);
                Vec diff(lhs.size());
                for (std::size_t k = 0; k < diff.size(); ++k)
                    diff[k] = dl.ring().sub(lhs[k], rhs[k]);
                if (!dp.at(dl, t).boundaries.contains(diff))
                    out.push_back({r, b,
                                   "phi(d(" + sl.algebra().render(sl.element(b, z)) + ")) = "
                                       + da.render(dl.element(t, lhs)) + " but d(phi(...)) = "
                                       + da.render(dl.element(t, rhs))});
            }
        }
    }
    return out;
}

} // namespace loopss
