#pragma once

#include "loopss/algebra.hpp"
#include "loopss/naturality.hpp"
#include "loopss/spectral_sequence.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace loopss {

/// Scenario parse or validation failure, located in the source text when possible.
class ScenarioParseError : public ScenarioError {
public:
    ScenarioParseError(const std::string& path, const std::string& msg, std::size_t line = 0, std::size_t column = 0)
        : ScenarioError(format(path, msg, line, column)), path(path), line(line), column(column)
    {
    }
    std::string path;
    std::size_t line;
    std::size_t column;

private:
    static std::string format(const std::string& path, const std::string& msg, std::size_t line, std::size_t column)
    {
        std::string where;
        if (line > 0)
            where = "line " + std::to_string(line) + ", column " + std::to_string(column) + ": ";
        return where + (path.empty() ? "" : path + ": ") + msg;
    }
};

namespace detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t offset)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

class ScenarioReader {
public:
    explicit ScenarioReader(const std::string& text) : text_(text) {}

    Scenario read(const json& j, const std::string& path)
    {
        expect_object(j, path);
        allow_keys(j, path, {"ring", "fiber", "base", "window", "assignments", "target", "flags", "aliases", "morphism",
                             "source"});
        Scenario s;
        try {
            s.ring = Ring::parse(require_string(j, "ring", path));
        } catch (const std::invalid_argument& e) {
            fail(join(path, "ring"), e.what(), string_at(j, "ring"));
        }
        s.fiber = read_presentation(require(j, "fiber", path), join(path, "fiber"));
        s.base = read_presentation(require(j, "base", path), join(path, "base"));
        std::unique_ptr<Algebra> alg;
        try {
            alg = std::make_unique<Algebra>(combined_presentation(s), s.ring);
        } catch (const PresentationError& e) {
            fail(path, e.what());
        }

        const json& w = require(j, "window", path);
        std::string wpath = join(path, "window");
        expect_object(w, wpath);
        allow_keys(w, wpath, {"p_max", "q_max"});
        s.window.q_max = require_int(w, "q_max", wpath);
        if (w.contains("p_max")) {
            s.window.p_max = require_int(w, "p_max", wpath);
        } else {
            auto top = s.base.top_degree();
            if (!top)
                fail(wpath, "p_max is required when the base is not finite");
            s.window.p_max = *top;
        }
        if (s.window.p_max < 0 || s.window.q_max < 0)
            fail(wpath, "window bounds must be non-negative");

        if (j.contains("aliases")) {
            const json& a = j.at("aliases");
            std::string apath = join(path, "aliases");
            expect_object(a, apath);
            for (auto it = a.begin(); it != a.end(); ++it) {
                if (alg->presentation().index_of(it.key()))
                    fail(join(apath, it.key()), "alias shadows a generator name");
                if (!it.value().is_string())
                    fail(join(apath, it.key()), "alias must be a string");
                s.aliases[it.key()] = element(*alg, it.value().get<std::string>(), join(apath, it.key()), nullptr);
            }
        }

        if (j.contains("flags")) {
            const json& f = j.at("flags");
            std::string fpath = join(path, "flags");
            expect_object(f, fpath);
            allow_keys(f, fpath, {"divided_power_leibniz"});
            if (f.contains("divided_power_leibniz")) {
                if (!f.at("divided_power_leibniz").is_boolean())
                    fail(join(fpath, "divided_power_leibniz"), "expected a boolean");
                s.divided_power_leibniz = f.at("divided_power_leibniz").get<bool>();
            }
        }

        E2Layout* layout_ptr = nullptr;
        std::unique_ptr<E2Layout> layout;
        try {
            layout = std::make_unique<E2Layout>(s);
            layout_ptr = layout.get();
        } catch (const ScenarioError& e) {
            fail(wpath, e.what());
        }

        if (j.contains("assignments")) {
            const json& list = j.at("assignments");
            std::string lpath = join(path, "assignments");
            if (!list.is_array())
                fail(lpath, "expected an array");
            for (std::size_t i = 0; i < list.size(); ++i)
                s.assignments.push_back(read_assignment(list[i], lpath + "[" + std::to_string(i) + "]", *alg,
                                                        *layout_ptr, s));
        }

        if (j.contains("target"))
            s.target = read_target(j.at("target"), join(path, "target"));

        if (j.contains("source") != j.contains("morphism"))
            fail(path, "'source' and 'morphism' must be given together");
        if (j.contains("source")) {
            auto src = std::make_shared<Scenario>(read(j.at("source"), join(path, "source")));
            s.morphism = read_morphism(j.at("morphism"), join(path, "morphism"), *src, *alg);
            s.source = std::move(src);
        }
        return s;
    }

private:
    [[noreturn]] void fail(const std::string& path, const std::string& msg, const std::string& near = "") const
    {
        std::size_t line = 0, col = 0;
        if (!near.empty()) {
            auto pos = text_.find(json(near).dump());
            if (pos != std::string::npos)
                std::tie(line, col) = line_column(text_, pos);
        }
        throw ScenarioParseError(path, msg, line, col);
    }

    static std::string join(const std::string& path, const std::string& key)
    {
        return path.empty() ? key : path + "." + key;
    }

    void expect_object(const json& j, const std::string& path) const
    {
        if (!j.is_object())
            fail(path, "expected an object");
    }

    void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) const
    {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!ok.count(it.key()))
                fail(join(path, it.key()), "unknown field '" + it.key() + "'", it.key());
    }

    const json& require(const json& j, const std::string& key, const std::string& path) const
    {
        if (!j.contains(key))
            fail(path, "missing field '" + key + "'");
        return j.at(key);
    }

    std::string require_string(const json& j, const std::string& key, const std::string& path) const
    {
        const json& v = require(j, key, path);
        if (!v.is_string())
            fail(join(path, key), "expected a string");
        return v.get<std::string>();
    }

    int require_int(const json& j, const std::string& key, const std::string& path) const
    {
        const json& v = require(j, key, path);
        if (!v.is_number_integer())
            fail(join(path, key), "expected an integer");
        return v.get<int>();
    }

    static std::string string_at(const json& j, const std::string& key)
    {
        return j.contains(key) && j.at(key).is_string() ? j.at(key).get<std::string>() : std::string();
    }

    GradedAlgebraPresentation read_presentation(const json& j, const std::string& path) const
    {
        expect_object(j, path);
        allow_keys(j, path, {"description", "generators"});
        GradedAlgebraPresentation p;
        if (j.contains("description")) {
            if (!j.at("description").is_string())
                fail(join(path, "description"), "expected a string");
            p.description = j.at("description").get<std::string>();
        }
        const json& gens = require(j, "generators", path);
        if (!gens.is_array())
            fail(join(path, "generators"), "expected an array");
        for (std::size_t i = 0; i < gens.size(); ++i) {
            std::string gpath = join(path, "generators") + "[" + std::to_string(i) + "]";
            const json& g = gens[i];
            expect_object(g, gpath);
            allow_keys(g, gpath, {"name", "degree", "kind", "height"});
            Generator gen;
            gen.name = require_string(g, "name", gpath);
            gen.degree = require_int(g, "degree", gpath);
            std::string kind = require_string(g, "kind", gpath);
            try {
                gen.kind = parse_generator_kind(kind);
            } catch (const std::invalid_argument& e) {
                fail(join(gpath, "kind"), e.what(), kind);
            }
            if (gen.kind == GeneratorKind::Truncated)
                gen.height = require_int(g, "height", gpath);
            else if (g.contains("height"))
                fail(join(gpath, "height"), "height only applies to truncated generators");
            p.generators.push_back(gen);
        }
        return p;
    }

    Element element(const Algebra& alg, const std::string& text, const std::string& path,
                    const Algebra::AliasTable* aliases) const
    {
        try {
            return alg.parse(text, aliases);
        } catch (const ElementParseError& e) {
            fail(path, std::string("malformed element \"") + text + "\": " + e.what(), text);
        } catch (const AlgebraError& e) {
            fail(path, e.what(), text);
        } catch (const RingMismatch& e) {
            fail(path, e.what(), text);
        }
    }

    DifferentialAssignment read_assignment(const json& j, const std::string& path, const Algebra& alg,
                                           const E2Layout& layout, Scenario& s) const
    {
        expect_object(j, path);
        allow_keys(j, path, {"page", "source", "image"});
        DifferentialAssignment a;
        a.page = require_int(j, "page", path);
        if (a.page < 2)
            fail(join(path, "page"), "page must be >= 2");
        std::string src_text = require_string(j, "source", path);
        std::string img_text = require_string(j, "image", path);
        a.source = element(alg, src_text, join(path, "source"), &s.aliases);
        a.image = element(alg, img_text, join(path, "image"), &s.aliases);
        try {
            source_generator(alg, a.source);
        } catch (const ScenarioError& e) {
            fail(join(path, "source"), e.what(), src_text);
        }
        Bidegree sb = *layout.bidegree(a.source);
        Bidegree want{sb.p + a.page, sb.q - a.page + 1};
        if (want.q < 0)
            fail(path, "d_" + std::to_string(a.page) + " out of " + sb.to_string() + " lands below the q = 0 row",
                 src_text);
        if (!a.image.is_zero()) {
            auto ib = layout.bidegree(a.image);
            if (!ib)
                fail(join(path, "image"), "image is not homogeneous", img_text);
            if (*ib != want)
                fail(join(path, "image"),
                     "bidegree mismatch: image lies in " + ib->to_string() + " but d_" + std::to_string(a.page)
                         + " from " + sb.to_string() + " needs " + want.to_string(),
                     img_text);
        } else {
            a.explicit_zero = true;
            std::string trimmed = img_text;
            trimmed.erase(std::remove_if(trimmed.begin(), trimmed.end(), ::isspace), trimmed.end());
            if (trimmed != "0")
                s.warnings.push_back(path + ": image \"" + img_text + "\" is zero; use explicit zero");
        }
        return a;
    }

    TargetCohomology read_target(const json& j, const std::string& path) const
    {
        if (!j.is_array())
            fail(path, "expected an array");
        TargetCohomology t;
        for (std::size_t i = 0; i < j.size(); ++i) {
            std::string epath = path + "[" + std::to_string(i) + "]";
            const json& e = j[i];
            expect_object(e, epath);
            allow_keys(e, epath, {"degree", "free_rank", "torsion"});
            int deg = require_int(e, "degree", epath);
            SubquotientInvariants inv;
            int fr = require_int(e, "free_rank", epath);
            if (fr < 0)
                fail(join(epath, "free_rank"), "must be non-negative");
            inv.free_rank = static_cast<std::size_t>(fr);
            if (e.contains("torsion")) {
                const json& tl = e.at("torsion");
                if (!tl.is_array())
                    fail(join(epath, "torsion"), "expected an array");
                for (const auto& d : tl) {
                    mpz_class v;
                    if (d.is_number_integer())
                        v = mpz_class(std::to_string(d.get<long long>()));
                    else if (d.is_string())
                        v = mpz_class(d.get<std::string>());
                    else
                        fail(join(epath, "torsion"), "invariant factors must be integers");
                    if (v <= 1)
                        fail(join(epath, "torsion"), "invariant factors must exceed 1");
                    if (!inv.torsion.empty() && v % inv.torsion.back() != 0)
                        fail(join(epath, "torsion"), "invariant factors must form a divisibility chain");
                    inv.torsion.push_back(v);
                }
            }
            if (t.degrees.count(deg))
                fail(epath, "degree " + std::to_string(deg) + " listed twice");
            t.degrees[deg] = inv;
        }
        return t;
    }

    MorphismSpec read_morphism(const json& j, const std::string& path, const Scenario& src,
                               const Algebra& dst_alg) const
    {
        expect_object(j, path);
        allow_keys(j, path, {"fiber", "base", "transport"});
        Algebra src_alg(combined_presentation(src), src.ring);
        MorphismSpec m;
        for (const char* part : {"fiber", "base"}) {
            const json& map = require(j, part, path);
            std::string mpath = join(path, part);
            expect_object(map, mpath);
            const auto& gens = std::string(part) == "fiber" ? src.fiber.generators : src.base.generators;
            for (auto it = map.begin(); it != map.end(); ++it) {
                bool known = std::any_of(gens.begin(), gens.end(), [&](const Generator& g) { return g.name == it.key(); });
                if (!known)
                    fail(join(mpath, it.key()), "not a source " + std::string(part) + " generator", it.key());
                if (!it.value().is_string())
                    fail(join(mpath, it.key()), "expected a string");
                m.images[it.key()] = element(dst_alg, it.value().get<std::string>(), join(mpath, it.key()), nullptr);
            }
        }
        if (j.contains("transport")) {
            const json& list = j.at("transport");
            std::string tpath = join(path, "transport");
            if (!list.is_array())
                fail(tpath, "expected an array");
            for (std::size_t i = 0; i < list.size(); ++i) {
                std::string ppath = tpath + "[" + std::to_string(i) + "]";
                expect_object(list[i], ppath);
                allow_keys(list[i], ppath, {"source", "target"});
                MorphismSpec::Pair pr;
                pr.source = element(src_alg, require_string(list[i], "source", ppath), join(ppath, "source"),
                                    &src.aliases);
                pr.target = element(dst_alg, require_string(list[i], "target", ppath), join(ppath, "target"), nullptr);
                m.transport.push_back(std::move(pr));
            }
        }
        return m;
    }

    const std::string& text_;
};

inline ordered_json presentation_json(const GradedAlgebraPresentation& p)
{
    ordered_json j;
    j["description"] = p.description;
    ordered_json gens = ordered_json::array();
    for (const auto& g : p.generators) {
        ordered_json e;
        e["name"] = g.name;
        e["degree"] = g.degree;
        e["kind"] = to_string(g.kind);
        if (g.kind == GeneratorKind::Truncated)
            e["height"] = g.height;
        gens.push_back(e);
    }
    j["generators"] = gens;
    return j;
}

inline ordered_json invariant_factor_json(const mpz_class& d)
{
    if (d.fits_slong_p())
        return ordered_json(d.get_si());
    return ordered_json(d.get_str());
}

inline ordered_json scenario_json(const Scenario& s)
{
    Algebra alg(combined_presentation(s), s.ring);
    ordered_json j;
    j["ring"] = s.ring.name();
    j["fiber"] = presentation_json(s.fiber);
    j["base"] = presentation_json(s.base);
    j["window"] = {{"p_max", s.window.p_max}, {"q_max", s.window.q_max}};
    if (!s.aliases.empty()) {
        ordered_json a = ordered_json::object();
        for (const auto& [k, v] : s.aliases)
            a[k] = alg.render(v);
        j["aliases"] = a;
    }
    ordered_json list = ordered_json::array();
    for (const auto& a : s.assignments) {
        if (a.transported)
            continue;
        list.push_back({{"page", a.page}, {"source", alg.render(a.source)}, {"image", alg.render(a.image)}});
    }
    j["assignments"] = list;
    if (s.target) {
        ordered_json t = ordered_json::array();
        for (const auto& [deg, inv] : s.target->degrees) {
            ordered_json e;
            e["degree"] = deg;
            e["free_rank"] = inv.free_rank;
            ordered_json tor = ordered_json::array();
            for (const auto& d : inv.torsion)
                tor.push_back(invariant_factor_json(d));
            e["torsion"] = tor;
            t.push_back(e);
        }
        j["target"] = t;
    }
    j["flags"] = {{"divided_power_leibniz", s.divided_power_leibniz}};
    if (s.source && s.morphism) {
        Algebra src_alg(combined_presentation(*s.source), s.source->ring);
        ordered_json m;
        for (const char* part : {"fiber", "base"}) {
            const auto& gens = std::string(part) == "fiber" ? s.source->fiber.generators : s.source->base.generators;
            ordered_json map = ordered_json::object();
            for (const auto& g : gens) {
                auto it = s.morphism->images.find(g.name);
                if (it != s.morphism->images.end())
                    map[g.name] = alg.render(it->second);
            }
            m[part] = map;
        }
        ordered_json tr = ordered_json::array();
        for (const auto& p : s.morphism->transport)
            tr.push_back({{"source", src_alg.render(p.source)}, {"target", alg.render(p.target)}});
        m["transport"] = tr;
        j["morphism"] = m;
        j["source"] = scenario_json(*s.source);
    }
    return j;
}

} // namespace detail

/// Parses and validates a scenario document (JSON syntax).
inline Scenario parse_scenario(const std::string& text)
{
    detail::json doc;
    try {
        doc = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ScenarioParseError("", std::string("syntax error: ") + e.what(), line, col);
    }
    return detail::ScenarioReader(text).read(doc, "");
}

inline std::string serialize_scenario(const Scenario& s) { return detail::scenario_json(s).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline Element parse_in(const Scenario& s, const std::string& text)
{
    Algebra alg(combined_presentation(s), s.ring);
    return alg.parse(text, &s.aliases);
}

inline void add_assignment(Scenario& s, int page, const std::string& source, const std::string& image)
{
    DifferentialAssignment a;
    a.page = page;
    a.source = parse_in(s, source);
    a.image = parse_in(s, image);
    a.explicit_zero = a.image.is_zero();
    s.assignments.push_back(std::move(a));
}

inline GradedAlgebraPresentation loop_fiber(int u_degree, int y_degree, GeneratorKind y_kind, std::string desc)
{
    GradedAlgebraPresentation f;
    f.description = std::move(desc);
    f.generators = {{"u", u_degree, GeneratorKind::Exterior, 0}, {"y", y_degree, y_kind, 0}};
    return f;
}

inline TargetCohomology truncated_target(int generator_degree, int height)
{
    TargetCohomology t;
    for (int i = 0; i < height; ++i)
        t.degrees[i * generator_degree] = SubquotientInvariants{1, {}};
    return t;
}

} // namespace detail

inline std::string cpn_sum_text(int n, const std::string& a, const std::string& b)
{
    std::string out;
    for (int i = n; i >= 0; --i) {
        std::string term = "u";
        if (i > 0)
            term += "*" + a + (i > 1 ? "^" + std::to_string(i) : "");
        if (n - i > 0)
            term += "*" + b + (n - i > 1 ? "^" + std::to_string(n - i) : "");
        out += (out.empty() ? "" : " + ") + term;
    }
    return out;
}

namespace detail {

/// The orientation of y is only fixed up to sign; y_sign = -1 flips it.
inline void orient_y(Scenario& s, int y_sign)
{
    if (y_sign != 1 && y_sign != -1)
        throw ScenarioError("y_sign must be 1 or -1");
    if (y_sign == 1)
        return;
    Algebra alg(combined_presentation(s), s.ring);
    Element y = parse_in(s, "y");
    for (auto& a : s.assignments)
        if (a.source == y)
            a.image = alg.scale(a.image, -1);
}

} // namespace detail

/**
 * Path fibration Omega(CP^n) -> Map(I, CP^n) -> CP^n x CP^n. With
 * `vw_basis` the assignments are written through the aliases v = c1 - c2,
 * w = c1 instead of c1, c2.
 */
inline Scenario path_cpn_diag(int n, const Ring& ring = Ring::integers(), bool vw_basis = false, int y_sign = 1)
{
    if (n < 1)
        throw ScenarioError("path_cpn_diag needs n >= 1");
    Scenario s;
    s.ring = ring;
    s.fiber = detail::loop_fiber(1, 2 * n, GeneratorKind::DividedPower,
                                 "H*(Omega CP^" + std::to_string(n) + ") = E[u] (x) Gamma[y]");
    s.base.description = "H*(CP^" + std::to_string(n) + " x CP^" + std::to_string(n) + ")";
    s.base.generators = {{"c1", 2, GeneratorKind::Truncated, n + 1}, {"c2", 2, GeneratorKind::Truncated, n + 1}};
    s.window = {4 * n, 2 * (2 * n) + 1};
    if (vw_basis) {
        s.aliases["v"] = detail::parse_in(s, "c1 - c2");
        s.aliases["w"] = detail::parse_in(s, "c1");
        detail::add_assignment(s, 2, "u", "v");
        // c2 = w - v
        Algebra alg(combined_presentation(s), s.ring);
        Element sum;
        Element c2 = alg.subtract(s.aliases["w"], s.aliases["v"]);
        for (int i = 0; i <= n; ++i)
            sum = alg.add(sum, alg.multiply(alg.pow(s.aliases["w"], i), alg.pow(c2, n - i)));
        DifferentialAssignment a;
        a.page = 2 * n;
        a.source = detail::parse_in(s, "y");
        a.image = alg.multiply(detail::parse_in(s, "u"), sum);
        s.assignments.push_back(a);
    } else {
        detail::add_assignment(s, 2, "u", "c1 - c2");
        detail::add_assignment(s, 2 * n, "y", cpn_sum_text(n, "c1", "c2"));
    }
    detail::orient_y(s, y_sign);
    s.target = detail::truncated_target(2, n + 1);
    return s;
}

/// Free loop fibration Omega(CP^n) -> Lambda(CP^n) -> CP^n, no differentials.
inline Scenario free_loop_cpn(int n, const Ring& ring = Ring::integers())
{
    if (n < 1)
        throw ScenarioError("free_loop_cpn needs n >= 1");
    Scenario s;
    s.ring = ring;
    s.fiber = detail::loop_fiber(1, 2 * n, GeneratorKind::DividedPower,
                                 "H*(Omega CP^" + std::to_string(n) + ") = E[u] (x) Gamma[y]");
    s.base.description = "H*(CP^" + std::to_string(n) + ")";
    s.base.generators = {{"x", 2, GeneratorKind::Truncated, n + 1}};
    s.window = {2 * n, 2 * (2 * n) + 1};
    return s;
}

/// free_loop_cpn(n) fed by the path fibration through the diagonal map.
inline Scenario pair_with_morphism(int n, const Ring& ring = Ring::integers(), int y_sign = 1)
{
    Scenario s = free_loop_cpn(n, ring);
    auto src = std::make_shared<Scenario>(path_cpn_diag(n, ring, false, y_sign));
    MorphismSpec m;
    m.images["u"] = detail::parse_in(s, "u");
    m.images["y"] = detail::parse_in(s, "y");
    m.images["c1"] = detail::parse_in(s, "x");
    m.images["c2"] = detail::parse_in(s, "x");
    m.transport.push_back({detail::parse_in(*src, "u"), detail::parse_in(s, "u")});
    m.transport.push_back({detail::parse_in(*src, "y"), detail::parse_in(s, "y")});
    s.source = std::move(src);
    s.morphism = std::move(m);
    return s;
}

/**
 * Rational model for X with H*(X;Q) = Q[x]/(x^k), |x| = 2m, and
 * H*(Omega X;Q) = E[u] (x) Q[y]. |y| = 2mk - 2 so that y transgresses to
 * u * x^{k-1}.
 */
inline Scenario free_loop_rank_one(int m, int k, int y_sign = 1)
{
    if (m < 1 || k < 2)
        throw ScenarioError("free_loop_rank_one needs m >= 1 and k >= 2");
    Scenario s;
    s.ring = Ring::rationals();
    int ydeg = 2 * m * k - 2;
    s.fiber = detail::loop_fiber(2 * m - 1, ydeg, GeneratorKind::Polynomial,
                                 "E[u] (x) Q[y], |u| = " + std::to_string(2 * m - 1) + ", |y| = 2mk-2 = "
                                     + std::to_string(ydeg)
                                     + " (the transgression bidegree forces 2mk-2 rather than 2mk)");
    s.base.description = "Q[x]/(x^" + std::to_string(k) + "), |x| = " + std::to_string(2 * m);
    s.base.generators = {{"x", 2 * m, GeneratorKind::Truncated, k}};
    s.window = {2 * m * (k - 1), 2 * ydeg + 1};
    std::string img = std::to_string(k) + "*u" + (k - 1 > 0 ? "*x" : "") + (k - 1 > 1 ? "^" + std::to_string(k - 1) : "");
    detail::add_assignment(s, 2 * m * (k - 1), "y", img);
    detail::orient_y(s, y_sign);
    return s;
}

struct PresetId {
    std::string name;
    int n = 2;
    int m = 1;
    int k = 2;
    Ring ring = Ring::integers();
    bool vw_basis = false;
    int y_sign = 1;
};

inline Scenario materialize(const PresetId& id)
{
    if (id.name == "path_cpn_diag")
        return path_cpn_diag(id.n, id.ring, id.vw_basis, id.y_sign);
    if (id.name == "free_loop_cpn")
        return free_loop_cpn(id.n, id.ring);
    if (id.name == "pair_with_morphism")
        return pair_with_morphism(id.n, id.ring, id.y_sign);
    if (id.name == "free_loop_rank_one")
        return free_loop_rank_one(id.m, id.k, id.y_sign);
    throw ScenarioError("unknown preset '" + id.name + "'");
}

// ---------------------------------------------------------------------------
// Running a scenario document (with an optional source + morphism)

struct DocumentRun {
    std::shared_ptr<Run> source_run;
    std::optional<FibrationMorphism> morphism;
    std::vector<DifferentialAssignment> transported;
    std::vector<NaturalityViolation> naturality;
    Run run;
    std::vector<std::string> warnings;
};

inline FibrationMorphism build_morphism(const Run& src, std::shared_ptr<const E2Layout> dst_layout,
                                        const MorphismSpec& spec)
{
    try {
        return FibrationMorphism(src.layout, std::move(dst_layout), spec.images);
    } catch (const MorphismError& e) {
        throw ScenarioError(std::string("morphism: ") + e.what());
    }
}

inline DocumentRun run_document(const Scenario& s, const RunOptions& opts = {})
{
    DocumentRun out;
    out.warnings = s.warnings;
    if (!s.source) {
        out.run = run_to_limit(s, opts);
        return out;
    }
    DocumentRun src = run_document(*s.source, opts);
    for (const auto& w : src.warnings)
        out.warnings.push_back("source: " + w);
    out.source_run = std::make_shared<Run>(std::move(src.run));
    auto layout = std::make_shared<E2Layout>(s);
    out.morphism.emplace(build_morphism(*out.source_run, layout, *s.morphism));
    std::vector<TransportPair> pairs;
    for (const auto& p : s.morphism->transport)
        pairs.push_back({p.source, p.target});
    try {
        out.transported = transport_differentials(*out.source_run, *out.morphism, pairs);
    } catch (const MorphismError& e) {
        throw ConsistencyError(std::string("transport: ") + e.what(), 0, std::nullopt);
    }
    Scenario full = s;
    for (const auto& t : out.transported) {
        for (const auto& a : s.assignments)
            if (a.page == t.page && a.source == t.source)
                throw ScenarioError("assignment on page " + std::to_string(a.page)
                                    + " conflicts with a transported differential");
        full.assignments.push_back(t);
    }
    full.source.reset();
    full.morphism.reset();
    out.run = run_to_limit(full, opts);
    out.naturality = check_naturality(*out.source_run, out.run, *out.morphism);
    return out;
}

} // namespace loopss
