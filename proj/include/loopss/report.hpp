#pragma once

#include "loopss/scenario_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace loopss {

inline constexpr int report_schema_version = 1;

class ReportError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ReportCell {
    int r = 2;
    int p = 0;
    int q = 0;
    std::size_t free_rank = 0;
    std::vector<std::string> torsion;
    std::vector<std::string> representatives;
    bool reliable = true;
    bool operator==(const ReportCell&) const = default;
};

struct ReportDifferential {
    int r = 2;
    Bidegree source;
    Bidegree target;
    std::vector<std::vector<std::string>> matrix; // rows: target E2 basis, columns: source cycles
    std::vector<std::string> images;
    bool operator==(const ReportDifferential&) const = default;
};

struct ReportAssignment {
    int page = 2;
    std::string source;
    std::string image;
    bool transported = false;
    bool operator==(const ReportAssignment&) const = default;
};

struct ReportDiscrepancy {
    int degree = 0;
    std::string expected;
    std::string found;
    std::string mode;
    std::vector<Bidegree> cells;
    std::vector<std::string> candidates;
    bool operator==(const ReportDiscrepancy&) const = default;
};

struct ReportAudit {
    std::vector<int> audited_degrees;
    std::vector<ReportDiscrepancy> discrepancies;
    bool operator==(const ReportAudit&) const = default;
};

struct ReportCollapse {
    bool collapses = true;
    int page = 0;
    Bidegree source;
    Bidegree target;
    std::vector<std::vector<std::string>> matrix;
    std::vector<std::string> images;
    bool operator==(const ReportCollapse&) const = default;
};

struct RunReport {
    int schema_version = report_schema_version;
    std::string fingerprint;
    std::string ring;
    Window window;
    std::vector<int> pages; // pages included in the cell and differential tables
    int last_page = 2;      // index of E_infinity
    std::vector<ReportCell> cells;
    std::vector<ReportDifferential> differentials;
    std::vector<ReportAssignment> assignments;
    std::vector<std::string> warnings;
    std::optional<ReportAudit> audit;
    ReportCollapse collapse;
    std::vector<std::string> naturality;
    bool operator==(const RunReport&) const = default;

    bool has_page(int r) const { return std::find(pages.begin(), pages.end(), r) != pages.end(); }
};

/// 64-bit FNV-1a of the scenario bytes, as 16 hex digits.
inline std::string fingerprint(const std::string& bytes)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/**
 * Page selection: "all", "inf", or a comma list of indices and ranges
 * ("2,4-5"). "inf" names the last page.
 */
inline std::vector<int> parse_page_list(const std::string& spec, int last)
{
    std::set<int> out;
    if (spec.empty() || spec == "all") {
        for (int r = 2; r <= last; ++r)
            out.insert(r);
        return {out.begin(), out.end()};
    }
    std::stringstream ss(spec);
    std::string item;
    auto page_of = [&](const std::string& t) {
        if (t == "inf")
            return last;
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size() || t.empty())
            throw ReportError("bad page selector '" + t + "'");
        if (v < 2 || v > last)
            throw ReportError("page " + t + " is outside 2.." + std::to_string(last));
        return v;
    };
    while (std::getline(ss, item, ',')) {
        auto dash = item.find('-');
        if (dash == std::string::npos) {
            out.insert(page_of(item));
        } else {
            int a = page_of(item.substr(0, dash)), b = page_of(item.substr(dash + 1));
            for (int r = a; r <= b; ++r)
                out.insert(r);
        }
    }
    return {out.begin(), out.end()};
}

namespace detail {

inline std::vector<std::vector<std::string>> matrix_strings(const ExactMatrix& m)
{
    std::vector<std::vector<std::string>> out(m.rows(), std::vector<std::string>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out[i][j] = m.at(i, j).get_str();
    return out;
}

inline std::string describe_candidate(const Algebra& alg, const AnnihilatorCandidate& c, Bidegree cell)
{
    Bidegree from = c.incoming ? c.partner : cell;
    Bidegree to = c.incoming ? cell : c.partner;
    std::string s = "d_" + std::to_string(c.page) + " from " + from.to_string() + " to " + to.to_string() + " (";
    s += c.incoming ? "incoming" : "outgoing";
    s += "; partner basis:";
    for (const auto& e : c.partner_basis)
        s += " " + alg.render(e);
    return s + ")";
}

} // namespace detail

inline ReportAudit build_audit(const Run& run, const TargetCohomology& target)
{
    const E2Layout& layout = *run.layout;
    AuditResult res = audit_convergence(run, target);
    ReportAudit out;
    out.audited_degrees = res.audited_degrees;
    for (const auto& d : res.discrepancies) {
        ReportDiscrepancy rd;
        rd.degree = d.degree;
        rd.expected = d.expected.to_string();
        rd.found = d.found.to_string();
        rd.mode = d.mode;
        rd.cells = d.cells;
        for (Bidegree b : d.cells) {
            int from = stable_from(run, b);
            for (const Element& cls : cell_representatives(run.e_infinity(), layout, b)) {
                std::string head = layout.algebra().render(cls) + " at " + b.to_string() + ": ";
                auto cands = annihilator_candidates(run, cls, b, from);
                if (cands.empty())
                    rd.candidates.push_back(head + "permanent in window");
                for (const auto& c : cands)
                    rd.candidates.push_back(head + detail::describe_candidate(layout.algebra(), c, b));
            }
        }
        out.discrepancies.push_back(std::move(rd));
    }
    return out;
}

/// Builds the report; `pages` selects which pages enter the cell and differential tables.
inline RunReport build_report(const DocumentRun& doc, const std::string& scenario_bytes,
                              const std::vector<int>& pages)
{
    const Run& run = doc.run;
    const E2Layout& layout = *run.layout;
    const Algebra& alg = layout.algebra();
    RunReport rep;
    rep.fingerprint = fingerprint(scenario_bytes);
    rep.ring = layout.ring().name();
    rep.window = layout.window();
    rep.pages = pages;
    rep.last_page = run.last_page();
    for (int r : pages) {
        const Page& page = run.page(r);
        for (std::size_t i = 0; i < layout.cell_count(); ++i) {
            Bidegree b = layout.cell_at(i);
            const Cell& c = page.cells[i];
            auto inv = cell_invariants(c);
            if (inv.is_zero() && c.reliable)
                continue;
            ReportCell rc{r, b.p, b.q, inv.free_rank, {}, {}, c.reliable};
            for (const auto& t : inv.torsion)
                rc.torsion.push_back(t.get_str());
            for (const auto& e : cell_representatives(page, layout, b))
                rc.representatives.push_back(alg.render(e));
            rep.cells.push_back(std::move(rc));
        }
        if (page.differentials.empty())
            continue;
        for (std::size_t i = 0; i < layout.cell_count(); ++i) {
            Bidegree b = layout.cell_at(i);
            if (!differential_nonzero(page, layout, b))
                continue;
            ReportDifferential d;
            d.r = r;
            d.source = b;
            d.target = {b.p + r, b.q - r + 1};
            ExactMatrix m = image_of_cycles(page, layout, b);
            d.matrix = detail::matrix_strings(m);
            for (const auto& col : m.columns())
                d.images.push_back(alg.render(layout.element(d.target, col)));
            rep.differentials.push_back(std::move(d));
        }
    }
    for (const auto& a : run.scenario->assignments)
        rep.assignments.push_back({a.page, alg.render(a.source), alg.render(a.image), a.transported});
    rep.warnings = doc.warnings;
    if (run.scenario->target)
        rep.audit = build_audit(run, *run.scenario->target);
    CollapseResult cr = collapse_report(run);
    rep.collapse.collapses = cr.collapses;
    if (!cr.collapses) {
        rep.collapse.page = cr.page;
        rep.collapse.source = cr.source;
        rep.collapse.target = cr.target;
        rep.collapse.matrix = detail::matrix_strings(cr.matrix);
        for (const auto& e : cr.images)
            rep.collapse.images.push_back(alg.render(e));
    }
    for (const auto& v : doc.naturality)
        rep.naturality.push_back("page " + std::to_string(v.page) + " cell " + v.cell.to_string() + ": " + v.detail);
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline ordered_json bidegree_json(Bidegree b) { return ordered_json::array({b.p, b.q}); }

inline Bidegree bidegree_from(const json& j)
{
    if (!j.is_array() || j.size() != 2)
        throw ReportError("bidegree must be [p, q]");
    return {j.at(0).get<int>(), j.at(1).get<int>()};
}

template <typename T>
T field(const json& j, const char* key)
{
    if (!j.contains(key))
        throw ReportError(std::string("report is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ReportError(std::string("report field '") + key + "': " + e.what());
    }
}

} // namespace detail

inline nlohmann::ordered_json to_json(const RunReport& r)
{
    using detail::bidegree_json;
    using oj = nlohmann::ordered_json;
    oj j;
    j["schema_version"] = r.schema_version;
    j["fingerprint"] = r.fingerprint;
    j["ring"] = r.ring;
    j["window"] = {{"p_max", r.window.p_max}, {"q_max", r.window.q_max}};
    j["pages"] = r.pages;
    j["last_page"] = r.last_page;
    oj cells = oj::array();
    for (const auto& c : r.cells)
        cells.push_back({{"r", c.r},
                         {"p", c.p},
                         {"q", c.q},
                         {"free_rank", c.free_rank},
                         {"torsion", c.torsion},
                         {"representatives", c.representatives},
                         {"reliable", c.reliable}});
    j["cells"] = cells;
    oj diffs = oj::array();
    for (const auto& d : r.differentials)
        diffs.push_back({{"r", d.r},
                         {"source", bidegree_json(d.source)},
                         {"target", bidegree_json(d.target)},
                         {"matrix", d.matrix},
                         {"images", d.images}});
    j["differentials"] = diffs;
    oj asg = oj::array();
    for (const auto& a : r.assignments)
        asg.push_back({{"page", a.page}, {"source", a.source}, {"image", a.image}, {"transported", a.transported}});
    j["assignments"] = asg;
    j["warnings"] = r.warnings;
    if (r.audit) {
        oj disc = oj::array();
        for (const auto& d : r.audit->discrepancies) {
            oj cs = oj::array();
            for (auto b : d.cells)
                cs.push_back(bidegree_json(b));
            disc.push_back({{"degree", d.degree},
                            {"expected", d.expected},
                            {"found", d.found},
                            {"mode", d.mode},
                            {"cells", cs},
                            {"candidates", d.candidates}});
        }
        j["audit"] = {{"audited_degrees", r.audit->audited_degrees}, {"discrepancies", disc}};
    } else {
        j["audit"] = nullptr;
    }
    oj col;
    col["collapses"] = r.collapse.collapses;
    if (!r.collapse.collapses) {
        col["page"] = r.collapse.page;
        col["source"] = bidegree_json(r.collapse.source);
        col["target"] = bidegree_json(r.collapse.target);
        col["matrix"] = r.collapse.matrix;
        col["images"] = r.collapse.images;
    }
    j["collapse"] = col;
    j["naturality_violations"] = r.naturality;
    return j;
}

inline std::string report_text(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

inline RunReport report_from_json(const nlohmann::json& j)
{
    using detail::field;
    using matrix_t = std::vector<std::vector<std::string>>;
    using strings = std::vector<std::string>;
    if (!j.is_object())
        throw ReportError("report must be a JSON object");
    RunReport r;
    r.schema_version = field<int>(j, "schema_version");
    if (r.schema_version != report_schema_version)
        throw ReportError("unsupported report schema_version " + std::to_string(r.schema_version));
    r.fingerprint = field<std::string>(j, "fingerprint");
    r.ring = field<std::string>(j, "ring");
    const auto& w = j.at("window");
    r.window = {field<int>(w, "p_max"), field<int>(w, "q_max")};
    r.pages = field<std::vector<int>>(j, "pages");
    r.last_page = field<int>(j, "last_page");
    for (const auto& c : j.at("cells"))
        r.cells.push_back({field<int>(c, "r"), field<int>(c, "p"), field<int>(c, "q"),
                           field<std::size_t>(c, "free_rank"), field<strings>(c, "torsion"),
                           field<strings>(c, "representatives"), field<bool>(c, "reliable")});
    for (const auto& d : j.at("differentials"))
        r.differentials.push_back({field<int>(d, "r"), detail::bidegree_from(d.at("source")),
                                   detail::bidegree_from(d.at("target")), field<matrix_t>(d, "matrix"),
                                   field<strings>(d, "images")});
    for (const auto& a : j.at("assignments"))
        r.assignments.push_back({field<int>(a, "page"), field<std::string>(a, "source"),
                                 field<std::string>(a, "image"), field<bool>(a, "transported")});
    r.warnings = field<strings>(j, "warnings");
    if (!j.at("audit").is_null()) {
        const auto& a = j.at("audit");
        ReportAudit au;
        au.audited_degrees = field<std::vector<int>>(a, "audited_degrees");
        for (const auto& d : a.at("discrepancies")) {
            ReportDiscrepancy rd{field<int>(d, "degree"), field<std::string>(d, "expected"),
                                 field<std::string>(d, "found"), field<std::string>(d, "mode"), {},
                                 field<strings>(d, "candidates")};
            for (const auto& b : d.at("cells"))
                rd.cells.push_back(detail::bidegree_from(b));
            au.discrepancies.push_back(std::move(rd));
        }
        r.audit = std::move(au);
    }
    const auto& c = j.at("collapse");
    r.collapse.collapses = field<bool>(c, "collapses");
    if (!r.collapse.collapses) {
        r.collapse.page = field<int>(c, "page");
        r.collapse.source = detail::bidegree_from(c.at("source"));
        r.collapse.target = detail::bidegree_from(c.at("target"));
        r.collapse.matrix = field<matrix_t>(c, "matrix");
        r.collapse.images = field<strings>(c, "images");
    }
    r.naturality = field<strings>(j, "naturality_violations");
    return r;
}

inline RunReport parse_report(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ReportError(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        return report_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ReportError(std::string("malformed report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rendering

/// "1", "T(3)", "2+T(2,4)" or "." for zero.
inline std::string cell_label(const ReportCell& c)
{
    std::string s;
    if (c.free_rank > 0)
        s = std::to_string(c.free_rank);
    if (!c.torsion.empty()) {
        std::string t = "T(";
        for (std::size_t i = 0; i < c.torsion.size(); ++i)
            t += (i ? "," : "") + c.torsion[i];
        t += ")";
        s += (s.empty() ? "" : "+") + t;
    }
    if (s.empty())
        s = ".";
    return c.reliable ? s : "[" + s + "]";
}

/// Restriction of the report to a single page (cells and differentials only).
inline RunReport restrict_to_page(const RunReport& r, int page)
{
    if (!r.has_page(page))
        throw ReportError("page " + std::to_string(page) + " is not in this report");
    RunReport out = r;
    out.pages = {page};
    out.cells.clear();
    out.differentials.clear();
    for (const auto& c : r.cells)
        if (c.r == page)
            out.cells.push_back(c);
    for (const auto& d : r.differentials)
        if (d.r == page)
            out.differentials.push_back(d);
    return out;
}

inline std::vector<std::vector<std::string>> page_grid(const RunReport& r, int page)
{
    std::vector<std::vector<std::string>> grid(static_cast<std::size_t>(r.window.q_max + 1),
                                               std::vector<std::string>(static_cast<std::size_t>(r.window.p_max + 1), "."));
    for (const auto& c : r.cells)
        if (c.r == page && c.p <= r.window.p_max && c.q <= r.window.q_max)
            grid[static_cast<std::size_t>(c.q)][static_cast<std::size_t>(c.p)] = cell_label(c);
    return grid;
}

inline std::string render_ascii(const RunReport& r, int page)
{
    RunReport pr = restrict_to_page(r, page);
    auto grid = page_grid(pr, page);
    std::ostringstream os;
    os << "E_" << page << (page == r.last_page ? " (E_infinity)" : "") << ", ring " << r.ring << "\n";
    std::size_t ncols = static_cast<std::size_t>(r.window.p_max + 1);
    std::vector<std::size_t> width(ncols, 1);
    for (const auto& row : grid)
        for (std::size_t p = 0; p < ncols; ++p)
            width[p] = std::max(width[p], row[p].size());
    for (std::size_t p = 0; p < ncols; ++p)
        width[p] = std::max(width[p], std::to_string(p).size());
    std::size_t qw = std::to_string(r.window.q_max).size();
    auto emit = [&](const std::string& label, auto cell) {
        std::string line = std::string(qw - std::min(qw, label.size()), ' ') + label + " |";
        for (std::size_t p = 0; p < ncols; ++p) {
            std::string e = cell(p);
            line += " " + e + std::string(width[p] - e.size(), ' ');
        }
        while (!line.empty() && line.back() == ' ')
            line.pop_back();
        os << line << "\n";
    };
    for (int q = r.window.q_max; q >= 0; --q)
        emit(std::to_string(q), [&](std::size_t p) { return grid[static_cast<std::size_t>(q)][p]; });
    std::string rule(qw + 1, ' ');
    rule += "+";
    for (std::size_t p = 0; p < ncols; ++p)
        rule += std::string(width[p] + 1, '-');
    os << rule << "\n";
    emit("", [&](std::size_t p) { return std::to_string(p); });
    if (pr.differentials.empty()) {
        os << "no nonzero differentials on this page\n";
    } else {
        os << "differentials:\n";
        for (const auto& d : pr.differentials) {
            os << "  d_" << d.r << ": " << d.source.to_string() << " -> " << d.target.to_string() << ":";
            for (std::size_t i = 0; i < d.images.size(); ++i)
                os << (i ? ", " : " ") << d.images[i];
            os << "\n";
        }
    }
    return os.str();
}

inline std::string render_latex(const RunReport& r, int page)
{
    RunReport pr = restrict_to_page(r, page);
    auto grid = page_grid(pr, page);
    std::ostringstream os;
    os << "% E_" << page << " page, ring " << r.ring << "\n";
    os << "\\begin{tikzpicture}[x=1.2cm,y=0.8cm]\n";
    os << "  \\draw[->] (-0.5,-0.5) -- (" << r.window.p_max + 0.5 << ",-0.5) node[right] {$p$};\n";
    os << "  \\draw[->] (-0.5,-0.5) -- (-0.5," << r.window.q_max + 0.5 << ") node[above] {$q$};\n";
    for (int p = 0; p <= r.window.p_max; ++p)
        os << "  \\node at (" << p << ",-1) {\\scriptsize " << p << "};\n";
    for (int q = 0; q <= r.window.q_max; ++q)
        os << "  \\node at (-1," << q << ") {\\scriptsize " << q << "};\n";
    for (const auto& c : pr.cells) {
        std::string label = cell_label(c);
        if (label == ".")
            continue;
        os << "  \\node (c" << c.p << "_" << c.q << ") at (" << c.p << "," << c.q << ") {$" << label << "$};\n";
    }
    for (const auto& d : pr.differentials)
        os << "  \\draw[->] (" << d.source.p << "," << d.source.q << ") -- (" << d.target.p << "," << d.target.q
           << ") node[midway,above,sloped] {\\tiny $d_{" << d.r << "}$};\n";
    os << "\\end{tikzpicture}\n";
    return os.str();
}

inline std::string render_json(const RunReport& r, std::optional<int> page)
{
    return report_text(page ? restrict_to_page(r, *page) : r);
}

} // namespace loopss
