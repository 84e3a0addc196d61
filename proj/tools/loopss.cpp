// loopss: run Serre spectral sequence scenarios, render pages, audit convergence.

#include "loopss/loopss.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace loopss;

enum Exit { ok = 0, discrepancies = 1, scenario_error = 2, consistency_error = 3, internal_error = 4 };

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ScenarioError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomically(const std::string& path, const std::string& text)
{
    namespace fs = std::filesystem;
    fs::path tmp = fs::path(path);
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out.flush())
            throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void emit(const std::string& out_path, const std::string& text)
{
    if (out_path.empty() || out_path == "-")
        std::cout << text;
    else
        write_atomically(out_path, text);
}

RunOptions run_options(unsigned requested)
{
    RunOptions o;
    unsigned cap = 0;
    if (const char* env = std::getenv("LOOPSS_THREADS")) {
        try {
            cap = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring LOOPSS_THREADS=" << env << "\n";
        }
    }
    o.threads = requested ? requested : (cap ? cap : 1);
    if (cap)
        o.threads = std::min(o.threads, cap);
    o.threads = std::max(o.threads, 1u);
    return o;
}

template <typename Fn>
int guarded(const std::string& what, Fn&& fn)
{
    try {
        return fn();
    } catch (const ScenarioError& e) {
        std::cerr << what << ": scenario error: " << e.what() << "\n";
        return scenario_error;
    } catch (const ConsistencyError& e) {
        std::cerr << what << ": inconsistent differentials: " << e.what() << "\n";
        return consistency_error;
    } catch (const ReportError& e) {
        std::cerr << what << ": " << e.what() << "\n";
        return scenario_error;
    } catch (const std::exception& e) {
        std::cerr << what << ": internal error: " << e.what() << "\n";
        return internal_error;
    }
}

void print_warnings(const std::vector<std::string>& w)
{
    for (const auto& s : w)
        std::cerr << "warning: " << s << "\n";
}

int cmd_run(const std::string& path, const std::string& pages, const std::string& out, unsigned threads)
{
    return guarded(path, [&] {
        std::string bytes = slurp(path);
        Scenario s = parse_scenario(bytes);
        print_warnings(s.warnings);
        DocumentRun doc = run_document(s, run_options(threads));
        RunReport rep = build_report(doc, bytes, parse_page_list(pages, doc.run.last_page()));
        emit(out, report_text(rep));
        for (const auto& v : rep.naturality)
            std::cerr << "naturality violation: " << v << "\n";
        return ok;
    });
}

int cmd_render(const std::string& path, const std::string& page, const std::string& format, const std::string& out)
{
    return guarded(path, [&] {
        RunReport rep = parse_report(slurp(path));
        std::optional<int> r;
        if (!page.empty()) {
            auto sel = parse_page_list(page, rep.last_page);
            if (sel.size() != 1)
                throw ReportError("--page takes a single page");
            r = sel.front();
        }
        if (format == "json") {
            emit(out, render_json(rep, r));
            return ok;
        }
        int which = r ? *r : (rep.pages.empty() ? rep.last_page : rep.pages.back());
        emit(out, format == "latex" ? render_latex(rep, which) : render_ascii(rep, which));
        return ok;
    });
}

int cmd_audit(const std::string& path, unsigned threads)
{
    return guarded(path, [&] {
        std::string bytes = slurp(path);
        Scenario s = parse_scenario(bytes);
        print_warnings(s.warnings);
        if (!s.target) {
            std::cerr << path << ": scenario has no target cohomology to audit against\n";
            return static_cast<int>(scenario_error);
        }
        DocumentRun doc = run_document(s, run_options(threads));
        ReportAudit audit = build_audit(doc.run, *s.target);
        std::cout << "audited total degrees:";
        for (int n : audit.audited_degrees)
            std::cout << " " << n;
        std::cout << "\n";
        if (audit.discrepancies.empty()) {
            std::cout << "E_infinity agrees with the target on every audited degree\n";
            return static_cast<int>(ok);
        }
        for (const auto& d : audit.discrepancies) {
            std::cout << "degree " << d.degree << ": expected " << d.expected << ", found " << d.found << " ("
                      << d.mode << ")";
            for (auto b : d.cells)
                std::cout << " " << b.to_string();
            std::cout << "\n";
            for (const auto& c : d.candidates)
                std::cout << "  candidate: " << c << "\n";
        }
        return static_cast<int>(discrepancies);
    });
}

int cmd_preset(const PresetId& id, const std::string& ring, const std::string& out)
{
    return guarded(id.name, [&] {
        PresetId p = id;
        try {
            p.ring = Ring::parse(ring);
        } catch (const std::invalid_argument& e) {
            throw ScenarioError(e.what());
        }
        emit(out, serialize_scenario(materialize(p)));
        return ok;
    });
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Exact Serre spectral sequence engine"};
    app.require_subcommand(1);

    std::string scenario, report, pages = "all", out, page, format = "ascii";
    unsigned threads = 0;

    auto* run = app.add_subcommand("run", "Run a scenario and write its report");
    run->add_option("scenario", scenario, "scenario file")->required();
    run->add_option("--pages", pages, "pages to tabulate: all, inf, or a list like 2,4-5");
    run->add_option("--out", out, "report path (default stdout)");
    run->add_option("--threads", threads, "worker threads (capped by LOOPSS_THREADS)");

    auto* render = app.add_subcommand("render", "Render a page of a report");
    render->add_option("report", report, "report file")->required();
    render->add_option("--page", page, "page index or inf (default: last tabulated page)");
    render->add_option("--format", format, "ascii, latex or json")
        ->check(CLI::IsMember({"ascii", "latex", "json"}));
    render->add_option("--out", out, "output path (default stdout)");

    auto* audit = app.add_subcommand("audit", "Compare E_infinity with the target cohomology");
    audit->add_option("scenario", scenario, "scenario file")->required();
    audit->add_option("--threads", threads, "worker threads (capped by LOOPSS_THREADS)");

    PresetId id;
    std::string ring = "Z";
    auto* preset = app.add_subcommand("preset", "Print a built-in scenario as JSON");
    preset->add_option("name", id.name, "path_cpn_diag, free_loop_cpn, pair_with_morphism or free_loop_rank_one")
        ->required();
    preset->add_option("--n", id.n, "n for CP^n");
    preset->add_option("--m", id.m, "half the degree of x (rank-one preset)");
    preset->add_option("--k", id.k, "truncation height (rank-one preset)");
    preset->add_option("--ring", ring, "Z, Q or F_p");
    preset->add_flag("--vw", id.vw_basis, "write path_cpn_diag assignments through v = c1 - c2, w = c1");
    preset->add_option("--y-sign", id.y_sign, "orientation of y: 1 or -1")->check(CLI::IsMember({1, -1}));
    preset->add_option("--out", out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : scenario_error;
    }

    if (*run)
        return cmd_run(scenario, pages, out, threads);
    if (*render)
        return cmd_render(report, page, format, out);
    if (*audit)
        return cmd_audit(scenario, threads);
    return cmd_preset(id, ring, out);
}
