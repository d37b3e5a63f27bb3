#include "cobra/cli.hpp"
#include "cobra/database.hpp"
#include "cobra/evaluator.hpp"
#include "cobra/parser.hpp"
#include "cobra/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>

namespace cobra::cli {

namespace {

constexpr const char *kVersion = "cobra 0.1.0";

struct Config
{
    std::string input;
    std::string entry;
    std::string catalog;
    std::string network;
    std::string af;
    std::string rules = "all";
    std::string dot;
    std::string db;
    bool explain = false;
    bool list_alternatives = false;
    bool trace_rules = false;
    bool self_check = false;
    bool legacy = false;
    bool dump_regions = false;
};

const ast::FunctionDef &entry_of(const ast::Program &p, const std::string &entry)
{
    if (!entry.empty()) {
        if (auto *f = p.find(entry)) return *f;
        throw Error("no function named '" + entry + "'");
    }
    if (p.functions.size() != 1) throw Error("the program defines several functions; pass --entry");
    return p.functions.front();
}

CostCatalog load_catalog(const Config &c, std::ostream &err)
{
    CostCatalog cat = CostCatalog::load(c.catalog);
    if (!c.network.empty()) cat.apply_network_preset(c.network);
    if (!c.af.empty()) cat.global_af = parse_af(c.af);
    for (auto &w : cat.warnings) err << "warning: " << w << "\n";
    return cat;
}

void write_file(const std::string &path, const std::string &text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(path + ": cannot write");
    f << text;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void trace(const Pipeline &pl, std::ostream &err)
{
    for (auto &e : pl.events)
        err << "rule=" << e.rule << " or=" << pl.dag.label(e.target) << " new_and=" << e.produced
            << (e.fresh ? "" : " existing") << "\n";
}

void list_alternatives(const Pipeline &pl, const Plan &plan, std::ostream &err)
{
    for (OrId o : pl.dag.reachable()) {
        const OrNode &node = pl.dag.or_node(o);
        if (node.alts.size() < 2) continue;
        err << pl.dag.label(o) << ":\n";
        for (AndId a : node.alts) {
            auto it = plan.and_cost.find(a);
            err << (plan.choice.at(o) == a ? "  * " : "    ") << "#" << a << " "
                << (pl.dag.and_node(a).rule.empty() ? "original" : pl.dag.and_node(a).rule) << " "
                << (it == plan.and_cost.end() ? std::string("n/a") : fmt(it->second.total()) + "s") << "  "
                << pl.dag.describe(a) << "\n";
        }
    }
}

/// Reparses the emitted program and compares it with the input on seeded random databases.
void self_check(const ast::Program &original, const std::string &emitted, const std::string &entry,
                const CostCatalog &cat, std::ostream &err)
{
    ast::Program reparsed = parse(emitted);
    if (!ast::equal(reparsed, parse(print(reparsed)))) throw InternalError("emitted program does not round-trip");
    const int seeds = 5;
    for (int seed = 1; seed <= seeds; ++seed) {
        Database db = random_database(cat.schema(), static_cast<std::uint64_t>(seed));
        OutputState want, got;
        bool want_ok = true, got_ok = true;
        try {
            want = Evaluator(original, db).run(entry);
        } catch (const RuntimeError &) {
            want_ok = false;
        }
        try {
            got = Evaluator(reparsed, db).run(entry);
        } catch (const RuntimeError &) {
            got_ok = false;
        }
        if (want_ok != got_ok || (want_ok && !want.same_as(got)))
            throw InternalError("self-check failed on seed " + std::to_string(seed) + "\nexpected " +
                                (want_ok ? want.str() : "error") + "\ngot " + (got_ok ? got.str() : "error"));
    }
    err << "self-check: " << seeds << " databases agree\n";
}

int optimize(const Config &c, std::ostream &out, std::ostream &err)
{
    ast::Program program = parse(read_file(c.input));
    const ast::FunctionDef &fn = entry_of(program, c.entry);
    CostCatalog cat = load_catalog(c, err);
    Pipeline pl(fn, &cat, {c.rules, c.legacy, 10000});
    if (pl.report.budget_exceeded) err << "warning: rule budget exhausted before saturation\n";
    if (c.dump_regions) err << pl.regions().compact() << "\n";
    if (c.trace_rules) trace(pl, err);
    if (!c.dot.empty()) write_file(c.dot, pl.dag.dot());
    Plan plan = pl.plan(catalog_cost(cat));
    if (c.explain) err << explain(pl.dag, plan);
    if (c.list_alternatives) list_alternatives(pl, plan, err);
    std::string text = print(substitute(program, pl.emit(plan)));
    if (c.self_check) self_check(program, text, fn.name, cat, err);
    out << text;
    return 0;
}

int run(const Config &c, std::ostream &out)
{
    ast::Program program = parse(read_file(c.input));
    const ast::FunctionDef &fn = entry_of(program, c.entry);
    Database db = Database::load(c.db);
    out << Evaluator(program, db).run(fn.name).str();
    return 0;
}

int dump_regions(const Config &c, std::ostream &out)
{
    ast::Program program = parse(read_file(c.input));
    if (!c.entry.empty()) {
        Cfg cfg = build_cfg(entry_of(program, c.entry));
        out << build_region_tree(cfg).compact() << "\n";
        return 0;
    }
    for (auto &f : program.functions) {
        Cfg cfg = build_cfg(f);
        out << f.name << ": " << build_region_tree(cfg).compact() << "\n";
    }
    return 0;
}

int dump_dag(const Config &c, std::ostream &out, std::ostream &err)
{
    ast::Program program = parse(read_file(c.input));
    const ast::FunctionDef &fn = entry_of(program, c.entry);
    std::optional<CostCatalog> cat;
    if (!c.catalog.empty()) cat = load_catalog(c, err);
    Pipeline pl(fn, cat ? &*cat : nullptr, {c.rules, c.legacy, 10000});
    if (c.trace_rules) trace(pl, err);
    if (!c.dot.empty()) write_file(c.dot, pl.dag.dot());
    out << pl.dag.dump();
    return 0;
}

}

int main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    Config c;
    CLI::App app{"Cost-based rewriting of database-backed imperative programs", "cobra"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto add_rules = [&](CLI::App *s) {
        s->add_option("--rules", c.rules, "Comma-separated rule subset (T1..T5, N1, N2, all, none)");
        s->add_flag("--legacy-fold-precondition", c.legacy, "Decline loops whose accumulators depend on each other");
        s->add_flag("--trace-rules", c.trace_rules, "Print one line per rule event on stderr");
        s->add_option("--emit-dot", c.dot, "Write the expanded DAG as DOT");
    };

    auto *opt = app.add_subcommand("optimize", "Rewrite a function into its cheapest equivalent");
    opt->add_option("file", c.input, "CobraLang source")->required();
    opt->add_option("--catalog", c.catalog, "Cost catalog JSON")->required();
    opt->add_option("--entry", c.entry, "Function to optimize");
    opt->add_option("--network", c.network, "Network preset")->check(CLI::IsMember({"slow-remote", "fast-local", "custom"}));
    opt->add_option("--af", c.af, "Global prefetch amortization factor (N or inf)");
    opt->add_flag("--explain", c.explain, "Per-OR cost report on stderr");
    opt->add_flag("--list-alternatives", c.list_alternatives, "Alternatives of every choice point on stderr");
    opt->add_flag("--self-check", c.self_check, "Verify the output against the input on random databases");
    opt->add_flag("--dump-regions", c.dump_regions, "Print the region tree on stderr");
    add_rules(opt);

    auto *runc = app.add_subcommand("run", "Interpret a function over a JSON database");
    runc->add_option("file", c.input, "CobraLang source")->required();
    runc->add_option("--db", c.db, "Database JSON")->required();
    runc->add_option("--entry", c.entry, "Function to run");

    auto *regions = app.add_subcommand("dump-regions", "Print region trees");
    regions->add_option("file", c.input, "CobraLang source")->required();
    regions->add_option("--entry", c.entry, "Function to analyse");

    auto *dag = app.add_subcommand("dump-dag", "Print the expanded AND-OR DAG");
    dag->add_option("file", c.input, "CobraLang source")->required();
    dag->add_option("--entry", c.entry, "Function to analyse");
    dag->add_option("--catalog", c.catalog, "Cost catalog JSON (enables key-dependent rules)");
    add_rules(dag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*opt) return optimize(c, out, err);
        if (*runc) return run(c, out);
        if (*regions) return dump_regions(c, out);
        return dump_dag(c, out, err);
    } catch (const CycleError &e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const UnloweredOperator &e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const InternalError &e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << "\n";
        return 2;
    }
}

}
