#include "support.hpp"

#include <doctest.h>

#include <regex>

using namespace cobra;

namespace {

OrId by_label(const Dag &d, const std::string &label)
{
    for (auto &o : d.ors)
        if (d.label(o.id) == label) return o.id;
    FAIL("no OR labelled " << label);
    return -1;
}

Tree konst(int v)
{
    Payload p;
    p.value = Value(v);
    return Tree::node(Op::Const, p);
}

std::size_t count(const std::string &text, const std::string &pattern)
{
    std::regex re(pattern);
    return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

struct Initial
{
    ast::Program program;
    Cfg cfg;
    RegionTree tree;
    Dag dag;

    explicit Initial(ast::Program p) : program(std::move(p))
    {
        cfg = build_cfg(program.functions.at(0));
        tree = build_region_tree(cfg);
        dag = init_dag(tree);
    }
};

}

TEST_CASE("initial DAG mirrors the region tree")
{
    Initial in(testing::sample("p0"));
    const Dag &d = in.dag;
    CHECK(d.audit().empty());
    CHECK(d.ors.size() == in.tree.all.size());
    CHECK(d.ands.size() == d.ors.size());

    OrId root = d.root;
    CHECK(d.label(root) == "S2-7");
    const AndNode &seq = d.and_node(d.or_node(root).alts.at(0));
    CHECK(seq.op == Op::Seq);
    CHECK(seq.kids == std::vector<OrId>{by_label(d, "B2"), by_label(d, "L3-7")});
    const AndNode &loop = d.and_node(d.or_node(by_label(d, "L3-7")).alts.at(0));
    CHECK(loop.op == Op::Loop);
    CHECK(loop.kids == std::vector<OrId>{by_label(d, "B3"), by_label(d, "S4-6")});
    for (auto &a : d.ands) CHECK(a.initial);
}

TEST_CASE("single block gives one OR and one AND")
{
    Initial in(parse("fn f() {\n x = 1;\n}"));
    CHECK(in.dag.ors.size() == 1);
    CHECK(in.dag.ands.size() == 1);
    CHECK(in.dag.and_node(0).op == Op::Block);
}

TEST_CASE("dependent aggregation skeleton")
{
    Initial in(testing::sample("m0"));
    const Dag &d = in.dag;
    CHECK(d.label(d.root) == "S2-9");
    const AndNode &top = d.and_node(d.or_node(d.root).alts.at(0));
    CHECK(top.kids == std::vector<OrId>{by_label(d, "S2-3"), by_label(d, "L4-7"), by_label(d, "S8-9")});
}

TEST_CASE("adding an alternative is hash-consed and idempotent")
{
    Initial in(testing::sample("p0"));
    Dag &d = in.dag;
    OrId loop = by_label(d, "L3-7");
    OrId header = by_label(d, "B3");
    std::size_t ors = d.ors.size();

    Tree alt = Tree::node(Op::Seq, {}, {Tree::of(header), konst(7)});
    AndId first = d.add_alternative(loop, alt, "test");
    std::size_t after_first = d.ands.size();
    AndId second = d.add_alternative(loop, alt, "test");
    CHECK(first == second);
    CHECK(d.ands.size() == after_first);
    CHECK(d.or_node(loop).alts.size() == 2);
    // the existing header OR is reused, only the constant is new
    CHECK(d.ors.size() == ors + 1);
    CHECK(d.and_node(first).kids.at(0) == header);
    CHECK(d.audit().empty());
}

TEST_CASE("identical subtrees under different parents share one OR")
{
    Dag d;
    OrId a = d.intern(Tree::node(Op::Binary, [] { Payload p; p.name = "+"; return p; }(), {konst(1), konst(2)}));
    OrId b = d.intern(Tree::node(Op::Binary, [] { Payload p; p.name = "+"; return p; }(), {konst(1), konst(2)}));
    CHECK(a == b);
    CHECK(d.ors.size() == 3);
}

TEST_CASE("an alternative that would make an OR its own ancestor is rejected")
{
    Initial in(testing::sample("p0"));
    Dag &d = in.dag;
    OrId b2 = by_label(d, "B2");
    std::size_t ands = d.ands.size();
    CHECK_THROWS_AS(d.add_alternative(b2, Tree::node(Op::Seq, {}, {Tree::of(d.root)}), "bad"), CycleError);
    CHECK(d.ands.size() == ands);
    CHECK(d.audit().empty());
}

TEST_CASE("expansion with no rules leaves the DAG unchanged")
{
    auto p = testing::sample("p0");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"none"});
    CHECK(pl.report.events.empty());
    CHECK(pl.report.applications == 0);
}

TEST_CASE("mutually inverse rules saturate with two alternatives")
{
    auto p = testing::sample("fold_select");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"T2,N2"});
    CHECK_FALSE(pl.report.budget_exceeded);
    CHECK(pl.report.applications <= 10);
    REQUIRE_FALSE(pl.report.events.empty());
    OrId target = pl.report.events.front().target;
    CHECK(pl.dag.or_node(target).alts.size() == 2);
    CHECK(pl.dag.audit().empty());
}

TEST_CASE("expanding the N+1 program adds join and prefetch alternatives")
{
    auto p = testing::sample("p0");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat);
    std::set<std::string> rules;
    for (auto &e : pl.events) rules.insert(e.rule);
    CHECK(rules.count("loopToFold"));
    CHECK(rules.count("T4"));
    CHECK(rules.count("N1"));
    // the original loop alternative is still there
    OrId loop = by_label(pl.dag, "L3-7");
    CHECK(pl.dag.and_node(pl.dag.or_node(loop).alts.front()).initial);
    CHECK(pl.dag.audit().empty());
}

TEST_CASE("expansion is deterministic")
{
    auto p = testing::sample("t4");
    auto cat = testing::catalog("slow-remote");
    Pipeline a(p.functions[0], &cat), b(p.functions[0], &cat);
    CHECK(a.dag.dump() == b.dag.dump());
    CHECK(a.dag.dot() == b.dag.dot());
}

TEST_CASE("DOT export draws ORs as ellipses and ANDs as boxes")
{
    Initial in(testing::sample("p0"));
    std::string dot = in.dag.dot();
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(count(dot, "shape=ellipse") == in.dag.ors.size());
    CHECK(count(dot, "shape=box") == in.dag.ands.size());

    Initial empty(parse("fn f() { }"));
    std::string e = empty.dag.dot();
    CHECK(count(e, "shape=ellipse") == 1);
    CHECK(count(e, "shape=box") == 1);
}

TEST_CASE("no two AND nodes share operator, payload and children")
{
    for (auto name : {"p0", "m0", "t2", "t4", "n1", "fold_select"}) {
        CAPTURE(name);
        auto p = testing::sample(name);
        auto cat = testing::catalog("slow-remote");
        Pipeline pl(p.functions[0], &cat);
        std::set<std::string> keys;
        for (auto &a : pl.dag.ands) CHECK(keys.insert(a.key).second);
    }
}
