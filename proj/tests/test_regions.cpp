#include "support.hpp"

#include <doctest.h>

#include <functional>

using namespace cobra;

namespace {

RegionTree tree_of(const ast::FunctionDef &fn, Cfg &cfg)
{
    cfg = build_cfg(fn);
    return build_region_tree(cfg);
}

}

TEST_CASE("N+1 program decomposes into sequence, loop and loop body")
{
    auto p = testing::sample("p0");
    Cfg cfg;
    auto t = tree_of(p.functions[0], cfg);
    CHECK(t.compact() == "S2-7 { B2; L3-7 { B3; S4-6 { B4; B5; B6 } } }");
    CHECK(t.root->kind == Region::Kind::Sequential);
    CHECK(t.find("L3-7")->kind == Region::Kind::Loop);
}

TEST_CASE("single block function is a lone leaf")
{
    auto p = parse("fn f() {\n x = 1;\n}");
    Cfg cfg;
    auto t = tree_of(p.functions[0], cfg);
    CHECK(t.root->is_leaf());
    CHECK(t.compact() == "B2");
}

TEST_CASE("a split condition becomes a black box and its siblings stay structured")
{
    auto p = parse("fn f(a: int, b: int) {\n x = 1;\n if (a > 0 && b > 0) {\n  x = 2;\n }\n y = x;\n return y;\n}");
    Cfg cfg;
    auto t = tree_of(p.functions[0], cfg);
    CHECK(t.compact() == "S2-7 { B2; X3-5; S6-7 { B6; B7 } }");
    const Region *x = t.find("X3-5");
    REQUIRE(x);
    CHECK(x->kind == Region::Kind::BlackBox);
    CHECK(x->stmts.size() == 1);
}

TEST_CASE("an if without split condition is a conditional region")
{
    auto p = parse("fn f(a: int) {\n x = 1;\n if (a > 0) {\n  x = 2;\n } else {\n  x = 3;\n }\n return x;\n}");
    Cfg cfg;
    auto t = tree_of(p.functions[0], cfg);
    CHECK(t.compact() == "S2-8 { B2; C3-7 { B3; B4; B6 }; B8 }");
}

TEST_CASE("live boundaries of the loop regions")
{
    SUBCASE("N+1 loop")
    {
        auto p = testing::sample("p0");
        Cfg cfg;
        auto t = tree_of(p.functions[0], cfg);
        Liveness lv(cfg);
        auto b = lv.boundary(*t.find("L3-7"));
        CHECK(b.input == std::set<std::string>{"result"});
        CHECK(b.output == std::set<std::string>{"result"});
    }
    SUBCASE("dependent aggregation loop")
    {
        auto p = testing::sample("m0");
        Cfg cfg;
        auto t = tree_of(p.functions[0], cfg);
        Liveness lv(cfg);
        auto b = lv.boundary(*t.find("L4-7"));
        CHECK(b.input == std::set<std::string>{"cSum", "sum"});
        CHECK(b.output == std::set<std::string>{"cSum", "sum"});
    }
    SUBCASE("dead temporaries")
    {
        auto p = parse("fn f() {\n t = 1;\n u = t + 1;\n}");
        Cfg cfg;
        auto t = tree_of(p.functions[0], cfg);
        Liveness lv(cfg);
        CHECK(lv.boundary(*t.root).output.empty());
    }
}

TEST_CASE("region tree covers statements in textual order and nests laminarly")
{
    for (auto name : {"p0", "p2", "m0", "t2", "t4", "n1"}) {
        CAPTURE(name);
        auto p = testing::sample(name);
        Cfg cfg;
        auto t = tree_of(p.functions[0], cfg);
        std::vector<int> lines;
        std::function<void(const Region *)> go = [&](const Region *r) {
            CHECK(r->start_line <= r->end_line);
            for (auto *c : r->children) {
                CHECK(c->parent == r);
                CHECK(c->start_line >= r->start_line);
                CHECK(c->end_line <= r->end_line);
                go(c);
            }
            if (r->is_leaf()) lines.push_back(r->start_line);
        };
        go(t.root);
        CHECK(std::is_sorted(lines.begin(), lines.end()));
        // every statement line appears as a leaf
        std::set<int> stmt_lines;
        ast::walk(p.functions[0].body, [&](const ast::Stmt &s) { stmt_lines.insert(s.pos.line); });
        CHECK(std::set<int>(lines.begin(), lines.end()) == stmt_lines);
    }
}
