#include "support.hpp"

#include <doctest.h>

using namespace cobra;
using K = ast::Stmt::Kind;

TEST_CASE("minimal program parses to one assignment")
{
    auto p = parse("fn f(){ sum = 0; }");
    REQUIRE(p.functions.size() == 1);
    REQUIRE(p.functions[0].body.size() == 1);
    CHECK(p.functions[0].body[0]->kind == K::Assign);
    CHECK(p.functions[0].body[0]->target == "sum");
}

TEST_CASE("N+1 program has one query loop holding one executeQuery")
{
    auto p = testing::sample("p0");
    const auto &body = p.functions.at(0).body;
    int loops = 0, execs = 0;
    ast::walk(body, [&](const ast::Stmt &s) {
        if (s.kind == K::ForQuery) ++loops;
        if (s.expr) {
            std::vector<const ast::Expr *> stack{s.expr.get()};
            while (!stack.empty()) {
                auto *e = stack.back();
                stack.pop_back();
                if (e->kind == ast::Expr::Kind::ExecQuery) ++execs;
                for (auto &a : e->args) stack.push_back(a.get());
            }
        }
    });
    CHECK(loops == 1);
    CHECK(execs == 1);
}

TEST_CASE("missing expression is a syntax error at the expression position")
{
    try {
        parse("fn f(){ x = ; }");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError &e) {
        CHECK(e.pos().line == 1);
        CHECK(e.pos().col == 13);
        CHECK_FALSE(e.expected().empty());
    }
}

TEST_CASE("use before definition is rejected")
{
    CHECK_THROWS_AS(parse("fn f(){ x = y + 1; }"), SyntaxError);
}

TEST_CASE("printing and reparsing yields an equal program")
{
    for (auto name : {"p0", "p1", "p2", "m0", "t2", "t4", "n1", "fold_select"}) {
        CAPTURE(name);
        auto p = testing::sample(name);
        auto q = parse(print(p));
        CHECK(ast::equal(p, q));
        CHECK(print(q) == print(p));
    }
}

TEST_CASE("query algebra renders deterministic SQL")
{
    CHECK(to_sql(*testing::query("aggregate(sum, sale_amt, scan(sales))")) == "select sum(sale_amt) from sales");
    auto q = testing::query("orderby(month, project([month, sale_amt], scan(sales)))");
    CHECK(to_cobra(*q) == "orderby(month, project([month, sale_amt], scan(sales)))");
    CHECK(to_sql(*q) == to_sql(*testing::query(to_cobra(*q))));
}

TEST_CASE("straight-line code is one block between entry and exit")
{
    auto p = parse("fn f() { a = 1; b = a + 2; c = b * 3; }");
    Cfg cfg = build_cfg(p.functions[0]);
    CHECK(audit(cfg).empty());
    CHECK(cfg.blocks.size() == 3);
    CHECK(cfg.instruction_count() == cfg.lowered_count);
}

TEST_CASE("cursor loop gives header, body and post-loop blocks")
{
    auto p = testing::sample("p0");
    Cfg cfg = build_cfg(p.functions[0]);
    CHECK(audit(cfg).empty());
    int headers = 0;
    for (auto &b : cfg.blocks)
        for (auto &t : b.code)
            if (t.kind == Tac::Kind::ForNext) ++headers;
    CHECK(headers == 1);
    // entry, exit, prologue, header, body
    CHECK(cfg.blocks.size() == 5);
    CHECK(cfg.instruction_count() == cfg.lowered_count);
}

TEST_CASE("a conjunction in a condition becomes two predicate blocks sharing the join point")
{
    auto p = parse("fn f(a: int, b: int) { x = 1; if (a > 0 && b > 0) { x = 2; } return x; }");
    Cfg cfg = build_cfg(p.functions[0]);
    CHECK(audit(cfg).empty());
    std::vector<int> preds;
    for (auto &b : cfg.blocks)
        if (!b.code.empty() && b.code.back().kind == Tac::Kind::Branch) preds.push_back(b.id);
    REQUIRE(preds.size() == 2);
    // both predicates have the join as their false successor
    CHECK(cfg.blocks[preds[0]].succs[1] == cfg.blocks[preds[1]].succs[1]);
}

TEST_CASE("three-address lowering names temporaries left to right")
{
    auto p = parse("fn f(a: int) { x = (a + 1) * (a + 2); }");
    Cfg cfg = build_cfg(p.functions[0]);
    std::vector<std::string> dsts;
    for (auto &b : cfg.blocks)
        for (auto &t : b.code) dsts.push_back(t.dst);
    CHECK(dsts == std::vector<std::string>{"_t0", "_t1", "x"});
}
