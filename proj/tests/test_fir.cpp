#include "support.hpp"

#include <doctest.h>

using namespace cobra;

namespace {

const AndNode &only(const Dag &d, OrId o) { return d.and_node(d.or_node(o).alts.front()); }

std::vector<const AndNode *> with_op(const Dag &d, Op op, const std::string &rule)
{
    std::vector<const AndNode *> out;
    for (auto &a : d.ands)
        if (a.op == op && a.rule == rule) out.push_back(&a);
    return out;
}

struct Folded
{
    ast::Program program;
    Cfg cfg;
    RegionTree tree;
    std::unique_ptr<Liveness> live;
    Dag dag;
    FirContext ctx;

    Folded(ast::Program p, bool legacy = false) : program(std::move(p))
    {
        cfg = build_cfg(program.functions.at(0));
        tree = build_region_tree(cfg);
        live = std::make_unique<Liveness>(cfg);
        dag = init_dag(tree);
        ctx = FirContext{&program.functions[0], &tree, live.get(), nullptr, legacy};
    }

    OrId loop(const std::string &label)
    {
        for (auto &o : dag.ors)
            if (dag.label(o.id) == label) return o.id;
        FAIL("missing " << label);
        return -1;
    }
};

}

TEST_CASE("dependent aggregation folds into a tuple with a shared sum")
{
    Folded f(testing::sample("m0"));
    auto alt = loop_to_fold(f.dag, f.loop("L4-7"), f.ctx);
    REQUIRE(alt);
    CHECK(alt->op == Op::Seq);
    REQUIRE(alt->kids.size() == 3);
    CHECK(alt->kids[0].op == Op::Bind);
    CHECK(alt->kids[0].p.names == std::vector<std::string>{"sum", "cSum"});
    CHECK(alt->kids[1].op == Op::Assign);
    CHECK(alt->kids[1].kids.at(0).op == Op::Project);
    CHECK(alt->kids[1].kids.at(0).p.index == 0);
    CHECK(alt->kids[2].kids.at(0).p.index == 1);

    OrId fold_or = alt->kids[0].kids.at(0).ref;
    const AndNode &fold = only(f.dag, fold_or);
    REQUIRE(fold.op == Op::Fold);
    const AndNode &upd = only(f.dag, fold.kids[0]);
    const AndNode &init = only(f.dag, fold.kids[1]);
    REQUIRE(upd.op == Op::Tuple);
    REQUIRE(init.op == Op::Tuple);
    // sum' = <sum> + t.sale_amt is one node shared with the map update
    const AndNode &plus = only(f.dag, upd.kids[0]);
    CHECK(plus.op == Op::Binary);
    CHECK(plus.p.name == "+");
    const AndNode &put = only(f.dag, upd.kids[1]);
    CHECK(put.op == Op::MapPut);
    CHECK(put.kids.at(2) == upd.kids[0]);
    CHECK(only(f.dag, init.kids[0]).p.value == Value(0));
    CHECK(only(f.dag, init.kids[1]).p.value.is_map());
    CHECK(to_cobra(*only(f.dag, fold.kids[2]).p.query) == "orderby(month, project([month, sale_amt], scan(sales)))");
}

TEST_CASE("the single-accumulator precondition rejects dependent aggregation")
{
    Folded f(testing::sample("m0"), true);
    CHECK_FALSE(loop_to_fold(f.dag, f.loop("L4-7"), f.ctx));
}

TEST_CASE("a single accumulator gives the scalar fold form")
{
    Folded f(parse("fn f() {\n s = 0;\n for (t : query { scan(sales) }) {\n  s = s + t.sale_amt;\n }\n return s;\n}"));
    auto alt = loop_to_fold(f.dag, f.loop("L3-5"), f.ctx);
    REQUIRE(alt);
    CHECK(alt->op == Op::Assign);
    CHECK(alt->p.name == "s");
    const Tree &fold = alt->kids.at(0);
    CHECK(fold.op == Op::Fold);
    CHECK(fold.kids[0].op == Op::Binary);
    CHECK(fold.kids[0].kids[0].op == Op::Slot);
    CHECK(fold.kids[0].kids[1].op == Op::Attr);
    CHECK(fold.kids[1].op == Op::Const);
    CHECK(fold.kids[1].p.value == Value(0));
    CHECK(fold.kids[2].op == Op::Source);
}

TEST_CASE("a carried value that is not an accumulation blocks folding")
{
    Folded f(parse("fn f() {\n prev = 0;\n x = 0;\n for (t : query { scan(sales) }) {\n  x = x + prev;\n  prev = t.sale_amt;\n }\n return x;\n}"));
    CHECK_FALSE(loop_to_fold(f.dag, f.loop("L4-7"), f.ctx));
}

TEST_CASE("a query reading a variable the loop writes blocks folding")
{
    Folded f(parse("fn f() {\n k = 1;\n n = 0;\n for (t : query { scan(sales) }) {\n"
                   "  n = n + first(executeQuery(query { select(i_id == $k, scan(items)) })).i_price;\n"
                   "  k = t.item_id;\n }\n return n;\n}"));
    CHECK_FALSE(loop_to_fold(f.dag, f.loop("L4-7"), f.ctx));
}

TEST_CASE("toFIR visits inner loops first and skips loop-free code")
{
    Folded nested(testing::sample("t4"));
    auto ev = to_fir(nested.dag, nested.ctx);
    REQUIRE(ev.size() == 2);
    CHECK(nested.dag.label(ev[0].target) == "L5-7");
    CHECK(nested.dag.label(ev[1].target) == "L4-8");

    Folded flat(parse("fn f() { x = 1; y = x + 1; return y; }"));
    CHECK(to_fir(flat.dag, flat.ctx).empty());
}

TEST_CASE("rule subsets")
{
    CHECK(select_rules("all").size() == 7);
    CHECK(select_rules("none").empty());
    CHECK(select_rules("T2,N2").size() == 2);
    CHECK_THROWS_AS(select_rules("T2,X9"), Error);
}

TEST_CASE("aggregation rule turns a summing fold into a sum query")
{
    auto p = testing::sample("m0");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"T5"});
    auto made = with_op(pl.dag, Op::ExecuteQuery, "T5");
    REQUIRE(made.size() == 1);
    CHECK(to_sql(*made[0]->p.query) == "select sum(sale_amt) from sales");
}

TEST_CASE("predicate push and its reverse")
{
    auto p = testing::sample("t2");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"T2,N2"});
    auto pushed = with_op(pl.dag, Op::Fold, "T2");
    REQUIRE(pushed.size() == 1);
    const AndNode &src = only(pl.dag, pushed[0]->kids[2]);
    CHECK(src.p.query->kind == QueryExpr::Kind::Select);
    // N2 maps the pushed fold back onto the original alternative
    bool reverse_existing = false;
    for (auto &e : pl.report.events)
        if (e.rule == "N2" && !e.fresh) reverse_existing = true;
    CHECK(reverse_existing);
}

TEST_CASE("prefetch rule replaces the per-row query with a cache lookup")
{
    auto p = testing::sample("p0");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"N1"});
    auto made = with_op(pl.dag, Op::Seq, "N1");
    REQUIRE(made.size() == 1);
    const AndNode &pre = only(pl.dag, made[0]->kids[0]);
    CHECK(pre.op == Op::Prefetch);
    CHECK(pre.p.name == "customers");
    CHECK(pre.p.attr == "c_customer_sk");
    CHECK(with_op(pl.dag, Op::Lookup, "N1").size() == 1);
}

TEST_CASE("join identification and the scalar push")
{
    auto p = testing::sample("t4");
    auto cat = testing::catalog("slow-remote");
    Pipeline pl(p.functions[0], &cat, {"T4"});
    bool join = false;
    for (auto *a : with_op(pl.dag, Op::Source, "T4")) join |= a->p.query->kind == QueryExpr::Kind::Join;
    CHECK(join);

    Pipeline pushed(testing::sample("t2").functions[0], &cat, {"T3"});
    CHECK_FALSE(pushed.report.events.empty());
}

TEST_CASE("lowering the original alternatives reproduces the program")
{
    for (auto name : {"p0", "p1", "p2", "m0", "t2", "t4", "n1", "fold_select"}) {
        CAPTURE(name);
        auto p = testing::sample(name);
        Pipeline pl(p.functions[0], nullptr);
        auto first = [&](OrId o) {
            for (AndId a : pl.dag.or_node(o).alts)
                if (pl.dag.and_node(a).initial) return a;
            return pl.dag.or_node(o).alts.front();
        };
        CHECK(print(fir_to_code(p.functions[0], pl.dag, first)) == print(p.functions[0]));
    }
}

TEST_CASE("lowered folds and rewrites")
{
    auto cat = testing::catalog("slow-remote");
    auto emit_forced = [&](const ast::Program &p, const std::string &rule, Op op) {
        Pipeline pl(p.functions[0], &cat);
        std::map<OrId, AndId> forced;
        for (auto &a : pl.dag.ands)
            if (a.rule == rule && a.op == op) forced[a.owner] = a.id;
        Plan plan = best_plan(pl.dag, catalog_cost(cat), forced);
        return print(pl.emit(plan));
    };

    SUBCASE("sum query")
    {
        std::string text = emit_forced(testing::sample("t2"), "T5", Op::ExecuteQuery);
        CHECK(text.find("total = executeQuery(query { aggregate(sum, sale_amt") != std::string::npos);
    }
    SUBCASE("prefetch program")
    {
        std::string text = emit_forced(testing::sample("p0"), "N1", Op::Seq);
        CHECK(text.find("Utils.cacheByColumn(customers, c_customer_sk);") != std::string::npos);
        CHECK(text.find("Utils.lookupCache(customers, c_customer_sk, o.o_customer_sk)") != std::string::npos);
    }
    SUBCASE("dependent fold evaluates the shared sum once per row")
    {
        auto p = testing::sample("m0");
        std::string text = emit_forced(p, "loopToFold", Op::Seq);
        auto lowered = parse(text);
        auto db = testing::small_db();
        auto a = Evaluator(p, db).run("mySum");
        auto b = Evaluator(lowered, db).run("mySum");
        CHECK(a.same_as(b));
        CHECK(a.counters.operations == b.counters.operations);
    }
}

TEST_CASE("every rule application is sound on random databases")
{
    auto cat = testing::catalog("slow-remote");
    for (auto name : {"p0", "m0", "t2", "t4", "n1", "fold_select"}) {
        CAPTURE(name);
        auto p = testing::sample(name);
        const auto &fn = p.functions[0];
        Pipeline pl(fn, &cat);
        for (auto &e : pl.events) {
            if (!e.fresh) continue;
            CAPTURE(e.rule);
            Plan plan = best_plan(pl.dag, catalog_cost(cat), {{e.target, e.produced}});
            auto rewritten = substitute(p, pl.emit(plan));
            for (std::uint64_t seed = 1; seed <= 100; ++seed) {
                auto db = random_database(cat.schema(), seed);
                auto want = Evaluator(p, db).run(fn.name);
                auto got = Evaluator(rewritten, db).run(fn.name);
                if (!want.same_as(got)) {
                    CHECK_MESSAGE(false, "seed " << seed << "\n" << print(rewritten) << want.str() << got.str());
                    break;
                }
            }
        }
    }
}
