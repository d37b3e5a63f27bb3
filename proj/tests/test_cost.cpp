#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace cobra;

namespace {

const double eps = 1e-9;

/// Catalog whose override pins the statistics of `q`.
CostCatalog pinned(const QueryExpr &q, double nq, double srow, double cqf, double cql, double bw = 62500)
{
    std::string text = R"({"network": {"nrt_s": 0.5, "bandwidth_Bps": )" + std::to_string(bw) +
                       R"(}, "relations": {"sales": {"card": 10000, "row_bytes": 100}},
        "query_overrides": [{"fingerprint": ")" + fingerprint(q) + R"(", "nq": )" + std::to_string(nq) +
                       R"(, "srow_bytes": )" + std::to_string(srow) + R"(, "cqf_s": )" + std::to_string(cqf) +
                       R"(, "cql_s": )" + std::to_string(cql) + "}]}";
    return CostCatalog::from_json_text(text);
}

}

TEST_CASE("query cost formula")
{
    auto q = testing::query("scan(sales)");
    SUBCASE("transfer-bound")
    {
        Cost c = query_cost(*q, pinned(*q, 1000, 100, 0.01, 0.05));
        CHECK(c.total() == doctest::Approx(2.11).epsilon(eps));
        CHECK(c.network == doctest::Approx(2.1).epsilon(eps));
        CHECK(c.server == doctest::Approx(0.01).epsilon(eps));
    }
    SUBCASE("empty result")
    {
        Cost c = query_cost(*q, pinned(*q, 0, 100, 0.01, 0.05));
        CHECK(c.total() == doctest::Approx(0.5 + 0.01 + 0.04).epsilon(eps));
    }
    SUBCASE("unbounded bandwidth leaves the server time")
    {
        Cost c = query_cost(*q, pinned(*q, 1000, 100, 0.01, 0.05, 1e300));
        CHECK(c.total() == doctest::Approx(0.5 + 0.05).epsilon(eps));
    }
    SUBCASE("both branches agree at the seam")
    {
        // transfer 1000 * 2.5 / 62500 = 0.04 = C_L - C_F
        Cost c = query_cost(*q, pinned(*q, 1000, 2.5, 0.01, 0.05));
        CHECK(c.total() == doctest::Approx(0.55).epsilon(eps));
    }
}

TEST_CASE("prefetch cost divides by the amortization factor")
{
    auto q = testing::query("scan(sales)");
    CostCatalog cat = pinned(*q, 1000, 100, 0.01, 0.05);
    CHECK(prefetch_cost(*q, cat).total() == query_cost(*q, cat).total());
    cat.amortization[fingerprint(*q)] = 50;
    CHECK(prefetch_cost(*q, cat).total() == doctest::Approx(0.0422).epsilon(eps));
    cat.amortization[fingerprint(*q)] = parse_af("inf");
    CHECK(prefetch_cost(*q, cat).total() == 0);
    cat.global_af = 2;
    CHECK(prefetch_cost(*q, cat).total() == doctest::Approx(1.055).epsilon(eps));
    CHECK_THROWS_AS(parse_af("0.5"), InvalidAF);
    CHECK_THROWS_AS(parse_af("many"), InvalidAF);
    CHECK(should_prefetch(*testing::query("project([c_customer_sk], scan(customers))")));
    CHECK_FALSE(should_prefetch(*testing::query("select(c_customer_sk == 3, scan(customers))")));
}

TEST_CASE("cardinality estimates")
{
    auto cat = testing::catalog("slow-remote");
    cat.relations.at("orders").card = 1e6;
    CHECK(estimate_card(*testing::query("scan(orders)"), cat) == 1e6);
    cat.relations.at("orders").card = 10000;
    CHECK(estimate_card(*testing::query("join(c_customer_sk == o_customer_sk, scan(orders), scan(customers))"), cat) ==
          10000);
    CHECK(estimate_card(*testing::query("aggregate(sum, sale_amt, scan(sales))"), cat) == 1);
    CHECK(estimate_card(*testing::query("aggregate(sum, sale_amt, by(month), scan(sales))"), cat) == 12);
    CHECK(estimate_card(*testing::query("select(c_customer_sk == 5, scan(customers))"), cat) == 1);
    CHECK(estimate_card(*testing::query("select(sale_amt > 7, scan(sales))"), cat) ==
          doctest::Approx(10000 * cat.default_selectivity));
    CHECK_THROWS_AS(estimate_card(*testing::query("scan(nowhere)"), cat), UnknownRelation);
}

TEST_CASE("operator costs")
{
    CostCatalog cat;
    Dag d;
    auto node = [&](Op op) {
        AndNode a;
        a.op = op;
        return a;
    };
    SUBCASE("sequence sums its children")
    {
        CHECK(and_node_cost(d, node(Op::Seq), {Cost{0, 0, 1.0}, Cost{0, 0, 2.5}}, cat).total() == 3.5);
    }
    SUBCASE("conditional weighs branches by probability")
    {
        std::vector<Cost> kids{Cost{0, 0, 1e-7}, Cost{0, 0, 2}, Cost{0, 0, 4}};
        CHECK(and_node_cost(d, node(Op::Cond), kids, cat).total() == doctest::Approx(3.0000001).epsilon(eps));
        cat.default_prob = 1;
        CHECK(and_node_cost(d, node(Op::Cond), kids, cat).total() == doctest::Approx(2 + 1e-7).epsilon(eps));
        cat.default_prob = 0;
        CHECK(and_node_cost(d, node(Op::Cond), kids, cat).total() == doctest::Approx(4 + 1e-7).epsilon(eps));
    }
    SUBCASE("scalar operators cost one operator each")
    {
        CHECK(and_node_cost(d, node(Op::Binary), {Cost{}, Cost{}}, cat).total() == cat.cy);
        CHECK(and_node_cost(d, node(Op::Attr), {}, cat).total() == 0);
    }
}

TEST_CASE("fold cost is rows times accumulator plus the query")
{
    auto p = parse("fn f() {\n s = 0;\n for (t : query { scan(sales) }) {\n  s = s + t.sale_amt * t.month + 1;\n }\n return s;\n}");
    auto q = testing::query("scan(sales)");
    CostCatalog cat = pinned(*q, 10000, 10, 0.01, 0.05);
    CHECK(query_cost(*q, cat).total() == doctest::Approx(2.11).epsilon(eps));
    Pipeline pl(p.functions[0], &cat, {"none"});
    Plan plan = pl.plan(catalog_cost(cat));
    bool seen = false;
    for (auto &a : pl.dag.ands)
        if (a.op == Op::Fold) {
            seen = true;
            CHECK(plan.and_cost.at(a.id).total() == doctest::Approx(10000 * 3 * 30e-9 + 2.11).epsilon(eps));
            CHECK(plan.and_cost.at(a.id).total() == doctest::Approx(2.1109).epsilon(eps));
        }
    CHECK(seen);
}

TEST_CASE("query cost is monotone in its parameters")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    auto q = testing::query("scan(sales)");
    for (int i = 0; i < 200; ++i) {
        double nq = 1 + 1e5 * u(rng), srow = 1 + 500 * u(rng), cqf = u(rng), cql = cqf + u(rng), bw = 1e3 + 1e7 * u(rng);
        double base = query_cost(*q, pinned(*q, nq, srow, cqf, cql, bw)).total();
        double k = 1 + u(rng);
        CHECK(query_cost(*q, pinned(*q, nq * k, srow, cqf, cql, bw)).total() >= base - 1e-12);
        CHECK(query_cost(*q, pinned(*q, nq, srow * k, cqf, cql, bw)).total() >= base - 1e-12);
        CHECK(query_cost(*q, pinned(*q, nq, srow, cqf, cql * k, bw)).total() >= base - 1e-12);
        CHECK(query_cost(*q, pinned(*q, nq, srow, cqf, cql, bw * k)).total() <= base + 1e-12);
        CostCatalog slower = pinned(*q, nq, srow, cqf, cql, bw);
        slower.nrt *= k;
        CHECK(query_cost(*q, slower).total() >= base);
        double raised = std::min(cqf * k, cql);
        CHECK(query_cost(*q, pinned(*q, nq, srow, raised, cql, bw)).total() >= base - 1e-12);
    }
}

TEST_CASE("catalog loading")
{
    SUBCASE("presets")
    {
        auto slow = testing::catalog("slow-remote");
        CHECK(slow.nrt == 0.5);
        CHECK(slow.bandwidth == 62500);
        auto fast = testing::catalog("fast-local");
        CHECK(fast.nrt == 0.0005);
        CHECK(fast.bandwidth == 750e6);
        slow.apply_network_preset("fast-local");
        CHECK(slow.nrt == fast.nrt);
        CHECK(slow.bandwidth == fast.bandwidth);
        auto unit = testing::catalog("unit");
        CHECK(unit.cz == 1);
        CHECK(unit.cy == 1);
    }
    SUBCASE("one-way latency doubles into a round trip")
    {
        auto c = CostCatalog::from_json_text(R"({"network": {"latency_s": 0.25, "bandwidth_bps": 500000}})");
        CHECK(c.nrt == 0.5);
        CHECK(c.bandwidth == 62500);
    }
    SUBCASE("empty catalog takes defaults and says so")
    {
        auto c = CostCatalog::from_json_text("{}");
        CHECK(c.nrt == 0.5);
        CHECK(c.default_iters == 1000);
        CHECK(c.default_prob == 0.5);
        CHECK(c.warnings.size() >= 5);
    }
    SUBCASE("errors name the field")
    {
        try {
            CostCatalog::from_json_text(R"({"network": {"nrt_s": 0.5, "bandwidth_Bps": 0}})");
            FAIL("expected CatalogError");
        } catch (const CatalogError &e) {
            CHECK(e.field_path == "network.bandwidth_Bps");
        }
        try {
            CostCatalog::from_json_text(R"({"amortization": {"abc": 0.2}})");
            FAIL("expected CatalogError");
        } catch (const CatalogError &e) {
            CHECK(e.field_path == "amortization.abc");
        }
        CHECK_THROWS_AS(CostCatalog::from_json_text("[1, 2"), CatalogError);
    }
}

TEST_CASE("plan costs are finite, non-negative and split consistently")
{
    for (auto cat_name : {"slow-remote", "fast-local", "unit"}) {
        auto cat = testing::catalog(cat_name);
        for (auto name : {"p0", "m0", "t2", "t4", "n1"}) {
            CAPTURE(cat_name);
            CAPTURE(name);
            auto p = testing::sample(name);
            Pipeline pl(p.functions[0], &cat);
            Plan plan = pl.plan(catalog_cost(cat));
            for (auto &[id, c] : plan.and_cost) {
                CHECK(std::isfinite(c.total()));
                CHECK(c.network >= 0);
                CHECK(c.server >= 0);
                CHECK(c.cpu >= 0);
            }
        }
    }
}
