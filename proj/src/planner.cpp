#include "cobra/planner.hpp"
#include "cobra/errors.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

namespace cobra {

namespace {

const AndNode &first(const Dag &d, OrId o) { return d.and_node(d.or_node(o).alts.front()); }

Cost sum(const std::vector<Cost> &v)
{
    Cost c;
    for (auto &x : v) c += x;
    return c;
}

Cost cpu(double s) { return Cost{0, 0, s}; }

}

Cost and_node_cost(const Dag &dag, const AndNode &a, const std::vector<Cost> &kids, const CostCatalog &cat)
{
    switch (a.op) {
        case Op::Seq:
        case Op::Tuple: return sum(kids);
        case Op::Block:
            if (!a.p.stmt) return {};
            if (a.p.header) {
                Cost c = cpu(cat.cz);
                if (a.p.stmt->kind != ast::Stmt::Kind::ForQuery && a.p.stmt->expr) c += expr_cost(*a.p.stmt->expr, cat);
                return c;
            }
            return stmt_cost(*a.p.stmt, cat);
        case Op::BlackBox: {
            Cost c;
            for (auto *s : a.p.stmts) c += stmt_cost(*s, cat);
            return c;
        }
        case Op::Cond: {
            double p = cat.default_prob;
            Cost c = kids[0] + p * kids[1];
            if (kids.size() > 2) c += (1 - p) * kids[2];
            return c;
        }
        case Op::Loop: {
            const ast::Stmt &s = *a.p.stmt;
            Cost body = kids[0] + kids[1];
            if (s.kind == ast::Stmt::Kind::ForQuery) return query_cost(*s.query, cat) + loop_iterations(s, cat) * body;
            return loop_iterations(s, cat) * body;
        }
        case Op::Assign:
        case Op::Bind: return cpu(cat.cz) + sum(kids);
        case Op::Prefetch: return prefetch_cost(*QueryExpr::scan(a.p.name), cat);
        case Op::Fold: {
            const AndNode &src = first(dag, a.kids[2]);
            double n = src.op == Op::Source ? result_rows(*src.p.query, cat) : cat.default_iters;
            return n * kids[0] + kids[1] + kids[2];
        }
        case Op::Guard: return kids[0] + cat.default_prob * kids[1];
        case Op::Source:
        case Op::ExecuteQuery: return query_cost(*a.p.query, cat);
        case Op::Attr:
        case Op::Row:
        case Op::Var:
        case Op::Slot:
        case Op::Const: return {};
        case Op::Project: return cpu(cat.cy);
        case Op::Binary:
        case Op::Unary:
        case Op::Call:
        case Op::Field:
        case Op::Method:
        case Op::Lookup:
        case Op::ListAdd:
        case Op::MapPut: return cpu(cat.cy) + sum(kids);
    }
    return sum(kids);
}

AndCostFn catalog_cost(const CostCatalog &cat)
{
    return [&cat](const Dag &d, const AndNode &a, const std::vector<Cost> &kids) { return and_node_cost(d, a, kids, cat); };
}

namespace {

int count_expr_queries(const ast::Expr &e)
{
    int n = e.kind == ast::Expr::Kind::ExecQuery ? 1 : 0;
    for (auto &a : e.args) n += count_expr_queries(*a);
    return n;
}

int count_stmt_queries(const ast::Stmt &s, bool header_only)
{
    int n = 0;
    if (s.kind == ast::Stmt::Kind::ForQuery || s.kind == ast::Stmt::Kind::Prefetch) ++n;
    if (s.expr) n += count_expr_queries(*s.expr);
    for (auto &a : s.args) n += count_expr_queries(*a);
    if (!header_only) {
        for (auto &b : s.body) n += count_stmt_queries(*b, false);
        for (auto &b : s.else_body) n += count_stmt_queries(*b, false);
    }
    return n;
}

int own_queries(const AndNode &a)
{
    switch (a.op) {
        case Op::Source:
        case Op::ExecuteQuery:
        case Op::Prefetch: return 1;
        case Op::Block: return a.p.stmt && !a.p.header ? count_stmt_queries(*a.p.stmt, false) : 0;
        case Op::Loop: return a.p.stmt->kind == ast::Stmt::Kind::ForQuery ? 1 : 0;
        case Op::Cond: return a.p.stmt->expr ? count_expr_queries(*a.p.stmt->expr) : 0;
        case Op::BlackBox: {
            int n = 0;
            for (auto *s : a.p.stmts) n += count_stmt_queries(*s, false);
            return n;
        }
        default: return 0;
    }
}

bool close(double a, double b)
{
    double scale = std::max(std::fabs(a), std::fabs(b));
    return std::fabs(a - b) <= 1e-12 * scale;
}

struct Best
{
    Cost cost;
    int queries = 0;
    AndId and_id = -1;
};

}

Plan best_plan(const Dag &dag, const AndCostFn &cost, const std::map<OrId, AndId> &forced)
{
    Plan plan;
    std::map<OrId, Best> memo;
    std::function<const Best &(OrId)> solve = [&](OrId o) -> const Best & {
        if (auto it = memo.find(o); it != memo.end()) return it->second;
        Best best;
        const OrNode &node = dag.or_node(o);
        std::vector<AndId> alts = node.alts;
        if (auto f = forced.find(o); f != forced.end()) alts = {f->second};
        for (AndId a : alts) {
            const AndNode &n = dag.and_node(a);
            std::vector<Cost> kids;
            int queries = own_queries(n);
            for (auto k : n.kids) {
                const Best &b = solve(k);
                kids.push_back(b.cost);
                queries += b.queries;
            }
            Cost c = cost(dag, n, kids);
            plan.and_cost[a] = c;
            bool better = false;
            if (best.and_id < 0) {
                better = true;
            } else if (!close(c.total(), best.cost.total())) {
                better = c.total() < best.cost.total();
            } else if (queries != best.queries) {
                better = queries < best.queries;
            } else {
                bool ni = n.initial, bi = dag.and_node(best.and_id).initial;
                better = ni != bi ? ni : a < best.and_id;
            }
            if (better) best = Best{c, queries, a};
        }
        plan.or_cost[o] = best.cost;
        return memo.emplace(o, best).first->second;
    };
    for (auto o : dag.reachable()) plan.choice[o] = solve(o).and_id;
    plan.cost = solve(dag.root).cost;
    return plan;
}

Cost plan_cost(const Dag &dag, const AndCostFn &cost, const std::map<OrId, AndId> &choice)
{
    std::map<OrId, Cost> memo;
    std::function<Cost(OrId)> go = [&](OrId o) -> Cost {
        if (auto it = memo.find(o); it != memo.end()) return it->second;
        const AndNode &n = dag.and_node(choice.at(o));
        std::vector<Cost> kids;
        for (auto k : n.kids) kids.push_back(go(k));
        Cost c = cost(dag, n, kids);
        memo[o] = c;
        return c;
    };
    return go(dag.root);
}

std::vector<EnumeratedPlan> enumerate_plans(const Dag &dag, const AndCostFn &cost, std::size_t limit)
{
    std::vector<EnumeratedPlan> out;
    std::map<OrId, AndId> choice;
    std::function<void(std::vector<OrId>)> go = [&](std::vector<OrId> pending) {
        if (out.size() >= limit) return;
        while (!pending.empty() && choice.count(pending.back())) pending.pop_back();
        if (pending.empty()) {
            out.push_back({choice, plan_cost(dag, cost, choice)});
            return;
        }
        OrId o = pending.back();
        pending.pop_back();
        for (AndId a : dag.or_node(o).alts) {
            choice[o] = a;
            auto next = pending;
            const AndNode &n = dag.and_node(a);
            for (auto it = n.kids.rbegin(); it != n.kids.rend(); ++it) next.push_back(*it);
            if (n.op == Op::Project && n.p.ref >= 0) next.push_back(n.p.ref);
            go(next);
            choice.erase(o);
            if (out.size() >= limit) return;
        }
    };
    go({dag.root});
    return out;
}

namespace {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt(const Cost &c)
{
    return fmt(c.total()) + "s (network " + fmt(c.network) + ", server " + fmt(c.server) + ", cpu " + fmt(c.cpu) + ")";
}

}

std::string explain(const Dag &dag, const Plan &plan)
{
    std::string s = "plan cost " + fmt(plan.cost) + "\n";
    std::set<OrId> in_plan;
    std::function<void(OrId)> mark = [&](OrId o) {
        if (!in_plan.insert(o).second) return;
        const AndNode &n = dag.and_node(plan.choice.at(o));
        for (auto k : n.kids) mark(k);
        if (n.op == Op::Project && n.p.ref >= 0) mark(n.p.ref);
    };
    mark(dag.root);
    for (auto o : in_plan) {
        const OrNode &node = dag.or_node(o);
        s += "OR " + dag.label(o) + " best " + fmt(plan.or_cost.at(o).total()) + "s\n";
        for (auto a : node.alts) {
            bool chosen = plan.choice.at(o) == a;
            auto it = plan.and_cost.find(a);
            std::string cost = it == plan.and_cost.end() ? "n/a" : fmt(it->second);
            const AndNode &n = dag.and_node(a);
            s += std::string(chosen ? "  * " : "    ") + "#" + std::to_string(a) + " " + dag.describe(a);
            s += n.rule.empty() ? std::string() : "  [" + n.rule + "]";
            s += "  = " + cost + "\n";
        }
    }
    return s;
}

namespace {

bool has_join(const QueryExpr &q)
{
    if (q.kind == QueryExpr::Kind::Join) return true;
    for (auto &k : q.kids)
        if (has_join(*k)) return true;
    return false;
}

void scan_expr(const ast::Expr &e, bool &join, bool &prefetch)
{
    if (e.kind == ast::Expr::Kind::ExecQuery && has_join(*e.query)) join = true;
    if (e.kind == ast::Expr::Kind::CacheLookup) prefetch = true;
    for (auto &a : e.args) scan_expr(*a, join, prefetch);
}

}

std::string classify(const ast::FunctionDef &fn)
{
    bool join = false, prefetch = false;
    ast::walk(fn.body, [&](const ast::Stmt &s) {
        if (s.query && has_join(*s.query)) join = true;
        if (s.kind == ast::Stmt::Kind::Prefetch) prefetch = true;
        if (s.expr) scan_expr(*s.expr, join, prefetch);
        for (auto &a : s.args) scan_expr(*a, join, prefetch);
    });
    if (join) return "P1";
    if (prefetch) return "P2";
    return "P0";
}

int query_sites(const ast::FunctionDef &fn)
{
    int n = 0;
    for (auto &s : fn.body) n += count_stmt_queries(*s, false);
    return n;
}

}
