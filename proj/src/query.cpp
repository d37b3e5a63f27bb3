#include "cobra/query.hpp"

#include <cstdio>
#include <stdexcept>

namespace cobra {

/*----------------------------------------------------------------------------------------------------------------------
 * Scalar expressions
 *--------------------------------------------------------------------------------------------------------------------*/

ScalarPtr ScalarExpr::column(std::string name)
{
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Column;
    e->name = std::move(name);
    return e;
}

ScalarPtr ScalarExpr::param(std::string var, std::string field)
{
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Param;
    e->name = std::move(var);
    e->field = std::move(field);
    return e;
}

ScalarPtr ScalarExpr::constant_of(Value v)
{
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Const;
    e->constant = std::move(v);
    return e;
}

ScalarPtr ScalarExpr::binary(std::string op, ScalarPtr lhs, ScalarPtr rhs)
{
    if ((op == "==" || op == "!=") && to_cobra(*rhs) < to_cobra(*lhs)) std::swap(lhs, rhs);
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Binary;
    e->name = std::move(op);
    e->args = {std::move(lhs), std::move(rhs)};
    return e;
}

ScalarPtr ScalarExpr::unary(std::string op, ScalarPtr arg)
{
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Unary;
    e->name = std::move(op);
    e->args = {std::move(arg)};
    return e;
}

ScalarPtr ScalarExpr::call(std::string fn, std::vector<ScalarPtr> args)
{
    auto e = std::make_shared<ScalarExpr>();
    e->kind = Kind::Call;
    e->name = std::move(fn);
    e->args = std::move(args);
    return e;
}

namespace {

int precedence(const std::string &op)
{
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 9;
}

int precedence(const ScalarExpr &e)
{
    switch (e.kind) {
        case ScalarExpr::Kind::Binary: return precedence(e.name);
        case ScalarExpr::Kind::Unary: return 7;
        default: return 9;
    }
}

std::string sql_op(const std::string &op)
{
    if (op == "==") return "=";
    if (op == "!=") return "<>";
    if (op == "&&") return "and";
    if (op == "||") return "or";
    if (op == "!") return "not ";
    return op;
}

std::string render(const ScalarExpr &e, bool sql)
{
    auto sub = [&](const ScalarExpr &child, int parent, bool right) {
        std::string s = render(child, sql);
        int p = precedence(child);
        if (p < parent || (right && p == parent && p < 9)) return "(" + s + ")";
        return s;
    };
    switch (e.kind) {
        case ScalarExpr::Kind::Column: return e.name;
        case ScalarExpr::Kind::Param:
            if (sql) return ":" + e.name + (e.field.empty() ? "" : "." + e.field);
            return e.field.empty() ? "$" + e.name : e.name + "." + e.field;
        case ScalarExpr::Kind::Const:
            if (sql && e.constant.is_str()) {
                std::string s = "'";
                for (char c : e.constant.as_str()) s += c == '\'' ? std::string("''") : std::string(1, c);
                return s + "'";
            }
            return e.constant.to_string();
        case ScalarExpr::Kind::Binary: {
            int p = precedence(e.name);
            return sub(*e.args[0], p, false) + " " + (sql ? sql_op(e.name) : e.name) + " " + sub(*e.args[1], p, true);
        }
        case ScalarExpr::Kind::Unary: return (sql ? sql_op(e.name) : e.name) + sub(*e.args[0], 7, false);
        case ScalarExpr::Kind::Call: {
            std::string s = e.name + "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += render(*e.args[i], sql);
            }
            return s + ")";
        }
    }
    return "?";
}

}

std::string to_cobra(const ScalarExpr &e) { return render(e, false); }
std::string to_sql(const ScalarExpr &e) { return render(e, true); }

bool equal(const ScalarExpr &a, const ScalarExpr &b)
{
    if (a.kind != b.kind || a.name != b.name || a.field != b.field || a.args.size() != b.args.size()) return false;
    if (a.kind == ScalarExpr::Kind::Const && !(a.constant == b.constant && a.constant.kind() == b.constant.kind()))
        return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!equal(*a.args[i], *b.args[i])) return false;
    return true;
}

void collect_columns(const ScalarExpr &e, std::set<std::string> &out)
{
    if (e.kind == ScalarExpr::Kind::Column) out.insert(e.name);
    for (auto &a : e.args) collect_columns(*a, out);
}

/*----------------------------------------------------------------------------------------------------------------------
 * Queries
 *--------------------------------------------------------------------------------------------------------------------*/

QueryPtr QueryExpr::scan(std::string rel)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::Scan;
    q->relation = std::move(rel);
    return q;
}

QueryPtr QueryExpr::select(ScalarPtr pred, QueryPtr child)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::Select;
    q->pred = std::move(pred);
    q->kids = {std::move(child)};
    return q;
}

QueryPtr QueryExpr::project(std::vector<ProjectItem> items, QueryPtr child)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::Project;
    q->items = std::move(items);
    q->kids = {std::move(child)};
    return q;
}

QueryPtr QueryExpr::join(ScalarPtr pred, QueryPtr left, QueryPtr right)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::Join;
    q->pred = std::move(pred);
    q->kids = {std::move(left), std::move(right)};
    return q;
}

QueryPtr QueryExpr::aggregate(std::string fn, std::string col, std::string group_by, QueryPtr child)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::Aggregate;
    q->agg_fn = std::move(fn);
    q->agg_col = std::move(col);
    q->group_by = std::move(group_by);
    q->kids = {std::move(child)};
    return q;
}

QueryPtr QueryExpr::order_by(std::string col, QueryPtr child)
{
    auto q = std::make_shared<QueryExpr>();
    q->kind = Kind::OrderBy;
    q->order_col = std::move(col);
    q->kids = {std::move(child)};
    return q;
}

std::string to_cobra(const QueryExpr &q)
{
    switch (q.kind) {
        case QueryExpr::Kind::Scan: return "scan(" + q.relation + ")";
        case QueryExpr::Kind::Select: return "select(" + to_cobra(*q.pred) + ", " + to_cobra(*q.kids[0]) + ")";
        case QueryExpr::Kind::Project: {
            std::string s = "project([";
            for (std::size_t i = 0; i < q.items.size(); ++i) {
                if (i) s += ", ";
                s += to_cobra(*q.items[i].expr);
                if (!q.items[i].alias.empty()) s += " as " + q.items[i].alias;
            }
            return s + "], " + to_cobra(*q.kids[0]) + ")";
        }
        case QueryExpr::Kind::Join:
            return "join(" + to_cobra(*q.pred) + ", " + to_cobra(*q.kids[0]) + ", " + to_cobra(*q.kids[1]) + ")";
        case QueryExpr::Kind::Aggregate:
            return "aggregate(" + q.agg_fn + ", " + q.agg_col + (q.group_by.empty() ? "" : ", by(" + q.group_by + ")") +
                   ", " + to_cobra(*q.kids[0]) + ")";
        case QueryExpr::Kind::OrderBy: return "orderby(" + q.order_col + ", " + to_cobra(*q.kids[0]) + ")";
    }
    return "?";
}

namespace {

struct SqlBlock
{
    std::string select;  ///< empty means `*`
    std::string from;
    std::string where;
    std::string group;
    std::string order;
    bool aggregated = false;

    bool plain_source() const { return select.empty() && !aggregated && order.empty() && group.empty(); }

    std::string str() const
    {
        std::string s = "select " + (select.empty() ? std::string("*") : select) + " from " + from;
        if (!where.empty()) s += " where " + where;
        if (!group.empty()) s += " group by " + group;
        if (!order.empty()) s += " order by " + order;
        return s;
    }
};

struct SqlRenderer
{
    int next_alias = 1;

    SqlBlock wrap(const SqlBlock &b)
    {
        SqlBlock w;
        w.from = "(" + b.str() + ") as q" + std::to_string(next_alias++);
        return w;
    }

    SqlBlock render(const QueryExpr &q)
    {
        switch (q.kind) {
            case QueryExpr::Kind::Scan: {
                SqlBlock b;
                b.from = q.relation;
                return b;
            }
            case QueryExpr::Kind::Select: {
                SqlBlock b = render(*q.kids[0]);
                if (!b.plain_source()) b = wrap(b);
                std::string p = to_sql(*q.pred);
                b.where = b.where.empty() ? p : "(" + b.where + ") and (" + p + ")";
                return b;
            }
            case QueryExpr::Kind::Project: {
                SqlBlock b = render(*q.kids[0]);
                if (!b.select.empty() || b.aggregated || !b.group.empty()) b = wrap(b);
                std::string s;
                for (std::size_t i = 0; i < q.items.size(); ++i) {
                    if (i) s += ", ";
                    s += to_sql(*q.items[i].expr);
                    if (!q.items[i].alias.empty()) s += " as " + q.items[i].alias;
                }
                b.select = s;
                return b;
            }
            case QueryExpr::Kind::Join: {
                SqlBlock l = render(*q.kids[0]);
                SqlBlock r = render(*q.kids[1]);
                auto frag = [&](SqlBlock &b) {
                    if (b.plain_source()) return b.from;
                    return wrap(b).from;
                };
                SqlBlock out;
                std::string lw = l.plain_source() ? l.where : "";
                std::string rw = r.plain_source() ? r.where : "";
                out.from = frag(l) + " join " + frag(r) + " on " + to_sql(*q.pred);
                if (!lw.empty() && !rw.empty())
                    out.where = "(" + lw + ") and (" + rw + ")";
                else
                    out.where = lw.empty() ? rw : lw;
                return out;
            }
            case QueryExpr::Kind::Aggregate: {
                SqlBlock b = render(*q.kids[0]);
                if (!b.plain_source()) b = wrap(b);
                std::string agg = q.agg_fn + "(" + q.agg_col + ")";
                b.select = q.group_by.empty() ? agg : q.group_by + ", " + agg;
                b.group = q.group_by;
                b.aggregated = true;
                return b;
            }
            case QueryExpr::Kind::OrderBy: {
                SqlBlock b = render(*q.kids[0]);
                if (!b.order.empty()) b = wrap(b);
                b.order = q.order_col;
                return b;
            }
        }
        return {};
    }
};

}

std::string to_sql(const QueryExpr &q)
{
    SqlRenderer r;
    return r.render(q).str();
}

std::string fnv1a_hex(const std::string &text)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fingerprint(const QueryExpr &q) { return fnv1a_hex(to_sql(q)); }

bool equal(const QueryExpr &a, const QueryExpr &b) { return to_cobra(a) == to_cobra(b); }

bool is_scalar_aggregate(const QueryExpr &q)
{
    return q.kind == QueryExpr::Kind::Aggregate && q.group_by.empty();
}

bool is_whole_relation(const QueryExpr &q)
{
    switch (q.kind) {
        case QueryExpr::Kind::Scan: return true;
        case QueryExpr::Kind::Project:
        case QueryExpr::Kind::OrderBy: return is_whole_relation(*q.kids[0]);
        default: return false;
    }
}

std::vector<std::string> base_relations(const QueryExpr &q)
{
    if (q.kind == QueryExpr::Kind::Scan) return {q.relation};
    std::vector<std::string> out;
    for (auto &k : q.kids) {
        auto sub = base_relations(*k);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

void collect_params(const ScalarExpr &e, std::set<ParamRef> &out)
{
    if (e.kind == ScalarExpr::Kind::Param) out.insert({e.name, e.field});
    for (auto &a : e.args) collect_params(*a, out);
}

void collect_params(const QueryExpr &q, std::set<ParamRef> &out)
{
    if (q.pred) collect_params(*q.pred, out);
    for (auto &it : q.items) collect_params(*it.expr, out);
    for (auto &k : q.kids) collect_params(*k, out);
}

ScalarPtr substitute_params(const ScalarPtr &e, const ParamMapper &fn)
{
    if (e->kind == ScalarExpr::Kind::Param) {
        if (auto r = fn(*e)) return r;
        return e;
    }
    if (e->args.empty()) return e;
    std::vector<ScalarPtr> args;
    for (auto &a : e->args) args.push_back(substitute_params(a, fn));
    switch (e->kind) {
        case ScalarExpr::Kind::Binary: return ScalarExpr::binary(e->name, args[0], args[1]);
        case ScalarExpr::Kind::Unary: return ScalarExpr::unary(e->name, args[0]);
        case ScalarExpr::Kind::Call: return ScalarExpr::call(e->name, args);
        default: return e;
    }
}

QueryPtr substitute_params(const QueryPtr &q, const ParamMapper &fn)
{
    auto out = std::make_shared<QueryExpr>(*q);
    if (out->pred) out->pred = substitute_params(out->pred, fn);
    for (auto &it : out->items) it.expr = substitute_params(it.expr, fn);
    for (auto &k : out->kids) k = substitute_params(k, fn);
    return out;
}

std::vector<std::string> output_columns(const QueryExpr &q, const ColumnsOf &columns_of)
{
    switch (q.kind) {
        case QueryExpr::Kind::Scan: return columns_of(q.relation);
        case QueryExpr::Kind::Select:
        case QueryExpr::Kind::OrderBy: return output_columns(*q.kids[0], columns_of);
        case QueryExpr::Kind::Project: {
            std::vector<std::string> out;
            for (auto &it : q.items) out.push_back(it.output_name());
            return out;
        }
        case QueryExpr::Kind::Join: {
            auto l = output_columns(*q.kids[0], columns_of);
            auto r = output_columns(*q.kids[1], columns_of);
            l.insert(l.end(), r.begin(), r.end());
            return l;
        }
        case QueryExpr::Kind::Aggregate:
            if (q.group_by.empty()) return {q.agg_fn};
            return {q.group_by, q.agg_fn};
    }
    return {};
}

}
