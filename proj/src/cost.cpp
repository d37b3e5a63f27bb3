#include "cobra/cost.hpp"
#include "cobra/errors.hpp"
#include "cobra/parser.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace cobra {

using json = nlohmann::ordered_json;

Cost &Cost::operator+=(const Cost &o)
{
    network += o.network;
    server += o.server;
    cpu += o.cpu;
    return *this;
}

Cost operator*(double k, const Cost &c) { return Cost{k * c.network, k * c.server, k * c.cpu}; }

double RelationStats::column_bytes(const std::string &col) const
{
    for (auto &[c, b] : columns)
        if (c == col) return b;
    return columns.empty() ? 8.0 : row_bytes / static_cast<double>(columns.size());
}

bool RelationStats::has_column(const std::string &col) const
{
    for (auto &[c, b] : columns)
        if (c == col) return true;
    return col == key || distinct.count(col) || foreign_keys.count(col);
}

const RelationStats &CostCatalog::relation(const std::string &name) const
{
    auto it = relations.find(name);
    if (it == relations.end()) throw UnknownRelation(name);
    return it->second;
}

std::vector<std::string> CostCatalog::columns_of(const std::string &rel) const
{
    std::vector<std::string> out;
    for (auto &[c, b] : relation(rel).columns) out.push_back(c);
    return out;
}

SchemaMap CostCatalog::schema() const
{
    SchemaMap m;
    for (auto &[name, r] : relations) {
        RelationSchema s;
        for (auto &[c, b] : r.columns) s.columns.push_back(c);
        s.key = r.key;
        s.foreign_keys = r.foreign_keys;
        m[name] = std::move(s);
    }
    return m;
}

namespace {

double number_at(const json &obj, const std::string &key, const std::string &path, double fallback,
                 std::vector<std::string> &warnings, bool warn = true)
{
    if (!obj.contains(key)) {
        if (warn) warnings.push_back(path + "." + key + " missing, using default " + std::to_string(fallback));
        return fallback;
    }
    const json &v = obj.at(key);
    if (!v.is_number()) throw CatalogError(path + "." + key, "expected a number");
    double d = v.get<double>();
    if (d < 0 || !std::isfinite(d)) throw CatalogError(path + "." + key, "must be a finite non-negative number");
    return d;
}

}

double parse_af(const std::string &text)
{
    if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
    double af = 0;
    try {
        std::size_t used = 0;
        af = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception &) {
        throw InvalidAF("amortization factor '" + text + "' is not a number or 'inf'");
    }
    if (!(af >= 1)) throw InvalidAF("amortization factor must be >= 1, got " + text);
    return af;
}

CostCatalog CostCatalog::from_json_text(const std::string &text, const std::string &origin)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw CatalogError(origin, e.what());
    }
    if (!doc.is_object()) throw CatalogError(origin, "top level must be an object");
    CostCatalog c;
    auto &w = c.warnings;

    json net = doc.value("network", json::object());
    if (!doc.contains("network")) w.push_back("network missing, using slow-remote defaults");
    if (net.contains("nrt_s"))
        c.nrt = number_at(net, "nrt_s", "network", c.nrt, w);
    else if (net.contains("rtt_s"))
        c.nrt = number_at(net, "rtt_s", "network", c.nrt, w);
    else if (net.contains("latency_s"))
        c.nrt = 2 * number_at(net, "latency_s", "network", c.nrt, w);
    else
        w.push_back("network.nrt_s missing, using default " + std::to_string(c.nrt));
    if (net.contains("bandwidth_Bps"))
        c.bandwidth = number_at(net, "bandwidth_Bps", "network", c.bandwidth, w);
    else if (net.contains("bandwidth_bps"))
        c.bandwidth = number_at(net, "bandwidth_bps", "network", c.bandwidth, w) / 8;
    else
        w.push_back("network.bandwidth_Bps missing, using default " + std::to_string(c.bandwidth));
    if (!(c.bandwidth > 0)) throw CatalogError("network.bandwidth_Bps", "must be positive");

    json k = doc.value("constants", json::object());
    c.cz = number_at(k, "cz_s", "constants", c.cz, w);
    c.cy = number_at(k, "cy_s", "constants", c.cy, w);
    c.default_iters = number_at(k, "default_iters", "constants", c.default_iters, w);
    c.default_prob = number_at(k, "default_prob", "constants", c.default_prob, w);
    c.default_selectivity = number_at(k, "default_selectivity", "constants", c.default_selectivity, w);
    c.server_first = number_at(k, "server_first_s", "constants", c.server_first, w);
    c.server_per_input = number_at(k, "server_per_input_row_s", "constants", c.server_per_input, w);
    c.server_per_result = number_at(k, "server_per_result_row_s", "constants", c.server_per_result, w);
    if (c.default_prob > 1) throw CatalogError("constants.default_prob", "must be within [0, 1]");
    if (c.default_selectivity > 1) throw CatalogError("constants.default_selectivity", "must be within [0, 1]");

    if (doc.contains("relations")) {
        if (!doc["relations"].is_object()) throw CatalogError("relations", "expected an object");
        for (auto &[name, r] : doc["relations"].items()) {
            std::string path = "relations." + name;
            if (!r.is_object()) throw CatalogError(path, "expected an object");
            RelationStats s;
            s.card = number_at(r, "card", path, 0, w);
            if (r.contains("columns")) {
                if (!r["columns"].is_object()) throw CatalogError(path + ".columns", "expected an object");
                for (auto &[col, bytes] : r["columns"].items()) {
                    if (!bytes.is_number() || bytes.get<double>() < 0)
                        throw CatalogError(path + ".columns." + col, "expected a non-negative number");
                    s.columns.emplace_back(col, bytes.get<double>());
                }
            }
            double sum = 0;
            for (auto &[col, b] : s.columns) sum += b;
            s.row_bytes = number_at(r, "row_bytes", path, s.columns.empty() ? 100 : sum, w);
            if (r.contains("distinct"))
                for (auto &[col, n] : r["distinct"].items()) {
                    if (!n.is_number() || n.get<double>() < 0)
                        throw CatalogError(path + ".distinct." + col, "expected a non-negative number");
                    s.distinct[col] = n.get<double>();
                }
            if (r.contains("key")) {
                if (!r["key"].is_string()) throw CatalogError(path + ".key", "expected a column name");
                s.key = r["key"].get<std::string>();
            }
            if (r.contains("foreign_keys"))
                for (auto &[col, target] : r["foreign_keys"].items()) {
                    if (!target.is_string() || target.get<std::string>().find('.') == std::string::npos)
                        throw CatalogError(path + ".foreign_keys." + col, "expected \"relation.column\"");
                    s.foreign_keys[col] = target.get<std::string>();
                }
            c.relations[name] = std::move(s);
        }
    } else {
        w.push_back("relations missing, no statistics available");
    }

    if (doc.contains("query_overrides")) {
        if (!doc["query_overrides"].is_array()) throw CatalogError("query_overrides", "expected an array");
        std::size_t i = 0;
        for (auto &o : doc["query_overrides"]) {
            std::string path = "query_overrides[" + std::to_string(i++) + "]";
            if (!o.contains("fingerprint") || !o["fingerprint"].is_string())
                throw CatalogError(path + ".fingerprint", "missing");
            QueryOverride q;
            std::vector<std::string> quiet;
            if (o.contains("cqf_s")) q.cqf = number_at(o, "cqf_s", path, 0, quiet);
            if (o.contains("cql_s")) q.cql = number_at(o, "cql_s", path, 0, quiet);
            if (o.contains("nq")) q.nq = number_at(o, "nq", path, 0, quiet);
            if (o.contains("srow_bytes")) q.srow = number_at(o, "srow_bytes", path, 0, quiet);
            c.overrides[o["fingerprint"].get<std::string>()] = q;
        }
    }

    if (doc.contains("amortization")) {
        if (!doc["amortization"].is_object()) throw CatalogError("amortization", "expected an object");
        for (auto &[fp, af] : doc["amortization"].items()) {
            std::string t = af.is_string() ? af.get<std::string>() : af.dump();
            try {
                c.amortization[fp] = parse_af(t);
            } catch (const InvalidAF &e) {
                throw CatalogError("amortization." + fp, e.what());
            }
        }
    }
    return c;
}

CostCatalog CostCatalog::load(const std::string &path) { return from_json_text(read_file(path), path); }

void CostCatalog::apply_network_preset(const std::string &name)
{
    if (name == "slow-remote") {
        nrt = 0.5;
        bandwidth = 62500;
    } else if (name == "fast-local") {
        nrt = 0.0005;
        bandwidth = 750e6;
    } else if (name != "custom") {
        throw Error("unknown network profile '" + name + "' (expected slow-remote, fast-local or custom)");
    }
}

namespace {

const RelationStats *owner_of(const std::string &col, const QueryExpr &q, const CostCatalog &cat)
{
    for (auto &rel : base_relations(q)) {
        auto it = cat.relations.find(rel);
        if (it != cat.relations.end() && it->second.has_column(col)) return &it->second;
    }
    return nullptr;
}

double distinct_of(const std::string &col, const QueryExpr &q, const CostCatalog &cat)
{
    const RelationStats *r = owner_of(col, q, cat);
    if (!r) return 0;
    auto it = r->distinct.find(col);
    if (it != r->distinct.end()) return it->second;
    return col == r->key ? r->card : 0;
}

bool has_column_ref(const ScalarExpr &e)
{
    std::set<std::string> cols;
    collect_columns(e, cols);
    return !cols.empty();
}

}

double selectivity(const ScalarExpr &pred, const QueryExpr &input, const CostCatalog &cat)
{
    if (pred.kind == ScalarExpr::Kind::Binary) {
        if (pred.name == "&&") return selectivity(*pred.args[0], input, cat) * selectivity(*pred.args[1], input, cat);
        if (pred.name == "||") {
            double a = selectivity(*pred.args[0], input, cat), b = selectivity(*pred.args[1], input, cat);
            return a + b - a * b;
        }
        if (pred.name == "==") {
            for (int side = 0; side < 2; ++side) {
                const ScalarExpr &c = *pred.args[side];
                const ScalarExpr &other = *pred.args[1 - side];
                if (c.kind != ScalarExpr::Kind::Column || has_column_ref(other)) continue;
                double d = distinct_of(c.name, input, cat);
                if (d >= 1) return 1.0 / d;
            }
        }
    }
    return cat.default_selectivity;
}

double estimate_card(const QueryExpr &q, const CostCatalog &cat)
{
    using K = QueryExpr::Kind;
    switch (q.kind) {
        case K::Scan: return cat.relation(q.relation).card;
        case K::Select: return estimate_card(*q.kids[0], cat) * selectivity(*q.pred, *q.kids[0], cat);
        case K::Project:
        case K::OrderBy: return estimate_card(*q.kids[0], cat);
        case K::Aggregate: {
            if (q.group_by.empty()) return 1;
            double child = estimate_card(*q.kids[0], cat);
            double d = distinct_of(q.group_by, *q.kids[0], cat);
            return d >= 1 ? std::min(d, child) : child;
        }
        case K::Join: {
            const QueryExpr &l = *q.kids[0], &r = *q.kids[1];
            double nl = estimate_card(l, cat), nr = estimate_card(r, cat);
            const ScalarExpr &p = *q.pred;
            if (p.kind == ScalarExpr::Kind::Binary && p.name == "==" && p.args[0]->kind == ScalarExpr::Kind::Column &&
                p.args[1]->kind == ScalarExpr::Kind::Column) {
                std::string a = p.args[0]->name, b = p.args[1]->name;
                const RelationStats *ra = owner_of(a, l, cat) ? owner_of(a, l, cat) : owner_of(a, r, cat);
                const RelationStats *rb = owner_of(b, l, cat) ? owner_of(b, l, cat) : owner_of(b, r, cat);
                bool a_left = owner_of(a, l, cat) != nullptr;
                auto references = [&](const RelationStats *from, const std::string &col, const std::string &target) {
                    if (!from) return false;
                    auto it = from->foreign_keys.find(col);
                    return it != from->foreign_keys.end() && it->second.substr(it->second.find('.') + 1) == target;
                };
                // Every row of the referencing side matches exactly one referenced row.
                if (references(ra, a, b)) return a_left ? nl : nr;
                if (references(rb, b, a)) return a_left ? nr : nl;
                double da = distinct_of(a, a_left ? l : r, cat), db = distinct_of(b, a_left ? r : l, cat);
                double d = std::max(da, db);
                if (d >= 1) return nl * nr / d;
            }
            return nl * nr * cat.default_selectivity;
        }
    }
    return 0;
}

double estimate_row_bytes(const QueryExpr &q, const CostCatalog &cat)
{
    using K = QueryExpr::Kind;
    switch (q.kind) {
        case K::Scan: return cat.relation(q.relation).row_bytes;
        case K::Select:
        case K::OrderBy: return estimate_row_bytes(*q.kids[0], cat);
        case K::Join: return estimate_row_bytes(*q.kids[0], cat) + estimate_row_bytes(*q.kids[1], cat);
        case K::Aggregate: return q.group_by.empty() ? 8 : 16;
        case K::Project: {
            double total = 0;
            for (auto &it : q.items) {
                if (it.expr->kind == ScalarExpr::Kind::Column) {
                    const RelationStats *r = owner_of(it.expr->name, *q.kids[0], cat);
                    total += r ? r->column_bytes(it.expr->name) : 8;
                } else {
                    total += 8;
                }
            }
            return total;
        }
    }
    return 0;
}

namespace {

double input_card(const QueryExpr &q, const CostCatalog &cat)
{
    if (q.kind == QueryExpr::Kind::Scan) return cat.relation(q.relation).card;
    double n = 0;
    for (auto &k : q.kids) n += input_card(*k, cat);
    return n;
}

}

namespace {

QueryOverride override_of(const QueryExpr &q, const CostCatalog &cat)
{
    if (cat.overrides.empty()) return {};
    auto it = cat.overrides.find(fingerprint(q));
    return it == cat.overrides.end() ? QueryOverride{} : it->second;
}

}

double result_rows(const QueryExpr &q, const CostCatalog &cat)
{
    QueryOverride o = override_of(q, cat);
    return o.nq ? *o.nq : estimate_card(q, cat);
}

Cost query_cost(const QueryExpr &q, const CostCatalog &cat)
{
    QueryOverride o = override_of(q, cat);
    double n = o.nq ? *o.nq : estimate_card(q, cat);
    double srow = o.srow ? *o.srow : estimate_row_bytes(q, cat);
    double cf = o.cqf ? *o.cqf : cat.server_first + cat.server_per_input * input_card(q, cat);
    double cl = o.cql ? *o.cql : cf + cat.server_per_result * n;
    double transfer = n * srow / cat.bandwidth;
    double residual = cl - cf;
    Cost c;
    c.network = cat.nrt;
    c.server = cf;
    if (transfer >= residual)
        c.network += transfer;
    else
        c.server += residual;
    return c;
}

Cost prefetch_cost(const QueryExpr &q, const CostCatalog &cat)
{
    double af = 1;
    if (cat.global_af) {
        af = *cat.global_af;
    } else {
        auto it = cat.amortization.find(fingerprint(q));
        if (it != cat.amortization.end()) af = it->second;
    }
    if (!(af >= 1)) throw InvalidAF("amortization factor must be >= 1");
    if (std::isinf(af)) return Cost{};
    return (1.0 / af) * query_cost(q, cat);
}

bool should_prefetch(const QueryExpr &q) { return is_whole_relation(q); }

Cost expr_cost(const ast::Expr &e, const CostCatalog &cat)
{
    using K = ast::Expr::Kind;
    Cost c;
    switch (e.kind) {
        case K::Lit:
        case K::Var: return c;
        case K::ExecQuery: return query_cost(*e.query, cat);
        default: c.cpu = cat.cy; break;
    }
    for (auto &a : e.args) c += expr_cost(*a, cat);
    return c;
}

double loop_iterations(const ast::Stmt &s, const CostCatalog &cat)
{
    if (s.kind == ast::Stmt::Kind::ForQuery) return result_rows(*s.query, cat);
    return cat.default_iters;
}

namespace {

Cost block_cost(const ast::Block &b, const CostCatalog &cat)
{
    Cost c;
    for (auto &s : b) c += stmt_cost(*s, cat);
    return c;
}

}

Cost stmt_cost(const ast::Stmt &s, const CostCatalog &cat)
{
    using K = ast::Stmt::Kind;
    Cost c;
    c.cpu = cat.cz;
    switch (s.kind) {
        case K::Assign:
        case K::Return: return c + expr_cost(*s.expr, cat);
        case K::Call:
            c.cpu += cat.cy;
            for (auto &a : s.args) c += expr_cost(*a, cat);
            return c;
        case K::Prefetch: return c + prefetch_cost(*QueryExpr::scan(s.target), cat);
        case K::If: {
            double p = cat.default_prob;
            return expr_cost(*s.expr, cat) + p * block_cost(s.body, cat) + (1 - p) * block_cost(s.else_body, cat);
        }
        case K::ForQuery: return query_cost(*s.query, cat) + loop_iterations(s, cat) * (c + block_cost(s.body, cat));
        case K::ForColl:
        case K::While: return loop_iterations(s, cat) * (c + expr_cost(*s.expr, cat) + block_cost(s.body, cat));
    }
    return c;
}

}
