#include "cobra/evaluator.hpp"
#include "cobra/errors.hpp"

#include <algorithm>
#include <unordered_map>

namespace cobra {

bool OutputState::same_as(const OutputState &o) const
{
    if (vars.size() != o.vars.size() || printed != o.printed) return false;
    if (!(returned == o.returned) || returned.kind() != o.returned.kind()) return false;
    for (auto &[k, v] : vars) {
        auto it = o.vars.find(k);
        if (it == o.vars.end() || !(it->second == v)) return false;
    }
    return true;
}

std::string OutputState::str() const
{
    std::string s;
    for (auto &[k, v] : vars) s += k + " = " + v.to_string() + "\n";
    if (!returned.is_null()) s += "return " + returned.to_string() + "\n";
    for (auto &p : printed) s += "print " + p + "\n";
    s += "queries " + std::to_string(counters.queries) + ", rows " + std::to_string(counters.rows) + "\n";
    return s;
}

namespace {

[[noreturn]] void type_error(const std::string &op, const Value &a, const Value &b)
{
    throw Error("operator '" + op + "' not applicable to " + a.to_string() + " and " + b.to_string());
}

}

Value apply_binary(const std::string &op, const Value &a, const Value &b)
{
    if (op == "==") return Value(compare(a, b) == 0 ? 1 : 0);
    if (op == "!=") return Value(compare(a, b) != 0 ? 1 : 0);
    if (op == "<") return Value(compare(a, b) < 0 ? 1 : 0);
    if (op == "<=") return Value(compare(a, b) <= 0 ? 1 : 0);
    if (op == ">") return Value(compare(a, b) > 0 ? 1 : 0);
    if (op == ">=") return Value(compare(a, b) >= 0 ? 1 : 0);
    if (op == "&&") return Value(a.truthy() && b.truthy() ? 1 : 0);
    if (op == "||") return Value(a.truthy() || b.truthy() ? 1 : 0);
    if (op == "+" && a.is_str() && b.is_str()) return Value(a.as_str() + b.as_str());
    if (!a.is_number() || !b.is_number()) type_error(op, a, b);
    if (a.is_int() && b.is_int()) {
        std::int64_t x = a.as_int(), y = b.as_int();
        if (op == "+") return Value(x + y);
        if (op == "-") return Value(x - y);
        if (op == "*") return Value(x * y);
        if (op == "/" || op == "%") {
            if (y == 0) throw Error("division by zero");
            return Value(op == "/" ? x / y : x % y);
        }
    } else {
        double x = a.as_double(), y = b.as_double();
        if (op == "+") return Value(x + y);
        if (op == "-") return Value(x - y);
        if (op == "*") return Value(x * y);
        if (op == "/") {
            if (y == 0) throw Error("division by zero");
            return Value(x / y);
        }
    }
    type_error(op, a, b);
}

Value apply_unary(const std::string &op, const Value &a)
{
    if (op == "!") return Value(a.truthy() ? 0 : 1);
    if (op == "-") {
        if (a.is_int()) return Value(-a.as_int());
        if (a.is_double()) return Value(-a.as_double());
    }
    throw Error("operator '" + op + "' not applicable to " + a.to_string());
}

bool sql_function(const std::string &name) { return name == "abs"; }

Value apply_function(const std::string &name, const std::vector<Value> &args)
{
    auto arity = [&](std::size_t n) {
        if (args.size() != n) throw Error(name + "() expects " + std::to_string(n) + " argument(s)");
    };
    if (name == "list") {
        arity(0);
        return Value::make_list();
    }
    if (name == "map") {
        arity(0);
        return Value::make_map();
    }
    if (name == "first") {
        arity(1);
        if (!args[0].is_list()) throw Error("first() expects a list");
        return args[0].as_list().empty() ? Value() : args[0].as_list().front();
    }
    if (name == "size") {
        arity(1);
        if (args[0].is_list()) return Value(static_cast<std::int64_t>(args[0].as_list().size()));
        if (args[0].is_map()) return Value(static_cast<std::int64_t>(args[0].as_map().entries.size()));
        if (args[0].is_str()) return Value(static_cast<std::int64_t>(args[0].as_str().size()));
        throw Error("size() expects a collection");
    }
    if (name == "max" || name == "min") {
        arity(2);
        if (args[0].is_null()) return args[1];
        if (args[1].is_null()) return args[0];
        bool first_wins = name == "max" ? compare(args[0], args[1]) >= 0 : compare(args[0], args[1]) <= 0;
        return first_wins ? args[0] : args[1];
    }
    if (name == "abs") {
        arity(1);
        if (args[0].is_int()) return Value(args[0].as_int() < 0 ? -args[0].as_int() : args[0].as_int());
        if (args[0].is_double()) return Value(args[0].as_double() < 0 ? -args[0].as_double() : args[0].as_double());
        throw Error("abs() expects a number");
    }
    if (name == "append") {
        arity(2);
        Value l = args[0];
        if (!l.is_list()) throw Error("append() expects a list");
        l.mutable_list().push_back(args[1]);
        return l;
    }
    if (name == "mapPut") {
        arity(3);
        Value m = args[0];
        if (!m.is_map()) throw Error("mapPut() expects a map");
        m.mutable_map().put(args[1], args[2]);
        return m;
    }
    // Opaque user function: deterministic, pure, integer valued.
    std::string text = name;
    for (auto &a : args) text += "|" + a.to_string();
    std::uint64_t h = std::stoull(fnv1a_hex(text), nullptr, 16);
    return Value(static_cast<std::int64_t>(h % 1000003));
}

namespace {

Value eval_scalar(const ScalarExpr &e, const Row *row, const ParamResolver &param)
{
    switch (e.kind) {
        case ScalarExpr::Kind::Column: {
            if (!row) throw UnknownColumn(e.name);
            const Value *v = row->find(e.name);
            if (!v) throw UnknownColumn(e.name);
            return *v;
        }
        case ScalarExpr::Kind::Param:
            if (!param) throw Error("unbound query parameter '" + e.name + "'");
            return param(e);
        case ScalarExpr::Kind::Const: return e.constant;
        case ScalarExpr::Kind::Binary:
            return apply_binary(e.name, eval_scalar(*e.args[0], row, param), eval_scalar(*e.args[1], row, param));
        case ScalarExpr::Kind::Unary: return apply_unary(e.name, eval_scalar(*e.args[0], row, param));
        case ScalarExpr::Kind::Call: {
            std::vector<Value> args;
            for (auto &a : e.args) args.push_back(eval_scalar(*a, row, param));
            return apply_function(e.name, args);
        }
    }
    return Value();
}

Value concat_rows(const Value &l, const Value &r)
{
    Row out = l.as_row();
    for (auto &f : r.as_row().fields) out.fields.push_back(f);
    return Value::make_row(std::move(out));
}

/// Splits `col_a == col_b` into (left column, right column) when each side belongs to one input.
bool equi_columns(const ScalarExpr &pred, const std::vector<Value> &l, const std::vector<Value> &r, std::string &lc,
                  std::string &rc)
{
    if (pred.kind != ScalarExpr::Kind::Binary || pred.name != "==") return false;
    const auto &a = *pred.args[0], &b = *pred.args[1];
    if (a.kind != ScalarExpr::Kind::Column || b.kind != ScalarExpr::Kind::Column || l.empty() || r.empty())
        return false;
    auto has = [](const std::vector<Value> &rows, const std::string &c) { return rows[0].as_row().find(c) != nullptr; };
    if (has(l, a.name) && has(r, b.name) && !has(l, b.name) && !has(r, a.name)) {
        lc = a.name;
        rc = b.name;
        return true;
    }
    if (has(l, b.name) && has(r, a.name) && !has(l, a.name) && !has(r, b.name)) {
        lc = b.name;
        rc = a.name;
        return true;
    }
    return false;
}

}

std::vector<Value> eval_query(const QueryExpr &q, const Database &db, const ParamResolver &param)
{
    switch (q.kind) {
        case QueryExpr::Kind::Scan: return db.table(q.relation).rows;
        case QueryExpr::Kind::Select: {
            std::vector<Value> out;
            for (auto &r : eval_query(*q.kids[0], db, param))
                if (eval_scalar(*q.pred, &r.as_row(), param).truthy()) out.push_back(r);
            return out;
        }
        case QueryExpr::Kind::Project: {
            std::vector<Value> out;
            for (auto &r : eval_query(*q.kids[0], db, param)) {
                Row row;
                for (auto &it : q.items) row.fields.emplace_back(it.output_name(), eval_scalar(*it.expr, &r.as_row(), param));
                out.push_back(Value::make_row(std::move(row)));
            }
            return out;
        }
        case QueryExpr::Kind::Join: {
            auto l = eval_query(*q.kids[0], db, param);
            auto r = eval_query(*q.kids[1], db, param);
            std::vector<Value> out;
            std::string lc, rc;
            if (equi_columns(*q.pred, l, r, lc, rc)) {
                std::map<Value, std::vector<std::size_t>> index;
                for (std::size_t i = 0; i < r.size(); ++i) index[*r[i].as_row().find(rc)].push_back(i);
                for (auto &lr : l) {
                    auto it = index.find(*lr.as_row().find(lc));
                    if (it == index.end()) continue;
                    for (auto i : it->second) out.push_back(concat_rows(lr, r[i]));
                }
                return out;
            }
            for (auto &lr : l)
                for (auto &rr : r) {
                    Value row = concat_rows(lr, rr);
                    if (eval_scalar(*q.pred, &row.as_row(), param).truthy()) out.push_back(row);
                }
            return out;
        }
        case QueryExpr::Kind::Aggregate: {
            auto rows = eval_query(*q.kids[0], db, param);
            auto fold = [&](const std::vector<const Value *> &group) {
                Value acc = q.agg_fn == "sum" || q.agg_fn == "count" ? Value(0) : Value();
                for (auto *r : group) {
                    Value v = q.agg_col == "*" ? Value(1) : eval_scalar(*ScalarExpr::column(q.agg_col), &r->as_row(), param);
                    if (q.agg_fn == "count") {
                        if (!v.is_null()) acc = Value(acc.as_int() + 1);
                    } else if (q.agg_fn == "sum") {
                        if (!v.is_null()) acc = apply_binary("+", acc, v);
                    } else {
                        acc = apply_function(q.agg_fn, {acc, v});
                    }
                }
                return acc;
            };
            if (q.group_by.empty()) {
                std::vector<const Value *> all;
                for (auto &r : rows) all.push_back(&r);
                Row row;
                row.fields.emplace_back(q.agg_fn, fold(all));
                return {Value::make_row(std::move(row))};
            }
            std::map<Value, std::vector<const Value *>> groups;
            for (auto &r : rows) {
                const Value *g = r.as_row().find(q.group_by);
                if (!g) throw UnknownColumn(q.group_by);
                groups[*g].push_back(&r);
            }
            std::vector<Value> out;
            for (auto &[g, members] : groups) {
                Row row;
                row.fields.emplace_back(q.group_by, g);
                row.fields.emplace_back(q.agg_fn, fold(members));
                out.push_back(Value::make_row(std::move(row)));
            }
            return out;
        }
        case QueryExpr::Kind::OrderBy: {
            auto rows = eval_query(*q.kids[0], db, param);
            for (auto &r : rows)
                if (!r.as_row().find(q.order_col)) throw UnknownColumn(q.order_col);
            std::stable_sort(rows.begin(), rows.end(), [&](const Value &a, const Value &b) {
                return compare(*a.as_row().find(q.order_col), *b.as_row().find(q.order_col)) < 0;
            });
            return rows;
        }
    }
    return {};
}

namespace {

using Env = std::unordered_map<std::string, Value>;

struct ReturnSignal
{
    Value value;
};

class Interpreter
{
public:
    Interpreter(const ast::Program &p, const Database &db, std::int64_t limit) : program_(p), db_(db), limit_(limit) {}

    OutputState run(const ast::FunctionDef &fn, const std::map<std::string, Value> &args)
    {
        Env env;
        for (auto &prm : fn.params) {
            auto it = args.find(prm.name);
            if (it != args.end())
                env[prm.name] = it->second;
            else if (prm.type == "list")
                env[prm.name] = Value::make_list();
            else if (prm.type == "map")
                env[prm.name] = Value::make_map();
            else if (prm.type == "int")
                env[prm.name] = Value(0);
            else if (prm.type == "str")
                env[prm.name] = Value("");
            else
                env[prm.name] = Value();
        }
        OutputState out;
        try {
            block(fn.body, env);
        } catch (ReturnSignal &r) {
            out.returned = std::move(r.value);
        }
        for (auto &prm : fn.params) out.vars[prm.name] = env[prm.name];
        out.printed = std::move(printed_);
        out.counters = counters_;
        return out;
    }

private:
    const ast::Program &program_;
    const Database &db_;
    std::int64_t limit_;
    std::int64_t steps_ = 0;
    Counters counters_;
    std::vector<std::string> printed_;
    std::map<std::string, std::vector<Value>> session_;
    std::map<std::pair<std::string, std::string>, std::map<Value, std::vector<Value>>> cache_;

    [[noreturn]] static void fail(Position pos, const std::string &msg) { throw RuntimeError(pos, msg); }

    void step(Position pos)
    {
        if (++steps_ > limit_) fail(pos, "iteration limit exceeded");
    }

    const Value &lookup(const Env &env, const std::string &name, Position pos)
    {
        auto it = env.find(name);
        if (it == env.end()) fail(pos, "undefined variable '" + name + "'");
        return it->second;
    }

    const std::vector<Value> &execute(const QueryPtr &q, const Env &env, Position pos)
    {
        QueryPtr inst = substitute_params(q, [&](const ScalarExpr &p) -> ScalarPtr {
            const Value &v = lookup(env, p.name, pos);
            if (p.field.empty()) return ScalarExpr::constant_of(v);
            if (!v.is_row()) fail(pos, "parameter '" + p.name + "' is not a row");
            const Value *f = v.as_row().find(p.field);
            if (!f) fail(pos, "row has no field '" + p.field + "'");
            return ScalarExpr::constant_of(*f);
        });
        std::string key = to_cobra(*inst);
        auto it = session_.find(key);
        if (it != session_.end()) return it->second;
        std::vector<Value> rows;
        try {
            rows = eval_query(*inst, db_, {});
        } catch (const RuntimeError &) {
            throw;
        } catch (const Error &e) {
            fail(pos, e.what());
        }
        ++counters_.queries;
        counters_.rows += static_cast<std::int64_t>(rows.size());
        return session_.emplace(key, std::move(rows)).first->second;
    }

    Value eval(const ast::Expr &e, Env &env)
    {
        using K = ast::Expr::Kind;
        switch (e.kind) {
            case K::Lit: return e.value;
            case K::Var: return lookup(env, e.name, e.pos);
            case K::Field: {
                Value target = eval(*e.args[0], env);
                if (!target.is_row()) fail(e.pos, "field '" + e.name + "' of non-row value " + target.to_string());
                const Value *f = target.as_row().find(e.name);
                if (!f) fail(e.pos, "row has no field '" + e.name + "'");
                return *f;
            }
            case K::Binary: {
                ++counters_.operations;
                Value a = eval(*e.args[0], env);
                if (e.name == "&&" && !a.truthy()) return Value(0);
                if (e.name == "||" && a.truthy()) return Value(1);
                Value b = eval(*e.args[1], env);
                try {
                    return apply_binary(e.name, a, b);
                } catch (const Error &err) {
                    fail(e.pos, err.what());
                }
            }
            case K::Unary: {
                ++counters_.operations;
                try {
                    return apply_unary(e.name, eval(*e.args[0], env));
                } catch (const Error &err) {
                    fail(e.pos, err.what());
                }
            }
            case K::Call: {
                ++counters_.operations;
                std::vector<Value> args;
                for (auto &a : e.args) args.push_back(eval(*a, env));
                try {
                    return apply_function(e.name, args);
                } catch (const Error &err) {
                    fail(e.pos, err.what());
                }
            }
            case K::Method: {
                ++counters_.operations;
                Value recv = eval(*e.args[0], env);
                std::vector<Value> args;
                for (std::size_t i = 1; i < e.args.size(); ++i) args.push_back(eval(*e.args[i], env));
                return method(recv, e.name, args, e.pos);
            }
            case K::ExecQuery: {
                const auto &rows = execute(e.query, env, e.pos);
                if (is_scalar_aggregate(*e.query)) return rows.empty() ? Value() : rows[0].as_row().fields[0].second;
                return Value::make_list(rows);
            }
            case K::CacheLookup: {
                ++counters_.operations;
                auto it = cache_.find({e.name, e.column});
                if (it == cache_.end()) fail(e.pos, "no cache for " + e.name + "." + e.column);
                Value key = eval(*e.args[0], env);
                auto hit = it->second.find(key);
                return Value::make_list(hit == it->second.end() ? List{} : hit->second);
            }
        }
        return Value();
    }

    Value method(const Value &recv, const std::string &name, const std::vector<Value> &args, Position pos)
    {
        if (name == "get" && args.size() == 1) {
            if (recv.is_map()) {
                const Value *v = recv.as_map().get(args[0]);
                return v ? *v : Value();
            }
            if (recv.is_list() && args[0].is_int()) {
                auto i = args[0].as_int();
                if (i < 0 || i >= static_cast<std::int64_t>(recv.as_list().size())) fail(pos, "index out of range");
                return recv.as_list()[static_cast<std::size_t>(i)];
            }
        }
        if (name == "size" && args.empty()) {
            try {
                return apply_function("size", {recv});
            } catch (const Error &e) {
                fail(pos, e.what());
            }
        }
        if (name == "contains" && args.size() == 1) {
            if (recv.is_map()) return Value(recv.as_map().get(args[0]) ? 1 : 0);
            if (recv.is_list()) {
                auto &l = recv.as_list();
                return Value(std::find(l.begin(), l.end(), args[0]) != l.end() ? 1 : 0);
            }
        }
        fail(pos, "unsupported method '" + name + "' on " + recv.to_string());
    }

    void block(const ast::Block &b, Env &env)
    {
        for (auto &s : b) stmt(*s, env);
    }

    void stmt(const ast::Stmt &s, Env &env)
    {
        using K = ast::Stmt::Kind;
        switch (s.kind) {
            case K::Assign: env[s.target] = eval(*s.expr, env); break;
            case K::Return: throw ReturnSignal{eval(*s.expr, env)};
            case K::Call: call(s, env); break;
            case K::Prefetch: {
                auto rows = execute(QueryExpr::scan(s.target), env, s.pos);
                auto &index = cache_[{s.target, s.name}];
                index.clear();
                for (auto &r : rows) {
                    const Value *k = r.as_row().find(s.name);
                    if (!k) fail(s.pos, "relation " + s.target + " has no column " + s.name);
                    index[*k].push_back(r);
                }
                break;
            }
            case K::If:
                if (eval(*s.expr, env).truthy())
                    block(s.body, env);
                else
                    block(s.else_body, env);
                break;
            case K::While:
                while (eval(*s.expr, env).truthy()) {
                    step(s.pos);
                    block(s.body, env);
                }
                break;
            case K::ForQuery: {
                std::vector<Value> rows = execute(s.query, env, s.pos);
                for (auto &r : rows) {
                    step(s.pos);
                    env[s.target] = r;
                    block(s.body, env);
                }
                break;
            }
            case K::ForColl: {
                Value coll = eval(*s.expr, env);
                List items;
                if (coll.is_list())
                    items = coll.as_list();
                else if (coll.is_map())
                    for (auto &[k, v] : coll.as_map().entries) items.push_back(k);
                else
                    fail(s.pos, "cannot iterate over " + coll.to_string());
                for (auto &x : items) {
                    step(s.pos);
                    env[s.target] = x;
                    block(s.body, env);
                }
                break;
            }
        }
    }

    void call(const ast::Stmt &s, Env &env)
    {
        std::vector<Value> args;
        for (auto &a : s.args) args.push_back(eval(*a, env));
        if (s.target == "Console") {
            if (s.name != "print" || args.size() != 1) fail(s.pos, "unsupported Console." + s.name);
            printed_.push_back(args[0].to_string());
            return;
        }
        auto it = env.find(s.target);
        if (it == env.end()) fail(s.pos, "undefined variable '" + s.target + "'");
        Value &recv = it->second;
        ++counters_.operations;
        if (s.name == "add" && args.size() == 1 && recv.is_list()) {
            recv.mutable_list().push_back(args[0]);
        } else if (s.name == "addAll" && args.size() == 1 && recv.is_list() && args[0].is_list()) {
            auto &l = recv.mutable_list();
            for (auto &x : args[0].as_list()) l.push_back(x);
        } else if (s.name == "put" && args.size() == 2 && recv.is_map()) {
            recv.mutable_map().put(args[0], args[1]);
        } else {
            fail(s.pos, "unsupported call " + s.target + "." + s.name);
        }
    }
};

}

Evaluator::Evaluator(const ast::Program &program, const Database &db) : program_(program), db_(db) {}

OutputState Evaluator::run(const std::string &entry, const std::map<std::string, Value> &args)
{
    const ast::FunctionDef *fn = program_.find(entry);
    if (!fn) throw Error("no function named '" + entry + "'");
    return Interpreter(program_, db_, step_limit).run(*fn, args);
}

}
