#include "cobra/ast.hpp"

#include <set>

namespace cobra::ast {

ExprPtr Expr::lit(Value v, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Lit;
    e->value = std::move(v);
    e->pos = pos;
    return e;
}

ExprPtr Expr::var(std::string name, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Var;
    e->name = std::move(name);
    e->pos = pos;
    return e;
}

ExprPtr Expr::field(ExprPtr target, std::string name, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Field;
    e->name = std::move(name);
    e->args = {std::move(target)};
    e->pos = pos;
    return e;
}

ExprPtr Expr::binary(std::string op, ExprPtr lhs, ExprPtr rhs, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Binary;
    e->name = std::move(op);
    e->args = {std::move(lhs), std::move(rhs)};
    e->pos = pos;
    return e;
}

ExprPtr Expr::unary(std::string op, ExprPtr arg, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Unary;
    e->name = std::move(op);
    e->args = {std::move(arg)};
    e->pos = pos;
    return e;
}

ExprPtr Expr::call(std::string fn, std::vector<ExprPtr> args, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Call;
    e->name = std::move(fn);
    e->args = std::move(args);
    e->pos = pos;
    return e;
}

ExprPtr Expr::method(ExprPtr receiver, std::string name, std::vector<ExprPtr> args, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Method;
    e->name = std::move(name);
    e->args.push_back(std::move(receiver));
    for (auto &a : args) e->args.push_back(std::move(a));
    e->pos = pos;
    return e;
}

ExprPtr Expr::exec_query(QueryPtr q, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::ExecQuery;
    e->query = std::move(q);
    e->pos = pos;
    return e;
}

ExprPtr Expr::cache_lookup(std::string relation, std::string column, ExprPtr key, Position pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = Kind::CacheLookup;
    e->name = std::move(relation);
    e->column = std::move(column);
    e->args = {std::move(key)};
    e->pos = pos;
    return e;
}

const FunctionDef *Program::find(const std::string &name) const
{
    for (auto &f : functions)
        if (f.name == name) return &f;
    return nullptr;
}

namespace {

int precedence(const Expr &e)
{
    if (e.kind == Expr::Kind::Unary) return 7;
    if (e.kind == Expr::Kind::Lit && e.value.is_number() && e.value.as_double() < 0) return 7;
    if (e.kind != Expr::Kind::Binary) return 9;
    const auto &op = e.name;
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    return 6;
}

std::string sub(const Expr &e, int parent, bool right)
{
    std::string s = print(e);
    int p = precedence(e);
    if (p < parent || (right && p == parent && p < 7)) return "(" + s + ")";
    return s;
}

std::string args_text(const std::vector<ExprPtr> &args, std::size_t from = 0)
{
    std::string s;
    for (std::size_t i = from; i < args.size(); ++i) {
        if (i > from) s += ", ";
        s += print(*args[i]);
    }
    return s;
}

std::string pad(int indent) { return std::string(static_cast<std::size_t>(indent) * 4, ' '); }

}

std::string print(const Expr &e)
{
    switch (e.kind) {
        case Expr::Kind::Lit:
            if (e.value.is_list()) {
                if (!e.value.as_list().empty()) throw InternalError("non-empty list literal");
                return "list()";
            }
            if (e.value.is_map()) {
                if (!e.value.as_map().entries.empty()) throw InternalError("non-empty map literal");
                return "map()";
            }
            return e.value.to_string();
        case Expr::Kind::Var: return e.name;
        case Expr::Kind::Field: return sub(*e.args[0], 8, false) + "." + e.name;
        case Expr::Kind::Binary: {
            int p = precedence(e);
            return sub(*e.args[0], p, false) + " " + e.name + " " + sub(*e.args[1], p, true);
        }
        case Expr::Kind::Unary: return e.name + sub(*e.args[0], 7, false);
        case Expr::Kind::Call: return e.name + "(" + args_text(e.args) + ")";
        case Expr::Kind::Method: return sub(*e.args[0], 8, false) + "." + e.name + "(" + args_text(e.args, 1) + ")";
        case Expr::Kind::ExecQuery: return "executeQuery(query { " + to_cobra(*e.query) + " })";
        case Expr::Kind::CacheLookup:
            return "Utils.lookupCache(" + e.name + ", " + e.column + ", " + print(*e.args[0]) + ")";
    }
    return "?";
}

std::string print_header(const Stmt &s)
{
    switch (s.kind) {
        case Stmt::Kind::ForQuery: return "for (" + s.target + " : query { " + to_cobra(*s.query) + " })";
        case Stmt::Kind::ForColl: return "for (" + s.target + " : " + print(*s.expr) + ")";
        case Stmt::Kind::While: return "while (" + print(*s.expr) + ")";
        case Stmt::Kind::If: return "if (" + print(*s.expr) + ")";
        default: return print(s, 0);
    }
}

std::string print(const Stmt &s, int indent)
{
    std::string p = pad(indent);
    switch (s.kind) {
        case Stmt::Kind::Assign: return p + s.target + " = " + print(*s.expr) + ";\n";
        case Stmt::Kind::Return: return p + "return " + print(*s.expr) + ";\n";
        case Stmt::Kind::Call: return p + s.target + "." + s.name + "(" + args_text(s.args) + ");\n";
        case Stmt::Kind::Prefetch: return p + "Utils.cacheByColumn(" + s.target + ", " + s.name + ");\n";
        case Stmt::Kind::If: {
            std::string out = p + print_header(s) + " {\n" + print(s.body, indent + 1) + p + "}";
            if (s.has_else) out += " else {\n" + print(s.else_body, indent + 1) + p + "}";
            return out + "\n";
        }
        default: return p + print_header(s) + " {\n" + print(s.body, indent + 1) + p + "}\n";
    }
}

std::string print(const Block &b, int indent)
{
    std::string out;
    for (auto &s : b) out += print(*s, indent);
    return out;
}

std::string print(const FunctionDef &f)
{
    std::string out = "fn " + f.name + "(";
    for (std::size_t i = 0; i < f.params.size(); ++i) {
        if (i) out += ", ";
        out += f.params[i].name + ": " + f.params[i].type;
    }
    return out + ") {\n" + print(f.body, 1) + "}\n";
}

std::string print(const Program &p)
{
    std::string out;
    for (std::size_t i = 0; i < p.functions.size(); ++i) {
        if (i) out += "\n";
        out += print(p.functions[i]);
    }
    return out;
}

bool equal(const Program &a, const Program &b) { return print(a) == print(b); }
bool equal(const Expr &a, const Expr &b) { return print(a) == print(b); }

void collect_reads(const Expr &e, std::vector<std::string> &out)
{
    if (e.kind == Expr::Kind::Var) out.push_back(e.name);
    if (e.query) {
        std::set<ParamRef> params;
        collect_params(*e.query, params);
        for (auto &pr : params) out.push_back(pr.var);
    }
    for (auto &a : e.args) collect_reads(*a, out);
}

void collect_names(const Program &p, std::vector<std::string> &out)
{
    for (auto &f : p.functions) {
        for (auto &prm : f.params) out.push_back(prm.name);
        walk(f.body, [&](const Stmt &s) {
            if (!s.target.empty()) out.push_back(s.target);
            if (s.expr) collect_reads(*s.expr, out);
            for (auto &a : s.args) collect_reads(*a, out);
        });
    }
}

}
