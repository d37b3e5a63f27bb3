#pragma once

#include "cobra/errors.hpp"
#include "cobra/query.hpp"
#include "cobra/value.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cobra::ast {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr
{
    enum class Kind {
        Lit,         ///< int, string or null literal
        Var,
        Field,       ///< args[0].name
        Binary,      ///< name = operator
        Unary,
        Call,        ///< free function call, name = function
        Method,      ///< args[0].name(args[1..]), e.g. m.get(k)
        ExecQuery,   ///< executeQuery(query { ... })
        CacheLookup  ///< Utils.lookupCache(relation, column, key)
    };

    Kind kind = Kind::Lit;
    Position pos;
    Value value;
    std::string name;
    std::string column;  ///< CacheLookup key column
    std::vector<ExprPtr> args;
    QueryPtr query;

    static ExprPtr lit(Value v, Position pos = {});
    static ExprPtr var(std::string name, Position pos = {});
    static ExprPtr field(ExprPtr target, std::string name, Position pos = {});
    static ExprPtr binary(std::string op, ExprPtr lhs, ExprPtr rhs, Position pos = {});
    static ExprPtr unary(std::string op, ExprPtr arg, Position pos = {});
    static ExprPtr call(std::string fn, std::vector<ExprPtr> args, Position pos = {});
    static ExprPtr method(ExprPtr receiver, std::string name, std::vector<ExprPtr> args, Position pos = {});
    static ExprPtr exec_query(QueryPtr q, Position pos = {});
    static ExprPtr cache_lookup(std::string relation, std::string column, ExprPtr key, Position pos = {});
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;
using Block = std::vector<StmtPtr>;

struct Stmt
{
    enum class Kind {
        Assign,    ///< target = expr
        ForQuery,  ///< for (target : query { query }) body
        ForColl,   ///< for (target : expr) body
        While,     ///< while (expr) body
        If,        ///< if (expr) body else else_body
        Return,    ///< return expr
        Call,      ///< target.name(args), e.g. result.add(x), Console.print(x)
        Prefetch   ///< Utils.cacheByColumn(target, name)
    };

    Kind kind = Kind::Assign;
    Position pos;
    int end_line = 0;
    std::string target;
    std::string name;
    ExprPtr expr;
    std::vector<ExprPtr> args;
    QueryPtr query;
    Block body;
    Block else_body;
    bool has_else = false;

    bool is_loop() const { return kind == Kind::ForQuery || kind == Kind::ForColl || kind == Kind::While; }
    bool is_compound() const { return is_loop() || kind == Kind::If; }
};

struct Param
{
    std::string name;
    std::string type;
};

struct FunctionDef
{
    std::string name;
    std::vector<Param> params;
    Block body;
    Position pos;
    int end_line = 0;
};

struct Program
{
    std::vector<FunctionDef> functions;

    const FunctionDef *find(const std::string &name) const;
};

/// Canonical source rendering; parse(print(p)) yields an equal program.
std::string print(const Program &p);
std::string print(const FunctionDef &f);
std::string print(const Block &b, int indent);
std::string print(const Stmt &s, int indent = 0);
/// Only the header of a compound statement (`for (o : query { ... })`, `if (c)`); whole text otherwise.
std::string print_header(const Stmt &s);
std::string print(const Expr &e);

/// Structural equality, ignoring source positions.
bool equal(const Program &a, const Program &b);
bool equal(const Expr &a, const Expr &b);

/// Variables read by an expression (including query parameters).
void collect_reads(const Expr &e, std::vector<std::string> &out);
/// Every identifier in a program: variables, parameters, loop variables.
void collect_names(const Program &p, std::vector<std::string> &out);

/// Calls `fn` on every statement of `b`, nested ones included, in textual order.
template <typename Fn> void walk(const Block &b, Fn &&fn)
{
    for (auto &s : b) {
        fn(*s);
        walk(s->body, fn);
        walk(s->else_body, fn);
    }
}

}
