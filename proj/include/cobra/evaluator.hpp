#pragma once

#include "cobra/ast.hpp"
#include "cobra/database.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cobra {

struct Counters
{
    std::int64_t queries = 0;      ///< distinct query executions sent to the database
    std::int64_t rows = 0;         ///< rows transferred by those executions
    std::int64_t operations = 0;   ///< scalar operators evaluated by the client
};

/// Observable result of running a function: final parameter values, return value and printed lines.
struct OutputState
{
    std::map<std::string, Value> vars;
    Value returned;
    std::vector<std::string> printed;
    Counters counters;

    /// Equality of the observable part (counters excluded).
    bool same_as(const OutputState &o) const;
    std::string str() const;
};

/// Semantics shared by the interpreter and query evaluation.
Value apply_binary(const std::string &op, const Value &a, const Value &b);
Value apply_unary(const std::string &op, const Value &a);
/// Built-in and opaque functions; unknown names are deterministic pure hash functions.
Value apply_function(const std::string &name, const std::vector<Value> &args);
/// Functions the database can evaluate inside a query.
bool sql_function(const std::string &name);

/// Evaluates a query; `param` resolves parameters (`o.f`, `$x`).
using ParamResolver = std::function<Value(const ScalarExpr &param)>;
std::vector<Value> eval_query(const QueryExpr &q, const Database &db, const ParamResolver &param = {});

/// Reference interpreter.  Identical instantiated queries within one run are served from a session
/// cache and counted once.
class Evaluator
{
public:
    Evaluator(const ast::Program &program, const Database &db);

    /// Runs `entry`; parameters start as empty collections (`list`, `map`), 0 (`int`), "" (`str`) or null.
    OutputState run(const std::string &entry, const std::map<std::string, Value> &args = {});

    /// Upper bound on loop iterations per run, guarding against non-terminating programs.
    std::int64_t step_limit = 50'000'000;

private:
    const ast::Program &program_;
    const Database &db_;
};

}
