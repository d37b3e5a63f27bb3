#pragma once

#include "cobra/value.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cobra {

struct ScalarExpr;
using ScalarPtr = std::shared_ptr<const ScalarExpr>;

/// Scalar expression inside a query: predicates, computed projection items.
struct ScalarExpr
{
    enum class Kind { Column, Param, Const, Binary, Unary, Call };

    Kind kind = Kind::Const;
    std::string name;   ///< column name, parameter variable, operator, or function name
    std::string field;  ///< for Param: attribute of the program variable (empty for `$var`)
    Value constant;
    std::vector<ScalarPtr> args;

    static ScalarPtr column(std::string name);
    static ScalarPtr param(std::string var, std::string field = {});
    static ScalarPtr constant_of(Value v);
    /// Builds a binary node; `==` and `!=` operands are put in canonical order.
    static ScalarPtr binary(std::string op, ScalarPtr lhs, ScalarPtr rhs);
    static ScalarPtr unary(std::string op, ScalarPtr arg);
    static ScalarPtr call(std::string fn, std::vector<ScalarPtr> args);
};

/// Source-syntax rendering (`c_customer_sk == o.o_customer_sk`).
std::string to_cobra(const ScalarExpr &e);
/// SQL rendering (`c_customer_sk = :o.o_customer_sk`).
std::string to_sql(const ScalarExpr &e);
bool equal(const ScalarExpr &a, const ScalarExpr &b);

/// Columns referenced by a scalar expression.
void collect_columns(const ScalarExpr &e, std::set<std::string> &out);

struct QueryExpr;
using QueryPtr = std::shared_ptr<const QueryExpr>;

struct ProjectItem
{
    ScalarPtr expr;
    std::string alias;  ///< empty when `expr` is a bare column

    std::string output_name() const { return alias.empty() ? expr->name : alias; }
};

/// Relational algebra tree: scan, σ, π, ⋈, γ, order-by.
struct QueryExpr
{
    enum class Kind { Scan, Select, Project, Join, Aggregate, OrderBy };

    Kind kind = Kind::Scan;
    std::string relation;           ///< Scan
    ScalarPtr pred;                 ///< Select, Join
    std::vector<ProjectItem> items; ///< Project
    std::string agg_fn;             ///< Aggregate: sum | count | max | min
    std::string agg_col;            ///< Aggregate column (`*` for count)
    std::string group_by;           ///< Aggregate, optional
    std::string order_col;          ///< OrderBy
    std::vector<QueryPtr> kids;

    static QueryPtr scan(std::string rel);
    static QueryPtr select(ScalarPtr pred, QueryPtr child);
    static QueryPtr project(std::vector<ProjectItem> items, QueryPtr child);
    static QueryPtr join(ScalarPtr pred, QueryPtr left, QueryPtr right);
    static QueryPtr aggregate(std::string fn, std::string col, std::string group_by, QueryPtr child);
    static QueryPtr order_by(std::string col, QueryPtr child);
};

/// Functional source syntax, e.g. `orderby(month, project([month, sale_amt], scan(sales)))`.
/// Also the canonical structural key of a query.
std::string to_cobra(const QueryExpr &q);
/// Deterministic SQL text.
std::string to_sql(const QueryExpr &q);
/// Hex FNV-1a 64 of the SQL rendering.
std::string fingerprint(const QueryExpr &q);
bool equal(const QueryExpr &a, const QueryExpr &b);

/// Root is an aggregate without group-by: executing it yields a single scalar.
bool is_scalar_aggregate(const QueryExpr &q);
/// An entire relation fetched without filters or grouping (scan, possibly projected/ordered).
bool is_whole_relation(const QueryExpr &q);
std::vector<std::string> base_relations(const QueryExpr &q);

struct ParamRef
{
    std::string var;
    std::string field;
    auto operator<=>(const ParamRef &) const = default;
};
void collect_params(const QueryExpr &q, std::set<ParamRef> &out);
void collect_params(const ScalarExpr &e, std::set<ParamRef> &out);

/// Rebuilds a query replacing parameters; `fn` returns nullptr to keep a parameter.
using ParamMapper = std::function<ScalarPtr(const ScalarExpr &param)>;
ScalarPtr substitute_params(const ScalarPtr &e, const ParamMapper &fn);
QueryPtr substitute_params(const QueryPtr &q, const ParamMapper &fn);

/// Output column names of `q`, given the column list of each base relation.
using ColumnsOf = std::function<std::vector<std::string>(const std::string &relation)>;
std::vector<std::string> output_columns(const QueryExpr &q, const ColumnsOf &columns_of);

std::string fnv1a_hex(const std::string &text);

}
