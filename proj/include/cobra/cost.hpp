#pragma once

#include "cobra/ast.hpp"
#include "cobra/database.hpp"
#include "cobra/query.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cobra {

/// Time in seconds, split by where it is spent.  total() is always the sum of the parts.
struct Cost
{
    double network = 0;
    double server = 0;
    double cpu = 0;

    double total() const { return network + server + cpu; }
    Cost &operator+=(const Cost &o);
    friend Cost operator+(Cost a, const Cost &b) { return a += b; }
    friend Cost operator*(double k, const Cost &c);
};

struct RelationStats
{
    double card = 0;
    double row_bytes = 0;
    std::map<std::string, double> distinct;
    /// Column widths in bytes, in schema order.
    std::vector<std::pair<std::string, double>> columns;
    std::string key;
    std::map<std::string, std::string> foreign_keys;

    double column_bytes(const std::string &col) const;
    bool has_column(const std::string &col) const;
};

struct QueryOverride
{
    std::optional<double> cqf, cql, nq, srow;
};

struct CostCatalog
{
    double nrt = 0.5;            ///< network round trip, seconds
    double bandwidth = 62500;    ///< bytes per second
    double cz = 30e-9;           ///< per statement
    double cy = 30e-9;           ///< per operator
    double default_iters = 1000;
    double default_prob = 0.5;
    double default_selectivity = 0.2;
    double server_first = 1e-3;
    double server_per_input = 0.1e-6;
    double server_per_result = 1e-6;

    std::map<std::string, RelationStats> relations;
    std::map<std::string, QueryOverride> overrides;
    /// fingerprint -> amortization factor (infinity allowed)
    std::map<std::string, double> amortization;
    /// Applies to every prefetch when set (`--af`).
    std::optional<double> global_af;

    std::vector<std::string> warnings;

    const RelationStats &relation(const std::string &name) const;
    std::vector<std::string> columns_of(const std::string &rel) const;
    SchemaMap schema() const;

    static CostCatalog from_json_text(const std::string &text, const std::string &origin = "<catalog>");
    static CostCatalog load(const std::string &path);
    /// Replaces the network parameters with a named profile: slow-remote or fast-local.
    void apply_network_preset(const std::string &name);
};

double parse_af(const std::string &text);

double estimate_card(const QueryExpr &q, const CostCatalog &cat);
double estimate_row_bytes(const QueryExpr &q, const CostCatalog &cat);
double selectivity(const ScalarExpr &pred, const QueryExpr &input, const CostCatalog &cat);

/// Rows a query returns: the override's row count when one exists, else the estimate.
double result_rows(const QueryExpr &q, const CostCatalog &cat);

/// C_Q = C_NRT + C_F + max(N * S_row / BW, C_L - C_F)
Cost query_cost(const QueryExpr &q, const CostCatalog &cat);
/// C_Q / AF for the query's fingerprint; 0 for an infinite factor.
Cost prefetch_cost(const QueryExpr &q, const CostCatalog &cat);
/// Whole-relation fetches are the prefetch candidates.
bool should_prefetch(const QueryExpr &q);

/// Operator count of an expression; embedded queries contribute their query cost.
Cost expr_cost(const ast::Expr &e, const CostCatalog &cat);
/// Static cost of a statement, compound ones included.
Cost stmt_cost(const ast::Stmt &s, const CostCatalog &cat);
/// Number of iterations assumed for a loop statement.
double loop_iterations(const ast::Stmt &s, const CostCatalog &cat);

}
