#pragma once

#include "cobra/database.hpp"
#include "cobra/evaluator.hpp"
#include "cobra/parser.hpp"
#include "cobra/pipeline.hpp"

#include <string>

namespace testing {

inline std::string source_path(const std::string &rel) { return std::string(COBRA_SOURCE_DIR) + "/" + rel; }

inline cobra::ast::Program sample(const std::string &name)
{
    return cobra::parse(cobra::read_file(source_path("samples/" + name + ".cob")));
}

inline cobra::CostCatalog catalog(const std::string &name)
{
    return cobra::CostCatalog::load(source_path("catalogs/" + name + ".json"));
}

/// Query of the first cursor loop in `fn f() { for (t : query { <text> }) { } }`.
inline cobra::QueryPtr query(const std::string &text)
{
    auto p = cobra::parse("fn f() { for (t : query { " + text + " }) { } }");
    return p.functions.at(0).body.at(0)->query;
}

/// Small database shared by several suites: three sales rows, two items, three orders over two customers.
inline cobra::Database small_db()
{
    return cobra::Database::from_json_text(R"({
      "sales": {"schema": ["month", "sale_amt", "item_id"], "foreign_keys": {"item_id": "items.i_id"},
                "rows": [[2, 5, 1], [1, 4, 1], [1, 10, 2]]},
      "items": {"schema": ["i_id", "i_price"], "key": "i_id", "rows": [[1, 3], [2, 7]]},
      "orders": {"schema": ["o_id", "o_customer_sk"], "key": "o_id",
                 "foreign_keys": {"o_customer_sk": "customers.c_customer_sk"}, "rows": [[1, 1], [2, 2], [3, 1]]},
      "customers": {"schema": ["c_customer_sk", "c_birth_year"], "key": "c_customer_sk",
                    "rows": [[1, 1970], [2, 1980]]}
    })");
}

}
