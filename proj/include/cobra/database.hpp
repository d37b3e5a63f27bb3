#pragma once

#include "cobra/value.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cobra {

/// Column layout and integrity declarations of one relation.
struct RelationSchema
{
    std::vector<std::string> columns;
    std::string key;
    /// column -> "relation.column" it references
    std::map<std::string, std::string> foreign_keys;
};

using SchemaMap = std::map<std::string, RelationSchema>;

struct Table
{
    RelationSchema schema;
    std::vector<Value> rows;  ///< each a Row value with fields in schema order
};

/// In-memory database used by the reference interpreter.
struct Database
{
    std::map<std::string, Table> tables;

    const Table &table(const std::string &name) const;

    /// `{relation: {schema: [...], rows: [[...]], key?: col, foreign_keys?: {col: "rel.col"}}}`
    static Database from_json_text(const std::string &text);
    static Database load(const std::string &path);
    std::string to_json_text() const;
};

struct GeneratorOptions
{
    int max_rows = 1000;
    /// child:parent cardinality ratio of foreign-key pairs
    int fk_ratio = 10;
    /// non-key integer columns are uniform on [0, value_range); `> 7` then selects 20%
    int value_range = 10;
};

/// Seeded random instance of `schema`: keys are 1..n, foreign keys resolve, other columns are
/// small integers.
Database random_database(const SchemaMap &schema, std::uint64_t seed, const GeneratorOptions &opt = {});

}
