#include "cobra/database.hpp"
#include "cobra/errors.hpp"
#include "cobra/parser.hpp"

#include <json.hpp>

#include <algorithm>
#include <random>
#include <set>

namespace cobra {

using nlohmann::json;

const Table &Database::table(const std::string &name) const
{
    auto it = tables.find(name);
    if (it == tables.end()) throw UnknownRelation(name);
    return it->second;
}

namespace {

Value from_json_value(const json &j, const std::string &where)
{
    if (j.is_null()) return Value();
    if (j.is_number_integer()) return Value(j.get<std::int64_t>());
    if (j.is_number()) return Value(j.get<double>());
    if (j.is_string()) return Value(j.get<std::string>());
    throw Error(where + ": unsupported value " + j.dump());
}

json to_json_value(const Value &v)
{
    switch (v.kind()) {
        case Value::Kind::Int: return v.as_int();
        case Value::Kind::Double: return v.as_double();
        case Value::Kind::Str: return v.as_str();
        default: return nullptr;
    }
}

}

Database Database::from_json_text(const std::string &text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(std::string("database: ") + e.what());
    }
    if (!doc.is_object()) throw Error("database: top level must be an object");
    Database db;
    for (auto &[name, rel] : doc.items()) {
        Table t;
        if (!rel.contains("schema") || !rel["schema"].is_array()) throw Error("database: " + name + ": missing schema");
        for (auto &c : rel["schema"]) t.schema.columns.push_back(c.get<std::string>());
        if (rel.contains("key")) t.schema.key = rel["key"].get<std::string>();
        if (rel.contains("foreign_keys"))
            for (auto &[c, target] : rel["foreign_keys"].items()) t.schema.foreign_keys[c] = target.get<std::string>();
        if (rel.contains("rows")) {
            for (auto &r : rel["rows"]) {
                if (!r.is_array() || r.size() != t.schema.columns.size())
                    throw Error("database: " + name + ": row arity does not match schema");
                Row row;
                for (std::size_t i = 0; i < r.size(); ++i)
                    row.fields.emplace_back(t.schema.columns[i], from_json_value(r[i], name));
                t.rows.push_back(Value::make_row(std::move(row)));
            }
        }
        db.tables[name] = std::move(t);
    }
    return db;
}

Database Database::load(const std::string &path) { return from_json_text(read_file(path)); }

std::string Database::to_json_text() const
{
    json doc = json::object();
    for (auto &[name, t] : tables) {
        json rel;
        rel["schema"] = t.schema.columns;
        if (!t.schema.key.empty()) rel["key"] = t.schema.key;
        if (!t.schema.foreign_keys.empty()) rel["foreign_keys"] = t.schema.foreign_keys;
        json rows = json::array();
        for (auto &r : t.rows) {
            json row = json::array();
            for (auto &[c, v] : r.as_row().fields) row.push_back(to_json_value(v));
            rows.push_back(row);
        }
        rel["rows"] = rows;
        doc[name] = rel;
    }
    return doc.dump(2);
}

Database random_database(const SchemaMap &schema, std::uint64_t seed, const GeneratorOptions &opt)
{
    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    // Referenced relations are sized first so children can be scaled by the fk ratio.
    std::map<std::string, int> sizes;
    std::set<std::string> parents;
    for (auto &[name, rel] : schema)
        for (auto &[col, target] : rel.foreign_keys) parents.insert(target.substr(0, target.find('.')));
    int parent_cap = std::max(1, opt.max_rows / std::max(1, opt.fk_ratio));
    for (auto &[name, rel] : schema)
        if (parents.count(name)) sizes[name] = uniform(0, parent_cap);
    for (auto &[name, rel] : schema) {
        if (sizes.count(name)) continue;
        int n = uniform(0, opt.max_rows);
        for (auto &[col, target] : rel.foreign_keys) {
            int p = sizes[target.substr(0, target.find('.'))];
            n = p == 0 ? 0 : std::min(opt.max_rows, p * opt.fk_ratio + uniform(-p, p));
        }
        sizes[name] = n;
    }

    Database db;
    for (auto &[name, rel] : schema) {
        Table t;
        t.schema = rel;
        for (int i = 0; i < sizes[name]; ++i) {
            Row row;
            for (auto &col : rel.columns) {
                std::int64_t v;
                if (col == rel.key) {
                    v = i + 1;
                } else if (auto fk = rel.foreign_keys.find(col); fk != rel.foreign_keys.end()) {
                    int p = sizes[fk->second.substr(0, fk->second.find('.'))];
                    v = uniform(1, std::max(1, p));
                } else {
                    v = uniform(0, opt.value_range - 1);
                }
                row.fields.emplace_back(col, Value(v));
            }
            t.rows.push_back(Value::make_row(std::move(row)));
        }
        db.tables[name] = std::move(t);
    }
    return db;
}

}
