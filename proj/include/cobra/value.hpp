#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cobra {

class Value;

using List = std::vector<Value>;

/// A database row: ordered (column, value) pairs.
struct Row
{
    std::vector<std::pair<std::string, Value>> fields;

    const Value *find(const std::string &column) const;
};

struct MapData;

/// Runtime value of the interpreter and constants in the IR.  Collections have value semantics and are
/// shared copy-on-write.
class Value
{
public:
    enum class Kind { Null, Int, Double, Str, List, Map, Row };

    Value() = default;
    Value(std::int64_t i) : v_(i) {}
    Value(int i) : v_(std::int64_t{i}) {}
    Value(double d) : v_(d) {}
    Value(std::string s) : v_(std::move(s)) {}
    Value(const char *s) : v_(std::string(s)) {}

    static Value make_list(List items = {});
    static Value make_map();
    static Value make_row(Row row);

    Kind kind() const { return static_cast<Kind>(v_.index()); }
    bool is_null() const { return kind() == Kind::Null; }
    bool is_int() const { return kind() == Kind::Int; }
    bool is_double() const { return kind() == Kind::Double; }
    bool is_number() const { return is_int() || is_double(); }
    bool is_str() const { return kind() == Kind::Str; }
    bool is_list() const { return kind() == Kind::List; }
    bool is_map() const { return kind() == Kind::Map; }
    bool is_row() const { return kind() == Kind::Row; }

    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    double as_double() const { return is_int() ? double(as_int()) : std::get<double>(v_); }
    const std::string &as_str() const { return std::get<std::string>(v_); }
    const List &as_list() const { return *std::get<std::shared_ptr<List>>(v_); }
    const MapData &as_map() const { return *std::get<std::shared_ptr<MapData>>(v_); }
    const Row &as_row() const { return *std::get<std::shared_ptr<Row>>(v_); }

    /// Mutable access; clones the payload first if it is shared.
    List &mutable_list();
    MapData &mutable_map();

    bool truthy() const;

    /// Structural equality (lists/maps/rows compared element-wise, ints and doubles numerically).
    friend bool operator==(const Value &a, const Value &b);
    /// Total order used for map keys, sorting and grouping.
    friend std::strong_ordering compare(const Value &a, const Value &b);
    friend bool operator<(const Value &a, const Value &b) { return compare(a, b) < 0; }

    /// Human-readable rendering, also used as a literal in emitted programs for scalars.
    std::string to_string() const;

private:
    std::variant<std::monostate, std::int64_t, double, std::string, std::shared_ptr<List>, std::shared_ptr<MapData>,
                 std::shared_ptr<Row>>
        v_;
};

/// Insertion-ordered map.
struct MapData
{
    std::vector<std::pair<Value, Value>> entries;
    std::map<Value, std::size_t> index;

    void put(const Value &k, const Value &v);
    const Value *get(const Value &k) const;
};

}
