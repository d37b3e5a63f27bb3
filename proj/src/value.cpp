#include "cobra/value.hpp"

#include <sstream>

namespace cobra {

const Value *Row::find(const std::string &column) const
{
    for (auto &[name, v] : fields)
        if (name == column) return &v;
    return nullptr;
}

void MapData::put(const Value &k, const Value &v)
{
    if (auto it = index.find(k); it != index.end()) {
        entries[it->second].second = v;
        return;
    }
    index.emplace(k, entries.size());
    entries.emplace_back(k, v);
}

const Value *MapData::get(const Value &k) const
{
    auto it = index.find(k);
    return it == index.end() ? nullptr : &entries[it->second].second;
}

Value Value::make_list(List items)
{
    Value v;
    v.v_ = std::make_shared<List>(std::move(items));
    return v;
}

Value Value::make_map()
{
    Value v;
    v.v_ = std::make_shared<MapData>();
    return v;
}

Value Value::make_row(Row row)
{
    Value v;
    v.v_ = std::make_shared<Row>(std::move(row));
    return v;
}

List &Value::mutable_list()
{
    auto &p = std::get<std::shared_ptr<List>>(v_);
    if (p.use_count() > 1) p = std::make_shared<List>(*p);
    return *p;
}

MapData &Value::mutable_map()
{
    auto &p = std::get<std::shared_ptr<MapData>>(v_);
    if (p.use_count() > 1) p = std::make_shared<MapData>(*p);
    return *p;
}

bool Value::truthy() const
{
    switch (kind()) {
        case Kind::Null: return false;
        case Kind::Int: return as_int() != 0;
        case Kind::Double: return as_double() != 0.0;
        case Kind::Str: return !as_str().empty();
        case Kind::List: return !as_list().empty();
        case Kind::Map: return !as_map().entries.empty();
        case Kind::Row: return true;
    }
    return false;
}

namespace {

int rank(const Value &v)
{
    switch (v.kind()) {
        case Value::Kind::Null: return 0;
        case Value::Kind::Int:
        case Value::Kind::Double: return 1;
        case Value::Kind::Str: return 2;
        case Value::Kind::List: return 3;
        case Value::Kind::Map: return 4;
        case Value::Kind::Row: return 5;
    }
    return 6;
}

}

std::strong_ordering compare(const Value &a, const Value &b)
{
    if (int ra = rank(a), rb = rank(b); ra != rb) return ra <=> rb;
    switch (a.kind()) {
        case Value::Kind::Null: return std::strong_ordering::equal;
        case Value::Kind::Int:
        case Value::Kind::Double:
            if (a.is_int() && b.is_int()) return a.as_int() <=> b.as_int();
            {
                double x = a.as_double(), y = b.as_double();
                if (x < y) return std::strong_ordering::less;
                if (y < x) return std::strong_ordering::greater;
                return std::strong_ordering::equal;
            }
        case Value::Kind::Str: return a.as_str().compare(b.as_str()) <=> 0;
        case Value::Kind::List: {
            auto &x = a.as_list(), &y = b.as_list();
            for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
                if (auto c = compare(x[i], y[i]); c != 0) return c;
            return x.size() <=> y.size();
        }
        case Value::Kind::Map: {
            auto &x = a.as_map().entries, &y = b.as_map().entries;
            for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
                if (auto c = compare(x[i].first, y[i].first); c != 0) return c;
                if (auto c = compare(x[i].second, y[i].second); c != 0) return c;
            }
            return x.size() <=> y.size();
        }
        case Value::Kind::Row: {
            auto &x = a.as_row().fields, &y = b.as_row().fields;
            for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
                if (auto c = x[i].first.compare(y[i].first) <=> 0; c != 0) return c;
                if (auto c = compare(x[i].second, y[i].second); c != 0) return c;
            }
            return x.size() <=> y.size();
        }
    }
    return std::strong_ordering::equal;
}

bool operator==(const Value &a, const Value &b) { return compare(a, b) == 0; }

std::string Value::to_string() const
{
    switch (kind()) {
        case Kind::Null: return "null";
        case Kind::Int: return std::to_string(as_int());
        case Kind::Double: {
            std::ostringstream os;
            os.precision(17);
            os << as_double();
            return os.str();
        }
        case Kind::Str: {
            std::string s = "\"";
            for (char c : as_str()) {
                if (c == '"' || c == '\\') s += '\\';
                s += c;
            }
            return s + "\"";
        }
        case Kind::List: {
            std::string s = "[";
            bool first = true;
            for (auto &e : as_list()) {
                if (!first) s += ", ";
                first = false;
                s += e.to_string();
            }
            return s + "]";
        }
        case Kind::Map: {
            std::string s = "{";
            bool first = true;
            for (auto &[k, v] : as_map().entries) {
                if (!first) s += ", ";
                first = false;
                s += k.to_string() + ": " + v.to_string();
            }
            return s + "}";
        }
        case Kind::Row: {
            std::string s = "(";
            bool first = true;
            for (auto &[k, v] : as_row().fields) {
                if (!first) s += ", ";
                first = false;
                s += k + "=" + v.to_string();
            }
            return s + ")";
        }
    }
    return "?";
}

}
