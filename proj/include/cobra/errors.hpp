#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cobra {

/// Base class of every diagnostic the library raises for user-facing errors.
class Error : public std::runtime_error
{
public:
    explicit Error(const std::string &what) : std::runtime_error(what) {}
};

struct Position
{
    int line = 0;
    int col = 0;
};

class SyntaxError : public Error
{
public:
    SyntaxError(Position pos, std::string message, std::vector<std::string> expected = {})
        : Error(format(pos, message, expected)), pos_(pos), message_(std::move(message)),
          expected_(std::move(expected))
    {}

    Position pos() const { return pos_; }
    const std::string &message() const { return message_; }
    const std::vector<std::string> &expected() const { return expected_; }

private:
    static std::string format(Position pos, const std::string &msg, const std::vector<std::string> &expected)
    {
        std::string s = std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + msg;
        if (!expected.empty()) {
            s += " (expected ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i) s += ", ";
                s += expected[i];
            }
            s += ")";
        }
        return s;
    }

    Position pos_;
    std::string message_;
    std::vector<std::string> expected_;
};

class UnknownRelation : public Error
{
public:
    explicit UnknownRelation(const std::string &rel) : Error("unknown relation '" + rel + "'"), relation(rel) {}
    std::string relation;
};

class UnknownColumn : public Error
{
public:
    explicit UnknownColumn(const std::string &col) : Error("unknown column '" + col + "'"), column(col) {}
    std::string column;
};

class CycleError : public Error
{
public:
    using Error::Error;
};

class CatalogError : public Error
{
public:
    CatalogError(const std::string &path, const std::string &msg) : Error(path + ": " + msg), field_path(path) {}
    std::string field_path;
};

class InvalidAF : public Error
{
public:
    using Error::Error;
};

/// A lowering template is missing for some F-IR operator; this is a rule-author bug.
class UnloweredOperator : public Error
{
public:
    using Error::Error;
};

class RuntimeError : public Error
{
public:
    RuntimeError(Position pos, const std::string &msg)
        : Error(std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + msg), pos(pos)
    {}
    Position pos;
};

/// Broken internal invariant (maps to CLI exit code 2).
class InternalError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

}
