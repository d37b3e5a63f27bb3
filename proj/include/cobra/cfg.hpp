#pragma once

#include "cobra/ast.hpp"

#include <map>
#include <string>
#include <vector>

namespace cobra {

/// Operand of a three-address instruction: a variable or a constant.
struct Operand
{
    bool is_var = false;
    std::string var;
    Value constant;

    static Operand of_var(std::string name);
    static Operand of_const(Value v);
    std::string str() const;
};

/// One three-address instruction.
struct Tac
{
    enum class Kind {
        Copy,         ///< dst = a
        Binary,       ///< dst = a op b
        Unary,        ///< dst = op a
        Call,         ///< dst = op(args)
        Field,        ///< dst = a.field
        Method,       ///< dst = a.op(args...) (non-mutating)
        ExecQuery,    ///< dst = executeQuery(query)
        CacheLookup,  ///< dst = lookupCache(op, field, a)
        Prefetch,     ///< cacheByColumn(op, field)
        Effect,       ///< receiver.method(args); mutates the receiver for collection updates
        ForNext,      ///< dst = next row of query / element of args[0]
        Branch,       ///< two-way branch on args[0]; successors are [true, false]
        Return
    };
    enum class Role { Simple, Header, Predicate };

    Kind kind = Kind::Copy;
    Role role = Role::Simple;
    std::string dst;
    std::string op;
    std::string field;
    std::vector<Operand> args;
    QueryPtr query;
    const ast::Stmt *stmt = nullptr;
    int line = 0;

    std::vector<std::string> uses() const;
    std::vector<std::string> defs() const;
    std::string str() const;
};

struct BasicBlock
{
    int id = 0;
    std::vector<Tac> code;
    std::vector<int> succs;
    std::vector<int> preds;
    bool keep = false;  ///< loop and branch bodies survive even when empty
};

/// Control-flow graph of one function; blocks[entry] and blocks[exit] are empty pseudo nodes.
struct Cfg
{
    const ast::FunctionDef *fn = nullptr;
    std::vector<BasicBlock> blocks;
    int entry = 0;
    int exit = 1;
    /// Number of instructions emitted by AST lowering (an audit counter).
    int lowered_count = 0;
    /// Enclosing compound statement of every statement (nullptr at top level).
    std::map<const ast::Stmt *, const ast::Stmt *> parent;

    int instruction_count() const;
    std::string dump() const;
};

/// Lowers a function to three-address code and builds its CFG.  `&&`/`||` in branch
/// conditions are decomposed into chains of predicate blocks.
Cfg build_cfg(const ast::FunctionDef &fn);

/// Checks one entry, one exit and full reachability; returns an empty string when well formed.
std::string audit(const Cfg &cfg);

}
