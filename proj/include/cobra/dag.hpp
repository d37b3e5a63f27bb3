#pragma once

#include "cobra/ast.hpp"
#include "cobra/regions.hpp"

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace cobra {

using OrId = int;
using AndId = int;

enum class Op {
    // region operators
    Seq, Cond, Loop, Block, BlackBox,
    // statement-level results of rewrites
    Assign, Bind, Prefetch,
    // F-IR expressions
    Fold, Tuple, Project, Guard, Binary, Unary, Call, Field, Method, Attr, Row, Var, Slot, Const,
    Source, ExecuteQuery, Lookup, ListAdd, MapPut
};

const char *op_name(Op op);

struct Payload
{
    /// Assign target, operator, function/method/field name, variable of Attr/Row/Var/Slot,
    /// tuple variable of Fold, relation of Prefetch/Lookup.
    std::string name;
    /// Attr column; Prefetch/Lookup key column.
    std::string attr;
    /// Fold accumulators; Bind targets.
    std::vector<std::string> names;
    int index = 0;
    /// Project: the fold OR whose tuple is projected (not a child edge).
    OrId ref = -1;
    Value value;
    QueryPtr query;
    /// Cond/Loop statement, or the statement of a Block leaf.
    const ast::Stmt *stmt = nullptr;
    bool header = false;
    /// BlackBox statements.
    std::vector<const ast::Stmt *> stmts;

    std::string key(Op op) const;
};

/// Description of an alternative to insert: either a reference to an existing OR or a fresh
/// operator node over sub-trees.
struct Tree
{
    OrId ref = -1;
    Op op = Op::Const;
    Payload p;
    std::vector<Tree> kids;

    bool is_ref() const { return ref >= 0; }
    static Tree of(OrId id);
    static Tree node(Op op, Payload p, std::vector<Tree> kids = {});
};

struct AndNode
{
    AndId id = -1;
    Op op = Op::Const;
    Payload p;
    std::vector<OrId> kids;
    OrId owner = -1;
    bool initial = false;
    std::string rule;
    std::string key;
};

struct OrNode
{
    OrId id = -1;
    std::vector<AndId> alts;
    /// Regions of the original program this node stands for.
    std::vector<const Region *> regions;
    std::string label;
};

class Dag
{
public:
    std::vector<OrNode> ors;
    std::vector<AndNode> ands;
    OrId root = -1;

    const OrNode &or_node(OrId id) const { return ors.at(static_cast<std::size_t>(id)); }
    const AndNode &and_node(AndId id) const { return ands.at(static_cast<std::size_t>(id)); }

    /// Returns the OR computing `t`, creating nodes only for parts not already present.
    OrId intern(const Tree &t, const std::string &rule = {}, bool initial = false);
    /// Adds `t` as an alternative of `target`; idempotent.  Returns -1 for a bare reference.
    /// Throws CycleError if `target` would become its own descendant.
    AndId add_alternative(OrId target, const Tree &t, const std::string &rule);
    AndId find(const Tree &t) const;

    bool reaches(OrId from, OrId target) const;
    /// ORs reachable from the root (following Project references too), children before parents.
    std::vector<OrId> reachable() const;
    std::size_t alternative_count() const;

    std::string label(OrId id) const;
    std::string describe(AndId id) const;
    std::string dot() const;
    std::string dump() const;
    /// Empty when the graph is acyclic and hash-consing holds.
    std::string audit() const;

private:
    std::unordered_map<std::string, AndId> index_;

    std::string full_key(Op op, const Payload &p, const std::vector<OrId> &kids) const;
    std::vector<OrId> intern_kids(const Tree &t, const std::string &rule, bool initial);
};

/// Initial DAG: one OR per region, one AND per region operator.
Dag init_dag(const RegionTree &tree);

}
