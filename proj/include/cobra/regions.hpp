#pragma once

#include "cobra/cfg.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace cobra {

/// Single-entry single-exit fragment of a function.
struct Region
{
    enum class Kind { BasicBlock, Sequential, Conditional, Loop, BlackBox };

    Kind kind = Kind::BasicBlock;
    int id = 0;
    Region *parent = nullptr;
    std::vector<Region *> children;
    int start_line = 0;
    int end_line = 0;

    /// CFG blocks covered; a leaf may cover only the instruction range [first, last) of its block.
    std::set<int> blocks;
    int entry_block = -1;
    int first = 0;
    int last = -1;

    /// Leaf: its statement (the header for loop/branch predicates).  Loop/Conditional: the compound statement.
    const ast::Stmt *stmt = nullptr;
    bool header = false;
    /// BlackBox: outermost statements it covers, in textual order.
    std::vector<const ast::Stmt *> stmts;
    /// BlackBox: structured regions found inside, kept out of the tree proper.
    std::vector<Region *> nested;

    bool is_leaf() const { return kind == Kind::BasicBlock || kind == Kind::BlackBox; }
    std::string name() const;
};

struct RegionTree
{
    const Cfg *cfg = nullptr;
    Region *root = nullptr;
    std::vector<std::unique_ptr<Region>> all;

    const Region *find(const std::string &name) const;
    std::vector<const Region *> leaves() const;
    /// One-line rendering, e.g. `S2-7 { B2; L3-7 { B3; S4-6 { B4; B5; B6 } } }`.
    std::string compact() const;
};

/// Structural analysis: reduces sequences, if-then(-else) and single-back-edge natural loops;
/// fragments matching no pattern become BlackBox leaves.  Basic blocks holding several source
/// statements become Sequential regions of per-statement leaves.
RegionTree build_region_tree(const Cfg &cfg);

struct Boundary
{
    std::set<std::string> input;
    std::set<std::string> output;
};

/// Live-variable analysis; variables live at function exit are the parameters.
class Liveness
{
public:
    explicit Liveness(const Cfg &cfg);

    const std::set<std::string> &live_in(int block) const { return in_[block]; }
    const std::set<std::string> &live_out(int block) const { return out_[block]; }
    /// Variables live just before instruction `index` of `block` (index == size means block end).
    std::set<std::string> live_at(int block, int index) const;
    Boundary boundary(const Region &r) const;

private:
    const Cfg &cfg_;
    std::vector<std::set<std::string>> in_;
    std::vector<std::set<std::string>> out_;
};

Boundary live_boundary(const Region &r, const Cfg &cfg);

}
