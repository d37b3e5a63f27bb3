#include "cobra/regions.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace cobra {

std::string Region::name() const
{
    static const char letters[] = {'B', 'S', 'C', 'L', 'X'};
    std::string n(1, letters[static_cast<int>(kind)]);
    n += std::to_string(start_line);
    if (end_line != start_line || kind != Kind::BasicBlock) n += "-" + std::to_string(end_line);
    return n;
}

const Region *RegionTree::find(const std::string &name) const
{
    for (auto &r : all)
        if (r->name() == name) return r.get();
    return nullptr;
}

std::vector<const Region *> RegionTree::leaves() const
{
    std::vector<const Region *> out;
    std::function<void(const Region *)> go = [&](const Region *r) {
        if (r->is_leaf()) {
            out.push_back(r);
            return;
        }
        for (auto *c : r->children) go(c);
    };
    if (root) go(root);
    return out;
}

std::string RegionTree::compact() const
{
    std::function<std::string(const Region *)> go = [&](const Region *r) {
        std::string s = r->name();
        if (r->is_leaf()) return s;
        s += " {";
        for (std::size_t i = 0; i < r->children.size(); ++i) s += (i ? "; " : " ") + go(r->children[i]);
        return s + " }";
    };
    return root ? go(root) : std::string();
}

namespace {

/// Abstract flow graph over regions, reduced step by step.
class Reducer
{
public:
    Reducer(const Cfg &cfg, RegionTree &tree) : cfg_(cfg), tree_(tree)
    {
        int n = static_cast<int>(cfg.blocks.size());
        nodes_.resize(n);
        for (int b = 0; b < n; ++b) {
            auto &node = nodes_[b];
            node.alive = true;
            node.succs = cfg.blocks[b].succs;
            if (b == cfg.entry || b == cfg.exit) continue;
            Region *r = make(Region::Kind::BasicBlock);
            r->blocks = {b};
            r->entry_block = b;
            node.region = r;
            for (auto &t : cfg.blocks[b].code)
                if (t.kind == Tac::Kind::Branch) ++branches_[t.stmt];
        }
        recompute_preds();
    }

    Region *run()
    {
        while (true) {
            if (done()) break;
            if (reduce_once()) continue;
            blackbox();
        }
        return nodes_[cfg_.blocks[cfg_.entry].succs[0]].region;
    }

private:
    struct Node
    {
        bool alive = false;
        Region *region = nullptr;
        bool reduced_seq = false;
        std::vector<int> succs;
        std::vector<int> preds;
    };

    const Cfg &cfg_;
    RegionTree &tree_;
    std::vector<Node> nodes_;
    /// Branch instructions per statement; more than one means a decomposed `&&`/`||` condition.
    std::map<const ast::Stmt *, int> branches_;

    Region *make(Region::Kind k)
    {
        tree_.all.push_back(std::make_unique<Region>());
        Region *r = tree_.all.back().get();
        r->kind = k;
        r->id = static_cast<int>(tree_.all.size()) - 1;
        return r;
    }

    void recompute_preds()
    {
        for (auto &n : nodes_) n.preds.clear();
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            if (!nodes_[i].alive) continue;
            for (int s : nodes_[i].succs)
                if (std::find(nodes_[s].preds.begin(), nodes_[s].preds.end(), i) == nodes_[s].preds.end())
                    nodes_[s].preds.push_back(i);
        }
    }

    bool done() const
    {
        const auto &e = nodes_[cfg_.entry];
        if (e.succs.size() != 1) return false;
        int body = e.succs[0];
        if (body == cfg_.exit) return true;
        int alive = 0;
        for (auto &n : nodes_) alive += n.alive;
        return alive == 3;
    }

    bool real(int n) const { return n != cfg_.entry && n != cfg_.exit; }

    std::vector<int> order() const
    {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].alive && real(i)) out.push_back(i);
        return out;
    }

    /// Replaces `members` with a single node carrying `r`; the first member keeps its identity.
    void collapse(const std::vector<int> &members, Region *r, std::vector<int> succs, bool seq = false)
    {
        int keep = members[0];
        for (int m : members) {
            for (int b : nodes_[m].region->blocks) r->blocks.insert(b);
            if (m != keep) {
                nodes_[m].alive = false;
                nodes_[m].succs.clear();
            }
        }
        r->entry_block = nodes_[keep].region->entry_block;
        for (auto *c : r->children) c->parent = r;
        nodes_[keep].region = r;
        nodes_[keep].succs = std::move(succs);
        nodes_[keep].reduced_seq = seq;
        recompute_preds();
    }

    bool reduce_once()
    {
        for (int n : order())
            if (try_seq(n) || try_if_else(n) || try_if_then(n) || try_loop(n)) return true;
        return false;
    }

    bool try_seq(int n)
    {
        auto &a = nodes_[n];
        if (a.succs.size() != 1) return false;
        int m = a.succs[0];
        if (!real(m) || m == n) return false;
        auto &b = nodes_[m];
        if (b.preds.size() != 1 || b.succs.size() > 1) return false;
        Region *r = make(Region::Kind::Sequential);
        for (int x : {n, m}) {
            if (nodes_[x].reduced_seq)
                for (auto *c : nodes_[x].region->children) r->children.push_back(c);
            else
                r->children.push_back(nodes_[x].region);
        }
        collapse({n, m}, r, b.succs, true);
        return true;
    }

    bool single_path(int t, int from, int to) const
    {
        return real(t) && nodes_[t].preds.size() == 1 && nodes_[t].preds[0] == from && nodes_[t].succs.size() == 1 &&
               nodes_[t].succs[0] == to;
    }

    const ast::Stmt *branch_stmt(int n) const
    {
        const Region *r = nodes_[n].region;
        if (r->kind != Region::Kind::BasicBlock) return nullptr;
        const auto &code = cfg_.blocks[r->entry_block].code;
        return code.empty() ? nullptr : code.back().stmt;
    }

    /// A conditional whose condition was split across predicate blocks has no structured template.
    bool simple_if(int n) const
    {
        const ast::Stmt *s = branch_stmt(n);
        return s && s->kind == ast::Stmt::Kind::If && branches_.at(s) == 1;
    }

    bool try_if_then(int n)
    {
        auto &p = nodes_[n];
        if (p.succs.size() != 2 || !simple_if(n)) return false;
        int t = p.succs[0], j = p.succs[1];
        if (t == j || !single_path(t, n, j)) return false;
        Region *r = make(Region::Kind::Conditional);
        r->stmt = branch_stmt(n);
        r->children = {p.region, nodes_[t].region};
        collapse({n, t}, r, {j});
        return true;
    }

    bool try_if_else(int n)
    {
        auto &p = nodes_[n];
        if (p.succs.size() != 2 || !simple_if(n)) return false;
        int t = p.succs[0], f = p.succs[1];
        if (t == f || !real(t) || !real(f) || nodes_[t].succs.size() != 1) return false;
        int j = nodes_[t].succs[0];
        if (!single_path(t, n, j) || !single_path(f, n, j)) return false;
        Region *r = make(Region::Kind::Conditional);
        r->stmt = branch_stmt(n);
        r->children = {p.region, nodes_[t].region, nodes_[f].region};
        collapse({n, t, f}, r, {j});
        return true;
    }

    bool try_loop(int n)
    {
        auto &h = nodes_[n];
        if (h.succs.size() != 2 || !branch_stmt(n) || !branch_stmt(n)->is_loop()) return false;
        int b = h.succs[0], e = h.succs[1];
        if (b == n || b == e || !single_path(b, n, n)) return false;
        Region *r = make(Region::Kind::Loop);
        r->stmt = branch_stmt(n);
        r->children = {h.region, nodes_[b].region};
        collapse({n, b}, r, {e});
        return true;
    }

    /// Dominator sets over the live abstract graph (forward from entry, or backward from exit).
    std::map<int, std::set<int>> dominators(bool post) const
    {
        std::vector<int> all;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].alive) all.push_back(i);
        int root = post ? cfg_.exit : cfg_.entry;
        std::map<int, std::set<int>> dom;
        std::set<int> full(all.begin(), all.end());
        for (int i : all) dom[i] = i == root ? std::set<int>{i} : full;
        bool changed = true;
        while (changed) {
            changed = false;
            for (int i : all) {
                if (i == root) continue;
                const auto &in = post ? nodes_[i].succs : nodes_[i].preds;
                std::set<int> meet;
                bool first = true;
                for (int p : in) {
                    if (!nodes_[p].alive) continue;
                    if (first) {
                        meet = dom[p];
                        first = false;
                    } else {
                        std::set<int> x;
                        std::set_intersection(meet.begin(), meet.end(), dom[p].begin(), dom[p].end(),
                                              std::inserter(x, x.begin()));
                        meet = std::move(x);
                    }
                }
                meet.insert(i);
                if (meet != dom[i]) {
                    dom[i] = std::move(meet);
                    changed = true;
                }
            }
        }
        return dom;
    }

    void blackbox()
    {
        auto dom = dominators(false);
        auto pdom = dominators(true);
        std::vector<int> cands;
        for (int n : order()) {
            if (nodes_[n].succs.size() < 2) continue;
            // A later predicate block of a split condition is folded into the box of the first one.
            const ast::Stmt *s = branch_stmt(n);
            bool later = s && std::any_of(nodes_[n].preds.begin(), nodes_[n].preds.end(),
                                          [&](int p) { return branch_stmt(p) == s; });
            if (!later) cands.push_back(n);
        }
        std::sort(cands.begin(), cands.end(), [&](int a, int b) { return dom[a].size() > dom[b].size(); });
        for (int n : cands) {
            int ipdom = -1;
            std::size_t best = 0;
            for (int d : pdom[n])
                if (d != n && pdom[d].size() >= best) {
                    best = pdom[d].size();
                    ipdom = d;
                }
            std::vector<int> frag;
            std::set<int> seen;
            std::function<void(int)> go = [&](int x) {
                if (x == ipdom || x == cfg_.exit || !seen.insert(x).second) return;
                frag.push_back(x);
                for (int s : nodes_[x].succs) go(s);
            };
            go(n);
            bool single_entry = std::all_of(frag.begin(), frag.end(), [&](int x) { return dom[x].count(n) > 0; });
            if (!single_entry) continue;
            make_blackbox(frag, {ipdom});
            return;
        }
        std::vector<int> frag = order();
        std::sort(frag.begin(), frag.end(),
                  [&](int a, int b) { return dom[a].size() < dom[b].size() || (dom[a].size() == dom[b].size() && a < b); });
        make_blackbox(frag, {cfg_.exit});
    }

    void make_blackbox(std::vector<int> frag, std::vector<int> succs)
    {
        int head = frag[0];
        Region *r = make(Region::Kind::BlackBox);
        for (int x : frag) r->nested.push_back(nodes_[x].region);
        std::vector<int> members = {head};
        for (int x : frag)
            if (x != head) members.push_back(x);
        collapse(members, r, std::move(succs));
    }
};

/// Turns BasicBlock regions into statement-level leaves and fills spans.
class Finisher
{
public:
    Finisher(const Cfg &cfg, RegionTree &tree) : cfg_(cfg), tree_(tree) {}

    void finish(Region *r, int context_line)
    {
        switch (r->kind) {
            case Region::Kind::BasicBlock: split(r, context_line); break;
            case Region::Kind::BlackBox: {
                for (auto *n : r->nested) {
                    finish(n, context_line);
                    n->parent = nullptr;
                }
                std::set<const ast::Stmt *> covered;
                for (int b : r->blocks)
                    for (auto &t : cfg_.blocks[b].code) covered.insert(t.stmt);
                for (auto *s : covered) {
                    auto it = cfg_.parent.find(s);
                    const ast::Stmt *p = it == cfg_.parent.end() ? nullptr : it->second;
                    bool outer = true;
                    for (; p; p = cfg_.parent.at(p))
                        if (covered.count(p)) outer = false;
                    if (outer) r->stmts.push_back(s);
                }
                std::sort(r->stmts.begin(), r->stmts.end(),
                          [](const ast::Stmt *a, const ast::Stmt *b) { return a->pos.line < b->pos.line; });
                span_of_stmts(r);
                break;
            }
            default: {
                int line = r->stmt ? r->stmt->pos.line : context_line;
                for (auto *c : r->children) finish(c, line);
                if (r->stmt) {
                    r->start_line = r->stmt->pos.line;
                    r->end_line = r->stmt->end_line;
                } else {
                    r->start_line = r->children.front()->start_line;
                    r->end_line = r->children.back()->end_line;
                    for (auto *c : r->children) {
                        r->start_line = std::min(r->start_line, c->start_line);
                        r->end_line = std::max(r->end_line, c->end_line);
                    }
                }
            }
        }
    }

private:
    const Cfg &cfg_;
    RegionTree &tree_;

    static int stmt_end(const Tac &t) { return t.role == Tac::Role::Simple ? t.stmt->end_line : t.stmt->pos.line; }

    void span_of_stmts(Region *r)
    {
        r->start_line = r->stmts.front()->pos.line;
        r->end_line = 0;
        for (auto *s : r->stmts) r->end_line = std::max(r->end_line, s->end_line);
    }

    void split(Region *r, int context_line)
    {
        int b = r->entry_block;
        const auto &code = cfg_.blocks[b].code;
        struct Group
        {
            int first, last;
        };
        std::vector<Group> groups;
        for (int i = 0; i < static_cast<int>(code.size()); ++i) {
            if (!groups.empty() && code[groups.back().first].stmt == code[i].stmt &&
                code[groups.back().first].role == code[i].role)
                groups.back().last = i + 1;
            else
                groups.push_back({i, i + 1});
        }
        auto fill = [&](Region *leaf, const Group &g) {
            const Tac &t = code[g.first];
            leaf->blocks = {b};
            leaf->entry_block = b;
            leaf->first = g.first;
            leaf->last = g.last;
            leaf->stmt = t.stmt;
            leaf->header = t.role != Tac::Role::Simple;
            leaf->start_line = t.stmt->pos.line;
            leaf->end_line = stmt_end(t);
        };
        if (groups.empty()) {
            r->first = 0;
            r->last = 0;
            r->start_line = r->end_line = context_line;
            return;
        }
        if (groups.size() == 1) {
            fill(r, groups[0]);
            return;
        }
        r->kind = Region::Kind::Sequential;
        for (auto &g : groups) {
            tree_.all.push_back(std::make_unique<Region>());
            Region *leaf = tree_.all.back().get();
            leaf->id = static_cast<int>(tree_.all.size()) - 1;
            leaf->parent = r;
            fill(leaf, g);
            r->children.push_back(leaf);
        }
        r->start_line = r->children.front()->start_line;
        r->end_line = r->children.back()->end_line;
    }
};

}

RegionTree build_region_tree(const Cfg &cfg)
{
    RegionTree tree;
    tree.cfg = &cfg;
    Reducer reducer(cfg, tree);
    tree.root = reducer.run();
    if (!tree.root) throw InternalError("region reduction produced no root");
    tree.root->parent = nullptr;
    Finisher(cfg, tree).finish(tree.root, cfg.fn ? cfg.fn->pos.line : 1);
    return tree;
}

Liveness::Liveness(const Cfg &cfg) : cfg_(cfg)
{
    std::size_t n = cfg.blocks.size();
    in_.assign(n, {});
    out_.assign(n, {});
    if (cfg.fn)
        for (auto &p : cfg.fn->params) in_[cfg.exit].insert(p.name);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t k = n; k-- > 0;) {
            int b = static_cast<int>(k);
            if (b == cfg.exit) continue;
            std::set<std::string> out;
            for (int s : cfg.blocks[b].succs) out.insert(in_[s].begin(), in_[s].end());
            std::set<std::string> in = out;
            for (auto it = cfg.blocks[b].code.rbegin(); it != cfg.blocks[b].code.rend(); ++it) {
                for (auto &d : it->defs()) in.erase(d);
                for (auto &u : it->uses()) in.insert(u);
            }
            if (out != out_[b] || in != in_[b]) {
                out_[b] = std::move(out);
                in_[b] = std::move(in);
                changed = true;
            }
        }
    }
}

std::set<std::string> Liveness::live_at(int block, int index) const
{
    const auto &code = cfg_.blocks[block].code;
    if (block == cfg_.exit) return in_[block];
    std::set<std::string> live = out_[block];
    for (int i = static_cast<int>(code.size()) - 1; i >= index; --i) {
        for (auto &d : code[i].defs()) live.erase(d);
        for (auto &u : code[i].uses()) live.insert(u);
    }
    return live;
}

Boundary Liveness::boundary(const Region &r) const
{
    Boundary out;
    bool partial_leaf = r.kind == Region::Kind::BasicBlock && r.last >= 0;
    out.input = live_at(r.entry_block, partial_leaf ? r.first : 0);
    if (partial_leaf && r.last < static_cast<int>(cfg_.blocks[r.entry_block].code.size())) {
        out.output = live_at(r.entry_block, r.last);
        return out;
    }
    for (int b : r.blocks)
        for (int s : cfg_.blocks[b].succs)
            if (!r.blocks.count(s)) out.output.insert(in_[s].begin(), in_[s].end());
    return out;
}

Boundary live_boundary(const Region &r, const Cfg &cfg) { return Liveness(cfg).boundary(r); }

}
