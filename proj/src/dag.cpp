#include "cobra/dag.hpp"
#include "cobra/errors.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace cobra {

const char *op_name(Op op)
{
    switch (op) {
        case Op::Seq: return "seq";
        case Op::Cond: return "cond";
        case Op::Loop: return "loop";
        case Op::Block: return "block";
        case Op::BlackBox: return "blackbox";
        case Op::Assign: return "assign";
        case Op::Bind: return "bind";
        case Op::Prefetch: return "prefetch";
        case Op::Fold: return "fold";
        case Op::Tuple: return "tuple";
        case Op::Project: return "project";
        case Op::Guard: return "guard";
        case Op::Binary: return "binary";
        case Op::Unary: return "unary";
        case Op::Call: return "call";
        case Op::Field: return "field";
        case Op::Method: return "method";
        case Op::Attr: return "attr";
        case Op::Row: return "row";
        case Op::Var: return "var";
        case Op::Slot: return "slot";
        case Op::Const: return "const";
        case Op::Source: return "source";
        case Op::ExecuteQuery: return "executeQuery";
        case Op::Lookup: return "lookup";
        case Op::ListAdd: return "listAdd";
        case Op::MapPut: return "mapPut";
    }
    return "?";
}

namespace {

std::string join_names(const std::vector<std::string> &v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

}

std::string Payload::key(Op op) const
{
    switch (op) {
        case Op::Seq:
        case Op::Tuple:
        case Op::Guard:
        case Op::ListAdd:
        case Op::MapPut: return {};
        case Op::Cond: return stmt ? ast::print_header(*stmt) : std::string();
        case Op::Loop: return stmt ? ast::print_header(*stmt) : std::string();
        case Op::Block:
            if (!stmt) return "empty";
            return header ? "H " + ast::print_header(*stmt) : ast::print(*stmt);
        case Op::BlackBox: {
            std::string s;
            for (auto *st : stmts) s += ast::print(*st);
            return s;
        }
        case Op::Assign: return name;
        case Op::Bind: return join_names(names);
        case Op::Prefetch:
        case Op::Lookup: return name + "." + attr;
        case Op::Fold: return name + ";" + join_names(names);
        case Op::Project: return std::to_string(index) + "@" + std::to_string(ref);
        case Op::Binary:
        case Op::Unary:
        case Op::Call:
        case Op::Field:
        case Op::Method:
        case Op::Row:
        case Op::Var:
        case Op::Slot: return name;
        case Op::Attr: return name + "." + attr;
        case Op::Const: return std::to_string(static_cast<int>(value.kind())) + ":" + value.to_string();
        case Op::Source:
        case Op::ExecuteQuery: return to_cobra(*query);
    }
    return {};
}

Tree Tree::of(OrId id)
{
    Tree t;
    t.ref = id;
    return t;
}

Tree Tree::node(Op op, Payload p, std::vector<Tree> kids)
{
    Tree t;
    t.op = op;
    t.p = std::move(p);
    t.kids = std::move(kids);
    return t;
}

std::string Dag::full_key(Op op, const Payload &p, const std::vector<OrId> &kids) const
{
    std::string k = op_name(op);
    k += "|" + p.key(op) + "|";
    for (auto id : kids) k += std::to_string(id) + ",";
    return k;
}

std::vector<OrId> Dag::intern_kids(const Tree &t, const std::string &rule, bool initial)
{
    std::vector<OrId> kids;
    for (auto &k : t.kids) kids.push_back(intern(k, rule, initial));
    return kids;
}

OrId Dag::intern(const Tree &t, const std::string &rule, bool initial)
{
    if (t.is_ref()) return t.ref;
    auto kids = intern_kids(t, rule, initial);
    std::string key = full_key(t.op, t.p, kids);
    if (auto it = index_.find(key); it != index_.end()) return ands[static_cast<std::size_t>(it->second)].owner;
    OrNode o;
    o.id = static_cast<OrId>(ors.size());
    AndNode a;
    a.id = static_cast<AndId>(ands.size());
    a.op = t.op;
    a.p = t.p;
    a.kids = std::move(kids);
    a.owner = o.id;
    a.initial = initial;
    a.rule = rule;
    a.key = key;
    o.alts.push_back(a.id);
    index_[key] = a.id;
    ors.push_back(std::move(o));
    ands.push_back(std::move(a));
    return ors.back().id;
}

AndId Dag::find(const Tree &t) const
{
    if (t.is_ref()) return -1;
    std::vector<OrId> kids;
    for (auto &k : t.kids) {
        if (k.is_ref()) {
            kids.push_back(k.ref);
            continue;
        }
        AndId a = find(k);
        if (a < 0) return -1;
        kids.push_back(and_node(a).owner);
    }
    auto it = index_.find(full_key(t.op, t.p, kids));
    return it == index_.end() ? -1 : it->second;
}

AndId Dag::add_alternative(OrId target, const Tree &t, const std::string &rule)
{
    if (t.is_ref()) return -1;
    auto kids = intern_kids(t, rule, false);
    for (auto k : kids)
        if (k == target || reaches(k, target))
            throw CycleError("alternative for " + label(target) + " would make it its own descendant");
    std::string key = full_key(t.op, t.p, kids);
    auto &alts = ors[static_cast<std::size_t>(target)].alts;
    if (auto it = index_.find(key); it != index_.end()) {
        if (std::find(alts.begin(), alts.end(), it->second) == alts.end()) alts.push_back(it->second);
        return it->second;
    }
    AndNode a;
    a.id = static_cast<AndId>(ands.size());
    a.op = t.op;
    a.p = t.p;
    a.kids = std::move(kids);
    a.owner = target;
    a.rule = rule;
    a.key = key;
    index_[key] = a.id;
    alts.push_back(a.id);
    ands.push_back(std::move(a));
    return ands.back().id;
}

bool Dag::reaches(OrId from, OrId target) const
{
    std::vector<char> seen(ors.size(), 0);
    std::vector<OrId> stack{from};
    while (!stack.empty()) {
        OrId o = stack.back();
        stack.pop_back();
        if (o == target) return true;
        if (seen[static_cast<std::size_t>(o)]) continue;
        seen[static_cast<std::size_t>(o)] = 1;
        for (auto a : or_node(o).alts)
            for (auto k : and_node(a).kids) stack.push_back(k);
    }
    return false;
}

std::vector<OrId> Dag::reachable() const
{
    std::vector<OrId> order;
    if (root < 0) return order;
    std::vector<char> state(ors.size(), 0);
    std::function<void(OrId)> visit = [&](OrId o) {
        if (state[static_cast<std::size_t>(o)]) return;
        state[static_cast<std::size_t>(o)] = 1;
        for (auto a : or_node(o).alts) {
            const AndNode &n = and_node(a);
            for (auto k : n.kids) visit(k);
            if (n.op == Op::Project && n.p.ref >= 0) visit(n.p.ref);
        }
        order.push_back(o);
    };
    visit(root);
    return order;
}

std::size_t Dag::alternative_count() const
{
    std::size_t n = 0;
    for (auto &o : ors) n += o.alts.size();
    return n;
}

std::string Dag::label(OrId id) const
{
    const OrNode &o = or_node(id);
    if (!o.label.empty()) return o.label;
    return std::string(op_name(and_node(o.alts.front()).op)) + "#" + std::to_string(id);
}

std::string Dag::describe(AndId id) const
{
    const AndNode &a = and_node(id);
    std::string s = op_name(a.op);
    std::string k = a.p.key(a.op);
    if (a.op == Op::Block || a.op == Op::BlackBox) {
        std::replace(k.begin(), k.end(), '\n', ' ');
        while (k.find("  ") != std::string::npos) k.erase(k.find("  "), 1);
    }
    if (a.op == Op::Project) k = std::to_string(a.p.index) + " of " + label(a.p.ref);
    if (!k.empty()) s += "(" + k + ")";
    if (!a.kids.empty()) {
        s += " ->";
        for (auto c : a.kids) s += " " + label(c);
    }
    return s;
}

namespace {

std::string dot_escape(const std::string &s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

}

std::string Dag::dot() const
{
    std::string s = "digraph dag {\n  rankdir=TB;\n";
    auto order = reachable();
    std::sort(order.begin(), order.end());
    for (auto o : order) {
        s += "  o" + std::to_string(o) + " [shape=ellipse,label=\"" + dot_escape(label(o)) + "\"];\n";
        for (auto a : or_node(o).alts) {
            const AndNode &n = and_node(a);
            std::string text = op_name(n.op);
            std::string k = n.p.key(n.op);
            if (n.op != Op::Block && n.op != Op::BlackBox && !k.empty()) text += " " + k;
            if (n.op == Op::Block && n.p.stmt) text += " L" + std::to_string(n.p.stmt->pos.line);
            s += "  a" + std::to_string(a) + " [shape=box,label=\"" + dot_escape(text) + "\"];\n";
        }
    }
    std::set<AndId> emitted;
    for (auto o : order)
        for (auto a : or_node(o).alts) {
            s += "  o" + std::to_string(o) + " -> a" + std::to_string(a) + ";\n";
            if (!emitted.insert(a).second) continue;
            const AndNode &n = and_node(a);
            for (auto k : n.kids) s += "  a" + std::to_string(a) + " -> o" + std::to_string(k) + ";\n";
            if (n.op == Op::Project && n.p.ref >= 0)
                s += "  a" + std::to_string(a) + " -> o" + std::to_string(n.p.ref) + " [style=dashed];\n";
        }
    s += "}\n";
    return s;
}

std::string Dag::dump() const
{
    std::string s;
    auto order = reachable();
    std::sort(order.begin(), order.end());
    for (auto o : order) {
        s += "OR " + label(o) + " [#" + std::to_string(o) + "]\n";
        for (auto a : or_node(o).alts) {
            const AndNode &n = and_node(a);
            s += "  AND #" + std::to_string(a) + " " + describe(a);
            if (!n.rule.empty()) s += "  {" + n.rule + "}";
            s += "\n";
        }
    }
    return s;
}

std::string Dag::audit() const
{
    std::set<std::string> keys;
    for (auto &a : ands)
        if (!keys.insert(a.key).second) return "duplicate AND key " + a.key;
    // Kahn's algorithm over OR->OR edges.
    std::vector<int> indeg(ors.size(), 0);
    for (auto &o : ors)
        for (auto a : o.alts)
            for (auto k : and_node(a).kids) ++indeg[static_cast<std::size_t>(k)];
    std::vector<OrId> ready;
    for (std::size_t i = 0; i < ors.size(); ++i)
        if (!indeg[i]) ready.push_back(static_cast<OrId>(i));
    std::size_t seen = 0;
    while (!ready.empty()) {
        OrId o = ready.back();
        ready.pop_back();
        ++seen;
        for (auto a : or_node(o).alts)
            for (auto k : and_node(a).kids)
                if (--indeg[static_cast<std::size_t>(k)] == 0) ready.push_back(k);
    }
    if (seen != ors.size()) return "cycle detected";
    return {};
}

Dag init_dag(const RegionTree &tree)
{
    Dag dag;
    std::function<OrId(const Region *)> build = [&](const Region *r) -> OrId {
        Payload p;
        Op op = Op::Seq;
        std::vector<Tree> kids;
        switch (r->kind) {
            case Region::Kind::BasicBlock:
                op = Op::Block;
                p.stmt = r->stmt;
                p.header = r->header;
                break;
            case Region::Kind::BlackBox:
                op = Op::BlackBox;
                p.stmts = r->stmts;
                break;
            case Region::Kind::Sequential: op = Op::Seq; break;
            case Region::Kind::Conditional:
                op = Op::Cond;
                p.stmt = r->stmt;
                break;
            case Region::Kind::Loop:
                op = Op::Loop;
                p.stmt = r->stmt;
                break;
        }
        for (auto *c : r->children) kids.push_back(Tree::of(build(c)));
        OrId id = dag.intern(Tree::node(op, p, std::move(kids)), {}, true);
        OrNode &o = dag.ors[static_cast<std::size_t>(id)];
        o.regions.push_back(r);
        if (o.label.empty()) o.label = r->name();
        return id;
    };
    dag.root = build(tree.root);
    return dag;
}

}
