#include "cobra/fir.hpp"
#include "cobra/errors.hpp"
#include "cobra/evaluator.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace cobra {

namespace {

// ---------------------------------------------------------------------------------------------
// Tree construction helpers

Tree leaf(Op op, std::string name, std::string attr = {})
{
    Payload p;
    p.name = std::move(name);
    p.attr = std::move(attr);
    return Tree::node(op, p);
}

Tree konst(Value v)
{
    Payload p;
    p.value = std::move(v);
    return Tree::node(Op::Const, p);
}

Tree named(Op op, std::string name, std::vector<Tree> kids)
{
    Payload p;
    p.name = std::move(name);
    return Tree::node(op, p, std::move(kids));
}

Tree query_node(Op op, QueryPtr q)
{
    Payload p;
    p.query = std::move(q);
    return Tree::node(op, p);
}

Tree fold_node(std::string tvar, std::vector<std::string> names, Tree acc, Tree init, Tree src)
{
    Payload p;
    p.name = std::move(tvar);
    p.names = std::move(names);
    return Tree::node(Op::Fold, p, {std::move(acc), std::move(init), std::move(src)});
}

bool tree_any(const Tree &t, const std::function<bool(const Tree &)> &pred)
{
    if (t.is_ref()) return false;
    if (pred(t)) return true;
    for (auto &k : t.kids)
        if (tree_any(k, pred)) return true;
    return false;
}

const AndNode &first(const Dag &d, OrId o) { return d.and_node(d.or_node(o).alts.front()); }

// ---------------------------------------------------------------------------------------------
// Statement analysis

struct Decline
{};

void writes_of(const ast::Stmt &s, std::set<std::string> &out)
{
    using K = ast::Stmt::Kind;
    switch (s.kind) {
        case K::Assign: out.insert(s.target); break;
        case K::Call:
            if (s.target != "Console") out.insert(s.target);
            break;
        case K::ForQuery:
        case K::ForColl: out.insert(s.target); break;
        default: break;
    }
    for (auto &b : s.body) writes_of(*b, out);
    for (auto &b : s.else_body) writes_of(*b, out);
}

std::set<std::string> writes_of(const ast::Block &b)
{
    std::set<std::string> out;
    for (auto &s : b) writes_of(*s, out);
    return out;
}

void reads_of(const ast::Expr &e, std::set<std::string> &out)
{
    std::vector<std::string> v;
    ast::collect_reads(e, v);
    out.insert(v.begin(), v.end());
}

void query_reads(const QueryExpr &q, std::set<std::string> &out)
{
    std::set<ParamRef> ps;
    collect_params(q, ps);
    for (auto &p : ps) out.insert(p.var);
}

/// Reads not preceded by a definition in the same iteration.
void exposed(const ast::Block &b, std::set<std::string> defined, std::set<std::string> &out)
{
    using K = ast::Stmt::Kind;
    for (auto &sp : b) {
        const ast::Stmt &s = *sp;
        std::set<std::string> r;
        if (s.expr) reads_of(*s.expr, r);
        for (auto &a : s.args) reads_of(*a, r);
        if (s.query) query_reads(*s.query, r);
        if (s.kind == K::Call && s.target != "Console") r.insert(s.target);
        for (auto &x : r)
            if (!defined.count(x)) out.insert(x);
        switch (s.kind) {
            case K::Assign: defined.insert(s.target); break;
            case K::If:
                exposed(s.body, defined, out);
                exposed(s.else_body, defined, out);
                break;
            case K::ForQuery:
            case K::ForColl: {
                auto inner = defined;
                inner.insert(s.target);
                exposed(s.body, inner, out);
                break;
            }
            case K::While: exposed(s.body, defined, out); break;
            default: break;
        }
    }
}

/// Variables written in textual order of first write.
void write_order(const ast::Block &b, std::vector<std::string> &out)
{
    for (auto &s : b) {
        std::set<std::string> w;
        if (s->kind == ast::Stmt::Kind::Assign) w.insert(s->target);
        if (s->kind == ast::Stmt::Kind::Call && s->target != "Console") w.insert(s->target);
        for (auto &x : w)
            if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
        write_order(s->body, out);
        write_order(s->else_body, out);
    }
}

bool reads_slot(const Tree &t, const std::string &v)
{
    if (t.op == Op::Slot && !t.is_ref() && t.p.name == v) return true;
    for (auto &k : t.kids)
        if (reads_slot(k, v)) return true;
    return false;
}

bool has_blackbox(const Region *r)
{
    if (r->kind == Region::Kind::BlackBox) return true;
    for (auto *c : r->children)
        if (has_blackbox(c)) return true;
    return false;
}

/// Constructs the folding templates cannot express.
void check_body(const ast::Block &b, bool top)
{
    using K = ast::Stmt::Kind;
    for (auto &s : b) {
        switch (s->kind) {
            case K::While:
            case K::Return:
            case K::Prefetch:
            case K::ForColl: throw Decline{};
            case K::Call:
                if (s->target == "Console") throw Decline{};
                break;
            case K::If:
                if (!top || b.size() != 1 || s->has_else || !s->else_body.empty()) throw Decline{};
                check_body(s->body, false);
                break;
            case K::ForQuery: check_body(s->body, false); break;
            case K::Assign: break;
        }
    }
}

const ast::Block *find_block(const ast::Block &b, const ast::Stmt *target, std::size_t &index)
{
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].get() == target) {
            index = i;
            return &b;
        }
        if (auto *r = find_block(b[i]->body, target, index)) return r;
        if (auto *r = find_block(b[i]->else_body, target, index)) return r;
    }
    return nullptr;
}

/// Constant `v` holds on entry to `loop` when the nearest preceding write in the same block assigns
/// a literal or an empty collection.
std::optional<Value> reaching_constant(const ast::FunctionDef &fn, const ast::Stmt *loop, const std::string &v)
{
    std::size_t idx = 0;
    const ast::Block *b = find_block(fn.body, loop, idx);
    if (!b) return std::nullopt;
    for (std::size_t i = idx; i-- > 0;) {
        const ast::Stmt &s = *(*b)[i];
        std::set<std::string> w;
        writes_of(s, w);
        if (!w.count(v)) continue;
        if (s.kind != ast::Stmt::Kind::Assign || s.target != v) return std::nullopt;
        const ast::Expr &e = *s.expr;
        if (e.kind == ast::Expr::Kind::Lit) return e.value;
        if (e.kind == ast::Expr::Kind::Call && e.args.empty()) {
            if (e.name == "list") return Value::make_list();
            if (e.name == "map") return Value::make_map();
        }
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Symbolic execution of one loop iteration

class Sym
{
public:
    Sym(const Sym *parent, std::string tvar, std::set<std::string> accs, std::set<std::string> written,
        const std::set<std::string> *forbidden, std::set<std::string> loop_vars)
        : parent_(parent), tvar_(std::move(tvar)), accs_(std::move(accs)), written_(std::move(written)),
          forbidden_(forbidden), loop_vars_(std::move(loop_vars))
    {
        loop_vars_.insert(tvar_);
    }

    std::map<std::string, Tree> env;

    Tree read(const std::string &x) const
    {
        if (auto it = env.find(x); it != env.end()) return it->second;
        if (x == tvar_) return leaf(Op::Row, x);
        if (accs_.count(x)) return leaf(Op::Slot, x);
        if (written_.count(x)) throw Decline{};
        if (parent_) {
            Tree t = parent_->read(x);
            if (tree_any(t, [&](const Tree &n) { return n.op == Op::Slot && accs_.count(n.p.name); })) throw Decline{};
            return t;
        }
        return leaf(Op::Var, x);
    }

    void check_query(const QueryExpr &q) const
    {
        std::set<ParamRef> ps;
        collect_params(q, ps);
        for (auto &p : ps)
            if (!loop_vars_.count(p.var) && forbidden_->count(p.var)) throw Decline{};
    }

    Tree expr(const ast::Expr &e)
    {
        using K = ast::Expr::Kind;
        switch (e.kind) {
            case K::Lit: return konst(e.value);
            case K::Var: return read(e.name);
            case K::Field: {
                Tree t = expr(*e.args[0]);
                if (t.op == Op::Row) return leaf(Op::Attr, t.p.name, e.name);
                return named(Op::Field, e.name, {std::move(t)});
            }
            case K::Binary: return named(Op::Binary, e.name, {expr(*e.args[0]), expr(*e.args[1])});
            case K::Unary: return named(Op::Unary, e.name, {expr(*e.args[0])});
            case K::Call: {
                std::vector<Tree> args;
                for (auto &a : e.args) args.push_back(expr(*a));
                return named(Op::Call, e.name, std::move(args));
            }
            case K::Method: {
                if (e.name != "get" && e.name != "size" && e.name != "contains") throw Decline{};
                std::vector<Tree> args;
                for (auto &a : e.args) args.push_back(expr(*a));
                return named(Op::Method, e.name, std::move(args));
            }
            case K::ExecQuery:
                check_query(*e.query);
                return query_node(Op::ExecuteQuery, e.query);
            case K::CacheLookup: {
                Payload p;
                p.name = e.name;
                p.attr = e.column;
                return Tree::node(Op::Lookup, p, {expr(*e.args[0])});
            }
        }
        throw Decline{};
    }

    void block(const ast::Block &b)
    {
        for (std::size_t i = 0; i < b.size(); ++i) stmt(*b[i], b, i);
    }

private:
    const Sym *parent_;
    std::string tvar_;
    std::set<std::string> accs_;
    std::set<std::string> written_;
    const std::set<std::string> *forbidden_;
    std::set<std::string> loop_vars_;

    void stmt(const ast::Stmt &s, const ast::Block &siblings, std::size_t index)
    {
        using K = ast::Stmt::Kind;
        switch (s.kind) {
            case K::Assign: env[s.target] = expr(*s.expr); return;
            case K::Call: {
                if (s.target == "Console") throw Decline{};
                Tree recv = read(s.target);
                if (s.name == "add" && s.args.size() == 1) {
                    env[s.target] = Tree::node(Op::ListAdd, {}, {std::move(recv), expr(*s.args[0])});
                    return;
                }
                if (s.name == "put" && s.args.size() == 2) {
                    env[s.target] =
                        Tree::node(Op::MapPut, {}, {std::move(recv), expr(*s.args[0]), expr(*s.args[1])});
                    return;
                }
                throw Decline{};
            }
            case K::ForQuery: nested(s, siblings, index); return;
            default: throw Decline{};
        }
    }

    /// A cursor loop inside the body becomes an inner fold over its single accumulator.
    void nested(const ast::Stmt &s, const ast::Block &siblings, std::size_t index)
    {
        std::set<std::string> w2 = writes_of(s.body);
        std::set<std::string> outside;
        for (std::size_t i = 0; i < siblings.size(); ++i) {
            if (i == index) continue;
            std::set<std::string> r;
            exposed({siblings[i]}, {}, r);
            outside.insert(r.begin(), r.end());
        }
        std::set<std::string> carried;
        exposed(s.body, {s.target}, carried);
        std::set<std::string> accs;
        for (auto &x : w2)
            if (accs_.count(x) || outside.count(x) || carried.count(x)) accs.insert(x);
        accs.erase(s.target);
        if (accs.size() != 1) throw Decline{};
        const std::string v = *accs.begin();
        check_query(*s.query);
        Sym inner(this, s.target, accs, w2, forbidden_, loop_vars_);
        inner.block(s.body);
        auto it = inner.env.find(v);
        if (it == inner.env.end()) throw Decline{};
        for (auto &[x, t] : inner.env)
            if (x != v && outside.count(x)) throw Decline{};
        env[v] = fold_node(s.target, {v}, it->second, read(v), query_node(Op::Source, s.query));
    }
};

// ---------------------------------------------------------------------------------------------
// Scalar conversion between F-IR and query expressions

bool sql_binary(const std::string &op)
{
    static const std::set<std::string> ops{"+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"};
    return ops.count(op) > 0;
}

std::optional<ScalarPtr> to_scalar(const Dag &d, OrId o, const std::string &tvar)
{
    const AndNode &a = first(d, o);
    switch (a.op) {
        case Op::Attr:
            return a.p.name == tvar ? ScalarExpr::column(a.p.attr) : ScalarExpr::param(a.p.name, a.p.attr);
        case Op::Var: return ScalarExpr::param(a.p.name);
        case Op::Const:
            if (a.p.value.is_list() || a.p.value.is_map() || a.p.value.is_row()) return std::nullopt;
            return ScalarExpr::constant_of(a.p.value);
        case Op::Binary: {
            if (!sql_binary(a.p.name)) return std::nullopt;
            auto l = to_scalar(d, a.kids[0], tvar), r = to_scalar(d, a.kids[1], tvar);
            if (!l || !r) return std::nullopt;
            return ScalarExpr::binary(a.p.name, *l, *r);
        }
        case Op::Unary: {
            if (a.p.name != "-" && a.p.name != "!") return std::nullopt;
            auto x = to_scalar(d, a.kids[0], tvar);
            if (!x) return std::nullopt;
            return ScalarExpr::unary(a.p.name, *x);
        }
        case Op::Call: {
            if (!sql_function(a.p.name)) return std::nullopt;
            std::vector<ScalarPtr> args;
            for (auto k : a.kids) {
                auto x = to_scalar(d, k, tvar);
                if (!x) return std::nullopt;
                args.push_back(*x);
            }
            return ScalarExpr::call(a.p.name, args);
        }
        default: return std::nullopt;
    }
}

Tree from_scalar(const ScalarExpr &e, const std::string &tvar)
{
    switch (e.kind) {
        case ScalarExpr::Kind::Column: return leaf(Op::Attr, tvar, e.name);
        case ScalarExpr::Kind::Param: return e.field.empty() ? leaf(Op::Var, e.name) : leaf(Op::Attr, e.name, e.field);
        case ScalarExpr::Kind::Const: return konst(e.constant);
        case ScalarExpr::Kind::Binary:
            return named(Op::Binary, e.name, {from_scalar(*e.args[0], tvar), from_scalar(*e.args[1], tvar)});
        case ScalarExpr::Kind::Unary: return named(Op::Unary, e.name, {from_scalar(*e.args[0], tvar)});
        case ScalarExpr::Kind::Call: {
            std::vector<Tree> args;
            for (auto &a : e.args) args.push_back(from_scalar(*a, tvar));
            return named(Op::Call, e.name, std::move(args));
        }
    }
    return konst(Value());
}

bool has_columns(const ScalarExpr &e)
{
    std::set<std::string> c;
    collect_columns(e, c);
    return !c.empty();
}

// ---------------------------------------------------------------------------------------------
// DAG traversal over first alternatives (the expression form of each node)

/// Visits the expression rooted at `o`; `fn` returns false to skip a node's children.
void visit(const Dag &d, OrId o, const std::function<bool(OrId, const AndNode &)> &fn)
{
    const AndNode &a = first(d, o);
    if (!fn(o, a)) return;
    for (auto k : a.kids) visit(d, k, fn);
}

bool any_node(const Dag &d, OrId o, const std::function<bool(const AndNode &)> &pred, bool into_folds = true)
{
    bool found = false;
    visit(d, o, [&](OrId, const AndNode &a) {
        if (found) return false;
        if (pred(a)) {
            found = true;
            return false;
        }
        return into_folds || a.op != Op::Fold;
    });
    return found;
}

Tree rebuild(const Dag &d, OrId o, const std::function<std::optional<Tree>(OrId, const AndNode &)> &f)
{
    const AndNode &a = first(d, o);
    if (auto r = f(o, a)) return *r;
    std::vector<Tree> kids;
    bool changed = false;
    for (auto k : a.kids) {
        Tree t = rebuild(d, k, f);
        if (!t.is_ref() || t.ref != k) changed = true;
        kids.push_back(std::move(t));
    }
    if (!changed) return Tree::of(o);
    return Tree::node(a.op, a.p, std::move(kids));
}

struct FoldView
{
    const AndNode *node = nullptr;
    OrId acc = -1, init = -1, src = -1;
    QueryPtr query;
    std::string tvar;
    std::vector<std::string> names;
};

std::optional<FoldView> fold_view(const Dag &d, const AndNode &a)
{
    if (a.op != Op::Fold || a.kids.size() != 3) return std::nullopt;
    const AndNode &s = first(d, a.kids[2]);
    if (s.op != Op::Source) return std::nullopt;
    FoldView v;
    v.node = &a;
    v.acc = a.kids[0];
    v.init = a.kids[1];
    v.src = a.kids[2];
    v.query = s.p.query;
    v.tvar = a.p.name;
    v.names = a.p.names;
    return v;
}

std::optional<std::vector<std::string>> columns_of(const QueryExpr &q, const FirContext &ctx)
{
    if (!ctx.catalog) return std::nullopt;
    try {
        auto cols = output_columns(q, [&](const std::string &rel) { return ctx.catalog->columns_of(rel); });
        if (cols.empty()) return std::nullopt;
        return cols;
    } catch (const Error &) {
        return std::nullopt;
    }
}

bool uses_row(const Dag &d, OrId o, const std::string &tvar)
{
    return any_node(d, o, [&](const AndNode &a) { return a.op == Op::Row && a.p.name == tvar; });
}

using Results = std::vector<std::pair<OrId, Tree>>;

// ---------------------------------------------------------------------------------------------
// Rules

/// T1: a fold that only collects the rows of its source is the query result itself.
Results rule_t1(const Dag &d, AndId id, const FirContext &)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f || f->names.size() != 1 || is_scalar_aggregate(*f->query)) return {};
    const AndNode &acc = first(d, f->acc);
    if (acc.op != Op::ListAdd) return {};
    const AndNode &list = first(d, acc.kids[0]), &elem = first(d, acc.kids[1]);
    if (list.op != Op::Slot || list.p.name != f->names[0] || elem.op != Op::Row || elem.p.name != f->tvar) return {};
    const AndNode &init = first(d, f->init);
    if (init.op != Op::Const || !init.p.value.is_list() || !init.p.value.as_list().empty()) return {};
    return {{d.and_node(id).owner, query_node(Op::ExecuteQuery, f->query)}};
}

/// T2: a guard over tuple attributes becomes a selection on the source.
Results rule_t2(const Dag &d, AndId id, const FirContext &)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f || f->names.size() != 1) return {};
    const AndNode &acc = first(d, f->acc);
    if (acc.op != Op::Guard) return {};
    auto pred = to_scalar(d, acc.kids[0], f->tvar);
    if (!pred) return {};
    return {{d.and_node(id).owner,
             fold_node(f->tvar, f->names, Tree::of(acc.kids[1]), Tree::of(f->init),
                       query_node(Op::Source, QueryExpr::select(*pred, f->query)))}};
}

/// N2: the inverse of T2.
Results rule_n2(const Dag &d, AndId id, const FirContext &)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f || f->names.size() != 1 || f->query->kind != QueryExpr::Kind::Select) return {};
    Tree guard = Tree::node(Op::Guard, {}, {from_scalar(*f->query->pred, f->tvar), Tree::of(f->acc)});
    return {{d.and_node(id).owner, fold_node(f->tvar, f->names, std::move(guard), Tree::of(f->init),
                                             query_node(Op::Source, f->query->kids[0]))}};
}

/// T3: the outermost SQL-expressible computation over tuple attributes moves into a projection.
Results rule_t3(const Dag &d, AndId id, const FirContext &ctx)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f || uses_row(d, f->acc, f->tvar)) return {};
    OrId target = -1;
    ScalarPtr expr;
    visit(d, f->acc, [&](OrId o, const AndNode &a) {
        if (target >= 0 || a.op == Op::Fold) return false;
        if (a.op == Op::Binary || a.op == Op::Unary || a.op == Op::Call) {
            auto s = to_scalar(d, o, f->tvar);
            if (s && has_columns(**s)) {
                target = o;
                expr = *s;
                return false;
            }
        }
        return true;
    });
    if (target < 0) return {};
    auto cols = columns_of(*f->query, ctx);
    if (!cols) return {};
    std::string alias;
    for (int n = 1;; ++n) {
        alias = "h_" + std::to_string(n);
        if (std::find(cols->begin(), cols->end(), alias) == cols->end()) break;
    }
    std::vector<ProjectItem> items;
    for (auto &c : *cols) items.push_back(ProjectItem{ScalarExpr::column(c), {}});
    items.push_back(ProjectItem{expr, alias});
    Tree acc = rebuild(d, f->acc, [&](OrId o, const AndNode &a) -> std::optional<Tree> {
        if (o == target) return leaf(Op::Attr, f->tvar, alias);
        if (a.op == Op::Fold) return Tree::of(o);
        return std::nullopt;
    });
    return {{d.and_node(id).owner,
             fold_node(f->tvar, f->names, std::move(acc), Tree::of(f->init),
                       query_node(Op::Source, QueryExpr::project(items, f->query)))}};
}

bool disjoint(const std::vector<std::string> &a, const std::vector<std::string> &b)
{
    for (auto &x : a)
        if (std::find(b.begin(), b.end(), x) != b.end()) return false;
    return true;
}

Tree rename_tvar(const Dag &d, OrId o, const std::string &from, const std::string &to)
{
    return rebuild(d, o, [&](OrId, const AndNode &a) -> std::optional<Tree> {
        if (a.op == Op::Attr && a.p.name == from) return leaf(Op::Attr, to, a.p.attr);
        return std::nullopt;
    });
}

/// T4 (nested form): an inner fold over a selection correlated with the outer tuple becomes a join.
Results t4_nested(const Dag &d, const FoldView &f, const FirContext &ctx, OrId owner)
{
    if (f.names.size() != 1) return {};
    auto g = fold_view(d, first(d, f.acc));
    if (!g || g->names != f.names) return {};
    const AndNode &ginit = first(d, g->init);
    if (ginit.op != Op::Slot || ginit.p.name != f.names[0]) return {};
    const QueryExpr &q2 = *g->query;
    if (q2.kind != QueryExpr::Kind::Select) return {};
    std::set<ParamRef> inner_params, pred_params;
    collect_params(*q2.kids[0], inner_params);
    collect_params(*q2.pred, pred_params);
    if (!inner_params.empty()) return {};
    for (auto &p : pred_params)
        if (p.var != f.tvar || p.field.empty()) return {};
    if (uses_row(d, g->acc, g->tvar) || uses_row(d, g->acc, f.tvar)) return {};
    auto c1 = columns_of(*f.query, ctx), c2 = columns_of(*q2.kids[0], ctx);
    if (!c1 || !c2 || !disjoint(*c1, *c2)) return {};
    ScalarPtr pred = substitute_params(q2.pred, [&](const ScalarExpr &p) { return ScalarExpr::column(p.field); });
    return {{owner, fold_node(f.tvar, f.names, rename_tvar(d, g->acc, g->tvar, f.tvar), Tree::of(f.init),
                              query_node(Op::Source, QueryExpr::join(pred, f.query, q2.kids[0])))}};
}

/// Matches `select(A == t.B, scan(R))`; returns (R, A, B).
std::optional<std::tuple<std::string, std::string, ScalarPtr>> point_query(const QueryExpr &q)
{
    if (q.kind != QueryExpr::Kind::Select || q.kids[0]->kind != QueryExpr::Kind::Scan) return std::nullopt;
    const ScalarExpr &p = *q.pred;
    if (p.kind != ScalarExpr::Kind::Binary || p.name != "==") return std::nullopt;
    for (int side = 0; side < 2; ++side) {
        const auto &c = p.args[side], &k = p.args[1 - side];
        if (c->kind == ScalarExpr::Kind::Column && !has_columns(*k)) return std::make_tuple(q.kids[0]->relation, c->name, k);
    }
    return std::nullopt;
}

/// T4 (lookup form): `first(executeQuery(select(A == t.B, scan(R)))).col` where t.B references the
/// key A of R becomes a join, each outer row matching exactly one row of R.
Results t4_lookup(const Dag &d, const FoldView &f, const FirContext &ctx, OrId owner)
{
    if (!ctx.catalog || uses_row(d, f.acc, f.tvar)) return {};
    auto c1 = columns_of(*f.query, ctx);
    if (!c1) return {};
    Results out;
    std::set<OrId> tried;
    visit(d, f.acc, [&](OrId, const AndNode &a) {
        if (!out.empty() || a.op == Op::Fold) return false;
        if (a.op != Op::Field) return true;
        OrId x = a.kids[0];
        const AndNode &call = first(d, x);
        if (call.op != Op::Call || call.p.name != "first" || call.kids.size() != 1 || !tried.insert(x).second) return true;
        const AndNode &eq = first(d, call.kids[0]);
        if (eq.op != Op::ExecuteQuery) return true;
        auto pq = point_query(*eq.p.query);
        if (!pq) return true;
        auto &[rel, key_col, key] = *pq;
        if (key->kind != ScalarExpr::Kind::Param || key->name != f.tvar || key->field.empty()) return true;
        auto rit = ctx.catalog->relations.find(rel);
        if (rit == ctx.catalog->relations.end() || rit->second.key != key_col) return true;
        bool fk = false;
        for (auto &base : base_relations(*f.query)) {
            auto bit = ctx.catalog->relations.find(base);
            if (bit == ctx.catalog->relations.end()) continue;
            auto fit = bit->second.foreign_keys.find(key->field);
            if (fit != bit->second.foreign_keys.end() && fit->second == rel + "." + key_col) fk = true;
        }
        if (!fk) return true;
        auto c2 = columns_of(*QueryExpr::scan(rel), ctx);
        if (!c2 || !disjoint(*c1, *c2)) return true;
        // Every use of the looked-up row must be a field access.
        bool only_fields = true;
        visit(d, f.acc, [&](OrId, const AndNode &n) {
            for (auto k : n.kids)
                if (k == x && n.op != Op::Field) only_fields = false;
            return true;
        });
        if (!only_fields) return true;
        Tree acc = rebuild(d, f.acc, [&](OrId, const AndNode &n) -> std::optional<Tree> {
            if (n.op == Op::Field && n.kids[0] == x) return leaf(Op::Attr, f.tvar, n.p.name);
            return std::nullopt;
        });
        auto pred = ScalarExpr::binary("==", ScalarExpr::column(key->field), ScalarExpr::column(key_col));
        out.push_back({owner, fold_node(f.tvar, f.names, std::move(acc), Tree::of(f.init),
                                        query_node(Op::Source, QueryExpr::join(pred, f.query, QueryExpr::scan(rel))))});
        return false;
    });
    return out;
}

Results rule_t4(const Dag &d, AndId id, const FirContext &ctx)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f) return {};
    OrId owner = d.and_node(id).owner;
    Results out = t4_nested(d, *f, ctx, owner);
    for (auto &r : t4_lookup(d, *f, ctx, owner)) out.push_back(std::move(r));
    return out;
}

QueryPtr strip_order(const QueryPtr &q)
{
    QueryPtr cur = q;
    for (;;) {
        if (cur->kind == QueryExpr::Kind::OrderBy) {
            cur = cur->kids[0];
            continue;
        }
        if (cur->kind == QueryExpr::Kind::Project) {
            bool plain = std::all_of(cur->items.begin(), cur->items.end(), [](const ProjectItem &it) {
                return it.expr->kind == ScalarExpr::Kind::Column && it.alias.empty();
            });
            if (plain) {
                cur = cur->kids[0];
                continue;
            }
        }
        return cur;
    }
}

/// T5 core: accumulator `acc` over slot `slot` with initial value `init` folded over `q`.
std::optional<Tree> aggregate_of(const Dag &d, OrId acc, OrId init, const std::string &slot, const std::string &tvar,
                                 const QueryPtr &q)
{
    const AndNode &a = first(d, acc);
    auto is_slot = [&](OrId o) {
        const AndNode &n = first(d, o);
        return n.op == Op::Slot && n.p.name == slot;
    };
    std::string fn;
    OrId operand = -1;
    if (a.op == Op::Binary && a.p.name == "+") {
        fn = "sum";
        if (is_slot(a.kids[0]))
            operand = a.kids[1];
        else if (is_slot(a.kids[1]))
            operand = a.kids[0];
    } else if (a.op == Op::Call && (a.p.name == "max" || a.p.name == "min") && a.kids.size() == 2) {
        fn = a.p.name;
        if (is_slot(a.kids[0]))
            operand = a.kids[1];
        else if (is_slot(a.kids[1]))
            operand = a.kids[0];
    }
    if (operand < 0) return std::nullopt;
    QueryPtr base = strip_order(q);
    QueryPtr agg;
    const AndNode &op = first(d, operand);
    if (fn == "sum" && op.op == Op::Const && op.p.value.is_int() && op.p.value.as_int() == 1) {
        agg = QueryExpr::aggregate("count", "*", {}, base);
    } else {
        auto s = to_scalar(d, operand, tvar);
        if (!s || !has_columns(**s)) return std::nullopt;
        if ((*s)->kind == ScalarExpr::Kind::Column)
            agg = QueryExpr::aggregate(fn, (*s)->name, {}, base);
        else
            agg = QueryExpr::aggregate(fn, "h_1", {}, QueryExpr::project({ProjectItem{*s, "h_1"}}, base));
    }
    Tree result = query_node(Op::ExecuteQuery, agg);
    const AndNode &i = first(d, init);
    bool identity = fn == "max" || fn == "min" ? (i.op == Op::Const && i.p.value.is_null())
                                               : (i.op == Op::Const && i.p.value.is_int() && i.p.value.as_int() == 0);
    if (identity) return result;
    if (fn == "max" || fn == "min") return named(Op::Call, fn, {Tree::of(init), std::move(result)});
    return named(Op::Binary, "+", {Tree::of(init), std::move(result)});
}

/// T5: folds with an aggregate-shaped accumulator become aggregate queries.  Also applies to a
/// projection of a tuple fold whose component reads no other accumulator.
Results rule_t5(const Dag &d, AndId id, const FirContext &)
{
    const AndNode &a = d.and_node(id);
    if (a.op == Op::Fold) {
        auto f = fold_view(d, a);
        if (!f || f->names.size() != 1) return {};
        auto t = aggregate_of(d, f->acc, f->init, f->names[0], f->tvar, f->query);
        if (!t) return {};
        return {{a.owner, std::move(*t)}};
    }
    if (a.op != Op::Project || a.p.ref < 0) return {};
    auto f = fold_view(d, first(d, a.p.ref));
    if (!f || f->names.size() < 2) return {};
    const AndNode &tuple = first(d, f->acc), &inits = first(d, f->init);
    if (tuple.op != Op::Tuple || inits.op != Op::Tuple) return {};
    auto i = static_cast<std::size_t>(a.p.index);
    if (i >= tuple.kids.size() || i >= inits.kids.size()) return {};
    const std::string &slot = f->names[i];
    if (any_node(d, tuple.kids[i], [&](const AndNode &n) { return n.op == Op::Slot && n.p.name != slot; })) return {};
    auto t = aggregate_of(d, tuple.kids[i], inits.kids[i], slot, f->tvar, f->query);
    if (!t) return {};
    return {{a.owner, std::move(*t)}};
}

/// N1: per-row point queries on a relation become lookups in a prefetched copy of it.
Results rule_n1(const Dag &d, AndId id, const FirContext &)
{
    auto f = fold_view(d, d.and_node(id));
    if (!f) return {};
    std::string rel, col;
    std::map<OrId, Tree> replace;
    visit(d, f->acc, [&](OrId o, const AndNode &a) {
        if (a.op != Op::ExecuteQuery) return true;
        auto pq = point_query(*a.p.query);
        if (!pq) return true;
        auto &[r, c, key] = *pq;
        if (rel.empty()) {
            rel = r;
            col = c;
        }
        if (r != rel || c != col) return true;
        Payload p;
        p.name = r;
        p.attr = c;
        replace.emplace(o, Tree::node(Op::Lookup, p, {from_scalar(*key, f->tvar)}));
        return true;
    });
    if (replace.empty()) return {};
    Tree acc = rebuild(d, f->acc, [&](OrId o, const AndNode &) -> std::optional<Tree> {
        if (auto it = replace.find(o); it != replace.end()) return it->second;
        return std::nullopt;
    });
    Payload pre;
    pre.name = rel;
    pre.attr = col;
    Tree fold = fold_node(f->tvar, f->names, std::move(acc), Tree::of(f->init), Tree::of(f->src));
    return {{d.and_node(id).owner, Tree::node(Op::Seq, {}, {Tree::node(Op::Prefetch, pre), std::move(fold)})}};
}

std::string tree_key(const Tree &t)
{
    if (t.is_ref()) return "#" + std::to_string(t.ref);
    std::string s = std::string(op_name(t.op)) + "{" + t.p.key(t.op) + "}(";
    for (auto &k : t.kids) s += tree_key(k) + ",";
    return s + ")";
}

}  // namespace

// ---------------------------------------------------------------------------------------------

std::optional<Tree> loop_to_fold(Dag &dag, OrId loop, const FirContext &ctx)
{
    const OrNode &o = dag.or_node(loop);
    if (o.regions.empty() || !ctx.fn || !ctx.live) return std::nullopt;
    const Region *r = o.regions.front();
    if (r->kind != Region::Kind::Loop || !r->stmt || r->stmt->kind != ast::Stmt::Kind::ForQuery) return std::nullopt;
    const ast::Stmt &stmt = *r->stmt;
    const std::string &tvar = stmt.target;
    try {
        for (auto *reg : o.regions)
            if (has_blackbox(reg)) return std::nullopt;
        check_body(stmt.body, true);

        std::set<std::string> written = writes_of(stmt.body);
        std::set<std::string> live_out;
        for (auto *reg : o.regions) {
            auto b = ctx.live->boundary(*reg);
            live_out.insert(b.output.begin(), b.output.end());
        }
        if (live_out.count(tvar)) return std::nullopt;
        std::set<std::string> carried;
        exposed(stmt.body, {tvar}, carried);

        std::vector<std::string> order, accs;
        write_order(stmt.body, order);
        for (auto &v : order)
            if (written.count(v) && (live_out.count(v) || carried.count(v))) accs.push_back(v);
        if (accs.empty()) return std::nullopt;
        if (ctx.legacy_fold_precondition && accs.size() > 1) return std::nullopt;

        std::set<std::string> forbidden = written;
        forbidden.erase(tvar);
        std::set<std::string> acc_set(accs.begin(), accs.end());
        Sym sym(nullptr, tvar, acc_set, written, &forbidden, {});

        std::vector<Tree> updates;
        const ast::Block &body = stmt.body;
        if (body.size() == 1 && body[0]->kind == ast::Stmt::Kind::If) {
            if (accs.size() != 1) return std::nullopt;
            Tree pred = sym.expr(*body[0]->expr);
            sym.block(body[0]->body);
            auto it = sym.env.find(accs[0]);
            if (it == sym.env.end()) return std::nullopt;
            updates.push_back(Tree::node(Op::Guard, {}, {std::move(pred), it->second}));
        } else {
            sym.block(body);
            for (auto &v : accs) {
                auto it = sym.env.find(v);
                if (it == sym.env.end()) return std::nullopt;
                updates.push_back(it->second);
            }
        }

        // A value carried into the next iteration must be an accumulation of itself.
        for (std::size_t i = 0; i < accs.size(); ++i)
            if (carried.count(accs[i]) && !reads_slot(updates[i], accs[i])) return std::nullopt;

        std::vector<Tree> inits;
        for (auto &v : accs) {
            std::optional<Value> c;
            if (o.regions.size() == 1) c = reaching_constant(*ctx.fn, &stmt, v);
            inits.push_back(c ? konst(*c) : leaf(Op::Var, v));
        }
        Tree src = query_node(Op::Source, stmt.query);

        if (accs.size() == 1) {
            Payload p;
            p.name = accs[0];
            return Tree::node(Op::Assign, p, {fold_node(tvar, accs, std::move(updates[0]), std::move(inits[0]), std::move(src))});
        }
        Tree fold = fold_node(tvar, accs, Tree::node(Op::Tuple, {}, std::move(updates)),
                              Tree::node(Op::Tuple, {}, std::move(inits)), std::move(src));
        OrId fold_or = dag.intern(fold, "loopToFold");
        Payload bind;
        bind.names = accs;
        std::vector<Tree> seq{Tree::node(Op::Bind, bind, {Tree::of(fold_or)})};
        for (std::size_t i = 0; i < accs.size(); ++i) {
            Payload proj;
            proj.index = static_cast<int>(i);
            proj.ref = fold_or;
            Payload assign;
            assign.name = accs[i];
            seq.push_back(Tree::node(Op::Assign, assign, {Tree::node(Op::Project, proj)}));
        }
        return Tree::node(Op::Seq, {}, std::move(seq));
    } catch (const Decline &) {
        return std::nullopt;
    }
}

std::vector<RuleEvent> to_fir(Dag &dag, const FirContext &ctx)
{
    std::vector<RuleEvent> events;
    std::size_t n = dag.ors.size();
    for (std::size_t i = 0; i < n; ++i) {
        OrId o = static_cast<OrId>(i);
        bool is_loop = false;
        for (auto a : dag.or_node(o).alts)
            if (dag.and_node(a).op == Op::Loop && dag.and_node(a).initial) is_loop = true;
        if (!is_loop) continue;
        auto t = loop_to_fold(dag, o, ctx);
        if (!t) continue;
        std::size_t before = dag.ands.size();
        try {
            AndId id = dag.add_alternative(o, *t, "loopToFold");
            events.push_back({"loopToFold", o, id, dag.ands.size() > before});
        } catch (const CycleError &) {
        }
    }
    return events;
}

const std::vector<Rule> &all_rules()
{
    static const std::vector<Rule> rules{
        {"T1", rule_t1}, {"T2", rule_t2}, {"T3", rule_t3}, {"T4", rule_t4},
        {"T5", rule_t5}, {"N1", rule_n1}, {"N2", rule_n2},
    };
    return rules;
}

std::vector<Rule> select_rules(const std::string &list)
{
    if (list.empty() || list == "all") return all_rules();
    std::vector<Rule> out;
    if (list == "none") return out;
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        auto it = std::find_if(all_rules().begin(), all_rules().end(), [&](const Rule &r) { return r.name == name; });
        if (it == all_rules().end()) throw Error("unknown rule '" + name + "' (known: T1,T2,T3,T4,T5,N1,N2)");
        if (std::none_of(out.begin(), out.end(), [&](const Rule &r) { return r.name == name; })) out.push_back(*it);
    }
    // Keep priority order regardless of how the list was written.
    std::vector<Rule> ordered;
    for (auto &r : all_rules())
        if (std::any_of(out.begin(), out.end(), [&](const Rule &x) { return x.name == r.name; })) ordered.push_back(r);
    return ordered;
}

ExpansionReport expand(Dag &dag, const std::vector<Rule> &rules, const FirContext &ctx, int budget)
{
    ExpansionReport report;
    std::set<std::string> done;
    for (bool progress = true; progress;) {
        progress = false;
        auto reach = dag.reachable();
        std::set<AndId> ands;
        for (auto o : reach)
            for (auto a : dag.or_node(o).alts) ands.insert(a);
        for (AndId a : ands) {
            for (auto &rule : rules) {
                for (auto &[target, tree] : rule.apply(dag, a, ctx)) {
                    std::string key = rule.name + "|" + std::to_string(target) + "|" + tree_key(tree);
                    if (!done.insert(key).second) continue;
                    if (report.applications >= budget) {
                        report.budget_exceeded = true;
                        return report;
                    }
                    ++report.applications;
                    progress = true;
                    std::size_t before = dag.ands.size();
                    std::size_t alts_before = dag.or_node(target).alts.size();
                    try {
                        AndId id = dag.add_alternative(target, tree, rule.name);
                        bool fresh = dag.ands.size() > before || dag.or_node(target).alts.size() > alts_before;
                        report.events.push_back({rule.name, target, id, fresh});
                    } catch (const CycleError &) {
                    }
                }
            }
        }
    }
    return report;
}

}
