#include "cobra/errors.hpp"
#include "cobra/fir.hpp"

#include <set>

namespace cobra {

namespace {

using ast::Expr;
using ast::ExprPtr;
using ast::Stmt;
using ast::StmtPtr;

StmtPtr mk_assign(const std::string &target, ExprPtr e)
{
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::Assign;
    s->target = target;
    s->expr = std::move(e);
    return s;
}

StmtPtr mk_call(const std::string &recv, const std::string &name, std::vector<ExprPtr> args)
{
    auto s = std::make_shared<Stmt>();
    s->kind = Stmt::Kind::Call;
    s->target = recv;
    s->name = name;
    s->args = std::move(args);
    return s;
}

bool is_leaf(Op op) { return op == Op::Const || op == Op::Var || op == Op::Slot || op == Op::Attr || op == Op::Row; }

class Lowerer
{
public:
    Lowerer(const ast::FunctionDef &fn, const Dag &dag, const Choice &choose) : dag_(dag), choose_(choose)
    {
        ast::Program p;
        p.functions.push_back(fn);
        std::vector<std::string> names;
        ast::collect_names(p, names);
        taken_.insert(names.begin(), names.end());
    }

    ast::Block region(OrId o)
    {
        ast::Block out;
        stmt(o, out);
        return out;
    }

private:
    const Dag &dag_;
    const Choice &choose_;
    std::set<std::string> taken_;
    int counter_ = 0;
    std::vector<std::map<std::string, std::string>> slots_;
    std::map<OrId, std::string> *memo_ = nullptr;
    const std::set<OrId> *shared_ = nullptr;

    const AndNode &pick(OrId o) const { return dag_.and_node(choose_(o)); }

    std::string fresh(const std::string &prefix)
    {
        for (;;) {
            std::string n = prefix + std::to_string(++counter_);
            if (taken_.insert(n).second) return n;
        }
    }

    std::string resolve(const std::string &slot) const
    {
        for (auto it = slots_.rbegin(); it != slots_.rend(); ++it)
            if (auto f = it->find(slot); f != it->end()) return f->second;
        return slot;
    }

    [[noreturn]] static void unlowered(const AndNode &a, const char *where)
    {
        throw UnloweredOperator(std::string("no ") + where + " template for operator '" + op_name(a.op) + "'");
    }

    /// Skips prefetch prefixes of an expression-level sequence, emitting them as statements.
    const AndNode &strip_seq(OrId o, ast::Block &out)
    {
        const AndNode *a = &pick(o);
        while (a->op == Op::Seq) {
            for (std::size_t i = 0; i + 1 < a->kids.size(); ++i) stmt(a->kids[i], out);
            a = &pick(a->kids.back());
        }
        return *a;
    }

    const AndNode &fold_of(OrId o) const
    {
        const AndNode *a = &pick(o);
        while (a->op == Op::Seq) a = &pick(a->kids.back());
        if (a->op != Op::Fold) unlowered(*a, "projection source");
        return *a;
    }

    void stmt(OrId o, ast::Block &out)
    {
        const AndNode &a = pick(o);
        switch (a.op) {
            case Op::Seq:
                for (auto k : a.kids) stmt(k, out);
                return;
            case Op::Block:
                if (a.p.stmt && !a.p.header) out.push_back(std::make_shared<Stmt>(*a.p.stmt));
                return;
            case Op::BlackBox:
                for (auto *s : a.p.stmts) out.push_back(std::make_shared<Stmt>(*s));
                return;
            case Op::Loop: {
                auto s = std::make_shared<Stmt>(*a.p.stmt);
                s->body = region(a.kids[1]);
                out.push_back(s);
                return;
            }
            case Op::Cond: {
                auto s = std::make_shared<Stmt>(*a.p.stmt);
                s->body = region(a.kids[1]);
                s->else_body = a.kids.size() > 2 ? region(a.kids[2]) : ast::Block{};
                s->has_else = !s->else_body.empty();
                out.push_back(s);
                return;
            }
            case Op::Assign: assign(a.p.name, a.kids[0], out); return;
            case Op::Bind: {
                const AndNode &f = strip_seq(a.kids[0], out);
                if (f.op != Op::Fold || f.p.names.size() != a.p.names.size()) unlowered(f, "bind");
                init_targets(f, a.p.names, out);
                fold_into(f, a.p.names, out);
                return;
            }
            case Op::Prefetch: {
                auto s = std::make_shared<Stmt>();
                s->kind = Stmt::Kind::Prefetch;
                s->target = a.p.name;
                s->name = a.p.attr;
                out.push_back(s);
                return;
            }
            default: unlowered(a, "statement");
        }
    }

    /// Leaves each target holding the corresponding initial value of `fold`.
    void init_targets(const AndNode &fold, const std::vector<std::string> &targets, ast::Block &out)
    {
        std::vector<OrId> inits;
        if (targets.size() == 1) {
            inits.push_back(fold.kids[1]);
        } else {
            const AndNode &t = pick(fold.kids[1]);
            if (t.op != Op::Tuple) unlowered(t, "tuple initializer");
            inits = t.kids;
        }
        std::vector<std::pair<std::string, ExprPtr>> pending;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const AndNode &in = pick(inits[i]);
            if ((in.op == Op::Var && in.p.name == targets[i]) || (in.op == Op::Slot && resolve(in.p.name) == targets[i]))
                continue;
            // A constant init is the value already reaching the loop; re-assigning it would break aliases.
            if (in.op == Op::Const) continue;
            pending.emplace_back(targets[i], expr(inits[i], out));
        }
        if (pending.size() == 1) {
            out.push_back(mk_assign(pending[0].first, pending[0].second));
            return;
        }
        // Evaluate every initializer before any target changes.
        std::vector<std::string> temps;
        for (auto &[t, e] : pending) {
            if (e->kind == Expr::Kind::Lit) {
                temps.push_back({});
                continue;
            }
            temps.push_back(fresh("_s"));
            out.push_back(mk_assign(temps.back(), e));
        }
        for (std::size_t i = 0; i < pending.size(); ++i)
            out.push_back(mk_assign(pending[i].first, temps[i].empty() ? pending[i].second : Expr::var(temps[i])));
    }

    void assign(const std::string &v, OrId x, ast::Block &out)
    {
        const AndNode &b = strip_seq(x, out);
        if (b.op == Op::Fold && b.p.names.size() == 1) {
            init_targets(b, {v}, out);
            fold_into(b, {v}, out);
            return;
        }
        if (b.op == Op::Project) {
            const AndNode &f = fold_of(b.p.ref);
            const std::string &name = f.p.names.at(static_cast<std::size_t>(b.p.index));
            if (name != v) out.push_back(mk_assign(v, Expr::var(name)));
            return;
        }
        out.push_back(mk_assign(v, lower(b, out)));
    }

    void fold_into(const AndNode &fold, const std::vector<std::string> &targets, ast::Block &out)
    {
        const AndNode &src = pick(fold.kids[2]);
        if (src.op != Op::Source) unlowered(src, "fold source");
        std::map<std::string, std::string> scope;
        for (std::size_t i = 0; i < targets.size(); ++i) scope[fold.p.names[i]] = targets[i];
        slots_.push_back(scope);
        ast::Block body;
        auto *saved_memo = memo_;
        auto *saved_shared = shared_;
        memo_ = nullptr;
        shared_ = nullptr;
        if (targets.size() == 1)
            update(fold.kids[0], targets[0], body);
        else
            tuple_update(fold.kids[0], targets, body);
        memo_ = saved_memo;
        shared_ = saved_shared;
        slots_.pop_back();
        auto loop = std::make_shared<Stmt>();
        loop->kind = Stmt::Kind::ForQuery;
        loop->target = fold.p.name;
        loop->query = src.p.query;
        loop->body = std::move(body);
        out.push_back(loop);
    }

    bool is_slot_of(OrId o, const std::string &target) const
    {
        const AndNode &a = pick(o);
        return a.op == Op::Slot && resolve(a.p.name) == target;
    }

    /// Statements giving `target` the accumulator's next value.
    void update(OrId acc, const std::string &target, ast::Block &body)
    {
        const AndNode &a = pick(acc);
        switch (a.op) {
            case Op::Guard: {
                ExprPtr cond = expr(a.kids[0], body);
                ast::Block inner;
                update(a.kids[1], target, inner);
                auto s = std::make_shared<Stmt>();
                s->kind = Stmt::Kind::If;
                s->expr = cond;
                s->body = std::move(inner);
                body.push_back(s);
                return;
            }
            case Op::ListAdd:
                if (is_slot_of(a.kids[0], target)) {
                    body.push_back(mk_call(target, "add", {expr(a.kids[1], body)}));
                    return;
                }
                break;
            case Op::MapPut:
                if (is_slot_of(a.kids[0], target)) {
                    ExprPtr k = expr(a.kids[1], body);
                    ExprPtr v = expr(a.kids[2], body);
                    body.push_back(mk_call(target, "put", {k, v}));
                    return;
                }
                break;
            case Op::Fold:
                if (a.p.names.size() == 1 && is_slot_of(a.kids[1], target)) {
                    fold_into(a, {target}, body);
                    return;
                }
                break;
            case Op::Seq: {
                for (std::size_t i = 0; i + 1 < a.kids.size(); ++i) stmt(a.kids[i], body);
                update(a.kids.back(), target, body);
                return;
            }
            case Op::Slot:
                if (resolve(a.p.name) == target) return;
                break;
            default: break;
        }
        body.push_back(mk_assign(target, expr(acc, body)));
    }

    bool contains_slot(OrId o) const
    {
        const AndNode &a = pick(o);
        if (a.op == Op::Slot || a.op == Op::Fold || a.op == Op::Project) return true;
        for (auto k : a.kids)
            if (contains_slot(k)) return true;
        return false;
    }

    void count_refs(OrId o, std::map<OrId, int> &refs) const
    {
        if (refs[o]++) return;
        const AndNode &a = pick(o);
        if (a.op == Op::Fold) return;
        for (auto k : a.kids) count_refs(k, refs);
    }

    /// Tuple accumulators: every operand reading an accumulator is evaluated into a temporary before
    /// any accumulator is updated; shared sub-expressions are evaluated once.
    void tuple_update(OrId acc, const std::vector<std::string> &targets, ast::Block &body)
    {
        const AndNode &t = pick(acc);
        if (t.op != Op::Tuple || t.kids.size() != targets.size()) unlowered(t, "tuple accumulator");
        std::map<OrId, int> refs;
        for (auto k : t.kids) count_refs(k, refs);
        std::set<OrId> shared;
        for (auto &[o, n] : refs)
            if (n >= 2 && !is_leaf(pick(o).op)) shared.insert(o);
        std::map<OrId, std::string> memo;
        memo_ = &memo;
        shared_ = &shared;

        enum class Kind { Add, Put, Set };
        struct Update
        {
            Kind kind;
            std::vector<OrId> operands;
            std::vector<ExprPtr> values;
        };
        std::vector<Update> plan;
        for (std::size_t i = 0; i < t.kids.size(); ++i) {
            const AndNode &c = pick(t.kids[i]);
            if (c.op == Op::Guard) unlowered(c, "tuple component");
            if (c.op == Op::ListAdd && is_slot_of(c.kids[0], targets[i]))
                plan.push_back({Kind::Add, {c.kids[1]}, {}});
            else if (c.op == Op::MapPut && is_slot_of(c.kids[0], targets[i]))
                plan.push_back({Kind::Put, {c.kids[1], c.kids[2]}, {}});
            else
                plan.push_back({Kind::Set, {t.kids[i]}, {}});
            plan.back().values.resize(plan.back().operands.size());
        }
        for (auto &u : plan)
            for (std::size_t j = 0; j < u.operands.size(); ++j) {
                if (!contains_slot(u.operands[j])) continue;
                ExprPtr e = expr(u.operands[j], body);
                if (e->kind != Expr::Kind::Var || !memo_has(e->name)) {
                    std::string tmp = fresh("_s");
                    body.push_back(mk_assign(tmp, e));
                    e = Expr::var(tmp);
                }
                u.values[j] = e;
            }
        for (std::size_t i = 0; i < plan.size(); ++i) {
            auto &u = plan[i];
            for (std::size_t j = 0; j < u.operands.size(); ++j)
                if (!u.values[j]) u.values[j] = expr(u.operands[j], body);
            switch (u.kind) {
                case Kind::Add: body.push_back(mk_call(targets[i], "add", {u.values[0]})); break;
                case Kind::Put: body.push_back(mk_call(targets[i], "put", {u.values[0], u.values[1]})); break;
                case Kind::Set:
                    if (u.values[0]->kind != Expr::Kind::Var || u.values[0]->name != targets[i])
                        body.push_back(mk_assign(targets[i], u.values[0]));
                    break;
            }
        }
        memo_ = nullptr;
        shared_ = nullptr;
    }

    bool memo_has(const std::string &name) const
    {
        if (!memo_) return false;
        for (auto &[o, n] : *memo_)
            if (n == name) return true;
        return false;
    }

    ExprPtr expr(OrId o, ast::Block &pre)
    {
        if (memo_)
            if (auto it = memo_->find(o); it != memo_->end()) return Expr::var(it->second);
        ExprPtr e = lower(pick(o), pre);
        if (shared_ && shared_->count(o)) {
            std::string tmp = fresh("_s");
            pre.push_back(mk_assign(tmp, e));
            (*memo_)[o] = tmp;
            return Expr::var(tmp);
        }
        return e;
    }

    ExprPtr lower(const AndNode &a, ast::Block &pre)
    {
        auto kid = [&](std::size_t i) { return expr(a.kids[i], pre); };
        switch (a.op) {
            case Op::Const: return Expr::lit(a.p.value);
            case Op::Var:
            case Op::Row: return Expr::var(a.p.name);
            case Op::Slot: return Expr::var(resolve(a.p.name));
            case Op::Attr: return Expr::field(Expr::var(a.p.name), a.p.attr);
            case Op::Binary: return Expr::binary(a.p.name, kid(0), kid(1));
            case Op::Unary: return Expr::unary(a.p.name, kid(0));
            case Op::Field: return Expr::field(kid(0), a.p.name);
            case Op::Call:
            case Op::Method: {
                std::vector<ExprPtr> args;
                for (std::size_t i = 0; i < a.kids.size(); ++i) args.push_back(kid(i));
                if (a.op == Op::Call) return Expr::call(a.p.name, std::move(args));
                ExprPtr recv = args.front();
                args.erase(args.begin());
                return Expr::method(recv, a.p.name, std::move(args));
            }
            case Op::ExecuteQuery: return Expr::exec_query(a.p.query);
            case Op::Lookup: return Expr::cache_lookup(a.p.name, a.p.attr, kid(0));
            case Op::ListAdd: return Expr::call("append", {kid(0), kid(1)});
            case Op::MapPut: return Expr::call("mapPut", {kid(0), kid(1), kid(2)});
            case Op::Project: {
                const AndNode &f = fold_of(a.p.ref);
                return Expr::var(f.p.names.at(static_cast<std::size_t>(a.p.index)));
            }
            case Op::Fold: {
                if (a.p.names.size() != 1) unlowered(a, "expression");
                std::string tmp = fresh("_a");
                auto *saved_memo = memo_;
                auto *saved_shared = shared_;
                memo_ = nullptr;
                shared_ = nullptr;
                pre.push_back(mk_assign(tmp, expr(a.kids[1], pre)));
                fold_into(a, {tmp}, pre);
                memo_ = saved_memo;
                shared_ = saved_shared;
                return Expr::var(tmp);
            }
            case Op::Seq: {
                for (std::size_t i = 0; i + 1 < a.kids.size(); ++i) stmt(a.kids[i], pre);
                return expr(a.kids.back(), pre);
            }
            default: unlowered(a, "expression");
        }
    }
};

}

ast::FunctionDef fir_to_code(const ast::FunctionDef &fn, const Dag &dag, const Choice &choose)
{
    ast::FunctionDef out;
    out.name = fn.name;
    out.params = fn.params;
    out.pos = fn.pos;
    out.end_line = fn.end_line;
    Lowerer l(fn, dag, choose);
    out.body = l.region(dag.root);
    return out;
}

}
