#include "cobra/cfg.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace cobra {

Operand Operand::of_var(std::string name)
{
    Operand o;
    o.is_var = true;
    o.var = std::move(name);
    return o;
}

Operand Operand::of_const(Value v)
{
    Operand o;
    o.constant = std::move(v);
    return o;
}

std::string Operand::str() const { return is_var ? var : constant.to_string(); }

namespace {

bool mutating_method(const std::string &m)
{
    return m == "add" || m == "put" || m == "addAll" || m == "remove" || m == "clear";
}

std::string join_args(const std::vector<Operand> &args, std::size_t from = 0)
{
    std::string s;
    for (std::size_t i = from; i < args.size(); ++i) {
        if (i > from) s += ", ";
        s += args[i].str();
    }
    return s;
}

}

std::vector<std::string> Tac::uses() const
{
    std::vector<std::string> out;
    for (auto &a : args)
        if (a.is_var) out.push_back(a.var);
    if (query) {
        std::set<ParamRef> params;
        collect_params(*query, params);
        for (auto &p : params) out.push_back(p.var);
    }
    return out;
}

std::vector<std::string> Tac::defs() const
{
    std::vector<std::string> out;
    if (!dst.empty()) out.push_back(dst);
    if (kind == Kind::Effect && !args.empty() && args[0].is_var && mutating_method(op)) out.push_back(args[0].var);
    return out;
}

std::string Tac::str() const
{
    switch (kind) {
        case Kind::Copy: return dst + " = " + args[0].str();
        case Kind::Binary: return dst + " = " + args[0].str() + " " + op + " " + args[1].str();
        case Kind::Unary: return dst + " = " + op + args[0].str();
        case Kind::Call: return dst + " = " + op + "(" + join_args(args) + ")";
        case Kind::Field: return dst + " = " + args[0].str() + "." + field;
        case Kind::Method: return dst + " = " + args[0].str() + "." + op + "(" + join_args(args, 1) + ")";
        case Kind::ExecQuery: return dst + " = executeQuery(" + to_cobra(*query) + ")";
        case Kind::CacheLookup: return dst + " = lookupCache(" + op + ", " + field + ", " + args[0].str() + ")";
        case Kind::Prefetch: return "cacheByColumn(" + op + ", " + field + ")";
        case Kind::Effect:
            if (field == "Console") return "Console." + op + "(" + join_args(args) + ")";
            return args[0].str() + "." + op + "(" + join_args(args, 1) + ")";
        case Kind::ForNext:
            return dst + " <- next(" + (query ? to_cobra(*query) : args[0].str()) + ")";
        case Kind::Branch: return "branch " + args[0].str();
        case Kind::Return: return "return " + args[0].str();
    }
    return "?";
}

int Cfg::instruction_count() const
{
    int n = 0;
    for (auto &b : blocks) n += static_cast<int>(b.code.size());
    return n;
}

std::string Cfg::dump() const
{
    std::string out;
    for (auto &b : blocks) {
        std::string name = b.id == entry ? "entry" : b.id == exit ? "exit" : "block " + std::to_string(b.id);
        out += name + " ->";
        for (int s : b.succs) out += " " + std::to_string(s);
        out += "\n";
        for (auto &t : b.code) out += "  " + std::to_string(t.line) + ": " + t.str() + "\n";
    }
    return out;
}

namespace {

class Builder
{
public:
    explicit Builder(const ast::FunctionDef &fn)
    {
        cfg_.fn = &fn;
        std::vector<std::string> names;
        for (auto &p : fn.params) names.push_back(p.name);
        ast::walk(fn.body, [&](const ast::Stmt &s) {
            if (!s.target.empty()) names.push_back(s.target);
            if (s.expr) ast::collect_reads(*s.expr, names);
            for (auto &a : s.args) ast::collect_reads(*a, names);
        });
        used_.insert(names.begin(), names.end());
        record_parents(fn.body, nullptr);
    }

    Cfg build()
    {
        new_block();  // entry
        new_block();  // exit
        int first = new_block(true);
        edge(cfg_.entry, first);
        cur_ = first;
        block(cfg_.fn->body);
        if (cur_ != -1) edge(cur_, cfg_.exit);
        simplify();
        return std::move(cfg_);
    }

private:
    Cfg cfg_;
    int cur_ = -1;
    int next_tmp_ = 0;
    std::set<std::string> used_;

    void record_parents(const ast::Block &b, const ast::Stmt *parent)
    {
        for (auto &s : b) {
            cfg_.parent[s.get()] = parent;
            record_parents(s->body, s.get());
            record_parents(s->else_body, s.get());
        }
    }

    int new_block(bool keep = false)
    {
        BasicBlock b;
        b.id = static_cast<int>(cfg_.blocks.size());
        b.keep = keep;
        cfg_.blocks.push_back(std::move(b));
        return cfg_.blocks.back().id;
    }

    void edge(int a, int b)
    {
        cfg_.blocks[a].succs.push_back(b);
        cfg_.blocks[b].preds.push_back(a);
    }

    std::string fresh()
    {
        std::string name;
        do name = "_t" + std::to_string(next_tmp_++);
        while (used_.count(name));
        used_.insert(name);
        return name;
    }

    void emit(Tac t, const ast::Stmt &s, Tac::Role role)
    {
        t.stmt = &s;
        t.role = role;
        t.line = s.pos.line;
        cfg_.blocks[cur_].code.push_back(std::move(t));
        ++cfg_.lowered_count;
    }

    void start_fresh()
    {
        if (cfg_.blocks[cur_].code.empty()) return;
        int nb = new_block();
        edge(cur_, nb);
        cur_ = nb;
    }

    void block(const ast::Block &b)
    {
        for (auto &s : b) {
            if (cur_ == -1) return;
            stmt(*s);
        }
    }

    Operand flatten(const ast::Expr &e, const ast::Stmt &s, Tac::Role role)
    {
        if (e.kind == ast::Expr::Kind::Lit) return Operand::of_const(e.value);
        if (e.kind == ast::Expr::Kind::Var) return Operand::of_var(e.name);
        std::string t = fresh();
        into(e, t, s, role);
        return Operand::of_var(t);
    }

    void into(const ast::Expr &e, const std::string &dst, const ast::Stmt &s, Tac::Role role)
    {
        Tac t;
        t.dst = dst;
        switch (e.kind) {
            case ast::Expr::Kind::Lit:
            case ast::Expr::Kind::Var:
                t.kind = Tac::Kind::Copy;
                t.args = {flatten(e, s, role)};
                break;
            case ast::Expr::Kind::Field:
                t.kind = Tac::Kind::Field;
                t.field = e.name;
                t.args = {flatten(*e.args[0], s, role)};
                break;
            case ast::Expr::Kind::Binary:
            case ast::Expr::Kind::Unary:
            case ast::Expr::Kind::Call:
            case ast::Expr::Kind::Method:
                t.kind = e.kind == ast::Expr::Kind::Binary  ? Tac::Kind::Binary
                         : e.kind == ast::Expr::Kind::Unary ? Tac::Kind::Unary
                         : e.kind == ast::Expr::Kind::Call  ? Tac::Kind::Call
                                                            : Tac::Kind::Method;
                t.op = e.name;
                for (auto &a : e.args) t.args.push_back(flatten(*a, s, role));
                break;
            case ast::Expr::Kind::ExecQuery:
                t.kind = Tac::Kind::ExecQuery;
                t.query = e.query;
                break;
            case ast::Expr::Kind::CacheLookup:
                t.kind = Tac::Kind::CacheLookup;
                t.op = e.name;
                t.field = e.column;
                t.args = {flatten(*e.args[0], s, role)};
                break;
        }
        emit(std::move(t), s, role);
    }

    void cond(const ast::Expr &e, int on_true, int on_false, const ast::Stmt &s, Tac::Role role)
    {
        if (e.kind == ast::Expr::Kind::Binary && (e.name == "&&" || e.name == "||")) {
            int mid = new_block();
            if (e.name == "&&")
                cond(*e.args[0], mid, on_false, s, role);
            else
                cond(*e.args[0], on_true, mid, s, role);
            cur_ = mid;
            cond(*e.args[1], on_true, on_false, s, role);
            return;
        }
        Tac t;
        t.kind = Tac::Kind::Branch;
        t.args = {flatten(e, s, role)};
        emit(std::move(t), s, role);
        edge(cur_, on_true);
        edge(cur_, on_false);
    }

    void stmt(const ast::Stmt &s)
    {
        using K = ast::Stmt::Kind;
        switch (s.kind) {
            case K::Assign: into(*s.expr, s.target, s, Tac::Role::Simple); break;
            case K::Return: {
                Tac t;
                t.kind = Tac::Kind::Return;
                t.args = {flatten(*s.expr, s, Tac::Role::Simple)};
                emit(std::move(t), s, Tac::Role::Simple);
                edge(cur_, cfg_.exit);
                cur_ = -1;
                break;
            }
            case K::Call: {
                Tac t;
                t.kind = Tac::Kind::Effect;
                t.op = s.name;
                t.field = s.target;
                if (s.target != "Console") t.args.push_back(Operand::of_var(s.target));
                for (auto &a : s.args) t.args.push_back(flatten(*a, s, Tac::Role::Simple));
                emit(std::move(t), s, Tac::Role::Simple);
                break;
            }
            case K::Prefetch: {
                Tac t;
                t.kind = Tac::Kind::Prefetch;
                t.op = s.target;
                t.field = s.name;
                emit(std::move(t), s, Tac::Role::Simple);
                break;
            }
            case K::If: {
                start_fresh();
                int then_b = new_block(true);
                int else_b = s.has_else ? new_block(true) : -1;
                int join = new_block();
                cond(*s.expr, then_b, s.has_else ? else_b : join, s, Tac::Role::Predicate);
                cur_ = then_b;
                block(s.body);
                if (cur_ != -1) edge(cur_, join);
                if (s.has_else) {
                    cur_ = else_b;
                    block(s.else_body);
                    if (cur_ != -1) edge(cur_, join);
                }
                cur_ = cfg_.blocks[join].preds.empty() ? -1 : join;
                break;
            }
            case K::ForQuery:
            case K::ForColl: {
                start_fresh();
                int header = cur_;
                Tac t;
                t.kind = Tac::Kind::ForNext;
                t.dst = s.target;
                if (s.kind == K::ForQuery)
                    t.query = s.query;
                else
                    t.args = {flatten(*s.expr, s, Tac::Role::Header)};
                emit(std::move(t), s, Tac::Role::Header);
                loop_tail(s, header);
                break;
            }
            case K::While: {
                start_fresh();
                int header = cur_;
                int body = new_block(true);
                int after = new_block();
                cond(*s.expr, body, after, s, Tac::Role::Header);
                cur_ = body;
                block(s.body);
                if (cur_ != -1) edge(cur_, header);
                cur_ = after;
                break;
            }
        }
    }

    void loop_tail(const ast::Stmt &s, int header)
    {
        int body = new_block(true);
        int after = new_block();
        edge(header, body);
        edge(header, after);
        cur_ = body;
        block(s.body);
        if (cur_ != -1) edge(cur_, header);
        cur_ = after;
    }

    /// Drops unreachable blocks and bypasses empty fall-through blocks, then renumbers.
    void simplify()
    {
        auto &bs = cfg_.blocks;
        std::vector<bool> alive(bs.size(), false);
        std::function<void(int)> mark = [&](int b) {
            if (alive[b]) return;
            alive[b] = true;
            for (int s : bs[b].succs) mark(s);
        };
        mark(cfg_.entry);
        alive[cfg_.exit] = true;
        for (std::size_t b = 2; b < bs.size(); ++b) {
            if (!alive[b] || bs[b].keep || !bs[b].code.empty() || bs[b].succs.size() != 1) continue;
            int target = bs[b].succs[0];
            if (target == static_cast<int>(b)) continue;
            for (auto &other : bs)
                for (int &s : other.succs)
                    if (s == static_cast<int>(b)) s = target;
            bs[b].succs.clear();
            alive[b] = false;
        }
        std::vector<int> remap(bs.size(), -1);
        std::vector<BasicBlock> out;
        for (std::size_t b = 0; b < bs.size(); ++b) {
            if (!alive[b]) continue;
            remap[b] = static_cast<int>(out.size());
            out.push_back(std::move(bs[b]));
        }
        for (auto &b : out) {
            b.id = remap[b.id];
            b.preds.clear();
            std::vector<int> succs;
            for (int s : b.succs)
                if (remap[s] >= 0) succs.push_back(remap[s]);
            b.succs = std::move(succs);
        }
        for (auto &b : out)
            for (int s : b.succs) out[s].preds.push_back(b.id);
        bs = std::move(out);
    }
};

}

Cfg build_cfg(const ast::FunctionDef &fn) { return Builder(fn).build(); }

std::string audit(const Cfg &cfg)
{
    const auto &bs = cfg.blocks;
    if (!bs[cfg.entry].preds.empty()) return "entry has predecessors";
    if (!bs[cfg.exit].succs.empty()) return "exit has successors";
    std::vector<bool> fwd(bs.size(), false), bwd(bs.size(), false);
    std::function<void(int)> f = [&](int b) {
        if (fwd[b]) return;
        fwd[b] = true;
        for (int s : b == cfg.exit ? std::vector<int>{} : bs[b].succs) f(s);
    };
    std::function<void(int)> g = [&](int b) {
        if (bwd[b]) return;
        bwd[b] = true;
        for (int p : bs[b].preds) g(p);
    };
    f(cfg.entry);
    g(cfg.exit);
    for (std::size_t b = 0; b < bs.size(); ++b) {
        if (!fwd[b]) return "block " + std::to_string(b) + " unreachable from entry";
        if (!bwd[b]) return "exit unreachable from block " + std::to_string(b);
    }
    return {};
}

}
