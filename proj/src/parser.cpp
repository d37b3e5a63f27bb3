#include "cobra/parser.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace cobra {

namespace {

enum class Tok { Ident, Int, Str, Punct, End };

struct Token
{
    Tok kind = Tok::End;
    std::string text;
    Position pos;
};

std::vector<Token> lex(const std::string &src)
{
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.pos = {line, col};
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = src.substr(i, j - i);
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            t.kind = Tok::Int;
            t.text = src.substr(i, j - i);
            advance(j - i);
        } else if (c == '"') {
            t.kind = Tok::Str;
            advance(1);
            while (true) {
                if (i >= src.size() || src[i] == '\n') throw SyntaxError(t.pos, "unterminated string literal");
                if (src[i] == '"') break;
                if (src[i] == '\\' && i + 1 < src.size()) {
                    char e = src[i + 1];
                    t.text += e == 'n' ? '\n' : e == 't' ? '\t' : e;
                    advance(2);
                    continue;
                }
                t.text += src[i];
                advance(1);
            }
            advance(1);
        } else {
            static const char *two[] = {"==", "!=", "<=", ">=", "&&", "||"};
            t.kind = Tok::Punct;
            for (auto *op : two)
                if (src.compare(i, 2, op) == 0) t.text = op;
            if (t.text.empty()) {
                if (std::string("(){}[],;:.=<>+-*/%!$").find(c) == std::string::npos)
                    throw SyntaxError(t.pos, std::string("unexpected character '") + c + "'");
                t.text = std::string(1, c);
            }
            advance(t.text.size());
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.pos = {line, col};
    out.push_back(end);
    return out;
}

class Parser
{
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ast::Program program()
    {
        ast::Program p;
        while (peek().kind != Tok::End) p.functions.push_back(function());
        return p;
    }

private:
    std::vector<Token> toks_;
    std::size_t at_ = 0;
    int last_line_ = 1;

    const Token &peek(std::size_t k = 0) const { return toks_[std::min(at_ + k, toks_.size() - 1)]; }

    bool is(const std::string &text, std::size_t k = 0) const
    {
        const Token &t = peek(k);
        return (t.kind == Tok::Punct || t.kind == Tok::Ident) && t.text == text;
    }

    Token next()
    {
        Token t = peek();
        if (at_ < toks_.size() - 1) ++at_;
        last_line_ = t.pos.line;
        return t;
    }

    [[noreturn]] void fail(const std::vector<std::string> &expected) const
    {
        const Token &t = peek();
        std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        throw SyntaxError(t.pos, "unexpected " + got, expected);
    }

    Token expect(const std::string &text)
    {
        if (!is(text)) fail({"'" + text + "'"});
        return next();
    }

    std::string ident(const char *what = "identifier")
    {
        if (peek().kind != Tok::Ident) fail({what});
        return next().text;
    }

    ast::FunctionDef function()
    {
        ast::FunctionDef f;
        f.pos = expect("fn").pos;
        f.name = ident("function name");
        expect("(");
        while (!is(")")) {
            ast::Param prm;
            prm.name = ident("parameter name");
            expect(":");
            prm.type = ident("type");
            f.params.push_back(prm);
            if (!is(")")) expect(",");
        }
        expect(")");
        f.body = block();
        f.end_line = last_line_;
        return f;
    }

    ast::Block block()
    {
        expect("{");
        ast::Block b;
        while (!is("}")) {
            if (peek().kind == Tok::End) fail({"'}'"});
            b.push_back(statement());
        }
        expect("}");
        return b;
    }

    ast::StmtPtr statement()
    {
        auto s = std::make_shared<ast::Stmt>();
        s->pos = peek().pos;
        if (is("for")) {
            next();
            expect("(");
            s->target = ident("loop variable");
            expect(":");
            if (is("query") && is("{", 1)) {
                next();
                next();
                s->kind = ast::Stmt::Kind::ForQuery;
                s->query = query();
                expect("}");
            } else {
                s->kind = ast::Stmt::Kind::ForColl;
                s->expr = expr();
            }
            expect(")");
            s->body = block();
        } else if (is("while")) {
            next();
            s->kind = ast::Stmt::Kind::While;
            expect("(");
            s->expr = expr();
            expect(")");
            s->body = block();
        } else if (is("if")) {
            next();
            s->kind = ast::Stmt::Kind::If;
            expect("(");
            s->expr = expr();
            expect(")");
            s->body = block();
            if (is("else")) {
                next();
                s->has_else = true;
                if (is("if"))
                    s->else_body.push_back(statement());
                else
                    s->else_body = block();
            }
        } else if (is("return")) {
            next();
            s->kind = ast::Stmt::Kind::Return;
            s->expr = expr();
            expect(";");
        } else if (peek().kind == Tok::Ident && is("=", 1)) {
            s->kind = ast::Stmt::Kind::Assign;
            s->target = next().text;
            next();
            s->expr = expr();
            expect(";");
        } else if (peek().kind == Tok::Ident && is(".", 1)) {
            s->target = next().text;
            next();
            s->name = ident("method name");
            expect("(");
            if (s->target == "Utils" && s->name == "cacheByColumn") {
                s->kind = ast::Stmt::Kind::Prefetch;
                s->target = ident("relation");
                expect(",");
                s->name = ident("column");
            } else {
                s->kind = ast::Stmt::Kind::Call;
                s->args = args_until(")");
            }
            expect(")");
            expect(";");
        } else {
            fail({"statement"});
        }
        s->end_line = last_line_;
        return s;
    }

    std::vector<ast::ExprPtr> args_until(const std::string &close)
    {
        std::vector<ast::ExprPtr> out;
        while (!is(close)) {
            out.push_back(expr());
            if (!is(close)) expect(",");
        }
        return out;
    }

    static int binary_prec(const std::string &op)
    {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "==" || op == "!=") return 3;
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
        if (op == "+" || op == "-") return 5;
        if (op == "*" || op == "/" || op == "%") return 6;
        return 0;
    }

    ast::ExprPtr expr(int min_prec = 1)
    {
        auto lhs = unary();
        while (peek().kind == Tok::Punct) {
            int p = binary_prec(peek().text);
            if (p < min_prec || p == 0) break;
            Token op = next();
            auto rhs = expr(p + 1);
            lhs = ast::Expr::binary(op.text, lhs, rhs, op.pos);
        }
        return lhs;
    }

    ast::ExprPtr unary()
    {
        if (is("!") || is("-")) {
            Token op = next();
            auto arg = unary();
            if (op.text == "-" && arg->kind == ast::Expr::Kind::Lit && arg->value.is_int())
                return ast::Expr::lit(Value(-arg->value.as_int()), op.pos);
            return ast::Expr::unary(op.text, arg, op.pos);
        }
        return postfix();
    }

    ast::ExprPtr postfix()
    {
        auto e = primary();
        while (is(".")) {
            next();
            Position pos = peek().pos;
            std::string name = ident("field or method name");
            if (is("(")) {
                next();
                if (e->kind == ast::Expr::Kind::Var && e->name == "Utils" && name == "lookupCache") {
                    std::string rel = ident("relation");
                    expect(",");
                    std::string col = ident("column");
                    expect(",");
                    auto key = expr();
                    expect(")");
                    e = ast::Expr::cache_lookup(rel, col, key, e->pos);
                    continue;
                }
                auto args = args_until(")");
                expect(")");
                e = ast::Expr::method(e, name, std::move(args), pos);
            } else {
                e = ast::Expr::field(e, name, pos);
            }
        }
        return e;
    }

    ast::ExprPtr primary()
    {
        const Token &t = peek();
        if (t.kind == Tok::Int) {
            Token n = next();
            return ast::Expr::lit(Value(static_cast<std::int64_t>(std::stoll(n.text))), n.pos);
        }
        if (t.kind == Tok::Str) {
            Token s = next();
            return ast::Expr::lit(Value(s.text), s.pos);
        }
        if (is("(")) {
            next();
            auto e = expr();
            expect(")");
            return e;
        }
        if (t.kind == Tok::Ident) {
            if (t.text == "null") return ast::Expr::lit(Value(), next().pos);
            Token name = next();
            if (is("(")) {
                next();
                if (name.text == "executeQuery") {
                    expect("query");
                    expect("{");
                    auto q = query();
                    expect("}");
                    expect(")");
                    return ast::Expr::exec_query(q, name.pos);
                }
                auto args = args_until(")");
                expect(")");
                return ast::Expr::call(name.text, std::move(args), name.pos);
            }
            return ast::Expr::var(name.text, name.pos);
        }
        fail({"expression"});
    }

    QueryPtr query()
    {
        Position pos = peek().pos;
        std::string op = ident("query operator");
        expect("(");
        QueryPtr q;
        if (op == "scan") {
            q = QueryExpr::scan(ident("relation"));
        } else if (op == "select") {
            auto pred = sexpr();
            expect(",");
            q = QueryExpr::select(pred, query());
        } else if (op == "project") {
            expect("[");
            std::vector<ProjectItem> items;
            while (!is("]")) {
                ProjectItem it;
                Position ip = peek().pos;
                it.expr = sexpr();
                if (is("as")) {
                    next();
                    it.alias = ident("alias");
                } else if (it.expr->kind != ScalarExpr::Kind::Column) {
                    throw SyntaxError(ip, "computed projection item needs an alias", {"'as'"});
                }
                items.push_back(it);
                if (!is("]")) expect(",");
            }
            expect("]");
            expect(",");
            q = QueryExpr::project(std::move(items), query());
        } else if (op == "join") {
            auto pred = sexpr();
            expect(",");
            auto l = query();
            expect(",");
            q = QueryExpr::join(pred, l, query());
        } else if (op == "aggregate") {
            std::string fn = ident("aggregate function");
            if (fn != "sum" && fn != "count" && fn != "max" && fn != "min")
                throw SyntaxError(pos, "unknown aggregate '" + fn + "'", {"sum", "count", "max", "min"});
            expect(",");
            std::string col = is("*") ? next().text : ident("column");
            expect(",");
            std::string group;
            if (is("by") && is("(", 1)) {
                next();
                next();
                group = ident("column");
                expect(")");
                expect(",");
            }
            q = QueryExpr::aggregate(fn, col, group, query());
        } else if (op == "orderby") {
            std::string col = ident("column");
            expect(",");
            q = QueryExpr::order_by(col, query());
        } else {
            throw SyntaxError(pos, "unknown query operator '" + op + "'",
                              {"scan", "select", "project", "join", "aggregate", "orderby"});
        }
        expect(")");
        return q;
    }

    ScalarPtr sexpr(int min_prec = 1)
    {
        auto lhs = sunary();
        while (peek().kind == Tok::Punct) {
            int p = binary_prec(peek().text);
            if (p < min_prec || p == 0) break;
            Token op = next();
            lhs = ScalarExpr::binary(op.text, lhs, sexpr(p + 1));
        }
        return lhs;
    }

    ScalarPtr sunary()
    {
        if (is("!") || is("-")) {
            Token op = next();
            auto arg = sunary();
            if (op.text == "-" && arg->kind == ScalarExpr::Kind::Const && arg->constant.is_int())
                return ScalarExpr::constant_of(Value(-arg->constant.as_int()));
            return ScalarExpr::unary(op.text, arg);
        }
        const Token &t = peek();
        if (t.kind == Tok::Int) return ScalarExpr::constant_of(Value(static_cast<std::int64_t>(std::stoll(next().text))));
        if (t.kind == Tok::Str) return ScalarExpr::constant_of(Value(next().text));
        if (is("(")) {
            next();
            auto e = sexpr();
            expect(")");
            return e;
        }
        if (is("$")) {
            next();
            return ScalarExpr::param(ident("variable"));
        }
        if (t.kind == Tok::Ident) {
            if (t.text == "null") {
                next();
                return ScalarExpr::constant_of(Value());
            }
            std::string name = next().text;
            if (is(".")) {
                next();
                return ScalarExpr::param(name, ident("field"));
            }
            if (is("(")) {
                next();
                std::vector<ScalarPtr> args;
                while (!is(")")) {
                    args.push_back(sexpr());
                    if (!is(")")) expect(",");
                }
                expect(")");
                return ScalarExpr::call(name, std::move(args));
            }
            return ScalarExpr::column(name);
        }
        fail({"expression"});
    }
};

/// Use-before-definition and unreachable-code checks, in textual order.
class Checker
{
public:
    void function(const ast::FunctionDef &f)
    {
        defined_.clear();
        for (auto &p : f.params) defined_.insert(p.name);
        block(f.body);
    }

private:
    std::set<std::string> defined_;

    void use(const ast::Expr &e)
    {
        if (e.kind == ast::Expr::Kind::Var) require(e.name, e.pos);
        if (e.query) query_params(*e.query, e.pos);
        for (auto &a : e.args) use(*a);
    }

    void query_params(const QueryExpr &q, Position pos)
    {
        std::set<ParamRef> params;
        collect_params(q, params);
        for (auto &p : params) require(p.var, pos);
    }

    void require(const std::string &name, Position pos)
    {
        if (!defined_.count(name)) throw SyntaxError(pos, "use of undefined variable '" + name + "'");
    }

    static bool always_returns(const ast::Stmt &s)
    {
        if (s.kind == ast::Stmt::Kind::Return) return true;
        if (s.kind != ast::Stmt::Kind::If || !s.has_else || s.body.empty() || s.else_body.empty()) return false;
        return always_returns(*s.body.back()) && always_returns(*s.else_body.back());
    }

    void block(const ast::Block &b)
    {
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto &s = *b[i];
            if (always_returns(s) && i + 1 < b.size())
                throw SyntaxError(b[i + 1]->pos, "unreachable statement after return");
            switch (s.kind) {
                case ast::Stmt::Kind::Assign:
                    use(*s.expr);
                    defined_.insert(s.target);
                    break;
                case ast::Stmt::Kind::ForQuery:
                    query_params(*s.query, s.pos);
                    defined_.insert(s.target);
                    block(s.body);
                    break;
                case ast::Stmt::Kind::ForColl:
                    use(*s.expr);
                    defined_.insert(s.target);
                    block(s.body);
                    break;
                case ast::Stmt::Kind::While:
                    use(*s.expr);
                    block(s.body);
                    break;
                case ast::Stmt::Kind::If:
                    use(*s.expr);
                    block(s.body);
                    block(s.else_body);
                    break;
                case ast::Stmt::Kind::Return: use(*s.expr); break;
                case ast::Stmt::Kind::Call:
                    if (s.target != "Console") require(s.target, s.pos);
                    for (auto &a : s.args) use(*a);
                    break;
                case ast::Stmt::Kind::Prefetch: break;
            }
        }
    }
};

}

ast::Program parse(const std::string &source)
{
    Parser parser(lex(source));
    ast::Program p = parser.program();
    std::set<std::string> names;
    for (auto &f : p.functions) {
        if (!names.insert(f.name).second) throw SyntaxError(f.pos, "duplicate function '" + f.name + "'");
        Checker().function(f);
    }
    return p;
}

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(path + ": no such file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}
