#include "sentry/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace sentry {

namespace {

// ---------------------------------------------------------------- lexer --

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourceLocation loc;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space_and_comments();
            Token t;
            t.loc = here();
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
                t.kind = Tok::Ident;
                while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                              src_[pos_] == '_' || src_[pos_] == '$'))
                    advance();
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t.kind = Tok::Number;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                    advance();
            } else if (c == '"' || c == '\'') {
                t.kind = Tok::String;
                advance();
                while (pos_ < src_.size() && src_[pos_] != c) {
                    if (src_[pos_] == '\\')
                        advance();
                    if (src_[pos_] == '\n')
                        throw SyntaxError("unterminated string literal", t.loc);
                    advance();
                }
                if (pos_ >= src_.size())
                    throw SyntaxError("unterminated string literal", t.loc);
                advance();
            } else {
                t.kind = Tok::Punct;
                static const char* const kTwo[] = {"==", "!=", "<=", ">=", "&&", "||", "+=", "-=",
                                                   "*=", "/=", "%=", "++", "--", "=>", "**", "<<",
                                                   ">>"};
                std::size_t len = 1;
                for (const char* two : kTwo)
                    if (src_.substr(pos_, 2) == two)
                        len = 2;
                if (len == 1 && std::string_view("{}()[];,.=<>+-*/%!:?&|^~").find(c) == std::string_view::npos)
                    throw SyntaxError(std::string("unexpected character '") + c + "'", t.loc);
                for (std::size_t i = 0; i < len; ++i)
                    advance();
            }
            t.text = std::string(src_.substr(t.loc.offset, pos_ - t.loc.offset));
            t.loc.length = static_cast<std::uint32_t>(pos_ - t.loc.offset);
            out.push_back(std::move(t));
        }
    }

private:
    SourceLocation here() const {
        SourceLocation l;
        l.offset = static_cast<std::uint32_t>(pos_);
        l.line = line_;
        l.column = col_;
        return l;
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space_and_comments() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (src_.substr(pos_, 2) == "//") {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    advance();
            } else if (src_.substr(pos_, 2) == "/*") {
                SourceLocation start = here();
                advance();
                advance();
                while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/")
                    advance();
                if (pos_ >= src_.size())
                    throw SyntaxError("unterminated block comment", start);
                advance();
                advance();
            } else {
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::uint32_t line_ = 1;
    std::uint32_t col_ = 1;
};

// --------------------------------------------------------------- parser --

const std::set<std::string, std::less<>> kUnsupportedTop = {
    "library", "interface", "import", "using", "struct", "enum", "abstract", "assembly"};
const std::set<std::string, std::less<>> kUnsupportedBody = {
    "assembly", "delegatecall", "selfdestruct", "suicide", "unchecked", "try", "do",
    "break", "continue", "tx", "new", "delete", "struct", "enum", "using", "callcode"};

bool is_type_keyword(std::string_view s) {
    if (s == "bool" || s == "address" || s == "mapping" || s == "uint" || s == "int")
        return true;
    auto digits = [](std::string_view d) {
        return !d.empty() && std::all_of(d.begin(), d.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    };
    if (s.starts_with("uint") && digits(s.substr(4)))
        return true;
    if (s.starts_with("int") && digits(s.substr(3)))
        return true;
    return s == "string" || (s.starts_with("bytes") && (s.size() == 5 || digits(s.substr(5))));
}

struct ExtCallParts {
    ExternalCallKind kind;
    Expr recipient;
    Expr amount;
    SourceLocation loc;
};

struct PendingFunction {
    FunctionDef def;
    std::vector<std::pair<Token, std::vector<Expr>>> attrs; // identifier attributes
};

struct PendingContract {
    ContractDef def;
    std::vector<PendingFunction> functions;
    std::map<std::string, std::vector<Stmt>, std::less<>> modifiers;
};

class Parser {
public:
    Parser(std::vector<Token> toks, std::string path) : toks_(std::move(toks)), path_(std::move(path)) {}

    SourceUnit run() {
        std::vector<PendingContract> pending;
        while (!at_end()) {
            if (is("pragma")) {
                while (!at_end() && !is(";"))
                    next();
                expect(";");
            } else if (is("contract")) {
                pending.push_back(contract());
            } else if (peek().kind == Tok::Ident && kUnsupportedTop.count(peek().text)) {
                throw UnsupportedFeature("'" + peek().text + "' is outside the MiniSol subset", peek().loc);
            } else {
                fail("'contract' or 'pragma'");
            }
        }
        return finish(std::move(pending));
    }

private:
    // -- token helpers
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Tok::End; }
    bool is(std::string_view text, std::size_t k = 0) const {
        const Token& t = peek(k);
        return (t.kind == Tok::Punct || t.kind == Tok::Ident) && t.text == text;
    }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool accept(std::string_view text) {
        if (is(text)) {
            next();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(std::string_view expected) const {
        const Token& t = peek();
        std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        throw SyntaxError(path_ + ":" + to_string(t.loc) + ": expected " + std::string(expected) +
                              " but found " + found,
                          t.loc);
    }
    const Token& expect(std::string_view text) {
        if (!is(text))
            fail("'" + std::string(text) + "'");
        return next();
    }
    std::string ident(std::string_view what = "identifier") {
        if (peek().kind != Tok::Ident)
            fail(what);
        check_unsupported(peek());
        return next().text;
    }
    void check_unsupported(const Token& t) const {
        if (t.kind == Tok::Ident && kUnsupportedBody.count(t.text))
            throw UnsupportedFeature("'" + t.text + "' is outside the MiniSol subset", t.loc);
    }
    SourceLocation span_from(const SourceLocation& start) const {
        SourceLocation l = start;
        const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
        std::uint32_t end = last.loc.offset + last.loc.length;
        l.length = end > start.offset ? end - start.offset : 0;
        return l;
    }

    // -- types
    TypeName type_name() {
        const Token& t = peek();
        if (t.kind != Tok::Ident || !is_type_keyword(t.text))
            fail("type name");
        next();
        const std::string& s = t.text;
        if (s == "mapping") {
            expect("(");
            TypeName key = type_name();
            if (key.is_mapping())
                throw SyntaxError("mapping keys must be scalar types", t.loc);
            expect("=>");
            TypeName value = type_name();
            expect(")");
            return TypeName::map(std::move(key), std::move(value));
        }
        if (s == "bool")
            return TypeName::boolean();
        if (s == "address") {
            accept("payable");
            return TypeName::address();
        }
        if (s == "string" || s.starts_with("bytes"))
            throw UnsupportedFeature("type '" + s + "' is outside the MiniSol subset", t.loc);
        bool is_signed = s.starts_with("int");
        std::string digits = s.substr(is_signed ? 3 : 4);
        unsigned width = digits.empty() ? 256 : static_cast<unsigned>(std::stoul(digits));
        if (width != 8 && width != 16 && width != 32 && width != 64 && width != 128 && width != 256)
            throw UnsupportedFeature("integer width " + digits + " is outside the MiniSol subset", t.loc);
        if (is("["))
            throw UnsupportedFeature("arrays are outside the MiniSol subset", peek().loc);
        return is_signed ? TypeName::sint(width) : TypeName::uint(width);
    }

    void skip_data_location() {
        while (is("memory") || is("storage") || is("calldata") || is("indexed"))
            next();
    }

    std::vector<VarDecl> param_list(bool names_required) {
        std::vector<VarDecl> out;
        expect("(");
        if (!is(")")) {
            do {
                VarDecl d;
                d.loc = peek().loc;
                d.ty = type_name();
                if (d.ty.is_mapping())
                    throw SyntaxError("mapping parameters are not allowed", d.loc);
                skip_data_location();
                if (peek().kind == Tok::Ident)
                    d.name = ident();
                else if (names_required)
                    fail("parameter name");
                d.loc = span_from(d.loc);
                out.push_back(std::move(d));
            } while (accept(","));
        }
        expect(")");
        return out;
    }

    // -- contracts
    PendingContract contract() {
        PendingContract pc;
        pc.def.loc = expect("contract").loc;
        pc.def.name = ident("contract name");
        if (accept("is")) {
            do {
                pc.def.bases.push_back(ident("base contract name"));
                if (is("("))
                    throw UnsupportedFeature("base constructor arguments in the inheritance list; "
                                             "pass them in the constructor header",
                                             peek().loc);
            } while (accept(","));
        }
        expect("{");
        while (!is("}")) {
            if (at_end())
                fail("'}'");
            member(pc);
        }
        expect("}");
        pc.def.loc = span_from(pc.def.loc);
        return pc;
    }

    void member(PendingContract& pc) {
        const Token& t = peek();
        if (t.kind != Tok::Ident)
            fail("contract member");
        if (t.text == "function" || t.text == "constructor") {
            pc.functions.push_back(function(pc.def.name));
        } else if (t.text == "modifier") {
            next();
            std::string name = ident("modifier name");
            if (accept("(")) {
                if (!is(")"))
                    throw UnsupportedFeature("modifiers with parameters are outside the MiniSol subset", peek().loc);
                expect(")");
            }
            in_modifier_ = true;
            auto body = block();
            in_modifier_ = false;
            pc.modifiers[name] = std::move(body);
        } else if (t.text == "event") {
            EventDef e;
            e.loc = next().loc;
            e.name = ident("event name");
            e.params = param_list(false);
            expect(";");
            e.loc = span_from(e.loc);
            pc.def.events.push_back(std::move(e));
        } else if (is_type_keyword(t.text)) {
            VarDecl d;
            d.loc = t.loc;
            d.ty = type_name();
            while (is("public") || is("private") || is("internal"))
                next();
            if (is("constant") || is("immutable"))
                throw UnsupportedFeature("constant state variables are outside the MiniSol subset", peek().loc);
            d.name = ident("state variable name");
            if (is("="))
                throw UnsupportedFeature("state variable initializers are outside the MiniSol subset; "
                                         "assign in the constructor",
                                         peek().loc);
            expect(";");
            d.loc = span_from(d.loc);
            pc.def.state_vars.push_back(std::move(d));
        } else if (kUnsupportedTop.count(t.text) || kUnsupportedBody.count(t.text)) {
            throw UnsupportedFeature("'" + t.text + "' is outside the MiniSol subset", t.loc);
        } else {
            fail("contract member");
        }
    }

    PendingFunction function(const std::string& contract_name) {
        PendingFunction pf;
        FunctionDef& f = pf.def;
        const Token& kw = next();
        f.loc = kw.loc;
        if (kw.text == "constructor") {
            f.is_constructor = true;
        } else {
            if (is("("))
                throw UnsupportedFeature("fallback functions are outside the MiniSol subset", kw.loc);
            f.name = ident("function name");
            if (f.name == contract_name)
                f.is_constructor = true;
        }
        if (f.is_constructor)
            f.name = kConstructorName;
        f.params = param_list(true);
        for (;;) {
            if (accept("public")) {
                f.visibility = Visibility::Public;
            } else if (accept("external")) {
                f.visibility = Visibility::External;
            } else if (accept("internal")) {
                f.visibility = Visibility::Internal;
            } else if (accept("private")) {
                f.visibility = Visibility::Private;
            } else if (accept("payable")) {
                f.is_payable = true;
            } else if (accept("view") || accept("pure") || accept("constant") || accept("virtual") ||
                       accept("override")) {
            } else if (accept("returns")) {
                f.returns = param_list(false);
                if (f.returns.size() > 1)
                    throw UnsupportedFeature("multiple return values are outside the MiniSol subset", kw.loc);
            } else if (peek().kind == Tok::Ident && !is("{")) {
                Token name = next();
                check_unsupported(name);
                std::vector<Expr> args;
                if (accept("(")) {
                    if (!is(")")) {
                        do
                            args.push_back(expression());
                        while (accept(","));
                    }
                    expect(")");
                }
                pf.attrs.emplace_back(std::move(name), std::move(args));
            } else {
                break;
            }
        }
        if (is(";"))
            throw UnsupportedFeature("functions without a body are outside the MiniSol subset", peek().loc);
        f.body = block();
        f.loc = span_from(f.loc);
        std::set<std::string> seen;
        for (const auto& p : f.params)
            if (!p.name.empty() && !seen.insert(p.name).second)
                throw SyntaxError("duplicate parameter '" + p.name + "'", p.loc);
        return pf;
    }

    // -- statements
    std::vector<Stmt> block() {
        expect("{");
        std::vector<Stmt> out;
        while (!is("}")) {
            if (at_end())
                fail("'}'");
            out.push_back(statement());
        }
        expect("}");
        return out;
    }

    std::vector<Stmt> branch_body() {
        if (is("{"))
            return block();
        std::vector<Stmt> one;
        one.push_back(statement());
        return one;
    }

    Stmt statement() {
        const Token& t = peek();
        Stmt s;
        s.loc = t.loc;
        check_unsupported(t);
        if (is("{")) {
            s.kind = Stmt::Kind::Block;
            s.body = block();
        } else if (accept("if")) {
            s.kind = Stmt::Kind::If;
            expect("(");
            s.exprs.push_back(expression());
            expect(")");
            s.body = branch_body();
            if (accept("else"))
                s.else_body = branch_body();
        } else if (accept("while")) {
            s.kind = Stmt::Kind::While;
            expect("(");
            s.exprs.push_back(expression());
            expect(")");
            s.body = branch_body();
        } else if (accept("for")) {
            s.kind = Stmt::Kind::For;
            expect("(");
            if (!accept(";")) {
                s.init.push_back(simple_statement(true));
                expect(";");
            }
            if (!is(";"))
                s.exprs.push_back(expression());
            expect(";");
            if (!is(")"))
                s.update.push_back(simple_statement(false));
            expect(")");
            s.body = branch_body();
        } else if (is("require") || is("assert")) {
            bool req = next().text == "require";
            s.kind = req ? Stmt::Kind::Require : Stmt::Kind::Assert;
            expect("(");
            Expr cond = expression();
            if (is_external_call_tail()) {
                ExtCallParts call = external_call_tail(std::move(cond));
                s.kind = Stmt::Kind::ExternalCall;
                s.call_kind = call.kind;
                s.require_wrapped = true;
                s.exprs.push_back(std::move(call.recipient));
                s.exprs.push_back(std::move(call.amount));
            } else {
                s.exprs.push_back(std::move(cond));
            }
            if (accept(",")) {
                if (peek().kind != Tok::String)
                    fail("reason string");
                s.text = unquote(next().text);
            }
            expect(")");
            expect(";");
        } else if (accept("return")) {
            s.kind = Stmt::Kind::Return;
            if (!is(";"))
                s.exprs.push_back(expression());
            expect(";");
        } else if (accept("revert")) {
            s.kind = Stmt::Kind::Revert;
            expect("(");
            if (peek().kind == Tok::String)
                s.text = unquote(next().text);
            expect(")");
            expect(";");
        } else if (accept("throw")) {
            s.kind = Stmt::Kind::Revert;
            expect(";");
        } else if (accept("emit")) {
            s.kind = Stmt::Kind::EmitLog;
            s.text = ident("event name");
            expect("(");
            if (!is(")")) {
                do
                    s.exprs.push_back(expression());
                while (accept(","));
            }
            expect(")");
            expect(";");
        } else if (is("_") && is(";", 1)) {
            if (!in_modifier_)
                throw SyntaxError("placeholder '_' outside a modifier", t.loc);
            next();
            next();
            s.kind = Stmt::Kind::ExprStmt;
            s.text = "_";
        } else {
            s = simple_statement(true);
            expect(";");
        }
        s.loc = span_from(s.loc);
        return s;
    }

    // Declarations, assignments, calls; no trailing ';'.
    Stmt simple_statement(bool allow_decl) {
        Stmt s;
        s.loc = peek().loc;
        if (peek().kind == Tok::Ident && is_type_keyword(peek().text) && !is("(", 1)) {
            if (!allow_decl)
                fail("assignment");
            VarDecl d;
            d.loc = peek().loc;
            d.ty = type_name();
            if (d.ty.is_mapping())
                throw UnsupportedFeature("local mappings are outside the MiniSol subset", d.loc);
            skip_data_location();
            d.name = ident("variable name");
            d.loc = span_from(d.loc);
            s.kind = Stmt::Kind::VarDecl;
            if (accept("=")) {
                Expr init = expression();
                if (is_external_call_tail()) {
                    ExtCallParts call = external_call_tail(std::move(init));
                    s.kind = Stmt::Kind::ExternalCall;
                    s.call_kind = call.kind;
                    s.exprs.push_back(std::move(call.recipient));
                    s.exprs.push_back(std::move(call.amount));
                } else {
                    s.exprs.push_back(std::move(init));
                }
            }
            s.decl = std::move(d);
            s.loc = span_from(s.loc);
            return s;
        }
        Expr lhs = expression();
        if (is_external_call_tail()) {
            ExtCallParts call = external_call_tail(std::move(lhs));
            s.kind = Stmt::Kind::ExternalCall;
            s.call_kind = call.kind;
            s.exprs.push_back(std::move(call.recipient));
            s.exprs.push_back(std::move(call.amount));
            s.loc = span_from(s.loc);
            return s;
        }
        static const std::pair<const char*, BinaryOp> kCompound[] = {
            {"+=", BinaryOp::Add}, {"-=", BinaryOp::Sub}, {"*=", BinaryOp::Mul},
            {"/=", BinaryOp::Div}, {"%=", BinaryOp::Mod}};
        auto require_lvalue = [&](const Expr& e) {
            if (e.kind != Expr::Kind::Ident && e.kind != Expr::Kind::Index)
                throw SyntaxError("left side of assignment is not assignable", e.loc);
        };
        if (is("=")) {
            next();
            require_lvalue(lhs);
            s.kind = Stmt::Kind::Assign;
            Expr rhs = expression();
            if (is_external_call_tail())
                throw UnsupportedFeature("assigning an external call result to an existing variable; "
                                         "declare a new local instead",
                                         peek().loc);
            s.exprs.push_back(std::move(lhs));
            s.exprs.push_back(std::move(rhs));
        } else if (is("++") || is("--")) {
            require_lvalue(lhs);
            const Token& op = next();
            Expr one;
            one.kind = Expr::Kind::Literal;
            one.value = 1;
            one.loc = op.loc;
            s.kind = Stmt::Kind::Assign;
            s.exprs.push_back(lhs);
            s.exprs.push_back(make_binary(op.text == "++" ? BinaryOp::Add : BinaryOp::Sub, std::move(lhs),
                                          std::move(one), span_from(s.loc)));
        } else {
            bool compound = false;
            for (const auto& [text, op] : kCompound) {
                if (is(text)) {
                    next();
                    require_lvalue(lhs);
                    Expr rhs = expression();
                    s.kind = Stmt::Kind::Assign;
                    s.exprs.push_back(lhs);
                    s.exprs.push_back(make_binary(op, std::move(lhs), std::move(rhs), span_from(s.loc)));
                    compound = true;
                    break;
                }
            }
            if (!compound) {
                if (lhs.kind != Expr::Kind::Call)
                    fail("assignment or call");
                s.kind = Stmt::Kind::ExprStmt;
                s.exprs.push_back(std::move(lhs));
            }
        }
        s.loc = span_from(s.loc);
        return s;
    }

    bool is_external_call_tail() const {
        return is(".") && (is("transfer", 1) || is("send", 1) || is("call", 1));
    }

    ExtCallParts external_call_tail(Expr recipient) {
        if (recipient.kind == Expr::Kind::Binary || recipient.kind == Expr::Kind::Unary ||
            recipient.kind == Expr::Kind::Literal)
            throw UnsupportedFeature("external calls nested inside expressions are outside the MiniSol subset",
                                     peek().loc);
        ExtCallParts call;
        call.loc = recipient.loc;
        expect(".");
        const Token& m = next();
        Expr zero;
        zero.kind = Expr::Kind::Literal;
        zero.value = 0;
        zero.loc = m.loc;
        if (m.text == "transfer" || m.text == "send") {
            call.kind = m.text == "transfer" ? ExternalCallKind::Transfer : ExternalCallKind::Send;
            expect("(");
            call.amount = expression();
            expect(")");
        } else {
            call.kind = ExternalCallKind::Call;
            call.amount = zero;
            if (accept("{")) {
                do {
                    std::string key = ident("call option");
                    expect(":");
                    Expr v = expression();
                    if (key == "value")
                        call.amount = std::move(v);
                    else if (key != "gas")
                        throw SyntaxError("unknown call option '" + key + "'", m.loc);
                } while (accept(","));
                expect("}");
            }
            while (is(".") && (is("value", 1) || is("gas", 1))) {
                next();
                bool value = next().text == "value";
                expect("(");
                Expr v = expression();
                expect(")");
                if (value)
                    call.amount = std::move(v);
            }
            expect("(");
            if (!is(")")) {
                do {
                    if (peek().kind == Tok::String)
                        next();
                    else
                        expression();
                } while (accept(","));
            }
            expect(")");
        }
        call.recipient = std::move(recipient);
        call.loc = span_from(call.loc);
        return call;
    }

    // -- expressions
    static Expr make_binary(BinaryOp op, Expr lhs, Expr rhs, SourceLocation loc) {
        Expr e;
        e.kind = Expr::Kind::Binary;
        e.binary = op;
        e.loc = loc;
        e.operands.push_back(std::move(lhs));
        e.operands.push_back(std::move(rhs));
        return e;
    }

    Expr expression() { return binary(0); }

    // Precedence levels, loosest first.
    Expr binary(int level) {
        static const std::vector<std::vector<std::pair<const char*, BinaryOp>>> kLevels = {
            {{"||", BinaryOp::Or}},
            {{"&&", BinaryOp::And}},
            {{"==", BinaryOp::Eq}, {"!=", BinaryOp::Ne}},
            {{"<", BinaryOp::Lt}, {"<=", BinaryOp::Le}, {">", BinaryOp::Gt}, {">=", BinaryOp::Ge}},
            {{"+", BinaryOp::Add}, {"-", BinaryOp::Sub}},
            {{"*", BinaryOp::Mul}, {"/", BinaryOp::Div}, {"%", BinaryOp::Mod}},
        };
        if (level == static_cast<int>(kLevels.size()))
            return unary();
        SourceLocation start = peek().loc;
        Expr lhs = binary(level + 1);
        for (;;) {
            if (is("**") || is("&") || is("|") || is("^") || is("<<") || is(">>") || is("~") || is("?"))
                throw UnsupportedFeature("operator '" + peek().text + "' is outside the MiniSol subset",
                                         peek().loc);
            bool matched = false;
            for (const auto& [text, op] : kLevels[level]) {
                if (is(text)) {
                    next();
                    Expr rhs = binary(level + 1);
                    lhs = make_binary(op, std::move(lhs), std::move(rhs), span_from(start));
                    matched = true;
                    break;
                }
            }
            if (!matched)
                return lhs;
        }
    }

    Expr unary() {
        SourceLocation start = peek().loc;
        if (accept("!")) {
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.unary = UnaryOp::Not;
            e.operands.push_back(unary());
            e.loc = span_from(start);
            return e;
        }
        if (accept("-")) {
            Expr inner = unary();
            if (inner.kind == Expr::Kind::Literal && !inner.bool_literal) {
                inner.value = -inner.value;
                inner.loc = span_from(start);
                return inner;
            }
            Expr e;
            e.kind = Expr::Kind::Unary;
            e.unary = UnaryOp::Neg;
            e.operands.push_back(std::move(inner));
            e.loc = span_from(start);
            return e;
        }
        return postfix();
    }

    Expr postfix() {
        SourceLocation start = peek().loc;
        Expr e = primary();
        for (;;) {
            if (accept("[")) {
                Expr idx;
                idx.kind = Expr::Kind::Index;
                idx.operands.push_back(std::move(e));
                idx.operands.push_back(expression());
                expect("]");
                idx.loc = span_from(start);
                e = std::move(idx);
            } else if (is("(") && e.kind == Expr::Kind::Ident) {
                next();
                Expr call;
                call.kind = Expr::Kind::Call;
                call.name = e.name;
                if (!is(")")) {
                    do
                        call.operands.push_back(expression());
                    while (accept(","));
                }
                expect(")");
                call.loc = span_from(start);
                e = std::move(call);
            } else if (is(".") && !is_external_call_tail()) {
                const Token& m = peek(1);
                if (m.text == "delegatecall" || m.text == "callcode")
                    throw UnsupportedFeature("'" + m.text + "' is outside the MiniSol subset", m.loc);
                throw UnsupportedFeature("member access '." + m.text + "' is outside the MiniSol subset", m.loc);
            } else {
                return e;
            }
        }
    }

    Expr member(MemberKind kind, SourceLocation start) {
        Expr e;
        e.kind = Expr::Kind::Member;
        e.member = kind;
        e.loc = span_from(start);
        return e;
    }

    Expr primary() {
        const Token& t = peek();
        SourceLocation start = t.loc;
        if (t.kind == Tok::Number) {
            next();
            Expr e;
            e.kind = Expr::Kind::Literal;
            try {
                std::string text = t.text;
                BigInt scale = 1;
                if (auto epos = text.find_first_of("eE");
                    epos != std::string::npos && !(text.size() > 1 && (text[1] == 'x' || text[1] == 'X'))) {
                    unsigned exp = static_cast<unsigned>(std::stoul(text.substr(epos + 1)));
                    text = text.substr(0, epos);
                    scale = boost::multiprecision::pow(BigInt(10), exp);
                }
                e.value = parse_bigint(text) * scale;
            } catch (const std::exception&) {
                throw SyntaxError("malformed number literal '" + t.text + "'", t.loc);
            }
            static const std::pair<const char*, unsigned> kUnits[] = {
                {"wei", 0}, {"gwei", 9}, {"szabo", 12}, {"finney", 15}, {"ether", 18}};
            static const std::pair<const char*, unsigned> kTime[] = {
                {"seconds", 1}, {"minutes", 60}, {"hours", 3600}, {"days", 86400}, {"weeks", 604800}};
            for (const auto& [unit, exp] : kUnits)
                if (accept(unit))
                    e.value *= boost::multiprecision::pow(BigInt(10), exp);
            for (const auto& [unit, mult] : kTime)
                if (accept(unit))
                    e.value *= mult;
            e.loc = span_from(start);
            return e;
        }
        if (t.kind == Tok::String)
            throw UnsupportedFeature("string values are outside the MiniSol subset", t.loc);
        if (accept("(")) {
            if (is(","))
                throw UnsupportedFeature("tuples are outside the MiniSol subset", peek().loc);
            Expr e = expression();
            expect(")");
            return e;
        }
        if (t.kind != Tok::Ident)
            fail("expression");
        check_unsupported(t);
        if (t.text == "true" || t.text == "false") {
            next();
            Expr e;
            e.kind = Expr::Kind::Literal;
            e.bool_literal = true;
            e.value = t.text == "true" ? 1 : 0;
            e.loc = span_from(start);
            return e;
        }
        if (t.text == "now") {
            next();
            return member(MemberKind::BlockTimestamp, start);
        }
        if (t.text == "block") {
            next();
            expect(".");
            const Token& m = next();
            if (m.text != "timestamp")
                throw UnsupportedFeature("'block." + m.text + "' is outside the MiniSol subset", m.loc);
            return member(MemberKind::BlockTimestamp, start);
        }
        if (t.text == "msg") {
            next();
            expect(".");
            const Token& m = next();
            if (m.text == "sender")
                return member(MemberKind::MsgSender, start);
            if (m.text == "value")
                return member(MemberKind::MsgValue, start);
            throw UnsupportedFeature("'msg." + m.text + "' is outside the MiniSol subset", m.loc);
        }
        if (t.text == "this") {
            next();
            expect(".");
            if (!is("balance"))
                throw UnsupportedFeature("'this' is only supported as this.balance", t.loc);
            next();
            return member(MemberKind::SelfBalance, start);
        }
        if (t.text == "address" && is("(", 1) && is("this", 2)) {
            next();
            next();
            next();
            expect(")");
            expect(".");
            if (!is("balance"))
                throw UnsupportedFeature("'address(this)' is only supported as address(this).balance", t.loc);
            next();
            return member(MemberKind::SelfBalance, start);
        }
        if (t.text == "payable" && is("(", 1)) {
            next();
            next();
            Expr e = expression();
            expect(")");
            return e;
        }
        if (is_type_keyword(t.text) && is("(", 1)) {
            TypeName ty = type_name();
            expect("(");
            Expr inner = expression();
            expect(")");
            Expr e;
            e.kind = Expr::Kind::Cast;
            e.cast_to = std::move(ty);
            e.operands.push_back(std::move(inner));
            e.loc = span_from(start);
            return e;
        }
        next();
        Expr e;
        e.kind = Expr::Kind::Ident;
        e.name = t.text;
        e.loc = span_from(start);
        return e;
    }

    static std::string unquote(const std::string& s) {
        std::string out;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            if (s[i] == '\\' && i + 2 < s.size())
                ++i;
            out.push_back(s[i]);
        }
        return out;
    }

    // -- post-processing: resolve constructor headers and inline modifiers
    SourceUnit finish(std::vector<PendingContract> pending) {
        SourceUnit unit;
        unit.path = path_;
        std::map<std::string, const PendingContract*, std::less<>> by_name;
        for (const auto& pc : pending)
            if (!by_name.emplace(pc.def.name, &pc).second)
                throw SyntaxError("duplicate contract '" + pc.def.name + "'", pc.def.loc);

        for (auto& pc : pending) {
            ContractDef def = pc.def;
            std::set<std::string> names;
            for (auto& pf : pc.functions) {
                FunctionDef f = std::move(pf.def);
                if (!names.insert(f.name).second)
                    throw UnsupportedFeature("function overloading is outside the MiniSol subset ('" +
                                                 f.name + "')",
                                             f.loc);
                std::vector<std::string> mods;
                for (auto& [tok, args] : pf.attrs) {
                    if (f.is_constructor && by_name.count(tok.text)) {
                        BaseCall bc;
                        bc.base = tok.text;
                        bc.args = std::move(args);
                        bc.loc = tok.loc;
                        f.base_calls.push_back(std::move(bc));
                    } else {
                        if (!args.empty())
                            throw UnsupportedFeature("modifiers with arguments are outside the MiniSol subset",
                                                     tok.loc);
                        mods.push_back(tok.text);
                    }
                }
                for (auto it = mods.rbegin(); it != mods.rend(); ++it) {
                    const std::vector<Stmt>* mod = find_modifier(pc, by_name, *it);
                    if (!mod)
                        throw SyntaxError("unknown modifier '" + *it + "'", f.loc);
                    f.body = inline_modifier(*mod, f.body);
                }
                def.functions.push_back(std::move(f));
            }
            unit.contracts.push_back(std::move(def));
        }
        return unit;
    }

    const std::vector<Stmt>* find_modifier(const PendingContract& pc,
                                           const std::map<std::string, const PendingContract*, std::less<>>& by_name,
                                           const std::string& name) {
        std::vector<const PendingContract*> work{&pc};
        std::set<std::string> seen;
        while (!work.empty()) {
            const PendingContract* c = work.back();
            work.pop_back();
            if (!seen.insert(c->def.name).second)
                continue;
            if (auto it = c->modifiers.find(name); it != c->modifiers.end())
                return &it->second;
            for (auto b = c->def.bases.rbegin(); b != c->def.bases.rend(); ++b)
                if (auto it = by_name.find(*b); it != by_name.end())
                    work.push_back(it->second);
        }
        return nullptr;
    }

    static std::vector<Stmt> inline_modifier(const std::vector<Stmt>& mod, const std::vector<Stmt>& body) {
        std::vector<Stmt> out;
        for (const Stmt& s : mod) {
            if (s.kind == Stmt::Kind::ExprStmt && s.text == "_") {
                out.insert(out.end(), body.begin(), body.end());
                continue;
            }
            Stmt copy = s;
            copy.body = inline_modifier(s.body, body);
            copy.else_body = inline_modifier(s.else_body, body);
            out.push_back(std::move(copy));
        }
        return out;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string path_;
    bool in_modifier_ = false;
};

} // namespace

std::size_t count_lines(std::string_view text) {
    if (text.empty())
        return 0;
    std::size_t n = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    return text.back() == '\n' ? n : n + 1;
}

SourceUnit parse(std::string_view source_text, std::string path) {
    Parser p(Lexer(source_text).run(), path);
    SourceUnit unit = p.run();
    unit.line_count = count_lines(source_text);
    return unit;
}

const char* to_string(SizeClass c) {
    switch (c) {
    case SizeClass::Simple: return "simple";
    case SizeClass::Ordinary: return "ordinary";
    case SizeClass::Complex: return "complex";
    }
    return "?";
}

SizeClass classify_size(std::size_t line_count) {
    if (line_count < 50)
        return SizeClass::Simple;
    if (line_count <= 300)
        return SizeClass::Ordinary;
    return SizeClass::Complex;
}

} // namespace sentry
