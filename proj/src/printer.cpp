#include "sentry/frontend.hpp"

#include <sstream>

namespace sentry {

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

std::string operand(const Expr& e) {
    if (e.kind == Expr::Kind::Binary || (e.kind == Expr::Kind::Literal && e.value < 0 && !e.bool_literal))
        return "(" + print(e) + ")";
    return print(e);
}

std::string args(const std::vector<Expr>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i)
        out += (i ? ", " : "") + print(xs[i]);
    return out;
}

std::string decls(const std::vector<VarDecl>& ds) {
    std::string out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out += (i ? ", " : "") + to_string(ds[i].ty);
        if (!ds[i].name.empty())
            out += " " + ds[i].name;
    }
    return out;
}

class StmtPrinter {
public:
    explicit StmtPrinter(std::ostringstream& os) : os_(os) {}

    void list(const std::vector<Stmt>& body, int depth) {
        for (const Stmt& s : body)
            stmt(s, depth);
    }

    std::string simple(const Stmt& s) {
        switch (s.kind) {
        case Stmt::Kind::VarDecl: {
            std::string out = to_string(s.decl->ty) + " " + s.decl->name;
            if (!s.exprs.empty())
                out += " = " + print(s.exprs[0]);
            return out;
        }
        case Stmt::Kind::Assign:
            return print(s.exprs[0]) + " = " + print(s.exprs[1]);
        case Stmt::Kind::ExprStmt:
            return print(s.exprs[0]);
        case Stmt::Kind::ExternalCall: {
            std::string call = operand(s.exprs[0]);
            switch (s.call_kind) {
            case ExternalCallKind::Transfer: call += ".transfer(" + print(s.exprs[1]) + ")"; break;
            case ExternalCallKind::Send: call += ".send(" + print(s.exprs[1]) + ")"; break;
            case ExternalCallKind::Call: call += ".call{value: " + print(s.exprs[1]) + "}(\"\")"; break;
            }
            if (s.require_wrapped)
                return "require(" + call + (s.text.empty() ? "" : ", " + quote(s.text)) + ")";
            if (s.decl)
                return to_string(s.decl->ty) + " " + s.decl->name + " = " + call;
            return call;
        }
        default:
            return "/* unexpected */";
        }
    }

    void stmt(const Stmt& s, int depth) {
        std::string pad(static_cast<std::size_t>(depth) * 4, ' ');
        switch (s.kind) {
        case Stmt::Kind::If:
            os_ << pad << "if (" << print(s.exprs[0]) << ") {\n";
            list(s.body, depth + 1);
            if (!s.else_body.empty()) {
                os_ << pad << "} else {\n";
                list(s.else_body, depth + 1);
            }
            os_ << pad << "}\n";
            break;
        case Stmt::Kind::While:
            os_ << pad << "while (" << print(s.exprs[0]) << ") {\n";
            list(s.body, depth + 1);
            os_ << pad << "}\n";
            break;
        case Stmt::Kind::For:
            os_ << pad << "for (" << (s.init.empty() ? "" : simple(s.init[0])) << "; "
                << (s.exprs.empty() ? "" : print(s.exprs[0])) << "; "
                << (s.update.empty() ? "" : simple(s.update[0])) << ") {\n";
            list(s.body, depth + 1);
            os_ << pad << "}\n";
            break;
        case Stmt::Kind::Block:
            os_ << pad << "{\n";
            list(s.body, depth + 1);
            os_ << pad << "}\n";
            break;
        case Stmt::Kind::Require:
        case Stmt::Kind::Assert:
            os_ << pad << (s.kind == Stmt::Kind::Require ? "require(" : "assert(") << print(s.exprs[0]);
            if (!s.text.empty())
                os_ << ", " << quote(s.text);
            os_ << ");\n";
            break;
        case Stmt::Kind::Return:
            os_ << pad << "return" << (s.exprs.empty() ? "" : " " + print(s.exprs[0])) << ";\n";
            break;
        case Stmt::Kind::Revert:
            os_ << pad << "revert(" << (s.text.empty() ? "" : quote(s.text)) << ");\n";
            break;
        case Stmt::Kind::EmitLog:
            os_ << pad << "emit " << s.text << "(" << args(s.exprs) << ");\n";
            break;
        default:
            os_ << pad << simple(s) << ";\n";
            break;
        }
    }

private:
    std::ostringstream& os_;
};

} // namespace

std::string print(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Literal:
        if (e.bool_literal)
            return e.value != 0 ? "true" : "false";
        return to_string(e.value);
    case Expr::Kind::Ident:
        return e.name;
    case Expr::Kind::Binary:
        return operand(e.operands[0]) + " " + to_string(e.binary) + " " + operand(e.operands[1]);
    case Expr::Kind::Unary:
        return std::string(e.unary == UnaryOp::Not ? "!" : "-") + "(" + print(e.operands[0]) + ")";
    case Expr::Kind::Index:
        return operand(e.operands[0]) + "[" + print(e.operands[1]) + "]";
    case Expr::Kind::Member:
        switch (e.member) {
        case MemberKind::BlockTimestamp: return "block.timestamp";
        case MemberKind::MsgSender: return "msg.sender";
        case MemberKind::MsgValue: return "msg.value";
        case MemberKind::SelfBalance: return "address(this).balance";
        }
        return "?";
    case Expr::Kind::Call:
        return e.name + "(" + args(e.operands) + ")";
    case Expr::Kind::Cast:
        return to_string(*e.cast_to) + "(" + print(e.operands[0]) + ")";
    }
    return "?";
}

std::string print(const SourceUnit& unit) {
    std::ostringstream os;
    StmtPrinter sp(os);
    bool first = true;
    for (const ContractDef& c : unit.contracts) {
        if (!first)
            os << "\n";
        first = false;
        os << "contract " << c.name;
        for (std::size_t i = 0; i < c.bases.size(); ++i)
            os << (i ? ", " : " is ") << c.bases[i];
        os << " {\n";
        for (const VarDecl& v : c.state_vars)
            os << "    " << to_string(v.ty) << " " << v.name << ";\n";
        for (const EventDef& e : c.events)
            os << "    event " << e.name << "(" << decls(e.params) << ");\n";
        for (const FunctionDef& f : c.functions) {
            os << "\n    ";
            if (f.is_constructor)
                os << "constructor(" << decls(f.params) << ") " << to_string(f.visibility);
            else
                os << "function " << f.name << "(" << decls(f.params) << ") " << to_string(f.visibility);
            if (f.is_payable)
                os << " payable";
            for (const BaseCall& b : f.base_calls)
                os << " " << b.base << "(" << args(b.args) << ")";
            if (!f.returns.empty())
                os << " returns (" << decls(f.returns) << ")";
            os << " {\n";
            sp.list(f.body, 2);
            os << "    }\n";
        }
        os << "}\n";
    }
    return os.str();
}

} // namespace sentry
