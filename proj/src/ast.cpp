#include "sentry/ast.hpp"

namespace sentry {

BigInt TypeName::min_value() const {
    if (kind == Kind::Int)
        return -pow2(width - 1);
    return 0;
}

BigInt TypeName::max_value() const {
    switch (kind) {
    case Kind::Bool:
        return 1;
    case Kind::Int:
        return pow2(width - 1) - 1;
    case Kind::Mapping:
        return 0;
    default:
        return pow2(width) - 1;
    }
}

std::string to_string(const TypeName& ty) {
    switch (ty.kind) {
    case TypeName::Kind::Uint:
        return "uint" + std::to_string(ty.width);
    case TypeName::Kind::Int:
        return "int" + std::to_string(ty.width);
    case TypeName::Kind::Bool:
        return "bool";
    case TypeName::Kind::Address:
        return "address";
    case TypeName::Kind::Mapping:
        return "mapping(" + to_string(ty.key()) + " => " + to_string(ty.value()) + ")";
    }
    return "?";
}

const char* to_string(BinaryOp op) {
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
    }
    return "?";
}

bool is_arithmetic(BinaryOp op) {
    return op == BinaryOp::Add || op == BinaryOp::Sub || op == BinaryOp::Mul ||
           op == BinaryOp::Div || op == BinaryOp::Mod;
}

bool is_comparison(BinaryOp op) {
    return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt ||
           op == BinaryOp::Ge || op == BinaryOp::Eq || op == BinaryOp::Ne;
}

const char* to_string(ExternalCallKind kind) {
    switch (kind) {
    case ExternalCallKind::Call: return "call";
    case ExternalCallKind::Send: return "send";
    case ExternalCallKind::Transfer: return "transfer";
    }
    return "?";
}

const char* to_string(Visibility v) {
    switch (v) {
    case Visibility::Public: return "public";
    case Visibility::External: return "external";
    case Visibility::Internal: return "internal";
    case Visibility::Private: return "private";
    }
    return "?";
}

const FunctionDef* ContractDef::find_function(std::string_view fn) const {
    for (const auto& f : functions)
        if (f.name == fn)
            return &f;
    return nullptr;
}

const ContractDef* SourceUnit::find_contract(std::string_view name) const {
    for (const auto& c : contracts)
        if (c.name == name)
            return &c;
    return nullptr;
}

namespace {

template <class T>
bool same_list(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_structure(a[i], b[i]))
            return false;
    return true;
}

bool same_decl(const VarDecl& a, const VarDecl& b) { return a.name == b.name && a.ty == b.ty; }

bool same_decls(const std::vector<VarDecl>& a, const std::vector<VarDecl>& b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_decl(a[i], b[i]))
            return false;
    return true;
}

bool same_function(const FunctionDef& a, const FunctionDef& b) {
    if (a.name != b.name || !same_decls(a.params, b.params) || !same_decls(a.returns, b.returns) ||
        a.visibility != b.visibility || a.is_payable != b.is_payable ||
        a.is_constructor != b.is_constructor || a.base_calls.size() != b.base_calls.size())
        return false;
    for (std::size_t i = 0; i < a.base_calls.size(); ++i)
        if (a.base_calls[i].base != b.base_calls[i].base ||
            !same_list(a.base_calls[i].args, b.base_calls[i].args))
            return false;
    return same_list(a.body, b.body);
}

bool same_contract(const ContractDef& a, const ContractDef& b) {
    if (a.name != b.name || a.bases != b.bases || !same_decls(a.state_vars, b.state_vars) ||
        a.functions.size() != b.functions.size() || a.events.size() != b.events.size())
        return false;
    for (std::size_t i = 0; i < a.functions.size(); ++i)
        if (!same_function(a.functions[i], b.functions[i]))
            return false;
    for (std::size_t i = 0; i < a.events.size(); ++i)
        if (a.events[i].name != b.events[i].name || !same_decls(a.events[i].params, b.events[i].params))
            return false;
    return true;
}

} // namespace

bool same_structure(const Expr& a, const Expr& b) {
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case Expr::Kind::Literal:
        if (a.value != b.value || a.bool_literal != b.bool_literal)
            return false;
        break;
    case Expr::Kind::Ident:
    case Expr::Kind::Call:
        if (a.name != b.name)
            return false;
        break;
    case Expr::Kind::Binary:
        if (a.binary != b.binary)
            return false;
        break;
    case Expr::Kind::Unary:
        if (a.unary != b.unary)
            return false;
        break;
    case Expr::Kind::Member:
        if (a.member != b.member)
            return false;
        break;
    case Expr::Kind::Cast:
        if (a.cast_to != b.cast_to)
            return false;
        break;
    case Expr::Kind::Index:
        break;
    }
    return same_list(a.operands, b.operands);
}

bool same_structure(const Stmt& a, const Stmt& b) {
    if (a.kind != b.kind || a.text != b.text || a.decl.has_value() != b.decl.has_value())
        return false;
    if (a.decl && !same_decl(*a.decl, *b.decl))
        return false;
    if (a.kind == Stmt::Kind::ExternalCall &&
        (a.call_kind != b.call_kind || a.require_wrapped != b.require_wrapped))
        return false;
    return same_list(a.exprs, b.exprs) && same_list(a.body, b.body) &&
           same_list(a.else_body, b.else_body) && same_list(a.init, b.init) &&
           same_list(a.update, b.update);
}

bool same_structure(const SourceUnit& a, const SourceUnit& b) {
    if (a.contracts.size() != b.contracts.size())
        return false;
    for (std::size_t i = 0; i < a.contracts.size(); ++i)
        if (!same_contract(a.contracts[i], b.contracts[i]))
            return false;
    return true;
}

} // namespace sentry
