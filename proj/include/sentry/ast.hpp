#pragma once

// Abstract syntax tree for MiniSol, the Solidity subset accepted by the
// frontend. The grammar is documented in docs/grammar.md.

#include "sentry/bigint.hpp"
#include "sentry/source_location.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sentry {

struct TypeName {
    enum class Kind { Uint, Int, Bool, Address, Mapping };

    Kind kind = Kind::Uint;
    unsigned width = 256;          // bit width; 160 for address, 1 for bool
    std::vector<TypeName> mapping; // [key, value] when kind == Mapping

    static TypeName uint(unsigned w = 256) { return {Kind::Uint, w, {}}; }
    static TypeName sint(unsigned w = 256) { return {Kind::Int, w, {}}; }
    static TypeName boolean() { return {Kind::Bool, 1, {}}; }
    static TypeName address() { return {Kind::Address, 160, {}}; }
    static TypeName map(TypeName key, TypeName value) {
        return {Kind::Mapping, 0, {std::move(key), std::move(value)}};
    }

    bool is_mapping() const { return kind == Kind::Mapping; }
    bool is_signed() const { return kind == Kind::Int; }
    const TypeName& key() const { return mapping.at(0); }
    const TypeName& value() const { return mapping.at(1); }

    // Inclusive value range of a scalar type.
    BigInt min_value() const;
    BigInt max_value() const;

    friend bool operator==(const TypeName&, const TypeName&) = default;
};

std::string to_string(const TypeName& ty);

enum class BinaryOp { Add, Sub, Mul, Div, Mod, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class UnaryOp { Not, Neg };
enum class MemberKind { BlockTimestamp, MsgSender, MsgValue, SelfBalance };

const char* to_string(BinaryOp op);
bool is_arithmetic(BinaryOp op);
bool is_comparison(BinaryOp op);

struct Expr {
    enum class Kind { Literal, Ident, Binary, Unary, Index, Member, Call, Cast };

    Kind kind = Kind::Literal;
    SourceLocation loc;
    BigInt value;              // Literal
    bool bool_literal = false; // Literal spelled true/false
    std::string name;          // Ident, Call callee
    BinaryOp binary = BinaryOp::Add;
    UnaryOp unary = UnaryOp::Not;
    MemberKind member = MemberKind::BlockTimestamp;
    std::optional<TypeName> cast_to; // Cast
    // Binary: [lhs, rhs]; Unary/Cast: [operand]; Index: [base, key]; Call: args.
    std::vector<Expr> operands;
};

struct VarDecl {
    std::string name;
    TypeName ty;
    SourceLocation loc;
};

enum class ExternalCallKind { Call, Send, Transfer };

const char* to_string(ExternalCallKind kind);

struct Stmt {
    enum class Kind {
        VarDecl,
        Assign,
        If,
        While,
        For,
        Require,
        Assert,
        Return,
        Revert,
        ExprStmt,
        ExternalCall,
        EmitLog,
        Block,
    };

    Kind kind = Kind::Block;
    SourceLocation loc;
    std::optional<VarDecl> decl; // VarDecl; ExternalCall result binding
    // VarDecl: [init?]; Assign: [target, value]; If/While/For/Require/Assert:
    // [cond] (For may omit it); Return: [value?]; ExprStmt: [call];
    // ExternalCall: [recipient, amount]; EmitLog: event arguments.
    std::vector<Expr> exprs;
    std::vector<Stmt> body;      // If then-branch, loop body, Block contents
    std::vector<Stmt> else_body; // If
    std::vector<Stmt> init;      // For: zero or one statement
    std::vector<Stmt> update;    // For: zero or one statement
    std::string text;            // revert/require reason, event name
    ExternalCallKind call_kind = ExternalCallKind::Call;
    bool require_wrapped = false; // require(x.send(v)) and friends
};

enum class Visibility { Public, External, Internal, Private };

const char* to_string(Visibility v);

struct BaseCall {
    std::string base;
    std::vector<Expr> args;
    SourceLocation loc;
};

struct FunctionDef {
    std::string name; // "<init>" for constructors
    std::vector<VarDecl> params;
    std::vector<VarDecl> returns; // at most one
    Visibility visibility = Visibility::Public;
    bool is_payable = false;
    bool is_constructor = false;
    std::vector<BaseCall> base_calls; // constructor only
    std::vector<Stmt> body;
    SourceLocation loc;

    bool is_entry() const {
        return visibility == Visibility::Public || visibility == Visibility::External;
    }
};

struct EventDef {
    std::string name;
    std::vector<VarDecl> params;
    SourceLocation loc;
};

struct ContractDef {
    std::string name;
    std::vector<std::string> bases;
    std::vector<VarDecl> state_vars;
    std::vector<FunctionDef> functions;
    std::vector<EventDef> events;
    SourceLocation loc;

    const FunctionDef* find_function(std::string_view fn) const;
    const FunctionDef* constructor() const { return find_function("<init>"); }
};

struct SourceUnit {
    std::string path;
    std::vector<ContractDef> contracts;
    std::size_t line_count = 0;

    const ContractDef* find_contract(std::string_view name) const;
};

inline constexpr const char* kConstructorName = "<init>";

// Location-insensitive structural equality.
bool same_structure(const Expr& a, const Expr& b);
bool same_structure(const Stmt& a, const Stmt& b);
bool same_structure(const SourceUnit& a, const SourceUnit& b);

} // namespace sentry
