#pragma once

// Control-flow graph IR in SSA form. Each source statement lowers to one
// instruction carrying an expression tree; the six jump kinds follow the
// EVM opcode names.

#include "sentry/ast.hpp"
#include "sentry/program_model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentry {

class LoweringError : public std::runtime_error {
public:
    LoweringError(const std::string& what, SourceLocation loc) : std::runtime_error(what), loc_(loc) {}
    const SourceLocation& location() const { return loc_; }

private:
    SourceLocation loc_;
};

using ValueId = std::uint32_t;
using BlockId = std::uint32_t;
inline constexpr std::uint32_t kNone = UINT32_MAX;

enum class Op { Jump, JumpI, JumpDest, Return, Revert, Stop, Assign, ExtCall, LogEmit, Phi };

const char* to_string(Op op);

// Index 0..5 in the order JUMP, JUMPI, JUMPDEST, RETURN, REVERT, STOP; -1 otherwise.
int jump_kind_index(Op op);
inline bool is_jump_kind(Op op) { return jump_kind_index(op) >= 0; }
inline bool is_regular(Op op) { return op == Op::Assign || op == Op::ExtCall || op == Op::LogEmit; }
bool is_terminator(Op op);

enum class EnvKind { Timestamp, Sender, MsgValue, SelfBalance };

const char* to_string(EnvKind k);

struct IrExpr {
    enum class Kind { Const, Var, Load, Env, Binary, Unary, Call, Cast };

    Kind kind = Kind::Const;
    TypeName ty;                  // result type
    BigInt value;                 // Const
    std::uint32_t local = kNone;  // Var: local index
    ValueId ssa = kNone;          // Var: SSA value after renaming
    std::uint32_t slot = kNone;   // Load: storage slot; args are mapping keys
    EnvKind env = EnvKind::Timestamp;
    BinaryOp binary = BinaryOp::Add;
    UnaryOp unary = UnaryOp::Not;
    std::string callee;           // Call: resolved function id
    std::vector<IrExpr> args;     // Binary [l, r]; Unary/Cast [x]; Load keys; Call args
    SourceLocation loc;
};

// Calls `fn` on e and every subexpression, children first.
template <class F>
void visit(const IrExpr& e, F&& fn) {
    for (const auto& a : e.args)
        visit(a, fn);
    fn(e);
}

struct Instr {
    enum class Target { None, Local, Storage };

    Op op = Op::Stop;
    ValueId dest = kNone;            // defined value (see SsaFunction::values)
    Target target = Target::None;    // Assign/ExtCall destination
    std::uint32_t local = kNone;     // Target::Local
    std::uint32_t slot = kNone;      // Target::Storage
    std::vector<IrExpr> keys;        // Target::Storage mapping keys
    // Assign: [value]; JumpI: [cond]; Return: [value?]; ExtCall: [recipient, amount];
    // LogEmit: event args.
    std::vector<IrExpr> args;
    ExternalCallKind call_kind = ExternalCallKind::Call;
    bool returns_checked = false;
    std::vector<std::pair<BlockId, ValueId>> incoming; // Phi, ordered like block preds
    std::string text;                                  // revert reason, event name
    SourceLocation loc;
};

// SSA values used by an instruction, in operand order, duplicates kept.
std::vector<ValueId> operands(const Instr& in);

struct Block {
    BlockId id = 0;
    std::vector<Instr> instrs;
    std::vector<BlockId> succs; // JumpI: [taken, fallthrough]
    std::vector<BlockId> preds;
    BlockId loop_exit = kNone;  // set on loop headers

    const Instr& terminator() const { return instrs.back(); }
};

struct Local {
    std::string name;
    TypeName ty;
    bool is_param = false;
    bool hidden = false; // compiler temporary
};

struct ValueDef {
    enum class Kind { Param, Default, Instr, Phi };
    Kind kind = Kind::Default;
    std::uint32_t local = kNone; // variable this value versions, if any
    BlockId block = 0;
    std::uint32_t instr = 0;
    TypeName ty;
};

struct Census {
    std::uint64_t K = 0;
    std::array<std::uint64_t, 6> J{};

    std::uint64_t jumps() const { return J[0] + J[1] + J[2] + J[3] + J[4] + J[5]; }
    std::uint64_t total() const { return K + jumps(); }
    Census& operator+=(const Census& o);
    friend bool operator==(const Census&, const Census&) = default;
};

struct SsaFunction {
    std::string id;    // "Owner.name"
    std::string owner; // contract that defines the function
    std::string name;
    const FunctionDef* def = nullptr; // null for synthesized constructors
    std::vector<Local> locals;        // parameters first
    std::size_t param_count = 0;
    std::optional<TypeName> return_type;
    std::uint32_t return_local = kNone; // named return variable
    bool is_entry = false;
    bool is_payable = false;
    bool is_constructor = false;
    bool in_ssa = false;
    bool instrumented = false;

    std::vector<Block> blocks;
    BlockId entry = 0;
    std::vector<ValueDef> values;

    Census census() const;
    std::size_t instruction_count() const;
    std::size_t phi_count() const;
};

// Functions of one leaf contract after inheritance flattening.
struct Program {
    const SourceUnit* unit = nullptr;
    std::string contract;
    InheritanceGraph ig;
    CallGraph cg;
    StorageLayout layout;
    std::vector<SsaFunction> functions;
    std::vector<std::size_t> entries; // execution order: constructor, then public functions

    const SsaFunction* find(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;
    Census census() const;
};

// Pre-SSA CFG of one function: locals are referenced by index, no PHIs.
SsaFunction lower_to_cfg(const Program& prog, const ContractDef& owner, const FunctionDef& fn);

// Constructor for a contract without one whose bases need constructing.
SsaFunction synthesize_constructor(const Program& prog, const ContractDef& contract);

// Minimal SSA: PHIs on iterated dominance frontiers, renaming on the dominator tree.
SsaFunction to_ssa(SsaFunction cfg);

Census statement_census(const SsaFunction& fn);

// Throws std::logic_error describing the first violated invariant.
void verify(const SsaFunction& fn);

// Lowers every function reachable in `contract` (default: the leaf contract).
Program build_program(const SourceUnit& unit, const std::string& contract = "");

// Dominator and post-dominator information of an SSA function.
struct FunctionAnalysis {
    std::vector<std::uint32_t> idom;
    std::vector<std::uint32_t> ipdom; // index blocks.size() is the virtual exit
    std::vector<std::vector<std::uint32_t>> control_deps;

    bool dominates(BlockId a, BlockId b) const;
    bool post_dominates(BlockId a, BlockId b) const;
};

FunctionAnalysis analyze_function(const SsaFunction& fn);

std::string print_expr(const SsaFunction& fn, const IrExpr& e);
std::string dump(const SsaFunction& fn);
std::string dump(const Program& prog);

} // namespace sentry
