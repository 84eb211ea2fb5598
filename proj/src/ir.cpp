#include "sentry/dominance.hpp"
#include "sentry/ir.hpp"

#include <sstream>

namespace sentry {

const char* to_string(Op op) {
    switch (op) {
    case Op::Jump: return "JUMP";
    case Op::JumpI: return "JUMPI";
    case Op::JumpDest: return "JUMPDEST";
    case Op::Return: return "RETURN";
    case Op::Revert: return "REVERT";
    case Op::Stop: return "STOP";
    case Op::Assign: return "ASSIGN";
    case Op::ExtCall: return "EXTCALL";
    case Op::LogEmit: return "LOGEMIT";
    case Op::Phi: return "PHI";
    }
    return "?";
}

int jump_kind_index(Op op) {
    switch (op) {
    case Op::Jump: return 0;
    case Op::JumpI: return 1;
    case Op::JumpDest: return 2;
    case Op::Return: return 3;
    case Op::Revert: return 4;
    case Op::Stop: return 5;
    default: return -1;
    }
}

bool is_terminator(Op op) {
    return op == Op::Jump || op == Op::JumpI || op == Op::Return || op == Op::Revert || op == Op::Stop;
}

const char* to_string(EnvKind k) {
    switch (k) {
    case EnvKind::Timestamp: return "block.timestamp";
    case EnvKind::Sender: return "msg.sender";
    case EnvKind::MsgValue: return "msg.value";
    case EnvKind::SelfBalance: return "this.balance";
    }
    return "?";
}

std::vector<ValueId> operands(const Instr& in) {
    std::vector<ValueId> out;
    if (in.op == Op::Phi) {
        for (const auto& [b, v] : in.incoming)
            out.push_back(v);
        return out;
    }
    auto collect = [&](const IrExpr& e) {
        visit(e, [&](const IrExpr& x) {
            if (x.kind == IrExpr::Kind::Var)
                out.push_back(x.ssa);
        });
    };
    for (const auto& k : in.keys)
        collect(k);
    for (const auto& a : in.args)
        collect(a);
    return out;
}

Census& Census::operator+=(const Census& o) {
    K += o.K;
    for (int i = 0; i < 6; ++i)
        J[i] += o.J[i];
    return *this;
}

Census statement_census(const SsaFunction& fn) {
    Census c;
    for (const auto& b : fn.blocks)
        for (const auto& in : b.instrs) {
            if (int j = jump_kind_index(in.op); j >= 0)
                ++c.J[j];
            else if (is_regular(in.op))
                ++c.K;
        }
    return c;
}

Census SsaFunction::census() const { return statement_census(*this); }

std::size_t SsaFunction::instruction_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks)
        n += b.instrs.size();
    return n;
}

std::size_t SsaFunction::phi_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks)
        for (const auto& in : b.instrs)
            n += in.op == Op::Phi;
    return n;
}

const SsaFunction* Program::find(const std::string& id) const {
    for (const auto& f : functions)
        if (f.id == id)
            return &f;
    return nullptr;
}

std::size_t Program::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < functions.size(); ++i)
        if (functions[i].id == id)
            return i;
    return kNone;
}

Census Program::census() const {
    Census c;
    for (const auto& f : functions)
        c += f.census();
    return c;
}

namespace {

Graph successor_graph(const SsaFunction& fn) {
    Graph g(fn.blocks.size());
    for (const auto& b : fn.blocks)
        g[b.id].assign(b.succs.begin(), b.succs.end());
    return g;
}

std::vector<std::uint32_t> exit_blocks(const SsaFunction& fn) {
    std::vector<std::uint32_t> exits;
    for (const auto& b : fn.blocks)
        if (b.succs.empty())
            exits.push_back(b.id);
    return exits;
}

[[noreturn]] void bad(const SsaFunction& fn, BlockId b, const std::string& what) {
    throw std::logic_error(fn.id + " bb" + std::to_string(b) + ": " + what);
}

} // namespace

FunctionAnalysis analyze_function(const SsaFunction& fn) {
    FunctionAnalysis a;
    Graph g = successor_graph(fn);
    a.idom = immediate_dominators(g, fn.entry);
    a.ipdom = immediate_post_dominators(g, exit_blocks(fn));
    a.control_deps = control_dependences(g, a.ipdom);
    return a;
}

bool FunctionAnalysis::dominates(BlockId a, BlockId b) const { return sentry::dominates(idom, a, b); }

bool FunctionAnalysis::post_dominates(BlockId a, BlockId b) const { return sentry::dominates(ipdom, a, b); }

void verify(const SsaFunction& fn) {
    if (fn.blocks.empty())
        throw std::logic_error(fn.id + ": no blocks");
    std::vector<std::vector<BlockId>> preds(fn.blocks.size());
    for (const auto& b : fn.blocks) {
        if (b.instrs.empty())
            bad(fn, b.id, "empty block");
        for (std::size_t i = 0; i < b.instrs.size(); ++i) {
            const Instr& in = b.instrs[i];
            bool last = i + 1 == b.instrs.size();
            if (is_terminator(in.op) != last)
                bad(fn, b.id, last ? "missing terminator" : "terminator before end of block");
            if (in.op == Op::Phi && i > 0 && b.instrs[i - 1].op != Op::Phi)
                bad(fn, b.id, "PHI after a non-PHI instruction");
            if (in.op == Op::JumpI && in.args.size() != 1)
                bad(fn, b.id, "JUMPI needs exactly one condition");
        }
        std::size_t want = 0;
        switch (b.terminator().op) {
        case Op::JumpI: want = 2; break;
        case Op::Jump: want = 1; break;
        default: want = 0; break;
        }
        if (b.succs.size() != want)
            bad(fn, b.id, "successor count does not match terminator");
        for (auto s : b.succs) {
            if (s >= fn.blocks.size())
                bad(fn, b.id, "successor out of range");
            preds[s].push_back(b.id);
        }
    }
    for (const auto& b : fn.blocks) {
        if (b.preds != preds[b.id])
            bad(fn, b.id, "predecessor list out of sync");
        for (const auto& in : b.instrs)
            if (in.op == Op::Phi && in.incoming.size() != b.preds.size())
                bad(fn, b.id, "PHI incoming count differs from predecessor count");
    }
    if (!fn.in_ssa)
        return;

    auto an = analyze_function(fn);
    std::vector<int> seen(fn.values.size(), 0);
    for (const auto& b : fn.blocks)
        for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
            const Instr& in = b.instrs[i];
            if (in.dest == kNone)
                continue;
            if (in.dest >= fn.values.size())
                bad(fn, b.id, "value id out of range");
            if (seen[in.dest]++)
                bad(fn, b.id, "value %" + std::to_string(in.dest) + " defined twice");
            const ValueDef& d = fn.values[in.dest];
            if (d.block != b.id || d.instr != i)
                bad(fn, b.id, "value table disagrees with %" + std::to_string(in.dest));
        }
    auto dominates_use = [&](ValueId v, BlockId ub, std::uint32_t ui) {
        if (v >= fn.values.size())
            return false;
        const ValueDef& d = fn.values[v];
        if (d.kind == ValueDef::Kind::Param || d.kind == ValueDef::Kind::Default)
            return true;
        if (d.block == ub)
            return d.instr < ui;
        return an.dominates(d.block, ub);
    };
    for (const auto& b : fn.blocks)
        for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
            const Instr& in = b.instrs[i];
            if (in.op == Op::Phi) {
                for (const auto& [p, v] : in.incoming)
                    if (!dominates_use(v, p, static_cast<std::uint32_t>(fn.blocks[p].instrs.size())))
                        bad(fn, b.id, "PHI operand not available at end of bb" + std::to_string(p));
                continue;
            }
            for (auto v : operands(in))
                if (!dominates_use(v, b.id, i))
                    bad(fn, b.id, "use of %" + std::to_string(v) + " not dominated by its definition");
        }
}

std::string print_expr(const SsaFunction& fn, const IrExpr& e) {
    switch (e.kind) {
    case IrExpr::Kind::Const:
        if (e.ty.kind == TypeName::Kind::Bool)
            return e.value != 0 ? "true" : "false";
        return to_string(e.value);
    case IrExpr::Kind::Var:
        if (e.ssa != kNone)
            return "%" + std::to_string(e.ssa);
        return fn.locals[e.local].name;
    case IrExpr::Kind::Load: {
        std::string s = "sload(" + std::to_string(e.slot) + ")";
        for (const auto& k : e.args)
            s += "[" + print_expr(fn, k) + "]";
        return s;
    }
    case IrExpr::Kind::Env:
        return to_string(e.env);
    case IrExpr::Kind::Binary:
        return "(" + print_expr(fn, e.args[0]) + " " + to_string(e.binary) + " " + print_expr(fn, e.args[1]) + ")";
    case IrExpr::Kind::Unary:
        return std::string(e.unary == UnaryOp::Not ? "!" : "-") + print_expr(fn, e.args[0]);
    case IrExpr::Kind::Call: {
        std::string s = "call " + e.callee + "(";
        for (std::size_t i = 0; i < e.args.size(); ++i)
            s += (i ? ", " : "") + print_expr(fn, e.args[i]);
        return s + ")";
    }
    case IrExpr::Kind::Cast:
        return to_string(e.ty) + "(" + print_expr(fn, e.args[0]) + ")";
    }
    return "?";
}

namespace {

std::string value_name(ValueId v) { return v == kNone ? "?" : "%" + std::to_string(v); }

} // namespace

std::string dump(const SsaFunction& fn) {
    std::ostringstream os;
    os << "function " << fn.id << "(";
    for (std::size_t i = 0; i < fn.param_count; ++i)
        os << (i ? ", " : "") << fn.locals[i].name << ": " << to_string(fn.locals[i].ty);
    os << ")";
    if (fn.return_type)
        os << " returns " << to_string(*fn.return_type);
    if (fn.is_entry)
        os << " entry";
    if (fn.is_payable)
        os << " payable";
    os << "\n";
    for (ValueId v = 0; v < fn.values.size(); ++v) {
        const ValueDef& d = fn.values[v];
        if (d.kind == ValueDef::Kind::Param || d.kind == ValueDef::Kind::Default)
            os << "  %" << v << " = " << (d.kind == ValueDef::Kind::Param ? "param " : "default ")
               << fn.locals[d.local].name << ": " << to_string(d.ty) << "\n";
    }
    for (const auto& b : fn.blocks) {
        os << "  bb" << b.id << ":";
        if (!b.preds.empty()) {
            os << "  ; preds";
            for (auto p : b.preds)
                os << " bb" << p;
        }
        if (b.loop_exit != kNone)
            os << "  ; loop exit bb" << b.loop_exit;
        os << "\n";
        for (const auto& in : b.instrs) {
            os << "    ";
            if (in.dest != kNone)
                os << value_name(in.dest) << " = ";
            os << to_string(in.op);
            switch (in.op) {
            case Op::Assign:
                if (in.target == Instr::Target::Local)
                    os << " " << fn.locals[in.local].name << " :=";
                else if (in.target == Instr::Target::Storage) {
                    os << " sstore(" << in.slot << ")";
                    for (const auto& k : in.keys)
                        os << "[" << print_expr(fn, k) << "]";
                    os << " :=";
                }
                os << " " << print_expr(fn, in.args[0]);
                break;
            case Op::JumpI:
                os << " " << print_expr(fn, in.args[0]) << " -> bb" << b.succs[0] << ", bb" << b.succs[1];
                break;
            case Op::Jump:
                os << " -> bb" << b.succs[0];
                break;
            case Op::Return:
                if (!in.args.empty())
                    os << " " << print_expr(fn, in.args[0]);
                break;
            case Op::Revert:
                if (!in.text.empty())
                    os << " \"" << in.text << "\"";
                break;
            case Op::ExtCall:
                os << " " << to_string(in.call_kind) << " to=" << print_expr(fn, in.args[0])
                   << " value=" << print_expr(fn, in.args[1]) << (in.returns_checked ? " checked" : " unchecked");
                if (in.target == Instr::Target::Local)
                    os << " -> " << fn.locals[in.local].name;
                break;
            case Op::LogEmit:
                os << " " << in.text << "(";
                for (std::size_t i = 0; i < in.args.size(); ++i)
                    os << (i ? ", " : "") << print_expr(fn, in.args[i]);
                os << ")";
                break;
            case Op::Phi:
                os << " " << fn.locals[in.local].name;
                for (const auto& [p, v] : in.incoming)
                    os << " [bb" << p << ": " << value_name(v) << "]";
                break;
            default:
                break;
            }
            if (in.loc.line > 0 && in.op != Op::Phi && in.op != Op::JumpDest)
                os << "  ; line " << in.loc.line;
            os << "\n";
        }
    }
    Census c = fn.census();
    os << "  census K=" << c.K << " J=[" << c.J[0] << "," << c.J[1] << "," << c.J[2] << "," << c.J[3] << ","
       << c.J[4] << "," << c.J[5] << "]\n";
    return os.str();
}

std::string dump(const Program& prog) {
    std::ostringstream os;
    os << "contract " << prog.contract << "\n";
    for (const auto& s : prog.layout.slots)
        os << "slot " << s.index << " " << s.contract << "." << s.name << ": " << to_string(s.ty) << "\n";
    os << "entries:";
    for (auto e : prog.entries)
        os << " " << prog.functions[e].id;
    os << "\n";
    for (const auto& f : prog.functions)
        os << "\n" << dump(f);
    Census c = prog.census();
    os << "\ntotal census K=" << c.K << " J=[" << c.J[0] << "," << c.J[1] << "," << c.J[2] << "," << c.J[3]
       << "," << c.J[4] << "," << c.J[5] << "]\n";
    return os.str();
}

} // namespace sentry
