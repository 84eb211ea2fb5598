#include "sentry/executor.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace sentry {

namespace {

struct RevertSignal {};
struct StepLimitSignal {};

const BigInt kInitialBalance = BigInt(1'000'000'000) * BigInt(1'000'000'000'000);

const BigInt& modulus(unsigned width) {
    static const std::vector<BigInt> table = [] {
        std::vector<BigInt> t(257);
        for (unsigned w = 1; w <= 256; ++w)
            t[w] = pow2(w);
        return t;
    }();
    return table.at(width);
}

unsigned value_width(const TypeName& ty) {
    if (ty.kind == TypeName::Kind::Address)
        return 160;
    if (ty.kind == TypeName::Kind::Bool)
        return 1;
    return ty.width;
}

struct Cell {
    BigInt scalar;
    std::map<std::vector<BigInt>, BigInt> entries;
    BigInt fallback; // mapping value for keys without a gene
};

struct State {
    std::vector<Cell> storage;
    BigInt balance;
};

struct Frame {
    std::uint32_t fn = 0;
    std::uint32_t id = 0;
    std::uint32_t depth = 0;
    BigInt msg_value;
    std::vector<BigInt> values;
    BlockId block = 0;
    std::uint32_t instr = 0;
};

class Machine {
public:
    Machine(const Program& prog, const InstrumentedProgram* inst, const InputLayout& layout,
            const InputVector& input, const Limits& lim)
        : prog_(prog), inst_(inst), layout_(layout), input_(input), lim_(lim) {
        if (input.size() != layout.size())
            throw std::invalid_argument("input vector has " + std::to_string(input.size()) +
                                        " genes, layout expects " + std::to_string(layout.size()));
        if (inst_) {
            result_.counters.counters.assign(inst_->counter_count, 0);
            result_.counters.stmt.resize(prog.functions.size());
            for (std::size_t f = 0; f < prog.functions.size(); ++f) {
                const auto& fn = prog.functions[f];
                result_.counters.stmt[f].resize(fn.blocks.size());
                for (const auto& b : fn.blocks)
                    result_.counters.stmt[f][b.id].assign(b.instrs.size(), 0);
            }
        }
    }

    ExecResult run() {
        state_.storage.resize(prog_.layout.slots.size());
        state_.balance = kInitialBalance;
        for (const auto& s : layout_.slots) {
            const BigInt& v = input_[s.index];
            if (s.origin == InputSlot::Origin::Storage) {
                Cell& c = state_.storage[s.slot];
                if (s.symbolic_key)
                    c.fallback = v;
                else if (!s.keys.empty())
                    c.entries[s.keys] = v;
                else
                    c.scalar = v;
            } else if (s.origin == InputSlot::Origin::Env && s.env == EnvKind::Timestamp) {
                timestamp_ = v;
            }
        }
        for (auto fi : prog_.entries) {
            const SsaFunction& fn = prog_.functions[fi];
            std::vector<BigInt> args;
            BigInt value = 0;
            for (const auto& s : layout_.slots) {
                if (s.origin == InputSlot::Origin::Param && s.function == fi)
                    args.push_back(input_[s.index]);
                if (s.origin == InputSlot::Origin::Env && s.env == EnvKind::MsgValue && s.function == fi)
                    value = input_[s.index];
            }
            if (args.size() != fn.param_count)
                throw std::logic_error("input layout does not cover the parameters of " + fn.id);
            ++invocation_;
            entry_fn_ = static_cast<std::uint32_t>(fi);
            entry_args_ = args;
            reentries_left_ = lim_.reentry_count;
            constructed_.clear();
            State snapshot = state_;
            TraceEvent& ev = push(EventKind::Invoke, static_cast<std::uint32_t>(fi), kNone, kNone, 0, 0);
            ev.value = value;
            try {
                state_.balance += value;
                call(static_cast<std::uint32_t>(fi), std::move(args), value, 1);
            } catch (const RevertSignal&) {
                state_ = std::move(snapshot);
            } catch (const StepLimitSignal&) {
                state_ = std::move(snapshot);
                push(EventKind::StepLimit, static_cast<std::uint32_t>(fi), kNone, kNone, 0, 0);
                result_.trace.limit_exceeded = true;
                break;
            }
        }
        if (inst_)
            result_.counters.recount(prog_);
        return std::move(result_);
    }

private:
    const Program& prog_;
    const InstrumentedProgram* inst_;
    const InputLayout& layout_;
    const InputVector& input_;
    Limits lim_;
    ExecResult result_;
    State state_;
    BigInt timestamp_ = 0;
    std::uint64_t steps_ = 0;
    std::uint32_t frames_ = 0;
    std::uint32_t invocation_ = 0;
    std::uint32_t entry_fn_ = 0;
    std::vector<BigInt> entry_args_;
    std::uint32_t reentries_left_ = 0;
    std::set<std::string> constructed_;

    TraceEvent& push(EventKind kind, std::uint32_t fn, BlockId block, std::uint32_t instr,
                     std::uint32_t depth, std::uint32_t frame) {
        auto& events = result_.trace.events;
        TraceEvent& e = events.emplace_back();
        e.id = events.size() - 1;
        e.kind = kind;
        e.fn = fn;
        e.block = block;
        e.instr = instr;
        e.depth = depth;
        e.frame = frame;
        e.invocation = invocation_;
        return e;
    }

    TraceEvent& push(EventKind kind, const Frame& f) {
        return push(kind, f.fn, f.block, f.instr, f.depth, f.id);
    }

    void bump(std::uint32_t counter, const Frame& f) {
        if (!inst_ || counter == kNone)
            return;
        ++result_.counters.counters[counter];
        if (lim_.trace_counters)
            push(EventKind::Counter, f).counter = counter;
    }

    void step() {
        if (++steps_ > lim_.total_steps)
            throw StepLimitSignal{};
    }

    [[noreturn]] void revert(const Frame& f, std::string reason, SourceLocation loc) {
        TraceEvent& e = push(EventKind::Revert, f);
        e.text = std::move(reason);
        e.loc = loc;
        throw RevertSignal{};
    }

    BigInt call(std::uint32_t fi, std::vector<BigInt> args, const BigInt& msg_value, std::uint32_t depth) {
        const SsaFunction& fn = prog_.functions[fi];
        Frame f;
        f.fn = fi;
        f.id = ++frames_;
        f.depth = depth;
        f.msg_value = msg_value;
        f.block = fn.entry;
        if (depth > lim_.max_depth) {
            f.block = kNone;
            f.instr = kNone;
            push(EventKind::DepthLimit, f);
            throw RevertSignal{};
        }
        result_.trace.max_depth = std::max(result_.trace.max_depth, depth);
        f.values.assign(fn.values.size(), BigInt(0));
        for (std::size_t v = 0; v < fn.values.size(); ++v) {
            const ValueDef& d = fn.values[v];
            if (d.kind == ValueDef::Kind::Param)
                f.values[v] = d.local < args.size() ? args[d.local] : BigInt(0);
        }
        return run_blocks(fn, f);
    }

    BigInt run_blocks(const SsaFunction& fn, Frame& f) {
        const InstrumentedFunction* ifn = inst_ ? &inst_->fns[f.fn] : nullptr;
        std::map<BlockId, std::uint32_t> header_visits;
        BlockId prev = kNone;
        BlockId b = fn.entry;
        while (true) {
            const Block& blk = fn.blocks[b];
            f.block = b;
            f.instr = kNone;
            push(EventKind::BlockEntered, f);
            if (ifn)
                bump(ifn->block_counter[b], f);
            // A loop exit resets the visit count of its header.
            for (auto& [h, n] : header_visits)
                if (fn.blocks[h].loop_exit == b)
                    n = 0;
            bool capped = false;
            if (blk.loop_exit != kNone)
                capped = ++header_visits[b] > lim_.max_loop_iter;

            // PHIs read their inputs simultaneously.
            std::vector<std::pair<ValueId, BigInt>> phis;
            std::size_t i = 0;
            for (; i < blk.instrs.size() && blk.instrs[i].op == Op::Phi; ++i) {
                step();
                const Instr& in = blk.instrs[i];
                BigInt v = 0;
                for (const auto& [p, val] : in.incoming)
                    if (p == prev) {
                        v = f.values[val];
                        break;
                    }
                phis.emplace_back(in.dest, std::move(v));
            }
            for (auto& [d, v] : phis)
                f.values[d] = std::move(v);

            BlockId next = kNone;
            for (; i < blk.instrs.size(); ++i) {
                const Instr& in = blk.instrs[i];
                f.instr = static_cast<std::uint32_t>(i);
                step();
                std::uint32_t before = kNone, after = kNone;
                if (ifn) {
                    bump(ifn->stmt_counter[b][i], f);
                    ++result_.counters.stmt[f.fn][b][i];
                    if (in.op == Op::JumpDest) {
                        before = ifn->target_counter[b][0];
                        after = ifn->target_counter[b][1];
                    }
                }
                bump(before, f);
                switch (in.op) {
                case Op::JumpDest:
                    break;
                case Op::Jump:
                    next = blk.succs[0];
                    break;
                case Op::JumpI: {
                    BigInt c = eval(in.args[0], fn, f);
                    bool taken = c != 0;
                    if (in.dest != kNone)
                        f.values[in.dest] = taken ? 1 : 0;
                    push(EventKind::BranchTaken, f).flag = taken;
                    next = taken ? blk.succs[0] : blk.succs[1];
                    break;
                }
                case Op::Return: {
                    BigInt v = in.args.empty() ? BigInt(0) : eval(in.args[0], fn, f);
                    if (in.dest != kNone)
                        f.values[in.dest] = v;
                    push(EventKind::Return, f).value = v;
                    return v;
                }
                case Op::Stop:
                    push(EventKind::Stop, f);
                    return 0;
                case Op::Revert:
                    revert(f, in.text, in.loc);
                case Op::Assign:
                    assign(in, fn, f);
                    break;
                case Op::ExtCall:
                    external_call(in, fn, f);
                    break;
                case Op::LogEmit:
                    for (const auto& a : in.args)
                        eval(a, fn, f);
                    break;
                case Op::Phi:
                    throw std::logic_error("PHI after the start of block " + std::to_string(b));
                }
                bump(after, f);
            }
            if (next == kNone)
                throw std::logic_error("block " + std::to_string(b) + " of " + fn.id + " has no successor");
            if (capped && next != blk.loop_exit) {
                f.instr = kNone;
                push(EventKind::LoopCap, f);
                next = blk.loop_exit;
                const auto& preds = fn.blocks[next].preds;
                prev = std::find(preds.begin(), preds.end(), b) != preds.end() ? b : preds.front();
            } else {
                prev = b;
            }
            b = next;
        }
    }

    std::vector<BigInt> eval_keys(const std::vector<IrExpr>& keys, const SsaFunction& fn, Frame& f) {
        std::vector<BigInt> out;
        out.reserve(keys.size());
        for (const auto& k : keys)
            out.push_back(eval(k, fn, f));
        return out;
    }

    BigInt load(std::uint32_t slot, const std::vector<BigInt>& keys) const {
        const Cell& c = state_.storage[slot];
        if (keys.empty())
            return c.scalar;
        auto it = c.entries.find(keys);
        return it == c.entries.end() ? c.fallback : it->second;
    }

    void assign(const Instr& in, const SsaFunction& fn, Frame& f) {
        BigInt v = eval(in.args[0], fn, f);
        if (in.dest != kNone)
            f.values[in.dest] = v;
        if (in.target == Instr::Target::Storage) {
            std::vector<BigInt> keys = eval_keys(in.keys, fn, f);
            Cell& c = state_.storage[in.slot];
            BigInt old = load(in.slot, keys);
            if (keys.empty())
                c.scalar = v;
            else
                c.entries[keys] = v;
            TraceEvent& e = push(EventKind::StorageWrite, f);
            e.slot = in.slot;
            e.keys = std::move(keys);
            e.old_value = std::move(old);
            e.new_value = std::move(v);
            e.loc = in.loc;
        }
    }

    void external_call(const Instr& in, const SsaFunction& fn, Frame& f) {
        BigInt recipient = eval(in.args[0], fn, f);
        BigInt amount = eval(in.args[1], fn, f);
        bool ok = amount <= state_.balance;
        if (ok)
            state_.balance -= amount;
        TraceEvent& e = push(EventKind::ExtCall, f);
        e.flag = ok;
        e.checked = in.returns_checked;
        e.call_kind = in.call_kind;
        e.value = amount;
        e.loc = in.loc;
        // Only call forwards enough gas for the recipient to call back in.
        if (ok && in.call_kind == ExternalCallKind::Call && reentries_left_ > 0) {
            --reentries_left_;
            push(EventKind::Reenter, f);
            State snapshot = state_;
            try {
                call(entry_fn_, entry_args_, 0, f.depth + 1);
            } catch (const RevertSignal&) {
                state_ = std::move(snapshot);
                state_.balance += amount;
                ok = false;
            }
        }
        if (in.dest != kNone)
            f.values[in.dest] = ok ? 1 : 0;
        if (!ok && in.call_kind == ExternalCallKind::Transfer)
            revert(f, "transfer failed", in.loc);
    }

    BigInt wrap(const BigInt& raw, const TypeName& ty, BinaryOp op, SourceLocation loc, const Frame& f) {
        BigInt r = reduce(raw, ty);
        if (r != raw) {
            TraceEvent& e = push(EventKind::ArithWrap, f);
            e.op = op;
            e.width = value_width(ty);
            e.is_signed = ty.kind == TypeName::Kind::Int;
            e.raw = raw;
            e.reduced = r;
            e.loc = loc;
        }
        return r;
    }

    BigInt eval(const IrExpr& e, const SsaFunction& fn, Frame& f) {
        switch (e.kind) {
        case IrExpr::Kind::Const:
            return reduce(e.value, e.ty);
        case IrExpr::Kind::Var:
            return f.values[e.ssa];
        case IrExpr::Kind::Load:
            return load(e.slot, eval_keys(e.args, fn, f));
        case IrExpr::Kind::Env:
            switch (e.env) {
            case EnvKind::Timestamp: return timestamp_;
            case EnvKind::Sender: return attacker_address();
            case EnvKind::MsgValue: return f.msg_value;
            case EnvKind::SelfBalance: return state_.balance;
            }
            return 0;
        case IrExpr::Kind::Unary: {
            BigInt x = eval(e.args[0], fn, f);
            if (e.unary == UnaryOp::Not)
                return x == 0 ? 1 : 0;
            return wrap(-x, e.ty, BinaryOp::Sub, e.loc, f);
        }
        case IrExpr::Kind::Cast: {
            BigInt x = eval(e.args[0], fn, f);
            if (e.ty.kind == TypeName::Kind::Bool)
                return x != 0 ? 1 : 0;
            return reduce(x, e.ty);
        }
        case IrExpr::Kind::Call: {
            std::uint32_t callee = static_cast<std::uint32_t>(prog_.index_of(e.callee));
            if (prog_.functions[callee].is_constructor && !constructed_.insert(e.callee).second)
                return 0;
            std::vector<BigInt> args;
            for (const auto& a : e.args)
                args.push_back(eval(a, fn, f));
            BlockId b = f.block;
            std::uint32_t i = f.instr;
            BigInt r = call(callee, std::move(args), f.msg_value, f.depth + 1);
            f.block = b;
            f.instr = i;
            const auto& rt = prog_.functions[callee].return_type;
            return rt ? reduce(r, *rt) : r;
        }
        case IrExpr::Kind::Binary:
            return binary(e, fn, f);
        }
        return 0;
    }

    BigInt binary(const IrExpr& e, const SsaFunction& fn, Frame& f) {
        BigInt a = eval(e.args[0], fn, f);
        BigInt b = eval(e.args[1], fn, f);
        switch (e.binary) {
        case BinaryOp::And: return (a != 0 && b != 0) ? 1 : 0;
        case BinaryOp::Or: return (a != 0 || b != 0) ? 1 : 0;
        case BinaryOp::Lt: return a < b ? 1 : 0;
        case BinaryOp::Le: return a <= b ? 1 : 0;
        case BinaryOp::Gt: return a > b ? 1 : 0;
        case BinaryOp::Ge: return a >= b ? 1 : 0;
        case BinaryOp::Eq: return a == b ? 1 : 0;
        case BinaryOp::Ne: return a != b ? 1 : 0;
        case BinaryOp::Add: return wrap(a + b, e.ty, e.binary, e.loc, f);
        case BinaryOp::Sub: return wrap(a - b, e.ty, e.binary, e.loc, f);
        case BinaryOp::Mul: return wrap(a * b, e.ty, e.binary, e.loc, f);
        case BinaryOp::Div:
        case BinaryOp::Mod:
            if (b == 0)
                revert(f, "division by zero", e.loc);
            // cpp_int truncates toward zero and the remainder takes the dividend's sign.
            return wrap(e.binary == BinaryOp::Div ? BigInt(a / b) : BigInt(a % b), e.ty, e.binary, e.loc, f);
        }
        return 0;
    }
};

} // namespace

const BigInt& attacker_address() {
    static const BigInt addr = parse_bigint("0xa77ac4e5a77ac4e5a77ac4e5a77ac4e5a77ac4e5");
    return addr;
}

const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::Invoke: return "invoke";
    case EventKind::BlockEntered: return "block";
    case EventKind::BranchTaken: return "branch";
    case EventKind::ExtCall: return "extcall";
    case EventKind::Reenter: return "reenter";
    case EventKind::StorageWrite: return "sstore";
    case EventKind::ArithWrap: return "wrap";
    case EventKind::Revert: return "revert";
    case EventKind::Return: return "return";
    case EventKind::Stop: return "stop";
    case EventKind::DepthLimit: return "depth_limit";
    case EventKind::LoopCap: return "loop_cap";
    case EventKind::StepLimit: return "step_limit";
    case EventKind::Counter: return "counter";
    }
    return "?";
}

BigInt reduce(const BigInt& raw, const TypeName& ty) {
    if (ty.kind == TypeName::Kind::Bool)
        return raw != 0 ? 1 : 0;
    if (ty.kind == TypeName::Kind::Mapping)
        return raw;
    unsigned w = value_width(ty);
    const BigInt& m = modulus(w);
    BigInt r = raw % m;
    if (r < 0)
        r += m;
    if (ty.kind == TypeName::Kind::Int && r >= modulus(w - 1))
        r -= m;
    return r;
}

InstrumentedFunction instrument(const SsaFunction& fn, std::uint32_t first_counter) {
    if (fn.instrumented)
        throw std::logic_error(fn.id + " is already instrumented");
    InstrumentedFunction out;
    out.fn = fn;
    out.fn.instrumented = true;
    out.first_counter = first_counter;
    std::uint32_t next = first_counter;
    out.block_counter.resize(fn.blocks.size(), kNone);
    out.stmt_counter.resize(fn.blocks.size());
    out.target_counter.resize(fn.blocks.size(), {kNone, kNone});
    for (const auto& b : fn.blocks) {
        out.block_counter[b.id] = next++;
        out.stmt_counter[b.id].assign(b.instrs.size(), kNone);
        for (std::size_t i = 0; i < b.instrs.size(); ++i) {
            Op op = b.instrs[i].op;
            if (op == Op::Phi)
                continue;
            out.stmt_counter[b.id][i] = next++;
            if (op == Op::JumpDest) {
                out.target_counter[b.id][0] = next++;
                out.target_counter[b.id][1] = next++;
            }
        }
    }
    out.counter_count = next - first_counter;
    return out;
}

InstrumentedProgram instrument(const Program& prog) {
    InstrumentedProgram out;
    out.prog = &prog;
    for (const auto& fn : prog.functions) {
        out.fns.push_back(instrument(fn, out.counter_count));
        out.counter_count += out.fns.back().counter_count;
    }
    return out;
}

std::uint64_t CoverageCounters::j_total() const {
    std::uint64_t s = 0;
    for (auto j : j_covered)
        s += j;
    return s;
}

void CoverageCounters::merge(const CoverageCounters& o, const Program& prog) {
    if (counters.empty() && stmt.empty()) {
        *this = o;
        return;
    }
    if (o.counters.empty() && o.stmt.empty())
        return;
    if (o.counters.size() != counters.size() || o.stmt.size() != stmt.size())
        throw std::invalid_argument("merging coverage of different programs");
    for (std::size_t i = 0; i < counters.size(); ++i)
        counters[i] += o.counters[i];
    for (std::size_t f = 0; f < stmt.size(); ++f)
        for (std::size_t b = 0; b < stmt[f].size(); ++b)
            for (std::size_t i = 0; i < stmt[f][b].size(); ++i)
                stmt[f][b][i] += o.stmt[f][b][i];
    recount(prog);
}

void CoverageCounters::recount(const Program& prog) {
    j_covered.fill(0);
    k_covered = 0;
    for (std::size_t f = 0; f < stmt.size(); ++f) {
        const auto& fn = prog.functions.at(f);
        for (std::size_t b = 0; b < stmt[f].size(); ++b)
            for (std::size_t i = 0; i < stmt[f][b].size(); ++i) {
                if (stmt[f][b][i] == 0)
                    continue;
                Op op = fn.blocks[b].instrs[i].op;
                if (int j = jump_kind_index(op); j >= 0)
                    ++j_covered[static_cast<std::size_t>(j)];
                else if (is_regular(op))
                    ++k_covered;
            }
    }
}

ExecResult execute(const Program& prog, const InstrumentedProgram* inst, const InputLayout& layout,
                   const InputVector& input, const Limits& limits) {
    if (inst && inst->prog != &prog)
        throw std::invalid_argument("instrumentation belongs to a different program");
    return Machine(prog, inst, layout, input, limits).run();
}

Ratio coverage_ratio(const CoverageCounters& c, const Census& census) {
    Ratio r;
    r.num = c.j_total() + c.k_covered;
    r.den = census.total();
    if (c.k_covered > census.K)
        throw std::invalid_argument("covered statements exceed the census");
    for (std::size_t j = 0; j < 6; ++j)
        if (c.j_covered[j] > census.J[j])
            throw std::invalid_argument("covered jumps exceed the census");
    return r;
}

double coverage(const CoverageCounters& c, const Census& census) { return coverage_ratio(c, census).value(); }

std::vector<TraceEvent> without_counters(const std::vector<TraceEvent>& events) {
    std::vector<TraceEvent> out;
    for (const auto& e : events)
        if (e.kind != EventKind::Counter) {
            out.push_back(e);
            out.back().id = out.size() - 1;
        }
    return out;
}

std::string to_jsonl(const Program& prog, const ExecTrace& trace) {
    std::string out;
    for (const auto& e : trace.events) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["kind"] = to_string(e.kind);
        j["fn"] = e.fn == kNone ? std::string() : prog.functions[e.fn].id;
        j["block"] = e.block == kNone ? nlohmann::ordered_json() : nlohmann::ordered_json(e.block);
        j["instr"] = e.instr == kNone ? nlohmann::ordered_json() : nlohmann::ordered_json(e.instr);
        j["depth"] = e.depth;
        j["frame"] = e.frame;
        j["tx"] = e.invocation;
        switch (e.kind) {
        case EventKind::Invoke:
        case EventKind::Return:
            j["value"] = to_string(e.value);
            break;
        case EventKind::BranchTaken:
            j["taken"] = e.flag;
            break;
        case EventKind::ExtCall:
            j["call"] = to_string(e.call_kind);
            j["value"] = to_string(e.value);
            j["success"] = e.flag;
            j["checked"] = e.checked;
            j["line"] = e.loc.line;
            break;
        case EventKind::StorageWrite: {
            j["slot"] = prog.layout.slots.at(e.slot).name;
            auto keys = nlohmann::ordered_json::array();
            for (const auto& k : e.keys)
                keys.push_back(to_string(k));
            j["keys"] = keys;
            j["old"] = to_string(e.old_value);
            j["new"] = to_string(e.new_value);
            j["line"] = e.loc.line;
            break;
        }
        case EventKind::ArithWrap:
            j["op"] = to_string(e.op);
            j["type"] = std::string(e.is_signed ? "int" : "uint") + std::to_string(e.width);
            j["raw"] = to_string(e.raw);
            j["reduced"] = to_string(e.reduced);
            j["line"] = e.loc.line;
            j["offset"] = e.loc.offset;
            break;
        case EventKind::Revert:
            j["reason"] = e.text;
            j["line"] = e.loc.line;
            break;
        case EventKind::Counter:
            j["counter"] = e.counter;
            break;
        default:
            break;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace sentry
