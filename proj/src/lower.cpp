#include "sentry/ir.hpp"

#include <algorithm>
#include <map>

namespace sentry {

namespace {

TypeName literal_type(const BigInt& v) { return v < 0 ? TypeName::sint(256) : TypeName::uint(256); }

// Literals take the type of whatever they meet.
// Explicit casts may truncate; implicit conversions must fit.
void adopt(IrExpr& e, const TypeName& ty, bool untyped, bool cast = false) {
    if (!untyped || e.kind != IrExpr::Kind::Const)
        return;
    if (!cast && !ty.is_mapping() && (e.value < ty.min_value() || e.value > ty.max_value()))
        throw LoweringError("literal " + to_string(e.value) + " does not fit " + to_string(ty), e.loc);
    e.ty = ty;
}

// `x == 300` with x uint8 compares as uint16, not against a wrapped 44.
TypeName widen_for(const TypeName& ty, const BigInt& literal) {
    if (ty.kind != TypeName::Kind::Uint && ty.kind != TypeName::Kind::Int)
        return ty;
    TypeName t = ty;
    while (t.width < 256 && (literal < t.min_value() || literal > t.max_value()))
        t.width *= 2;
    return t;
}

bool needs_constructor(const SourceUnit& unit, const ContractDef& c) {
    if (c.constructor())
        return true;
    for (const auto& b : c.bases)
        if (needs_constructor(unit, *unit.find_contract(b)))
            return true;
    return false;
}

class Lowerer {
public:
    Lowerer(const Program& prog, const ContractDef& owner) : prog_(prog), owner_(owner) {}

    SsaFunction lower(const FunctionDef* def) {
        fn_.owner = owner_.name;
        fn_.def = def;
        if (def) {
            fn_.name = def->name;
            fn_.is_entry = def->is_entry() || def->is_constructor;
            fn_.is_payable = def->is_payable;
            fn_.is_constructor = def->is_constructor;
        } else {
            fn_.name = kConstructorName;
            fn_.is_entry = true;
            fn_.is_constructor = true;
        }
        fn_.id = fn_.owner + "." + fn_.name;
        scopes_.emplace_back();
        if (def) {
            for (const auto& p : def->params)
                declare(p.name.empty() ? "$arg" + std::to_string(fn_.locals.size()) : p.name, p.ty, true);
            fn_.param_count = def->params.size();
            if (!def->returns.empty()) {
                fn_.return_type = def->returns[0].ty;
                if (!def->returns[0].name.empty())
                    fn_.return_local = declare(def->returns[0].name, def->returns[0].ty, false);
            }
        }
        cur_ = new_block();
        if (fn_.is_constructor)
            base_constructor_calls(def);
        if (def)
            statements(def->body);
        if (!terminated(cur_)) {
            if (fn_.return_local != kNone) {
                Instr ret;
                ret.op = Op::Return;
                ret.args.push_back(var(fn_.return_local, def->loc));
                ret.loc = def->loc;
                terminate(std::move(ret), {});
            } else {
                Instr stop;
                stop.op = Op::Stop;
                stop.loc = def ? def->loc : owner_.loc;
                terminate(std::move(stop), {});
            }
        }
        mark_checked_calls();
        finish();
        return std::move(fn_);
    }

private:
    // ---- blocks
    BlockId new_block() {
        Block b;
        b.id = static_cast<BlockId>(fn_.blocks.size());
        fn_.blocks.push_back(std::move(b));
        return fn_.blocks.back().id;
    }

    bool terminated(BlockId b) const {
        const auto& ins = fn_.blocks[b].instrs;
        return !ins.empty() && is_terminator(ins.back().op);
    }

    void emit(Instr in) {
        if (terminated(cur_))
            cur_ = new_block(); // dead code after return/revert; pruned later
        fn_.blocks[cur_].instrs.push_back(std::move(in));
    }

    void terminate(Instr in, std::vector<BlockId> succs) {
        emit(std::move(in));
        fn_.blocks[cur_].succs = std::move(succs);
    }

    void jump(BlockId target, SourceLocation loc) {
        Instr j;
        j.op = Op::Jump;
        j.loc = loc;
        terminate(std::move(j), {target});
    }

    void branch(IrExpr cond, BlockId t, BlockId f, SourceLocation loc) {
        Instr j;
        j.op = Op::JumpI;
        j.args.push_back(std::move(cond));
        j.loc = loc;
        terminate(std::move(j), {t, f});
    }

    void condition(const Expr& e, BlockId t, BlockId f) {
        if (e.kind == Expr::Kind::Binary && (e.binary == BinaryOp::And || e.binary == BinaryOp::Or)) {
            BlockId mid = new_block();
            if (e.binary == BinaryOp::And)
                condition(e.operands[0], mid, f);
            else
                condition(e.operands[0], t, mid);
            cur_ = mid;
            condition(e.operands[1], t, f);
            return;
        }
        branch(expr(e), t, f, e.loc);
    }

    // ---- scopes
    std::uint32_t declare(const std::string& name, const TypeName& ty, bool param, bool hidden = false) {
        Local l;
        l.name = name;
        l.ty = ty;
        l.is_param = param;
        l.hidden = hidden;
        fn_.locals.push_back(l);
        auto idx = static_cast<std::uint32_t>(fn_.locals.size() - 1);
        if (!hidden)
            scopes_.back()[name] = idx;
        return idx;
    }

    std::uint32_t lookup_local(const std::string& name) const {
        for (auto s = scopes_.rbegin(); s != scopes_.rend(); ++s)
            if (auto it = s->find(name); it != s->end())
                return it->second;
        return kNone;
    }

    IrExpr var(std::uint32_t local, SourceLocation loc) const {
        IrExpr e;
        e.kind = IrExpr::Kind::Var;
        e.local = local;
        e.ty = fn_.locals[local].ty;
        e.loc = loc;
        return e;
    }

    // ---- expressions
    static bool untyped(const Expr& e) { return e.kind == Expr::Kind::Literal && !e.bool_literal; }

    IrExpr expr(const Expr& e) {
        IrExpr out;
        out.loc = e.loc;
        switch (e.kind) {
        case Expr::Kind::Literal:
            out.kind = IrExpr::Kind::Const;
            out.value = e.value;
            out.ty = e.bool_literal ? TypeName::boolean() : literal_type(e.value);
            return out;
        case Expr::Kind::Ident: {
            if (auto l = lookup_local(e.name); l != kNone)
                return var(l, e.loc);
            const StorageSlot* s = prog_.layout.find(e.name);
            if (!s)
                throw LoweringError("unknown identifier '" + e.name + "'", e.loc);
            if (s->ty.is_mapping())
                throw LoweringError("mapping '" + e.name + "' used without a key", e.loc);
            out.kind = IrExpr::Kind::Load;
            out.slot = static_cast<std::uint32_t>(s->index);
            out.ty = s->ty;
            return out;
        }
        case Expr::Kind::Index: {
            std::vector<const Expr*> keys;
            const Expr* base = &e;
            while (base->kind == Expr::Kind::Index) {
                keys.push_back(&base->operands[1]);
                base = &base->operands[0];
            }
            std::reverse(keys.begin(), keys.end());
            const StorageSlot* s = base->kind == Expr::Kind::Ident && lookup_local(base->name) == kNone
                                       ? prog_.layout.find(base->name)
                                       : nullptr;
            if (!s || !s->ty.is_mapping())
                throw LoweringError("only storage mappings can be indexed", e.loc);
            TypeName ty = s->ty;
            out.kind = IrExpr::Kind::Load;
            out.slot = static_cast<std::uint32_t>(s->index);
            for (const Expr* k : keys) {
                if (!ty.is_mapping())
                    throw LoweringError("too many keys for mapping '" + base->name + "'", e.loc);
                IrExpr key = expr(*k);
                adopt(key, ty.key(), untyped(*k));
                out.args.push_back(std::move(key));
                TypeName next = ty.value();
                ty = next;
            }
            if (ty.is_mapping())
                throw LoweringError("partially indexed mapping '" + base->name + "'", e.loc);
            out.ty = ty;
            return out;
        }
        case Expr::Kind::Member:
            out.kind = IrExpr::Kind::Env;
            switch (e.member) {
            case MemberKind::BlockTimestamp: out.env = EnvKind::Timestamp; out.ty = TypeName::uint(256); break;
            case MemberKind::MsgSender: out.env = EnvKind::Sender; out.ty = TypeName::address(); break;
            case MemberKind::MsgValue: out.env = EnvKind::MsgValue; out.ty = TypeName::uint(256); break;
            case MemberKind::SelfBalance: out.env = EnvKind::SelfBalance; out.ty = TypeName::uint(256); break;
            }
            return out;
        case Expr::Kind::Binary: {
            IrExpr l = expr(e.operands[0]);
            IrExpr r = expr(e.operands[1]);
            bool lu = untyped(e.operands[0]), ru = untyped(e.operands[1]);
            out.kind = IrExpr::Kind::Binary;
            out.binary = e.binary;
            if (e.binary == BinaryOp::And || e.binary == BinaryOp::Or) {
                out.ty = TypeName::boolean();
            } else {
                TypeName common = lu && !ru ? r.ty : l.ty;
                if (lu && ru && (l.ty.is_signed() || r.ty.is_signed()))
                    common = TypeName::sint(256);
                if (lu != ru)
                    common = widen_for(common, lu ? l.value : r.value);
                adopt(l, common, lu);
                adopt(r, common, ru);
                out.ty = is_comparison(e.binary) ? TypeName::boolean() : common;
            }
            out.args.push_back(std::move(l));
            out.args.push_back(std::move(r));
            return out;
        }
        case Expr::Kind::Unary: {
            IrExpr x = expr(e.operands[0]);
            out.kind = IrExpr::Kind::Unary;
            out.unary = e.unary;
            out.ty = e.unary == UnaryOp::Not ? TypeName::boolean() : x.ty;
            out.args.push_back(std::move(x));
            return out;
        }
        case Expr::Kind::Call: {
            ResolvedFunction r = resolve_function(*prog_.unit, prog_.ig, prog_.contract, e.name);
            if (!r.fn || r.fn->is_constructor)
                throw LoweringError("call to unknown function '" + e.name + "'", e.loc);
            if (r.fn->params.size() != e.operands.size())
                throw LoweringError("wrong number of arguments to '" + e.name + "'", e.loc);
            out.kind = IrExpr::Kind::Call;
            out.callee = r.id();
            out.ty = r.fn->returns.empty() ? TypeName::uint(256) : r.fn->returns[0].ty;
            for (std::size_t i = 0; i < e.operands.size(); ++i) {
                IrExpr a = expr(e.operands[i]);
                adopt(a, r.fn->params[i].ty, untyped(e.operands[i]));
                out.args.push_back(std::move(a));
            }
            return out;
        }
        case Expr::Kind::Cast: {
            IrExpr x = expr(e.operands[0]);
            adopt(x, *e.cast_to, untyped(e.operands[0]), true);
            out.kind = IrExpr::Kind::Cast;
            out.ty = *e.cast_to;
            out.args.push_back(std::move(x));
            return out;
        }
        }
        throw LoweringError("unsupported expression", e.loc);
    }

    // ---- statements
    void statements(const std::vector<Stmt>& body) {
        for (const Stmt& s : body)
            statement(s);
    }

    void scoped(const std::vector<Stmt>& body) {
        scopes_.emplace_back();
        statements(body);
        scopes_.pop_back();
    }

    void assign_to(const Expr& target, IrExpr value, bool value_untyped, Instr& in) {
        if (target.kind == Expr::Kind::Ident) {
            if (auto l = lookup_local(target.name); l != kNone) {
                in.target = Instr::Target::Local;
                in.local = l;
                adopt(value, fn_.locals[l].ty, value_untyped);
                in.args.push_back(std::move(value));
                return;
            }
        }
        IrExpr place = expr(target);
        if (place.kind != IrExpr::Kind::Load)
            throw LoweringError("assignment target is not a variable", target.loc);
        in.target = Instr::Target::Storage;
        in.slot = place.slot;
        in.keys = std::move(place.args);
        adopt(value, place.ty, value_untyped);
        in.args.push_back(std::move(value));
    }

    void statement(const Stmt& s) {
        switch (s.kind) {
        case Stmt::Kind::VarDecl: {
            Instr in;
            in.op = Op::Assign;
            in.loc = s.loc;
            IrExpr init;
            if (s.exprs.empty()) {
                init.kind = IrExpr::Kind::Const;
                init.value = 0;
                init.ty = s.decl->ty;
                init.loc = s.loc;
            } else {
                init = expr(s.exprs[0]);
                adopt(init, s.decl->ty, untyped(s.exprs[0]));
            }
            in.target = Instr::Target::Local;
            in.local = declare(s.decl->name, s.decl->ty, false);
            in.args.push_back(std::move(init));
            emit(std::move(in));
            break;
        }
        case Stmt::Kind::Assign: {
            Instr in;
            in.op = Op::Assign;
            in.loc = s.loc;
            assign_to(s.exprs[0], expr(s.exprs[1]), untyped(s.exprs[1]), in);
            emit(std::move(in));
            break;
        }
        case Stmt::Kind::ExprStmt: {
            Instr in;
            in.op = Op::Assign;
            in.loc = s.loc;
            if (resolve_event(*prog_.unit, prog_.ig, owner_.name, s.exprs[0].name)) {
                in.op = Op::LogEmit; // pre-0.4.21 event syntax
                in.text = s.exprs[0].name;
                for (const auto& a : s.exprs[0].operands)
                    in.args.push_back(expr(a));
                emit(std::move(in));
                break;
            }
            in.args.push_back(expr(s.exprs[0]));
            emit(std::move(in));
            break;
        }
        case Stmt::Kind::Block:
            scoped(s.body);
            break;
        case Stmt::Kind::If: {
            BlockId t = new_block();
            BlockId join = new_block();
            BlockId f = s.else_body.empty() ? join : new_block();
            condition(s.exprs[0], t, f);
            cur_ = t;
            scoped(s.body);
            if (!terminated(cur_))
                jump(join, s.loc);
            if (!s.else_body.empty()) {
                cur_ = f;
                scoped(s.else_body);
                if (!terminated(cur_))
                    jump(join, s.loc);
            }
            cur_ = join;
            break;
        }
        case Stmt::Kind::While:
            loop(s, s.exprs.empty() ? nullptr : &s.exprs[0], s.body, nullptr);
            break;
        case Stmt::Kind::For:
            scopes_.emplace_back();
            statements(s.init);
            loop(s, s.exprs.empty() ? nullptr : &s.exprs[0], s.body, s.update.empty() ? nullptr : &s.update[0]);
            scopes_.pop_back();
            break;
        case Stmt::Kind::Require:
        case Stmt::Kind::Assert: {
            BlockId cont = new_block();
            BlockId rev = new_block();
            condition(s.exprs[0], cont, rev);
            cur_ = rev;
            Instr r;
            r.op = Op::Revert;
            r.text = s.text;
            r.loc = s.loc;
            terminate(std::move(r), {});
            cur_ = cont;
            break;
        }
        case Stmt::Kind::Return: {
            Instr in;
            in.op = Op::Return;
            in.loc = s.loc;
            if (!s.exprs.empty()) {
                IrExpr v = expr(s.exprs[0]);
                if (fn_.return_type)
                    adopt(v, *fn_.return_type, untyped(s.exprs[0]));
                in.args.push_back(std::move(v));
            }
            terminate(std::move(in), {});
            break;
        }
        case Stmt::Kind::Revert: {
            Instr in;
            in.op = Op::Revert;
            in.text = s.text;
            in.loc = s.loc;
            terminate(std::move(in), {});
            break;
        }
        case Stmt::Kind::ExternalCall: {
            Instr in;
            in.op = Op::ExtCall;
            in.loc = s.loc;
            in.call_kind = s.call_kind;
            in.args.push_back(expr(s.exprs[0]));
            IrExpr amount = expr(s.exprs[1]);
            adopt(amount, TypeName::uint(256), untyped(s.exprs[1]));
            in.args.push_back(std::move(amount));
            in.returns_checked = s.call_kind == ExternalCallKind::Transfer || s.require_wrapped;
            std::uint32_t result = kNone;
            if (s.decl) {
                result = declare(s.decl->name, s.decl->ty, false);
            } else if (s.require_wrapped) {
                result = declare("$ok" + std::to_string(fn_.locals.size()), TypeName::boolean(), false, true);
            }
            if (result != kNone) {
                in.target = Instr::Target::Local;
                in.local = result;
            }
            emit(std::move(in));
            if (s.require_wrapped) {
                BlockId cont = new_block();
                BlockId rev = new_block();
                branch(var(result, s.loc), cont, rev, s.loc);
                cur_ = rev;
                Instr r;
                r.op = Op::Revert;
                r.text = s.text;
                r.loc = s.loc;
                terminate(std::move(r), {});
                cur_ = cont;
            }
            break;
        }
        case Stmt::Kind::EmitLog: {
            Instr in;
            in.op = Op::LogEmit;
            in.text = s.text;
            in.loc = s.loc;
            for (const auto& a : s.exprs)
                in.args.push_back(expr(a));
            emit(std::move(in));
            break;
        }
        }
    }

    void loop(const Stmt& s, const Expr* cond, const std::vector<Stmt>& body, const Stmt* update) {
        BlockId header = new_block();
        jump(header, s.loc);
        cur_ = header;
        BlockId b = new_block();
        BlockId exit = new_block();
        fn_.blocks[header].loop_exit = exit;
        if (cond) {
            condition(*cond, b, exit);
        } else {
            IrExpr t;
            t.kind = IrExpr::Kind::Const;
            t.value = 1;
            t.ty = TypeName::boolean();
            t.loc = s.loc;
            branch(std::move(t), b, exit, s.loc);
        }
        cur_ = b;
        scoped(body);
        if (update)
            statement(*update);
        if (!terminated(cur_))
            jump(header, s.loc);
        cur_ = exit;
    }

    void base_constructor_calls(const FunctionDef* def) {
        for (const auto& base : owner_.bases) {
            const ContractDef* bc = prog_.unit->find_contract(base);
            if (!needs_constructor(*prog_.unit, *bc))
                continue;
            const BaseCall* call = nullptr;
            if (def)
                for (const auto& c : def->base_calls)
                    if (c.base == base)
                        call = &c;
            const FunctionDef* ctor = bc->constructor();
            std::size_t arity = ctor ? ctor->params.size() : 0;
            std::size_t given = call ? call->args.size() : 0;
            if (arity != given)
                throw LoweringError("constructor of '" + base + "' expects " + std::to_string(arity) +
                                        " argument(s)",
                                    call ? call->loc : (def ? def->loc : owner_.loc));
            IrExpr e;
            e.kind = IrExpr::Kind::Call;
            e.callee = base + "." + kConstructorName;
            e.ty = TypeName::uint(256);
            e.loc = call ? call->loc : (def ? def->loc : owner_.loc);
            for (std::size_t i = 0; i < given; ++i) {
                IrExpr a = expr(call->args[i]);
                adopt(a, ctor->params[i].ty, untyped(call->args[i]));
                e.args.push_back(std::move(a));
            }
            Instr in;
            in.op = Op::Assign;
            in.loc = e.loc;
            in.args.push_back(std::move(e));
            emit(std::move(in));
        }
    }

    // A bound call result counts as checked once it feeds a branch.
    void mark_checked_calls() {
        std::vector<char> tested(fn_.locals.size(), 0);
        for (const auto& b : fn_.blocks)
            for (const auto& in : b.instrs)
                if (in.op == Op::JumpI)
                    visit(in.args[0], [&](const IrExpr& e) {
                        if (e.kind == IrExpr::Kind::Var)
                            tested[e.local] = 1;
                    });
        for (auto& b : fn_.blocks)
            for (auto& in : b.instrs)
                if (in.op == Op::ExtCall && in.target == Instr::Target::Local && tested[in.local])
                    in.returns_checked = true;
    }

    void finish() {
        for (auto& b : fn_.blocks)
            if (!terminated(b.id)) {
                Instr stop;
                stop.op = Op::Stop;
                b.instrs.push_back(stop);
                b.succs.clear();
            }
        // prune unreachable blocks, keep creation order
        std::vector<char> live(fn_.blocks.size(), 0);
        std::vector<BlockId> work{0};
        live[0] = 1;
        while (!work.empty()) {
            BlockId b = work.back();
            work.pop_back();
            for (auto s : fn_.blocks[b].succs)
                if (!live[s]) {
                    live[s] = 1;
                    work.push_back(s);
                }
        }
        std::vector<BlockId> remap(fn_.blocks.size(), kNone);
        std::vector<Block> kept;
        for (auto& b : fn_.blocks)
            if (live[b.id]) {
                remap[b.id] = static_cast<BlockId>(kept.size());
                kept.push_back(std::move(b));
            }
        for (auto& b : kept) {
            b.id = remap[b.id];
            for (auto& s : b.succs)
                s = remap[s];
            if (b.loop_exit != kNone)
                b.loop_exit = remap[b.loop_exit];
        }
        fn_.blocks = std::move(kept);
        std::vector<char> jump_target(fn_.blocks.size(), 0);
        for (auto& b : fn_.blocks) {
            if (b.terminator().op == Op::Jump)
                jump_target[b.succs[0]] = 1;
            for (auto s : b.succs)
                fn_.blocks[s].preds.push_back(b.id);
        }
        for (auto& b : fn_.blocks)
            if (jump_target[b.id]) {
                Instr jd;
                jd.op = Op::JumpDest;
                jd.loc = b.instrs.front().loc;
                b.instrs.insert(b.instrs.begin(), jd);
            }
        fn_.entry = 0;
    }

    const Program& prog_;
    const ContractDef& owner_;
    SsaFunction fn_;
    std::vector<std::map<std::string, std::uint32_t>> scopes_;
    BlockId cur_ = 0;
};

} // namespace

SsaFunction lower_to_cfg(const Program& prog, const ContractDef& owner, const FunctionDef& fn) {
    return Lowerer(prog, owner).lower(&fn);
}

SsaFunction synthesize_constructor(const Program& prog, const ContractDef& contract) {
    return Lowerer(prog, contract).lower(nullptr);
}

Program build_program(const SourceUnit& unit, const std::string& contract) {
    Program prog;
    prog.unit = &unit;
    prog.ig = build_inheritance(unit);
    const ContractDef* leaf = contract.empty() ? &leaf_contract(unit, prog.ig) : unit.find_contract(contract);
    if (!leaf)
        throw InheritanceError("unknown contract '" + contract + "'");
    prog.contract = leaf->name;
    prog.cg = build_call_graph(unit, prog.ig);
    prog.layout = storage_layout(unit, *leaf, prog.ig);
    for (const auto& name : prog.ig.linearize(leaf->name)) {
        const ContractDef& c = *unit.find_contract(name);
        if (!c.constructor() && needs_constructor(unit, c))
            prog.functions.push_back(to_ssa(synthesize_constructor(prog, c)));
        for (const auto& f : c.functions) {
            if (!f.is_constructor) {
                ResolvedFunction r = resolve_function(unit, prog.ig, leaf->name, f.name);
                if (r.owner != &c)
                    continue; // overridden further down
            }
            prog.functions.push_back(to_ssa(lower_to_cfg(prog, c, f)));
        }
    }
    // only the leaf's constructor is an entry point; base constructors run through it
    for (auto& f : prog.functions)
        if (f.is_constructor && f.owner != leaf->name)
            f.is_entry = false;
    if (std::size_t i = prog.index_of(leaf->name + "." + kConstructorName); i != kNone)
        prog.entries.push_back(i);
    for (std::size_t i = 0; i < prog.functions.size(); ++i)
        if (prog.functions[i].is_entry && !prog.functions[i].is_constructor)
            prog.entries.push_back(i);
    return prog;
}

} // namespace sentry
