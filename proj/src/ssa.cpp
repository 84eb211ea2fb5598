#include "sentry/dominance.hpp"
#include "sentry/ir.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace sentry {

namespace {

Graph successor_graph(const SsaFunction& fn) {
    Graph g(fn.blocks.size());
    for (const auto& b : fn.blocks)
        g[b.id].assign(b.succs.begin(), b.succs.end());
    return g;
}

void rename_uses(IrExpr& e, const std::vector<std::vector<ValueId>>& stacks) {
    for (auto& a : e.args)
        rename_uses(a, stacks);
    if (e.kind == IrExpr::Kind::Var)
        e.ssa = stacks[e.local].back();
}

bool defines_value(Op op) {
    return op == Op::Assign || op == Op::ExtCall || op == Op::JumpI || op == Op::Return || op == Op::LogEmit ||
           op == Op::Phi;
}

} // namespace

SsaFunction to_ssa(SsaFunction fn) {
    if (fn.in_ssa)
        return fn;
    const std::size_t nb = fn.blocks.size();
    const std::size_t nl = fn.locals.size();
    Graph succs = successor_graph(fn);
    auto idom = immediate_dominators(succs, fn.entry);
    auto df = dominance_frontiers(succs, idom);

    // PHI placement on the iterated dominance frontier of each variable's defs.
    std::vector<std::vector<std::uint32_t>> phi_vars(nb);
    for (std::uint32_t l = 0; l < nl; ++l) {
        std::set<BlockId> defs{fn.entry};
        for (const auto& b : fn.blocks)
            for (const auto& in : b.instrs)
                if (in.target == Instr::Target::Local && in.local == l)
                    defs.insert(b.id);
        std::vector<BlockId> work(defs.begin(), defs.end());
        std::vector<char> has_phi(nb, 0);
        while (!work.empty()) {
            BlockId b = work.back();
            work.pop_back();
            for (auto d : df[b]) {
                if (has_phi[d])
                    continue;
                has_phi[d] = 1;
                phi_vars[d].push_back(l);
                if (!defs.count(d)) {
                    defs.insert(d);
                    work.push_back(d);
                }
            }
        }
    }
    for (auto& b : fn.blocks) {
        std::vector<Instr> phis;
        for (auto l : phi_vars[b.id]) {
            Instr phi;
            phi.op = Op::Phi;
            phi.target = Instr::Target::Local;
            phi.local = l;
            phi.loc = b.instrs.front().loc;
            for (auto p : b.preds)
                phi.incoming.emplace_back(p, kNone);
            phis.push_back(std::move(phi));
        }
        b.instrs.insert(b.instrs.begin(), phis.begin(), phis.end());
    }

    // Initial definitions at entry.
    fn.values.clear();
    std::vector<std::vector<ValueId>> stacks(nl);
    for (std::uint32_t l = 0; l < nl; ++l) {
        ValueDef v;
        v.kind = fn.locals[l].is_param ? ValueDef::Kind::Param : ValueDef::Kind::Default;
        v.local = l;
        v.block = fn.entry;
        v.ty = fn.locals[l].ty;
        fn.values.push_back(v);
        stacks[l].push_back(static_cast<ValueId>(fn.values.size() - 1));
    }

    auto kids = dominator_tree_children(idom);
    std::function<void(BlockId)> rename = [&](BlockId bid) {
        std::vector<std::uint32_t> pushed;
        Block& b = fn.blocks[bid];
        for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
            Instr& in = b.instrs[i];
            if (in.op != Op::Phi) {
                for (auto& a : in.args)
                    rename_uses(a, stacks);
                for (auto& k : in.keys)
                    rename_uses(k, stacks);
            }
            if (!defines_value(in.op))
                continue;
            ValueDef v;
            v.kind = in.op == Op::Phi ? ValueDef::Kind::Phi : ValueDef::Kind::Instr;
            v.block = bid;
            v.instr = i;
            if (in.target == Instr::Target::Local) {
                v.local = in.local;
                v.ty = fn.locals[in.local].ty;
            } else if (in.op == Op::JumpI || in.op == Op::ExtCall) {
                v.ty = TypeName::boolean();
            } else if (!in.args.empty()) {
                v.ty = in.args[0].ty;
            } else {
                v.ty = TypeName::uint(256);
            }
            fn.values.push_back(v);
            in.dest = static_cast<ValueId>(fn.values.size() - 1);
            if (in.target == Instr::Target::Local) {
                stacks[in.local].push_back(in.dest);
                pushed.push_back(in.local);
            }
        }
        for (auto s : b.succs) {
            Block& sb = fn.blocks[s];
            for (auto& in : sb.instrs) {
                if (in.op != Op::Phi)
                    break;
                for (auto& [pred, val] : in.incoming)
                    if (pred == bid)
                        val = stacks[in.local].back();
            }
        }
        for (auto k : kids[bid])
            rename(k);
        for (auto l : pushed)
            stacks[l].pop_back();
    };
    rename(fn.entry);
    fn.in_ssa = true;
    return fn;
}

} // namespace sentry
