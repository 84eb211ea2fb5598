#include "sentry/detectors.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace sentry {

namespace {

std::string function_name(const SsaFunction& fn) { return fn.is_constructor ? "constructor" : fn.name; }

const IrExpr* definition(const SsaFunction& fn, ValueId v) {
    if (v == kNone || v >= fn.values.size())
        return nullptr;
    const ValueDef& d = fn.values[v];
    if (d.kind != ValueDef::Kind::Instr)
        return nullptr;
    const Instr& in = fn.blocks[d.block].instrs[d.instr];
    if (in.op != Op::Assign || in.args.empty())
        return nullptr;
    return &in.args[0];
}

// Leaves of e by printed form. Locals are expanded through their defining
// assignment up to `depth` levels, so `c = a + b; require(c >= a)` sees a and b.
void leaves(const SsaFunction& fn, const IrExpr& e, int depth, std::set<std::string>& out) {
    switch (e.kind) {
    case IrExpr::Kind::Const:
        return;
    case IrExpr::Kind::Var:
        out.insert(print_expr(fn, e));
        if (depth > 0)
            if (const IrExpr* d = definition(fn, e.ssa))
                leaves(fn, *d, depth - 1, out);
        return;
    case IrExpr::Kind::Load:
    case IrExpr::Kind::Env:
        out.insert(print_expr(fn, e));
        return;
    case IrExpr::Kind::Call:
        out.insert(print_expr(fn, e));
        break;
    default:
        break;
    }
    for (const auto& a : e.args)
        leaves(fn, a, depth, out);
}

void load_slots(const SsaFunction& fn, const IrExpr& e, int depth, std::set<std::uint32_t>& out) {
    if (e.kind == IrExpr::Kind::Load)
        out.insert(e.slot);
    if (e.kind == IrExpr::Kind::Var && depth > 0)
        if (const IrExpr* d = definition(fn, e.ssa))
            load_slots(fn, *d, depth - 1, out);
    for (const auto& a : e.args)
        load_slots(fn, a, depth, out);
}

bool has_comparison(const IrExpr& e, bool with_const) {
    if (e.kind == IrExpr::Kind::Binary && is_comparison(e.binary)) {
        if (!with_const)
            return true;
        if (e.args[0].kind == IrExpr::Kind::Const || e.args[1].kind == IrExpr::Kind::Const)
            return true;
    }
    for (const auto& a : e.args)
        if (has_comparison(a, with_const))
            return true;
    return false;
}

// A comparison guards arithmetic when it mentions all of its operands and
// compares one of them directly: `a + b >= a`, `b <= a`, `x < 100`.
struct Comparison {
    std::set<std::string> all;
    std::set<std::string> bare;

    bool guards(const std::set<std::string>& ops) const {
        if (!std::includes(all.begin(), all.end(), ops.begin(), ops.end()))
            return false;
        return std::any_of(ops.begin(), ops.end(), [&](const std::string& o) { return bare.count(o) > 0; });
    }
};

void comparisons(const SsaFunction& fn, const IrExpr& e, std::vector<Comparison>& out) {
    if (e.kind == IrExpr::Kind::Binary && is_comparison(e.binary)) {
        Comparison c;
        leaves(fn, e, 4, c.all);
        for (const auto& side : e.args)
            if (side.kind == IrExpr::Kind::Var || side.kind == IrExpr::Kind::Load || side.kind == IrExpr::Kind::Env)
                c.bare.insert(print_expr(fn, side));
        out.push_back(std::move(c));
        return;
    }
    for (const auto& a : e.args)
        comparisons(fn, a, out);
}

std::vector<BlockId> strict_dominators(const FunctionAnalysis& an, BlockId b) {
    std::vector<BlockId> out;
    while (an.idom[b] != kNone && an.idom[b] != b) {
        b = an.idom[b];
        out.push_back(b);
    }
    return out;
}

std::vector<BlockId> post_dominators(const FunctionAnalysis& an, BlockId b) {
    const std::uint32_t exit = static_cast<std::uint32_t>(an.idom.size());
    std::vector<BlockId> out;
    while (b != kNone && b < exit) {
        out.push_back(b);
        if (an.ipdom[b] == b)
            break;
        b = an.ipdom[b];
    }
    return out;
}

const Instr* jumpi_of(const SsaFunction& fn, BlockId b) {
    const Block& blk = fn.blocks[b];
    if (blk.instrs.empty() || blk.terminator().op != Op::JumpI)
        return nullptr;
    return &blk.terminator();
}

// Blocks holding nothing but a branch, reachable from b before its immediate
// post-dominator: the later operands of a short-circuit condition.
std::vector<BlockId> condition_blocks(const SsaFunction& fn, const FunctionAnalysis& an, BlockId b) {
    std::vector<BlockId> out;
    BlockId stop = an.ipdom[b];
    std::vector<bool> seen(fn.blocks.size(), false);
    std::vector<BlockId> work(fn.blocks[b].succs.begin(), fn.blocks[b].succs.end());
    while (!work.empty()) {
        BlockId c = work.back();
        work.pop_back();
        if (c == stop || c == b || seen[c])
            continue;
        seen[c] = true;
        const Block& blk = fn.blocks[c];
        bool only_branch = jumpi_of(fn, c) != nullptr;
        for (std::size_t i = 0; i + 1 < blk.instrs.size(); ++i)
            if (blk.instrs[i].op != Op::Phi && blk.instrs[i].op != Op::JumpDest)
                only_branch = false;
        if (!only_branch)
            continue;
        out.push_back(c);
        for (auto s : blk.succs)
            work.push_back(s);
    }
    return out;
}

template <class F>
void each_expr(const Instr& in, F&& f) {
    for (const auto& a : in.args)
        f(a);
    for (const auto& k : in.keys)
        f(k);
}

void calls_in(const Instr& in, const Program& prog, std::set<std::uint32_t>& out) {
    each_expr(in, [&](const IrExpr& root) {
        visit(root, [&](const IrExpr& e) {
            if (e.kind == IrExpr::Kind::Call)
                out.insert(static_cast<std::uint32_t>(prog.index_of(e.callee)));
        });
    });
}

// Instructions that can execute after (block, instr) in the same function.
std::vector<Site> sites_after(const SsaFunction& fn, std::uint32_t fi, BlockId block, std::uint32_t instr) {
    std::vector<Site> out;
    const Block& b0 = fn.blocks[block];
    for (std::uint32_t i = instr + 1; i < b0.instrs.size(); ++i)
        out.push_back({fi, block, i});
    std::vector<bool> seen(fn.blocks.size(), false);
    std::vector<BlockId> work(b0.succs.begin(), b0.succs.end());
    while (!work.empty()) {
        BlockId b = work.back();
        work.pop_back();
        if (seen[b])
            continue;
        seen[b] = true;
        for (std::uint32_t i = 0; i < fn.blocks[b].instrs.size(); ++i)
            out.push_back({fi, b, i});
        for (auto s : fn.blocks[b].succs)
            work.push_back(s);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct Context {
    const Artifacts& a;
    const Program& prog;
    std::vector<std::set<std::uint32_t>> callees;
    std::vector<std::vector<std::pair<Site, std::uint32_t>>> writes; // transitive storage writes

    explicit Context(const Artifacts& art) : a(art), prog(*art.prog) {
        const auto n = prog.functions.size();
        callees.resize(n);
        for (std::uint32_t f = 0; f < n; ++f)
            for (const auto& b : prog.functions[f].blocks)
                for (const auto& in : b.instrs)
                    calls_in(in, prog, callees[f]);
        writes.resize(n);
        for (std::uint32_t f = 0; f < n; ++f) {
            std::set<std::uint32_t> seen{f};
            std::vector<std::uint32_t> work{f};
            while (!work.empty()) {
                std::uint32_t g = work.back();
                work.pop_back();
                const auto& fn = prog.functions[g];
                for (const auto& b : fn.blocks)
                    for (std::uint32_t i = 0; i < b.instrs.size(); ++i)
                        if (b.instrs[i].target == Instr::Target::Storage)
                            writes[f].push_back({{g, b.id, i}, b.instrs[i].slot});
                for (auto c : callees[g])
                    if (seen.insert(c).second)
                        work.push_back(c);
            }
            std::sort(writes[f].begin(), writes[f].end());
        }
    }

    // Storage writes (site, slot) executed by the given sites, including callees.
    std::vector<std::pair<Site, std::uint32_t>> writes_at(const std::vector<Site>& sites) const {
        std::vector<std::pair<Site, std::uint32_t>> out;
        for (const Site& s : sites) {
            const Instr& in = prog.functions[s.fn].blocks[s.block].instrs[s.instr];
            if (in.target == Instr::Target::Storage)
                out.push_back({s, in.slot});
            std::set<std::uint32_t> cs;
            calls_in(in, prog, cs);
            for (auto c : cs)
                out.insert(out.end(), writes[c].begin(), writes[c].end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool reaches(std::uint32_t from, std::uint32_t to) const {
        std::set<std::uint32_t> seen;
        std::vector<std::uint32_t> work{from};
        while (!work.empty()) {
            std::uint32_t g = work.back();
            work.pop_back();
            if (g == to)
                return true;
            if (!seen.insert(g).second)
                continue;
            for (auto c : callees[g])
                work.push_back(c);
        }
        return false;
    }

    Finding make(VulnType v, std::uint32_t fi, Site site, SourceLocation loc, std::string rule, std::string evidence) const {
        Finding f;
        f.vuln = v;
        f.contract = prog.contract;
        f.function = function_name(prog.functions[fi]);
        f.loc = loc;
        f.score = v == VulnType::Reentrancy ? kReentrancyStaticScore : kStaticScore;
        f.rule = std::move(rule);
        f.fn = fi;
        f.site = site;
        f.evidence = std::move(evidence);
        return f;
    }
};

bool at(const TraceEvent& e, const Site& s) { return e.fn == s.fn && e.block == s.block && e.instr == s.instr; }

bool in_sites(const TraceEvent& e, const std::vector<Site>& sites) {
    return std::any_of(sites.begin(), sites.end(), [&](const Site& s) { return at(e, s); });
}

std::vector<Finding> finish(std::vector<Finding> fs, const std::vector<ExecTrace>& traces) {
    for (std::size_t t = 0; t < traces.size(); ++t)
        witness_all(fs, traces[t], t);
    normalize(fs);
    return fs;
}

} // namespace

const char* to_string(VulnType v) {
    switch (v) {
    case VulnType::Reentrancy: return "reentrancy";
    case VulnType::CallStackOverflow: return "call_stack_overflow";
    case VulnType::IntegerOverflow: return "integer_overflow";
    case VulnType::TimestampDependency: return "timestamp_dependency";
    }
    return "?";
}

std::optional<VulnType> parse_vuln_type(std::string_view s) {
    for (auto v : kAllVulnTypes)
        if (s == to_string(v))
            return v;
    return std::nullopt;
}

Artifacts analyze(const Program& prog) {
    Artifacts a;
    a.prog = &prog;
    a.dep = build_dep_graph(prog);
    for (const auto& fn : prog.functions)
        a.analysis.push_back(analyze_function(fn));
    return a;
}

std::vector<Finding> detect_reentrancy(const Artifacts& a, const std::vector<ExecTrace>& traces) {
    Context cx(a);
    std::vector<Finding> out;
    for (std::uint32_t fi = 0; fi < cx.prog.functions.size(); ++fi) {
        const SsaFunction& fn = cx.prog.functions[fi];
        const FunctionAnalysis& an = a.analysis[fi];
        for (const auto& b : fn.blocks)
            for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
                const Instr& in = b.instrs[i];
                if (in.op != Op::ExtCall || in.call_kind != ExternalCallKind::Call)
                    continue;
                const IrExpr& amount = in.args[1];
                if (amount.kind == IrExpr::Kind::Const && amount.value == 0)
                    continue;
                // Slots the call depends on: its amount and the guards in front of it.
                std::set<std::uint32_t> guarded;
                load_slots(fn, amount, 4, guarded);
                for (BlockId d : strict_dominators(an, b.id))
                    if (const Instr* j = jumpi_of(fn, d))
                        load_slots(fn, j->args[0], 4, guarded);
                if (guarded.empty())
                    continue;
                std::vector<Site> follow;
                std::string slot_name;
                for (const auto& [s, slot] : cx.writes_at(sites_after(fn, fi, b.id, i)))
                    if (guarded.count(slot)) {
                        follow.push_back(s);
                        if (slot_name.empty())
                            slot_name = cx.prog.layout.slots[slot].name;
                    }
                if (follow.empty())
                    continue;
                Finding f = cx.make(VulnType::Reentrancy, fi, {fi, b.id, i}, in.loc, "call-then-write",
                                    "call at line " + std::to_string(in.loc.line) + " precedes a write to '" +
                                        slot_name + "' that guards it");
                f.follow = std::move(follow);
                out.push_back(std::move(f));
            }
    }
    return finish(std::move(out), traces);
}

std::vector<Finding> detect_callstack_overflow(const Artifacts& a, const std::vector<ExecTrace>& traces) {
    Context cx(a);
    std::vector<Finding> out;
    std::set<std::uint32_t> live;
    for (auto e : cx.prog.entries) {
        for (std::uint32_t g = 0; g < cx.prog.functions.size(); ++g)
            if (cx.reaches(static_cast<std::uint32_t>(e), g))
                live.insert(g);
    }
    for (std::uint32_t fi = 0; fi < cx.prog.functions.size(); ++fi) {
        const SsaFunction& fn = cx.prog.functions[fi];
        const FunctionAnalysis& an = a.analysis[fi];
        for (const auto& b : fn.blocks)
            for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
                const Instr& in = b.instrs[i];
                // (a) recursion without a bound check in front of the call
                if (live.count(fi)) {
                    bool bounded = false;
                    for (BlockId d : strict_dominators(an, b.id))
                        if (const Instr* j = jumpi_of(fn, d); j && has_comparison(j->args[0], true))
                            bounded = true;
                    each_expr(in, [&](const IrExpr& root) {
                        visit(root, [&](const IrExpr& e) {
                            if (bounded || e.kind != IrExpr::Kind::Call)
                                return;
                            auto callee = static_cast<std::uint32_t>(cx.prog.index_of(e.callee));
                            if (!cx.reaches(callee, fi))
                                return;
                            Finding f = cx.make(VulnType::CallStackOverflow, fi, {fi, b.id, i}, e.loc, "recursion",
                                                "unbounded recursion through " + cx.prog.functions[callee].id);
                            for (std::uint32_t g = 0; g < cx.prog.functions.size(); ++g)
                                if (cx.reaches(callee, g) && cx.reaches(g, fi))
                                    f.fns.push_back(g);
                            out.push_back(std::move(f));
                        });
                    });
                }
                // (b) unchecked call whose failure is silently ignored
                if (in.op == Op::ExtCall && !in.returns_checked && in.call_kind != ExternalCallKind::Transfer) {
                    if (cx.writes_at(sites_after(fn, fi, b.id, i)).empty())
                        continue;
                    out.push_back(cx.make(VulnType::CallStackOverflow, fi, {fi, b.id, i}, in.loc, "unchecked-call",
                                          std::string("unchecked ") + to_string(in.call_kind) +
                                              " result followed by a state change"));
                }
            }
    }
    return finish(std::move(out), traces);
}

std::vector<Finding> detect_integer_overflow(const Artifacts& a, const std::vector<ExecTrace>& traces) {
    Context cx(a);
    std::vector<Finding> out;
    for (std::uint32_t fi = 0; fi < cx.prog.functions.size(); ++fi) {
        const SsaFunction& fn = cx.prog.functions[fi];
        const FunctionAnalysis& an = a.analysis[fi];
        for (const auto& b : fn.blocks) {
            // Comparisons in branches around this block: dominating and post-dominating.
            std::vector<Comparison> guards;
            std::vector<BlockId> around = strict_dominators(an, b.id);
            for (BlockId p : post_dominators(an, b.id))
                around.push_back(p);
            for (BlockId p : condition_blocks(fn, an, b.id))
                around.push_back(p);
            for (BlockId g : around)
                if (const Instr* j = jumpi_of(fn, g))
                    comparisons(fn, j->args[0], guards);
            for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
                const Instr& in = b.instrs[i];
                if (in.op == Op::Phi)
                    continue;
                each_expr(in, [&](const IrExpr& root) {
                    visit(root, [&](const IrExpr& e) {
                        if (e.kind != IrExpr::Kind::Binary ||
                            (e.binary != BinaryOp::Add && e.binary != BinaryOp::Sub && e.binary != BinaryOp::Mul))
                            return;
                        if (e.ty.kind != TypeName::Kind::Uint && e.ty.kind != TypeName::Kind::Int)
                            return;
                        std::set<std::string> ops;
                        leaves(fn, e, 0, ops);
                        if (ops.empty())
                            return;
                        for (const auto& g : guards)
                            if (g.guards(ops))
                                return;
                        out.push_back(cx.make(VulnType::IntegerOverflow, fi, {fi, b.id, i}, e.loc, "unguarded-arith",
                                              std::string("unguarded ") + to_string(e.binary) + " on " +
                                                  to_string(e.ty)));
                    });
                });
            }
        }
    }
    return finish(std::move(out), traces);
}

std::vector<Finding> detect_timestamp_dependency(const Artifacts& a, const std::vector<ExecTrace>& traces) {
    Context cx(a);
    const DepGraph& g = a.dep;
    std::set<std::uint32_t> tainted = data_reach(g, {g.env_node(EnvSource::Timestamp)});
    std::vector<Finding> out;
    for (std::uint32_t fi = 0; fi < cx.prog.functions.size(); ++fi) {
        const SsaFunction& fn = cx.prog.functions[fi];
        const FunctionAnalysis& an = a.analysis[fi];
        for (const auto& b : fn.blocks)
            for (std::uint32_t i = 0; i < b.instrs.size(); ++i) {
                const Instr& in = b.instrs[i];
                if (in.op == Op::JumpI && in.dest != kNone && tainted.count(g.value_node(fi, in.dest))) {
                    std::vector<Site> sinks;
                    for (const auto& c : fn.blocks) {
                        const auto& deps = an.control_deps[c.id];
                        if (std::find(deps.begin(), deps.end(), b.id) == deps.end())
                            continue;
                        for (std::uint32_t k = 0; k < c.instrs.size(); ++k)
                            if (c.instrs[k].op == Op::ExtCall || c.instrs[k].target == Instr::Target::Storage)
                                sinks.push_back({fi, c.id, k});
                    }
                    if (!sinks.empty()) {
                        Finding f = cx.make(VulnType::TimestampDependency, fi, {fi, b.id, i}, in.loc, "tainted-branch",
                                            "branch on block.timestamp controls a value transfer or state change");
                        f.follow = std::move(sinks);
                        out.push_back(std::move(f));
                    }
                }
                if (in.op == Op::ExtCall) {
                    bool hit = false;
                    visit(in.args[1], [&](const IrExpr& e) {
                        std::uint32_t n = leaf_node(g, fi, e);
                        if (n != kNone && tainted.count(n))
                            hit = true;
                    });
                    if (hit)
                        out.push_back(cx.make(VulnType::TimestampDependency, fi, {fi, b.id, i}, in.loc, "tainted-value",
                                              "transferred amount depends on block.timestamp"));
                }
            }
    }
    return finish(std::move(out), traces);
}

bool witness(Finding& f, const ExecTrace& trace, std::uint64_t trace_id) {
    if (f.witnessed)
        return false;
    const auto& ev = trace.events;
    std::optional<std::uint64_t> hit;
    std::string how;
    for (std::size_t k = 0; k < ev.size() && !hit; ++k) {
        const TraceEvent& e = ev[k];
        if (f.rule == "call-then-write") {
            if (e.kind != EventKind::ExtCall || !e.flag || !at(e, f.site))
                continue;
            for (std::size_t m = k + 1; m < ev.size(); ++m)
                if (ev[m].invocation == e.invocation && ev[m].kind == EventKind::StorageWrite &&
                    in_sites(ev[m], f.follow)) {
                    hit = ev[m].id;
                    how = "state written after the call returned";
                    break;
                }
        } else if (f.rule == "unchecked-call" || f.rule == "tainted-value") {
            if (e.kind == EventKind::ExtCall && at(e, f.site)) {
                hit = e.id;
                how = "call executed";
            }
        } else if (f.rule == "recursion") {
            if (e.kind == EventKind::DepthLimit &&
                std::find(f.fns.begin(), f.fns.end(), e.fn) != f.fns.end()) {
                hit = e.id;
                how = "call depth limit reached";
            }
        } else if (f.rule == "unguarded-arith") {
            if (e.kind == EventKind::ArithWrap && e.fn == f.fn && e.loc.offset == f.loc.offset) {
                hit = e.id;
                how = to_string(e.raw) + " wrapped to " + to_string(e.reduced);
            }
        } else if (f.rule == "tainted-branch") {
            if (e.kind != EventKind::BranchTaken || !at(e, f.site))
                continue;
            for (std::size_t m = k + 1; m < ev.size(); ++m) {
                if (ev[m].frame == e.frame && (ev[m].kind == EventKind::Return || ev[m].kind == EventKind::Stop ||
                                               ev[m].kind == EventKind::Revert))
                    break;
                if (ev[m].frame == e.frame &&
                    (ev[m].kind == EventKind::ExtCall || ev[m].kind == EventKind::StorageWrite) &&
                    in_sites(ev[m], f.follow)) {
                    hit = ev[m].id;
                    how = "timestamp-dependent branch reached its sink";
                    break;
                }
            }
        }
    }
    if (!hit)
        return false;
    f.witnessed = true;
    f.score = 1.0;
    f.witness_trace = trace_id;
    f.witness_event = *hit;
    f.evidence += "; witnessed: " + how + " (trace " + std::to_string(trace_id) + ", event " +
                  std::to_string(*hit) + ")";
    return true;
}

void witness_all(std::vector<Finding>& fs, const ExecTrace& trace, std::uint64_t trace_id) {
    for (auto& f : fs)
        witness(f, trace, trace_id);
}

bool finding_less(const Finding& a, const Finding& b) {
    return std::tie(a.contract, a.vuln, a.function, a.loc, a.rule) <
           std::tie(b.contract, b.vuln, b.function, b.loc, b.rule);
}

void normalize(std::vector<Finding>& fs) {
    std::stable_sort(fs.begin(), fs.end(), finding_less);
    std::vector<Finding> out;
    for (auto& f : fs) {
        if (!out.empty()) {
            Finding& last = out.back();
            if (last.contract == f.contract && last.vuln == f.vuln && last.function == f.function &&
                last.loc == f.loc) {
                if (f.witnessed && !last.witnessed)
                    std::swap(last, f);
                continue;
            }
        }
        out.push_back(std::move(f));
    }
    fs = std::move(out);
}

std::vector<Finding> run_all(const Artifacts& a, const std::vector<ExecTrace>& traces) {
    std::vector<Finding> out;
    for (auto* detect : {detect_reentrancy, detect_callstack_overflow, detect_integer_overflow,
                         detect_timestamp_dependency}) {
        auto fs = detect(a, traces);
        out.insert(out.end(), fs.begin(), fs.end());
    }
    normalize(out);
    return out;
}

} // namespace sentry
