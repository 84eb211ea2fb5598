#include "sentry/dataflow.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace sentry {

const char* to_string(EnvSource s) {
    switch (s) {
    case EnvSource::Timestamp: return "block.timestamp";
    case EnvSource::Sender: return "msg.sender";
    case EnvSource::MsgValue: return "msg.value";
    case EnvSource::SelfBalance: return "this.balance";
    case EnvSource::CallReturn: return "call-return";
    }
    return "?";
}

const char* to_string(DepEdgeKind k) {
    switch (k) {
    case DepEdgeKind::Data: return "data";
    case DepEdgeKind::Control: return "control";
    case DepEdgeKind::Storage: return "storage";
    case DepEdgeKind::Env: return "env";
    case DepEdgeKind::Call: return "call";
    }
    return "?";
}

DepGraph::DepGraph() {
    for (int s = 0; s <= static_cast<int>(EnvSource::CallReturn); ++s) {
        DepNode n;
        n.kind = DepNode::Kind::Env;
        n.env = static_cast<EnvSource>(s);
        nodes.push_back(n);
        out_.emplace_back();
    }
}

std::uint32_t DepGraph::value_node(std::uint32_t fn, ValueId v) const {
    if (fn >= value_index_.size() || v >= value_index_[fn].size())
        return kNone;
    return value_index_[fn][v];
}

std::uint32_t DepGraph::slot_node(std::uint32_t slot) const {
    return slot < slot_index_.size() ? slot_index_[slot] : kNone;
}

std::uint32_t DepGraph::add_value(std::uint32_t fn, ValueId v) {
    if (value_index_.size() <= fn)
        value_index_.resize(fn + 1);
    auto& idx = value_index_[fn];
    if (idx.size() <= v)
        idx.resize(v + 1, kNone);
    if (idx[v] == kNone) {
        DepNode n;
        n.kind = DepNode::Kind::Value;
        n.fn = fn;
        n.value = v;
        nodes.push_back(n);
        out_.emplace_back();
        idx[v] = static_cast<std::uint32_t>(nodes.size() - 1);
    }
    return idx[v];
}

std::uint32_t DepGraph::add_slot(std::uint32_t slot) {
    if (slot_index_.size() <= slot)
        slot_index_.resize(slot + 1, kNone);
    if (slot_index_[slot] == kNone) {
        DepNode n;
        n.kind = DepNode::Kind::Slot;
        n.slot = slot;
        nodes.push_back(n);
        out_.emplace_back();
        slot_index_[slot] = static_cast<std::uint32_t>(nodes.size() - 1);
    }
    return slot_index_[slot];
}

void DepGraph::add_edge(std::uint32_t from, std::uint32_t to, DepEdgeKind kind) {
    edges.push_back({from, to, kind});
    out_[from].push_back(static_cast<std::uint32_t>(edges.size() - 1));
}

namespace {

EnvSource env_source(EnvKind k) {
    switch (k) {
    case EnvKind::Timestamp: return EnvSource::Timestamp;
    case EnvKind::Sender: return EnvSource::Sender;
    case EnvKind::MsgValue: return EnvSource::MsgValue;
    case EnvKind::SelfBalance: return EnvSource::SelfBalance;
    }
    return EnvSource::Timestamp;
}

// Adds the nodes and intra-function edges of one function. Call edges need
// the whole program and are added by the caller.
void add_function(DepGraph& g, const SsaFunction& fn, std::uint32_t fi) {
    for (ValueId v = 0; v < fn.values.size(); ++v)
        g.add_value(fi, v);
    FunctionAnalysis an = analyze_function(fn);
    for (const auto& b : fn.blocks) {
        for (const auto& in : b.instrs) {
            if (in.dest == kNone)
                continue;
            std::uint32_t d = g.value_node(fi, in.dest);
            for (ValueId v : operands(in))
                g.add_edge(g.value_node(fi, v), d, DepEdgeKind::Data);
            auto leaves = [&](const IrExpr& e) {
                visit(e, [&](const IrExpr& x) {
                    if (x.kind == IrExpr::Kind::Env)
                        g.add_edge(g.env_node(env_source(x.env)), d, DepEdgeKind::Env);
                    else if (x.kind == IrExpr::Kind::Load)
                        g.add_edge(g.add_slot(x.slot), d, DepEdgeKind::Storage);
                });
            };
            for (const auto& k : in.keys)
                leaves(k);
            for (const auto& a : in.args)
                leaves(a);
            if (in.op == Op::ExtCall)
                g.add_edge(g.env_node(EnvSource::CallReturn), d, DepEdgeKind::Env);
            if (in.target == Instr::Target::Storage)
                g.add_edge(d, g.add_slot(in.slot), DepEdgeKind::Storage);
            if (in.op != Op::Phi)
                for (auto a : an.control_deps[b.id]) {
                    const Instr& br = fn.blocks[a].terminator();
                    if (br.op == Op::JumpI && br.dest != kNone)
                        g.add_edge(g.value_node(fi, br.dest), d, DepEdgeKind::Control);
                }
        }
    }
}

std::set<std::uint32_t> reach(const DepGraph& g, const std::set<std::uint32_t>& sources, bool with_control) {
    std::set<std::uint32_t> seen(sources.begin(), sources.end());
    std::vector<std::uint32_t> work(sources.begin(), sources.end());
    while (!work.empty()) {
        auto n = work.back();
        work.pop_back();
        for (auto ei : g.out_edges(n)) {
            const DepEdge& e = g.edges[ei];
            if (!with_control && e.kind == DepEdgeKind::Control)
                continue;
            if (seen.insert(e.to).second)
                work.push_back(e.to);
        }
    }
    return seen;
}

} // namespace

DepGraph build_dep_graph(const Program& prog) {
    DepGraph g;
    for (std::uint32_t fi = 0; fi < prog.functions.size(); ++fi)
        add_function(g, prog.functions[fi], fi);
    // Interprocedural: argument leaves feed callee parameters, returns feed the call site.
    for (std::uint32_t fi = 0; fi < prog.functions.size(); ++fi) {
        const SsaFunction& fn = prog.functions[fi];
        for (const auto& b : fn.blocks)
            for (const auto& in : b.instrs) {
                if (in.dest == kNone)
                    continue;
                auto each_call = [&](const IrExpr& root) {
                    visit(root, [&](const IrExpr& call) {
                        if (call.kind != IrExpr::Kind::Call)
                            return;
                        std::size_t ci = prog.index_of(call.callee);
                        if (ci == kNone)
                            return;
                        const SsaFunction& callee = prog.functions[ci];
                        for (std::size_t p = 0; p < call.args.size() && p < callee.param_count; ++p) {
                            std::uint32_t param = kNone;
                            for (ValueId v = 0; v < callee.values.size(); ++v)
                                if (callee.values[v].kind == ValueDef::Kind::Param && callee.values[v].local == p)
                                    param = g.value_node(static_cast<std::uint32_t>(ci), v);
                            visit(call.args[p], [&](const IrExpr& leaf) {
                                std::uint32_t src = leaf_node(g, fi, leaf);
                                if (src != kNone && param != kNone)
                                    g.add_edge(src, param, DepEdgeKind::Call);
                            });
                        }
                        for (const auto& cb : callee.blocks)
                            for (const auto& ci_in : cb.instrs)
                                if (ci_in.op == Op::Return && ci_in.dest != kNone)
                                    g.add_edge(g.value_node(static_cast<std::uint32_t>(ci), ci_in.dest),
                                               g.value_node(fi, in.dest), DepEdgeKind::Call);
                    });
                };
                for (const auto& a : in.args)
                    each_call(a);
            }
    }
    return g;
}

DepGraph build_dep_graph(const SsaFunction& fn, const StorageLayout&) {
    DepGraph g;
    add_function(g, fn, 0);
    return g;
}

std::uint32_t leaf_node(const DepGraph& g, std::uint32_t fn, const IrExpr& leaf) {
    switch (leaf.kind) {
    case IrExpr::Kind::Var: return g.value_node(fn, leaf.ssa);
    case IrExpr::Kind::Load: return g.slot_node(leaf.slot);
    case IrExpr::Kind::Env: return g.env_node(env_source(leaf.env));
    default: return kNone;
    }
}

std::set<std::uint32_t> taint_reach(const DepGraph& g, const std::set<std::uint32_t>& sources) {
    return reach(g, sources, true);
}

std::set<std::uint32_t> data_reach(const DepGraph& g, const std::set<std::uint32_t>& sources) {
    return reach(g, sources, false);
}

std::string node_label(const Program& prog, const DepGraph& g, std::uint32_t node) {
    const DepNode& n = g.nodes[node];
    switch (n.kind) {
    case DepNode::Kind::Env:
        return to_string(n.env);
    case DepNode::Kind::Slot:
        return "slot " + std::to_string(n.slot) + " " + prog.layout.slots[n.slot].name;
    case DepNode::Kind::Value: {
        const SsaFunction& fn = prog.functions[n.fn];
        const ValueDef& d = fn.values[n.value];
        std::string s = fn.id + " %" + std::to_string(n.value);
        if (d.local != kNone)
            s += " " + fn.locals[d.local].name;
        return s;
    }
    }
    return "?";
}

std::string to_dot(const Program& prog, const DepGraph& g) {
    std::ostringstream os;
    os << "digraph deps {\n";
    for (std::uint32_t i = 0; i < g.nodes.size(); ++i) {
        const char* shape = g.nodes[i].kind == DepNode::Kind::Value ? "ellipse"
                            : g.nodes[i].kind == DepNode::Kind::Slot ? "box"
                                                                      : "diamond";
        os << "  n" << i << " [label=\"" << node_label(prog, g, i) << "\", shape=" << shape << "];\n";
    }
    for (const auto& e : g.edges) {
        os << "  n" << e.from << " -> n" << e.to << " [label=\"" << to_string(e.kind) << "\"";
        if (e.kind == DepEdgeKind::Control)
            os << ", style=dashed";
        os << "];\n";
    }
    os << "}\n";
    return os.str();
}

InputLayout collect_input_slots(const Program& prog) {
    InputLayout out;
    auto push = [&](InputSlot s) {
        s.index = out.slots.size();
        if (s.ty.kind != TypeName::Kind::Mapping) {
            s.lo = s.ty.min_value();
            s.hi = s.ty.max_value();
        }
        out.slots.push_back(std::move(s));
    };
    for (auto fi : prog.entries) {
        const SsaFunction& fn = prog.functions[fi];
        for (std::uint32_t p = 0; p < fn.param_count; ++p) {
            InputSlot s;
            s.origin = InputSlot::Origin::Param;
            s.function = fi;
            s.param = p;
            s.ty = fn.locals[p].ty;
            s.name = fn.id + "." + fn.locals[p].name;
            push(std::move(s));
        }
    }
    // written storage, with constant key paths for mappings
    std::vector<char> written(prog.layout.slots.size(), 0);
    std::vector<std::set<std::vector<BigInt>>> const_keys(prog.layout.slots.size());
    auto constant_path = [](const std::vector<IrExpr>& keys, std::vector<BigInt>& out_keys) {
        out_keys.clear();
        for (const auto& k : keys) {
            if (k.kind != IrExpr::Kind::Const)
                return false;
            out_keys.push_back(k.value);
        }
        return !keys.empty();
    };
    for (const auto& fn : prog.functions)
        for (const auto& b : fn.blocks)
            for (const auto& in : b.instrs) {
                std::vector<BigInt> path;
                if (in.target == Instr::Target::Storage) {
                    written[in.slot] = 1;
                    if (constant_path(in.keys, path))
                        const_keys[in.slot].insert(path);
                }
                auto loads = [&](const IrExpr& e) {
                    visit(e, [&](const IrExpr& x) {
                        std::vector<BigInt> p;
                        if (x.kind == IrExpr::Kind::Load && constant_path(x.args, p))
                            const_keys[x.slot].insert(p);
                    });
                };
                for (const auto& a : in.args)
                    loads(a);
                for (const auto& k : in.keys)
                    loads(k);
            }
    for (const auto& sl : prog.layout.slots) {
        if (!written[sl.index])
            continue;
        if (!sl.ty.is_mapping()) {
            InputSlot s;
            s.origin = InputSlot::Origin::Storage;
            s.slot = static_cast<std::uint32_t>(sl.index);
            s.ty = sl.ty;
            s.name = sl.name;
            push(std::move(s));
            continue;
        }
        TypeName leaf = sl.ty;
        std::vector<TypeName> key_types;
        while (leaf.is_mapping()) {
            key_types.push_back(leaf.key());
            TypeName next = leaf.value();
            leaf = next;
        }
        for (const auto& path : const_keys[sl.index]) {
            if (path.size() != key_types.size())
                continue;
            InputSlot s;
            s.origin = InputSlot::Origin::Storage;
            s.slot = static_cast<std::uint32_t>(sl.index);
            s.keys = path;
            s.ty = leaf;
            s.name = sl.name;
            for (const auto& k : path)
                s.name += "[" + to_string(k) + "]";
            push(std::move(s));
        }
        InputSlot s;
        s.origin = InputSlot::Origin::Storage;
        s.slot = static_cast<std::uint32_t>(sl.index);
        s.symbolic_key = true;
        s.ty = leaf;
        s.name = sl.name + "[*]";
        push(std::move(s));
    }
    out.declared = out.slots.size();
    {
        InputSlot s;
        s.origin = InputSlot::Origin::Env;
        s.env = EnvKind::Timestamp;
        s.ty = TypeName::uint(32);
        s.name = "block.timestamp";
        push(std::move(s));
    }
    for (auto fi : prog.entries) {
        const SsaFunction& fn = prog.functions[fi];
        if (!fn.is_payable)
            continue;
        InputSlot s;
        s.origin = InputSlot::Origin::Env;
        s.env = EnvKind::MsgValue;
        s.function = fi;
        s.ty = TypeName::uint(256);
        s.name = fn.id + ".msg.value";
        push(std::move(s));
    }
    return out;
}

SpecialValues collect_special_values(const Program& prog, const DepGraph& g, const InputLayout& layout) {
    // comparison literals with the dependency-graph leaves of their comparand
    struct Cmp {
        BigInt literal;
        std::set<std::uint32_t> leaves;
    };
    std::vector<Cmp> cmps;
    for (std::uint32_t fi = 0; fi < prog.functions.size(); ++fi)
        for (const auto& b : prog.functions[fi].blocks)
            for (const auto& in : b.instrs) {
                auto scan = [&](const IrExpr& root) {
                    visit(root, [&](const IrExpr& e) {
                        if (e.kind != IrExpr::Kind::Binary || !is_comparison(e.binary))
                            return;
                        for (int side = 0; side < 2; ++side) {
                            const IrExpr& lit = e.args[side];
                            if (lit.kind != IrExpr::Kind::Const)
                                continue;
                            Cmp c;
                            c.literal = lit.value;
                            visit(e.args[1 - side], [&](const IrExpr& leaf) {
                                auto n = leaf_node(g, fi, leaf);
                                if (n != kNone)
                                    c.leaves.insert(n);
                            });
                            cmps.push_back(std::move(c));
                        }
                    });
                };
                for (const auto& a : in.args)
                    scan(a);
                for (const auto& k : in.keys)
                    scan(k);
            }

    SpecialValues out(layout.size());
    for (const auto& s : layout.slots) {
        std::set<BigInt> vals{s.lo, s.hi, s.hi - 1, BigInt(0), BigInt(1)};
        std::set<std::uint32_t> src;
        switch (s.origin) {
        case InputSlot::Origin::Param: {
            const SsaFunction& fn = prog.functions[s.function];
            for (ValueId v = 0; v < fn.values.size(); ++v)
                if (fn.values[v].kind == ValueDef::Kind::Param && fn.values[v].local == s.param)
                    src.insert(g.value_node(static_cast<std::uint32_t>(s.function), v));
            break;
        }
        case InputSlot::Origin::Storage:
            if (auto n = g.slot_node(s.slot); n != kNone)
                src.insert(n);
            break;
        case InputSlot::Origin::Env:
            src.insert(g.env_node(s.env == EnvKind::Timestamp ? EnvSource::Timestamp : EnvSource::MsgValue));
            break;
        }
        auto reached = data_reach(g, src);
        for (const auto& c : cmps)
            for (auto leaf : c.leaves)
                if (reached.count(leaf)) {
                    vals.insert(c.literal);
                    break;
                }
        for (const auto& v : vals)
            if (v >= s.lo && v <= s.hi)
                out[s.index].push_back(v);
    }
    return out;
}

std::string dump(const InputLayout& layout, const SpecialValues* specials) {
    std::ostringstream os;
    for (const auto& s : layout.slots) {
        os << s.index << (s.index < layout.declared ? " " : " env ") << s.name << ": " << to_string(s.ty) << " ["
           << s.lo << ", " << s.hi << "]";
        if (specials) {
            os << " specials {";
            const auto& sv = (*specials)[s.index];
            for (std::size_t i = 0; i < sv.size(); ++i)
                os << (i ? ", " : "") << sv[i];
            os << "}";
        }
        os << "\n";
    }
    return os.str();
}

} // namespace sentry
