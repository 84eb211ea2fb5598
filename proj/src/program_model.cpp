#include "sentry/program_model.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace sentry {

namespace {

std::string join(const std::vector<std::string>& xs, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i)
        out += (i ? sep : "") + xs[i];
    return out;
}

// C3 merge; lists are most-derived first.
std::vector<std::string> c3_merge(std::vector<std::vector<std::string>> seqs, const std::string& who) {
    std::vector<std::string> out;
    for (;;) {
        seqs.erase(std::remove_if(seqs.begin(), seqs.end(), [](const auto& s) { return s.empty(); }), seqs.end());
        if (seqs.empty())
            return out;
        std::string pick;
        for (const auto& s : seqs) {
            const std::string& head = s.front();
            bool in_tail = std::any_of(seqs.begin(), seqs.end(), [&](const auto& t) {
                return std::find(t.begin() + 1, t.end(), head) != t.end();
            });
            if (!in_tail) {
                pick = head;
                break;
            }
        }
        if (pick.empty())
            throw InheritanceError("no consistent linearization for contract '" + who + "'");
        out.push_back(pick);
        for (auto& s : seqs)
            if (!s.empty() && s.front() == pick)
                s.erase(s.begin());
    }
}

void collect_calls(const Expr& e, std::vector<const Expr*>& out) {
    for (const auto& o : e.operands)
        collect_calls(o, out);
    if (e.kind == Expr::Kind::Call)
        out.push_back(&e);
}

void walk_statements(const std::vector<Stmt>& body, const std::function<void(const Stmt&)>& fn) {
    for (const Stmt& s : body) {
        fn(s);
        walk_statements(s.init, fn);
        walk_statements(s.body, fn);
        walk_statements(s.else_body, fn);
        walk_statements(s.update, fn);
    }
}

} // namespace

InheritanceCycle::InheritanceCycle(std::vector<std::string> cycle)
    : InheritanceError("inheritance cycle: " + join(cycle, " -> ")), cycle_(std::move(cycle)) {}

UnresolvedBase::UnresolvedBase(const std::string& contract, const std::string& base)
    : InheritanceError("contract '" + contract + "' inherits from unknown contract '" + base + "'") {}

const std::vector<std::string>& InheritanceGraph::linearize(const std::string& contract) const {
    auto it = linearization.find(contract);
    if (it == linearization.end())
        throw InheritanceError("unknown contract '" + contract + "'");
    return it->second;
}

InheritanceGraph build_inheritance(const SourceUnit& unit) {
    InheritanceGraph ig;
    for (const auto& c : unit.contracts) {
        ig.edges[c.name] = c.bases;
        for (const auto& b : c.bases)
            if (!unit.find_contract(b))
                throw UnresolvedBase(c.name, b);
    }

    // Cycle check first so the C3 recursion below terminates.
    std::map<std::string, int> color;
    std::vector<std::string> stack;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
        color[n] = 1;
        stack.push_back(n);
        for (const auto& b : ig.edges[n]) {
            if (color[b] == 1) {
                std::vector<std::string> cyc(std::find(stack.begin(), stack.end(), b), stack.end());
                cyc.push_back(b);
                throw InheritanceCycle(cyc);
            }
            if (color[b] == 0)
                dfs(b);
        }
        stack.pop_back();
        color[n] = 2;
    };
    for (const auto& c : unit.contracts)
        if (color[c.name] == 0)
            dfs(c.name);

    std::map<std::string, std::vector<std::string>> mro; // most-derived first
    std::function<const std::vector<std::string>&(const std::string&)> lin =
        [&](const std::string& n) -> const std::vector<std::string>& {
        if (auto it = mro.find(n); it != mro.end())
            return it->second;
        const auto& bases = ig.edges[n];
        std::vector<std::vector<std::string>> seqs;
        for (auto b = bases.rbegin(); b != bases.rend(); ++b)
            seqs.push_back(lin(*b));
        seqs.emplace_back(bases.rbegin(), bases.rend());
        std::vector<std::string> out{n};
        for (auto& x : c3_merge(seqs, n))
            out.push_back(x);
        return mro[n] = out;
    };
    for (const auto& c : unit.contracts) {
        auto l = lin(c.name);
        ig.linearization[c.name] = std::vector<std::string>(l.rbegin(), l.rend());
    }
    return ig;
}

const ContractDef& leaf_contract(const SourceUnit& unit, const InheritanceGraph& ig) {
    if (unit.contracts.empty())
        throw InheritanceError("source unit contains no contract");
    std::set<std::string> inherited;
    for (const auto& [d, bases] : ig.edges)
        inherited.insert(bases.begin(), bases.end());
    for (auto it = unit.contracts.rbegin(); it != unit.contracts.rend(); ++it)
        if (!inherited.count(it->name))
            return *it;
    return unit.contracts.back();
}

ResolvedFunction resolve_function(const SourceUnit& unit, const InheritanceGraph& ig, const std::string& contract,
                                  const std::string& name) {
    const auto& l = ig.linearize(contract);
    for (auto it = l.rbegin(); it != l.rend(); ++it) {
        const ContractDef* c = unit.find_contract(*it);
        if (const FunctionDef* f = c->find_function(name))
            return {c, f};
    }
    return {};
}

const EventDef* resolve_event(const SourceUnit& unit, const InheritanceGraph& ig, const std::string& contract,
                              const std::string& name) {
    const auto& l = ig.linearize(contract);
    for (auto it = l.rbegin(); it != l.rend(); ++it)
        for (const auto& e : unit.find_contract(*it)->events)
            if (e.name == name)
                return &e;
    return nullptr;
}

bool CallGraph::has_node(const std::string& id) const { return std::binary_search(nodes.begin(), nodes.end(), id); }

std::vector<std::string> CallGraph::callees(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& e : edges)
        if (e.from == id && e.kind == CallEdgeKind::Internal &&
            std::find(out.begin(), out.end(), e.to) == out.end())
            out.push_back(e.to);
    return out;
}

CallGraph build_call_graph(const SourceUnit& unit, const InheritanceGraph& ig) {
    CallGraph cg;
    std::set<std::string> nodes{CallGraph::kExternalSink};
    for (const auto& c : unit.contracts) {
        for (const auto& f : c.functions) {
            std::string from = c.name + "." + f.name;
            nodes.insert(from);
            for (const auto& bc : f.base_calls) {
                if (auto r = resolve_function(unit, ig, bc.base, kConstructorName); r.fn && r.owner->name == bc.base)
                    cg.edges.push_back({from, r.id(), CallEdgeKind::Internal, bc.loc});
            }
            walk_statements(f.body, [&](const Stmt& s) {
                std::vector<const Expr*> calls;
                for (const auto& e : s.exprs)
                    collect_calls(e, calls);
                for (const Expr* call : calls) {
                    if (resolve_event(unit, ig, c.name, call->name))
                        continue; // old-style event invocation
                    ResolvedFunction r = resolve_function(unit, ig, c.name, call->name);
                    if (r.fn && !r.fn->is_constructor) {
                        cg.edges.push_back({from, r.id(), CallEdgeKind::Internal, call->loc});
                    } else {
                        cg.warnings.push_back(to_string(call->loc) + ": unresolved call to '" + call->name +
                                              "' in " + from + " treated as external");
                        cg.edges.push_back({from, CallGraph::kExternalSink, CallEdgeKind::External, call->loc});
                    }
                }
                if (s.kind == Stmt::Kind::ExternalCall)
                    cg.edges.push_back({from, CallGraph::kExternalSink, CallEdgeKind::External, s.loc});
            });
        }
    }
    cg.nodes.assign(nodes.begin(), nodes.end());
    return cg;
}

std::vector<std::string> find_cycle_through(const CallGraph& cg, const std::string& id) {
    // BFS from id's callees back to id, keeping parents for the path.
    std::map<std::string, std::string> parent;
    std::vector<std::string> queue;
    for (const auto& c : cg.callees(id)) {
        if (c == id)
            return {id};
        if (!parent.count(c)) {
            parent[c] = id;
            queue.push_back(c);
        }
    }
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        std::string n = queue[qi];
        for (const auto& c : cg.callees(n)) {
            if (c == id) {
                std::vector<std::string> path{n};
                while (parent[path.back()] != id)
                    path.push_back(parent[path.back()]);
                path.push_back(id);
                std::reverse(path.begin(), path.end());
                return path;
            }
            if (!parent.count(c)) {
                parent[c] = n;
                queue.push_back(c);
            }
        }
    }
    return {};
}

const StorageSlot* StorageLayout::find(const std::string& name) const {
    for (auto it = slots.rbegin(); it != slots.rend(); ++it)
        if (it->name == name)
            return &*it;
    return nullptr;
}

StorageLayout storage_layout(const SourceUnit& unit, const ContractDef& contract, const InheritanceGraph& ig) {
    StorageLayout layout;
    for (const auto& name : ig.linearize(contract.name)) {
        const ContractDef* c = unit.find_contract(name);
        for (const auto& v : c->state_vars)
            layout.slots.push_back({c->name, v.name, layout.slots.size(), v.ty});
    }
    return layout;
}

} // namespace sentry
