#pragma once

// Inheritance, call graph and storage layout over a parsed unit.

#include "sentry/ast.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentry {

class InheritanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InheritanceCycle : public InheritanceError {
public:
    explicit InheritanceCycle(std::vector<std::string> cycle);
    const std::vector<std::string>& cycle() const { return cycle_; }

private:
    std::vector<std::string> cycle_;
};

class UnresolvedBase : public InheritanceError {
public:
    UnresolvedBase(const std::string& contract, const std::string& base);
};

struct InheritanceGraph {
    std::map<std::string, std::vector<std::string>> edges;         // derived -> declared bases
    std::map<std::string, std::vector<std::string>> linearization; // base-most first, self last

    const std::vector<std::string>& linearize(const std::string& contract) const;
};

InheritanceGraph build_inheritance(const SourceUnit& unit);

// The contract nobody inherits from; the last one in the file when several qualify.
const ContractDef& leaf_contract(const SourceUnit& unit, const InheritanceGraph& ig);

struct ResolvedFunction {
    const ContractDef* owner = nullptr;
    const FunctionDef* fn = nullptr;
    std::string id() const { return owner->name + "." + fn->name; }
};

// Most-derived definition of `name` visible from `contract`, or an empty result.
ResolvedFunction resolve_function(const SourceUnit& unit, const InheritanceGraph& ig,
                                  const std::string& contract, const std::string& name);

// Event declared in `contract` or one of its ancestors.
const EventDef* resolve_event(const SourceUnit& unit, const InheritanceGraph& ig, const std::string& contract,
                              const std::string& name);

enum class CallEdgeKind { Internal, External };

struct CallEdge {
    std::string from;
    std::string to;
    CallEdgeKind kind = CallEdgeKind::Internal;
    SourceLocation loc;
};

struct CallGraph {
    static constexpr const char* kExternalSink = "<external>";

    std::vector<std::string> nodes; // sorted; includes the external sink
    std::vector<CallEdge> edges;    // source order within each caller
    std::vector<std::string> warnings;

    bool has_node(const std::string& id) const;
    std::vector<std::string> callees(const std::string& id) const; // internal only, deduplicated
};

CallGraph build_call_graph(const SourceUnit& unit, const InheritanceGraph& ig);

// Node ids on some internal cycle through `id` (empty if none), found by DFS.
std::vector<std::string> find_cycle_through(const CallGraph& cg, const std::string& id);

struct StorageSlot {
    std::string contract; // contract of origin
    std::string name;
    std::size_t index = 0;
    TypeName ty;
};

struct StorageLayout {
    std::vector<StorageSlot> slots;

    const StorageSlot* find(const std::string& name) const;
};

StorageLayout storage_layout(const SourceUnit& unit, const ContractDef& contract, const InheritanceGraph& ig);

} // namespace sentry
