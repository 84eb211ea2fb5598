#pragma once

// Dependency graph over SSA values, storage slots and environment sources,
// plus the chromosome layout (input slots) and seed values derived from it.

#include "sentry/ir.hpp"

#include <set>
#include <string>
#include <vector>

namespace sentry {

enum class EnvSource { Timestamp, Sender, MsgValue, SelfBalance, CallReturn };

const char* to_string(EnvSource s);

struct DepNode {
    enum class Kind { Value, Slot, Env };
    Kind kind = Kind::Value;
    std::uint32_t fn = kNone; // function index in the program
    ValueId value = kNone;
    std::uint32_t slot = kNone;
    EnvSource env = EnvSource::Timestamp;
};

enum class DepEdgeKind { Data, Control, Storage, Env, Call };

const char* to_string(DepEdgeKind k);

struct DepEdge {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    DepEdgeKind kind = DepEdgeKind::Data;
};

class DepGraph {
public:
    std::vector<DepNode> nodes;
    std::vector<DepEdge> edges;

    std::uint32_t env_node(EnvSource s) const { return static_cast<std::uint32_t>(s); }
    std::uint32_t value_node(std::uint32_t fn, ValueId v) const;
    std::uint32_t slot_node(std::uint32_t slot) const; // kNone when the slot is never touched
    const std::vector<std::uint32_t>& out_edges(std::uint32_t node) const { return out_[node]; }

    // construction
    std::uint32_t add_value(std::uint32_t fn, ValueId v);
    std::uint32_t add_slot(std::uint32_t slot);
    void add_edge(std::uint32_t from, std::uint32_t to, DepEdgeKind kind);

    DepGraph();

private:
    std::vector<std::vector<std::uint32_t>> value_index_; // [fn][value] -> node
    std::vector<std::uint32_t> slot_index_;
    std::vector<std::vector<std::uint32_t>> out_; // node -> edge indices
};

// Whole-program graph; function i of the program owns value nodes (i, *).
DepGraph build_dep_graph(const Program& prog);

// Graph of a single function.
DepGraph build_dep_graph(const SsaFunction& fn, const StorageLayout& layout);

// Forward closure over every edge kind.
std::set<std::uint32_t> taint_reach(const DepGraph& g, const std::set<std::uint32_t>& sources);

// Forward closure ignoring control edges.
std::set<std::uint32_t> data_reach(const DepGraph& g, const std::set<std::uint32_t>& sources);

// The dependency-graph node an expression leaf reads (Var, Load or Env), or kNone.
std::uint32_t leaf_node(const DepGraph& g, std::uint32_t fn, const IrExpr& leaf);

std::string node_label(const Program& prog, const DepGraph& g, std::uint32_t node);
std::string to_dot(const Program& prog, const DepGraph& g);

struct InputSlot {
    enum class Origin { Param, Storage, Env };

    std::size_t index = 0;
    Origin origin = Origin::Param;
    std::size_t function = kNone;  // Param: program function index; Env MsgValue: entry function
    std::uint32_t param = kNone;   // Param
    std::uint32_t slot = kNone;    // Storage
    std::vector<BigInt> keys;      // Storage mapping: constant key path
    bool symbolic_key = false;     // Storage mapping: default for every other key
    EnvKind env = EnvKind::Timestamp;
    TypeName ty;
    BigInt lo, hi;
    std::string name;
};

struct InputLayout {
    std::vector<InputSlot> slots;
    std::size_t declared = 0; // M: parameters and storage; environment genes follow

    std::size_t size() const { return slots.size(); }
};

// Entry parameters in execution order, then written storage, then the
// timestamp and one msg.value gene per payable entry.
InputLayout collect_input_slots(const Program& prog);

using SpecialValues = std::vector<std::vector<BigInt>>; // per slot, ascending, unique

SpecialValues collect_special_values(const Program& prog, const DepGraph& g, const InputLayout& layout);

std::string dump(const InputLayout& layout, const SpecialValues* specials = nullptr);

} // namespace sentry
