#pragma once

// Dominator trees over small graphs given as successor lists.
// Iterative algorithm of Cooper, Harvey and Kennedy.

#include <cstdint>
#include <vector>

namespace sentry {

inline constexpr std::uint32_t kNoNode = UINT32_MAX;

using Graph = std::vector<std::vector<std::uint32_t>>;

Graph reverse_graph(const Graph& succs);

// idom[entry] == entry; unreachable nodes get kNoNode.
std::vector<std::uint32_t> immediate_dominators(const Graph& succs, std::uint32_t entry);

// Does a dominate b (reflexive)?
bool dominates(const std::vector<std::uint32_t>& idom, std::uint32_t a, std::uint32_t b);

std::vector<std::vector<std::uint32_t>> dominance_frontiers(const Graph& succs,
                                                            const std::vector<std::uint32_t>& idom);

std::vector<std::vector<std::uint32_t>> dominator_tree_children(const std::vector<std::uint32_t>& idom);

// Post-dominators via a virtual exit node appended at index succs.size(),
// reached from every node in `exits`. Nodes that cannot reach an exit hang
// off the virtual exit.
std::vector<std::uint32_t> immediate_post_dominators(const Graph& succs, const std::vector<std::uint32_t>& exits);

// control_deps[b] = branch nodes b is control dependent on (Ferrante et al.).
std::vector<std::vector<std::uint32_t>> control_dependences(const Graph& succs,
                                                            const std::vector<std::uint32_t>& ipdom);

} // namespace sentry
