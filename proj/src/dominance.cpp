#include "sentry/dominance.hpp"

#include <algorithm>

namespace sentry {

Graph reverse_graph(const Graph& succs) {
    Graph preds(succs.size());
    for (std::uint32_t n = 0; n < succs.size(); ++n)
        for (auto s : succs[n])
            preds[s].push_back(n);
    return preds;
}

namespace {

std::vector<std::uint32_t> reverse_postorder(const Graph& succs, std::uint32_t entry) {
    std::vector<std::uint32_t> order;
    std::vector<char> seen(succs.size(), 0);
    // iterative DFS with explicit child index
    std::vector<std::pair<std::uint32_t, std::size_t>> stack{{entry, 0}};
    seen[entry] = 1;
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < succs[n].size()) {
            std::uint32_t s = succs[n][i++];
            if (!seen[s]) {
                seen[s] = 1;
                stack.push_back({s, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

} // namespace

std::vector<std::uint32_t> immediate_dominators(const Graph& succs, std::uint32_t entry) {
    const std::size_t n = succs.size();
    std::vector<std::uint32_t> idom(n, kNoNode);
    if (n == 0)
        return idom;
    Graph preds = reverse_graph(succs);
    auto rpo = reverse_postorder(succs, entry);
    std::vector<std::uint32_t> rpo_index(n, kNoNode);
    for (std::uint32_t i = 0; i < rpo.size(); ++i)
        rpo_index[rpo[i]] = i;
    idom[entry] = entry;
    auto intersect = [&](std::uint32_t a, std::uint32_t b) {
        while (a != b) {
            while (rpo_index[a] > rpo_index[b])
                a = idom[a];
            while (rpo_index[b] > rpo_index[a])
                b = idom[b];
        }
        return a;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 1; i < rpo.size(); ++i) {
            std::uint32_t b = rpo[i];
            std::uint32_t nd = kNoNode;
            for (auto p : preds[b]) {
                if (idom[p] == kNoNode)
                    continue;
                nd = nd == kNoNode ? p : intersect(p, nd);
            }
            if (idom[b] != nd) {
                idom[b] = nd;
                changed = true;
            }
        }
    }
    return idom;
}

bool dominates(const std::vector<std::uint32_t>& idom, std::uint32_t a, std::uint32_t b) {
    if (idom[b] == kNoNode)
        return false;
    for (;;) {
        if (a == b)
            return true;
        if (idom[b] == b)
            return false;
        b = idom[b];
    }
}

std::vector<std::vector<std::uint32_t>> dominance_frontiers(const Graph& succs,
                                                            const std::vector<std::uint32_t>& idom) {
    std::vector<std::vector<std::uint32_t>> df(succs.size());
    Graph preds = reverse_graph(succs);
    for (std::uint32_t b = 0; b < succs.size(); ++b) {
        if (idom[b] == kNoNode || preds[b].size() < 2)
            continue;
        for (auto p : preds[b]) {
            std::uint32_t runner = p;
            if (idom[runner] == kNoNode)
                continue;
            while (runner != idom[b]) {
                if (std::find(df[runner].begin(), df[runner].end(), b) == df[runner].end())
                    df[runner].push_back(b);
                if (idom[runner] == runner)
                    break;
                runner = idom[runner];
            }
        }
    }
    for (auto& f : df)
        std::sort(f.begin(), f.end());
    return df;
}

std::vector<std::vector<std::uint32_t>> dominator_tree_children(const std::vector<std::uint32_t>& idom) {
    std::vector<std::vector<std::uint32_t>> kids(idom.size());
    for (std::uint32_t b = 0; b < idom.size(); ++b)
        if (idom[b] != kNoNode && idom[b] != b)
            kids[idom[b]].push_back(b);
    return kids;
}

std::vector<std::uint32_t> immediate_post_dominators(const Graph& succs, const std::vector<std::uint32_t>& exits) {
    const std::uint32_t n = static_cast<std::uint32_t>(succs.size());
    Graph rev(n + 1);
    for (std::uint32_t a = 0; a < n; ++a)
        for (auto s : succs[a])
            rev[s].push_back(a);
    for (auto e : exits)
        rev[n].push_back(e);
    auto ipdom = immediate_dominators(rev, n);
    // Nodes stuck in exitless cycles get attached to the virtual exit so every
    // node has a post-dominator.
    bool fixed = false;
    for (std::uint32_t a = 0; a < n; ++a) {
        if (ipdom[a] == kNoNode) {
            rev[n].push_back(a);
            fixed = true;
        }
    }
    if (fixed)
        ipdom = immediate_dominators(rev, n);
    return ipdom;
}

std::vector<std::vector<std::uint32_t>> control_dependences(const Graph& succs,
                                                            const std::vector<std::uint32_t>& ipdom) {
    std::vector<std::vector<std::uint32_t>> deps(succs.size());
    for (std::uint32_t a = 0; a < succs.size(); ++a) {
        if (succs[a].size() < 2)
            continue;
        for (auto s : succs[a]) {
            std::uint32_t runner = s;
            while (runner != ipdom[a] && runner < succs.size()) {
                if (std::find(deps[runner].begin(), deps[runner].end(), a) == deps[runner].end())
                    deps[runner].push_back(a);
                if (ipdom[runner] == runner || ipdom[runner] == kNoNode)
                    break;
                runner = ipdom[runner];
            }
        }
    }
    return deps;
}

} // namespace sentry
