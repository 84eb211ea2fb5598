#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/frontend.hpp"
#include "sentry/program_model.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

using namespace sentry;

namespace {

// Textbook C3 on a most-derived-first list, written independently of the library.
std::vector<std::string> c3_mro(const std::map<std::string, std::vector<std::string>>& bases,
                                const std::string& c) {
    std::vector<std::vector<std::string>> lists;
    const auto& bs = bases.at(c);
    for (auto it = bs.rbegin(); it != bs.rend(); ++it)
        lists.push_back(c3_mro(bases, *it));
    lists.emplace_back(bs.rbegin(), bs.rend());
    std::vector<std::string> out{c};
    while (true) {
        bool any = false;
        for (auto& l : lists)
            any |= !l.empty();
        if (!any)
            break;
        std::string pick;
        for (auto& l : lists) {
            if (l.empty())
                continue;
            bool ok = true;
            for (auto& m : lists)
                for (std::size_t i = 1; i < m.size(); ++i)
                    ok &= m[i] != l[0];
            if (ok) {
                pick = l[0];
                break;
            }
        }
        REQUIRE(!pick.empty());
        out.push_back(pick);
        for (auto& l : lists)
            if (!l.empty() && l[0] == pick)
                l.erase(l.begin());
    }
    return out;
}

std::vector<std::string> c3_oracle(const std::map<std::string, std::vector<std::string>>& bases,
                                   const std::string& c) {
    auto out = c3_mro(bases, c);
    std::reverse(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("linearization of a lone contract is itself") {
    auto ig = build_inheritance(parse("contract C { }", "x"));
    CHECK(ig.linearize("C") == std::vector<std::string>{"C"});
}

TEST_CASE("three-contract chain") {
    auto u = parse("contract A { } contract B is A { } contract C is B { }", "x");
    auto ig = build_inheritance(u);
    CHECK(ig.linearize("C") == std::vector<std::string>{"A", "B", "C"});
    CHECK(ig.linearize("C") == c3_oracle(ig.edges, "C"));
    CHECK(leaf_contract(u, ig).name == "C");
}

TEST_CASE("diamond agrees with the C3 oracle") {
    auto u = parse("contract A { } contract B is A { } contract C is A { } contract D is B, C { }", "x");
    auto ig = build_inheritance(u);
    CHECK(ig.linearize("D") == std::vector<std::string>{"A", "B", "C", "D"});
    for (const auto& c : u.contracts) {
        CHECK(ig.linearize(c.name) == c3_oracle(ig.edges, c.name));
    }
}

TEST_CASE("linearization size is ancestors plus one") {
    auto u = parse("contract A { } contract B is A { } contract C is A { } contract D is B, C { } "
                   "contract E is D { }",
                   "x");
    auto ig = build_inheritance(u);
    for (const auto& c : u.contracts) {
        std::set<std::string> anc;
        std::function<void(const std::string&)> up = [&](const std::string& n) {
            for (const auto& b : ig.edges.at(n))
                if (anc.insert(b).second)
                    up(b);
        };
        up(c.name);
        const auto& l = ig.linearize(c.name);
        CHECK(l.size() == anc.size() + 1);
        CHECK(l.back() == c.name);
    }
}

TEST_CASE("cycles and unresolved bases") {
    try {
        build_inheritance(parse("contract A is B { } contract B is A { }", "x"));
        FAIL("expected InheritanceCycle");
    } catch (const InheritanceCycle& e) {
        CHECK(e.cycle().size() == 3);
        CHECK(e.cycle().front() == e.cycle().back());
    }
    CHECK_THROWS_AS(build_inheritance(parse("contract A is Z { }", "x")), UnresolvedBase);
}

TEST_CASE("call graph edges") {
    auto u = parse(R"(
contract C {
    uint x;
    function g() internal { x = 1; }
    function f() public { g(); }
    function r() public { r(); }
    function pay(address a) public { a.transfer(1); }
})",
                   "x");
    auto ig = build_inheritance(u);
    auto cg = build_call_graph(u, ig);
    auto has = [&](const std::string& a, const std::string& b, CallEdgeKind k) {
        return std::any_of(cg.edges.begin(), cg.edges.end(),
                           [&](const CallEdge& e) { return e.from == a && e.to == b && e.kind == k; });
    };
    CHECK(has("C.f", "C.g", CallEdgeKind::Internal));
    CHECK(has("C.r", "C.r", CallEdgeKind::Internal));
    CHECK(has("C.pay", CallGraph::kExternalSink, CallEdgeKind::External));
    for (const auto& e : cg.edges) {
        CHECK(cg.has_node(e.from));
        CHECK(cg.has_node(e.to));
    }
    CHECK(find_cycle_through(cg, "C.r") == std::vector<std::string>{"C.r"});
    CHECK(find_cycle_through(cg, "C.f").empty());
    CHECK(build_call_graph(u, ig).edges.size() == cg.edges.size());
}

TEST_CASE("overrides resolve to the most derived definition") {
    auto u = parse(R"(
contract A { uint x; function g() internal { x = 1; } function f() public { g(); } }
contract B is A { function g() internal { x = 2; } }
)",
                   "x");
    auto ig = build_inheritance(u);
    CHECK(resolve_function(u, ig, "B", "g").id() == "B.g");
    CHECK(resolve_function(u, ig, "B", "f").id() == "A.f");
    CHECK(resolve_function(u, ig, "A", "g").id() == "A.g");
}

TEST_CASE("inheritance corpus contract calls the base deposit") {
    auto u = parse(read_corpus("inheritance_vault.minisol"), "inheritance_vault.minisol");
    auto ig = build_inheritance(u);
    auto cg = build_call_graph(u, ig);
    const ContractDef& leaf = leaf_contract(u, ig);
    bool found = false;
    for (const auto& e : cg.edges)
        if (e.from.rfind(leaf.name + ".", 0) == 0 && e.to == leaf.bases[0] + ".deposit")
            found = true;
    CHECK(found);
}

TEST_CASE("storage layout") {
    auto u = parse("contract C { uint a; uint b; }", "x");
    auto ig = build_inheritance(u);
    auto l = storage_layout(u, u.contracts[0], ig);
    REQUIRE(l.slots.size() == 2);
    CHECK(l.slots[0].name == "a");
    CHECK(l.slots[0].index == 0);
    CHECK(l.slots[1].name == "b");
    CHECK(l.slots[1].index == 1);

    auto u2 = parse("contract B { uint x; } contract C is B { uint y; }", "x");
    auto ig2 = build_inheritance(u2);
    auto l2 = storage_layout(u2, *u2.find_contract("C"), ig2);
    REQUIRE(l2.slots.size() == 2);
    CHECK(l2.slots[0].contract == "B");
    CHECK(l2.slots[0].name == "x");
    CHECK(l2.slots[1].contract == "C");
    CHECK(l2.slots[1].index == 1);

    auto u3 = parse("contract E { }", "x");
    CHECK(storage_layout(u3, u3.contracts[0], build_inheritance(u3)).slots.empty());
}
