#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/dataflow.hpp"
#include "sentry/frontend.hpp"
#include "test_util.hpp"

#include <map>

using namespace sentry;

namespace {

struct Built {
    SourceUnit unit;
    Program prog;
    DepGraph g;
};

std::unique_ptr<Built> build(const std::string& src) {
    auto b = std::make_unique<Built>();
    b->unit = parse(src, "t.minisol");
    b->prog = build_program(b->unit);
    b->g = build_dep_graph(b->prog);
    return b;
}

bool has_edge(const DepGraph& g, std::uint32_t a, std::uint32_t b, DepEdgeKind k) {
    for (const auto& e : g.edges)
        if (e.from == a && e.to == b && e.kind == k)
            return true;
    return false;
}

// Plain BFS over an adjacency map rebuilt from the edge list.
std::set<std::uint32_t> bfs_oracle(const DepGraph& g, std::set<std::uint32_t> seeds) {
    std::map<std::uint32_t, std::vector<std::uint32_t>> adj;
    for (const auto& e : g.edges)
        adj[e.from].push_back(e.to);
    std::vector<std::uint32_t> q(seeds.begin(), seeds.end());
    for (std::size_t i = 0; i < q.size(); ++i)
        for (auto n : adj[q[i]])
            if (seeds.insert(n).second)
                q.push_back(n);
    return seeds;
}

} // namespace

TEST_CASE("a = b + c gives data edges from both operands") {
    auto b = build("contract C { function f(uint x, uint y) public returns (uint) { uint a = x + y; return a; } }");
    const SsaFunction& f = *b->prog.find("C.f");
    auto fi = static_cast<std::uint32_t>(b->prog.index_of("C.f"));
    const Instr& def = f.blocks[0].instrs[0];
    CHECK(has_edge(b->g, b->g.value_node(fi, 0), b->g.value_node(fi, def.dest), DepEdgeKind::Data));
    CHECK(has_edge(b->g, b->g.value_node(fi, 1), b->g.value_node(fi, def.dest), DepEdgeKind::Data));
}

TEST_CASE("data edges are exactly the operand lists") {
    for (const char* file : {"reentrancy_vuln.minisol", "timestamp_lottery.minisol", "inheritance_vault.minisol"}) {
        auto b = build(read_corpus(file));
        std::multiset<std::pair<std::uint32_t, std::uint32_t>> want, got;
        for (std::uint32_t fi = 0; fi < b->prog.functions.size(); ++fi)
            for (const auto& bl : b->prog.functions[fi].blocks)
                for (const auto& in : bl.instrs)
                    if (in.dest != kNone)
                        for (auto v : operands(in))
                            want.insert({b->g.value_node(fi, v), b->g.value_node(fi, in.dest)});
        for (const auto& e : b->g.edges) {
            if (e.kind == DepEdgeKind::Data)
                got.insert({e.from, e.to});
            CHECK(e.from < b->g.nodes.size());
            CHECK(e.to < b->g.nodes.size());
        }
        CHECK(want == got);
    }
}

TEST_CASE("function without a body has only environment nodes") {
    auto u = parse("contract C { function f() public { } }", "x");
    auto prog = build_program(u);
    auto g = build_dep_graph(*prog.find("C.f"), prog.layout);
    for (const auto& n : g.nodes)
        CHECK(n.kind == DepNode::Kind::Env);
    CHECK(g.edges.empty());
}

TEST_CASE("timestamp taint reaches the guarded transfer") {
    auto b = build(read_corpus("timestamp_lottery.minisol"));
    auto fi = static_cast<std::uint32_t>(b->prog.index_of("TimestampLottery.play"));
    const SsaFunction& play = b->prog.functions[fi];
    const Instr* call = nullptr;
    const Instr* branch = nullptr;
    for (const auto& bl : play.blocks)
        for (const auto& in : bl.instrs) {
            if (in.op == Op::ExtCall)
                call = &in;
            if (in.op == Op::JumpI)
                branch = &in;
        }
    REQUIRE(call);
    REQUIRE(branch);
    auto cond = b->g.value_node(fi, branch->dest);
    auto sink = b->g.value_node(fi, call->dest);
    CHECK(has_edge(b->g, cond, sink, DepEdgeKind::Control));
    CHECK(has_edge(b->g, b->g.env_node(EnvSource::Timestamp), cond, DepEdgeKind::Env));
    auto t = taint_reach(b->g, {b->g.env_node(EnvSource::Timestamp)});
    CHECK(t.count(sink));
    CHECK(t == bfs_oracle(b->g, {b->g.env_node(EnvSource::Timestamp)}));
}

TEST_CASE("taint_reach basics: empty, isolated, idempotent, monotone") {
    auto b = build(read_corpus("reentrancy_vuln.minisol"));
    CHECK(taint_reach(b->g, {}).empty());
    auto ts = b->g.env_node(EnvSource::Timestamp);
    CHECK(taint_reach(b->g, {ts}) == std::set<std::uint32_t>{ts});
    for (std::uint32_t n = 0; n < b->g.nodes.size(); ++n) {
        auto once = taint_reach(b->g, {n});
        CHECK(taint_reach(b->g, once) == once);
        CHECK(once == bfs_oracle(b->g, {n}));
        auto bigger = taint_reach(b->g, {n, b->g.env_node(EnvSource::Sender)});
        CHECK(std::includes(bigger.begin(), bigger.end(), once.begin(), once.end()));
    }
}

TEST_CASE("input slots: bounds and order") {
    auto b = build("contract C { function f(uint8 x) public { } }");
    auto l = collect_input_slots(b->prog);
    REQUIRE(l.declared == 1);
    CHECK(l.slots[0].lo == 0);
    CHECK(l.slots[0].hi == 255);

    auto b2 = build("contract C { uint256 s; function f(uint a, bool z) public { s = a; } }");
    auto l2 = collect_input_slots(b2->prog);
    REQUIRE(l2.declared == 3);
    CHECK(l2.slots[0].name == "C.f.a");
    CHECK(l2.slots[1].name == "C.f.z");
    CHECK(l2.slots[1].hi == 1);
    CHECK(l2.slots[2].name == "s");
    CHECK(dump(l2) == dump(collect_input_slots(b2->prog)));
    // timestamp follows the declared slots
    CHECK(l2.slots[3].name == "block.timestamp");
    CHECK(l2.slots[3].hi == pow2(32) - 1);
}

TEST_CASE("mapping genes: constant keys plus one symbolic key") {
    auto b = build("contract C { mapping(uint => uint) m; function f(uint k) public { m[7] = 1; m[k] = m[3]; } }");
    auto l = collect_input_slots(b->prog);
    REQUIRE(l.declared == 4);
    CHECK(l.slots[1].name == "m[3]");
    CHECK(l.slots[2].name == "m[7]");
    CHECK(l.slots[3].name == "m[*]");
    CHECK(l.slots[3].symbolic_key);
}

TEST_CASE("special values") {
    auto b = build("contract C { bool u; function f(uint8 x) public { } function g(uint256 key) public { "
                   "require(key == 3735928559); u = true; } function h(uint8 y) public { if (y > 200) { u = true; } "
                   "if (y < 300) { u = false; } } }");
    auto l = collect_input_slots(b->prog);
    auto sp = collect_special_values(b->prog, b->g, l);
    CHECK(sp[0] == std::vector<BigInt>{0, 1, 254, 255});
    CHECK(std::find(sp[1].begin(), sp[1].end(), BigInt(3735928559)) != sp[1].end());
    CHECK(std::find(sp[2].begin(), sp[2].end(), BigInt(200)) != sp[2].end());
    CHECK(std::find(sp[2].begin(), sp[2].end(), BigInt(300)) == sp[2].end());
    for (const auto& s : l.slots)
        for (const auto& v : sp[s.index]) {
            CHECK(v >= s.lo);
            CHECK(v <= s.hi);
        }
}
