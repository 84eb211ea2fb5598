#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/detectors.hpp"
#include "sentry/frontend.hpp"
#include "test_util.hpp"

#include <json.hpp>

#include <random>

using namespace sentry;

namespace {

struct Built {
    SourceUnit unit;
    Program prog;
    InputLayout layout;
    Artifacts art;
};

std::unique_ptr<Built> build(const std::string& src) {
    auto b = std::make_unique<Built>();
    b->unit = parse(src, "t.minisol");
    b->prog = build_program(b->unit);
    b->layout = collect_input_slots(b->prog);
    b->art = analyze(b->prog);
    return b;
}

std::size_t slot_named(const InputLayout& layout, const std::string& name) {
    for (const auto& s : layout.slots)
        if (s.name == name)
            return s.index;
    throw std::runtime_error("no input slot " + name);
}

ExecTrace run(const Built& b, const std::map<std::string, BigInt>& genes) {
    InputVector in(b.layout.size(), 0);
    for (const auto& [name, v] : genes)
        in[slot_named(b.layout, name)] = v;
    return execute(b.prog, nullptr, b.layout, in).trace;
}

InputVector random_input(std::mt19937_64& rng, const InputLayout& layout) {
    InputVector v;
    for (const auto& s : layout.slots) {
        BigInt r = 0;
        for (int i = 0; i < 5; ++i)
            r = (r << 64) + rng();
        // Half the genes come from a small range so guards pass now and then.
        if (rng() % 2)
            r %= 1000;
        v.push_back(s.lo + r % (s.hi - s.lo + 1));
    }
    return v;
}

std::string key(const Finding& f) {
    return std::string(to_string(f.vuln)) + ":" + f.function + ":" + to_string(f.loc);
}

} // namespace

TEST_CASE("canonical withdraw is flagged and witnessed when the balance is positive") {
    auto b = build(read_corpus("reentrancy_bank.minisol"));
    auto fs = detect_reentrancy(b->art);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].score == kReentrancyStaticScore);
    CHECK_FALSE(fs[0].witnessed);
    CHECK(fs[0].function == "withdrawAll");

    auto empty = detect_reentrancy(b->art, {run(*b, {{"balances[*]", 0}})});
    CHECK_FALSE(empty[0].witnessed);
    auto full = detect_reentrancy(b->art, {run(*b, {{"balances[*]", 5}})});
    CHECK(full[0].witnessed);
    CHECK(full[0].score == 1.0);
}

TEST_CASE("checks-effects-interactions and contracts without calls are clean") {
    CHECK(detect_reentrancy(build(read_corpus("reentrancy_safe_cei.minisol"))->art).empty());
    CHECK(detect_reentrancy(build("contract A { uint256 x; function f() public { x = 1; } }")->art).empty());
}

TEST_CASE("self recursion is flagged and witnessed at the depth limit") {
    auto b = build("contract A { function f() public { f(); } }");
    auto fs = detect_callstack_overflow(b->art);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].rule == "recursion");
    ExecTrace t = run(*b, {});
    CHECK(t.max_depth == 1024);
    auto w = detect_callstack_overflow(b->art, {t});
    CHECK(w[0].witnessed);
    CHECK(t.events.at(w[0].witness_event).kind == EventKind::DepthLimit);
}

TEST_CASE("ignored send followed by a write is flagged, checked calls are not") {
    auto b = build("contract A { uint256 x; function f(address to, uint256 v) public { to.send(v); x = 1; } }");
    auto fs = detect_callstack_overflow(b->art);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].rule == "unchecked-call");
    CHECK(detect_callstack_overflow(b->art, {run(*b, {})})[0].witnessed);

    auto ok = build("contract A { uint256 x; function f(uint256 v) public { require(msg.sender.send(v)); x = 1; g(); }"
                    " function g() internal { x = 2; } }");
    CHECK(detect_callstack_overflow(ok->art).empty());
}

TEST_CASE("uint8 255 + 1 wraps and witnesses the overflow") {
    auto b = build("contract A { uint8 y; function f(uint8 x) public { y = x + 1; } }");
    auto fs = detect_integer_overflow(b->art);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].score == kStaticScore);
    CHECK_FALSE(detect_integer_overflow(b->art, {run(*b, {{"A.f.x", 254}})})[0].witnessed);
    ExecTrace t = run(*b, {{"A.f.x", 255}});
    auto w = detect_integer_overflow(b->art, {t});
    CHECK(w[0].witnessed);
    const TraceEvent& e = t.events.at(w[0].witness_event);
    CHECK(e.kind == EventKind::ArithWrap);
    CHECK(e.raw == 256);
    CHECK(e.reduced == 0);
}

TEST_CASE("guarded arithmetic is not flagged") {
    CHECK(detect_integer_overflow(
              build("contract A { uint256 c; function f(uint256 a, uint256 b) public { require(a + b >= a); c = a + b; } }")->art)
              .empty());
    CHECK(detect_integer_overflow(
              build("contract A { uint256 c; function f(uint256 a, uint256 b) public { require(b <= a); c = a - b; } }")->art)
              .empty());
    CHECK(detect_integer_overflow(build(read_corpus("overflow_safe_math.minisol"))->art).empty());
    // A check against the product does not guard the product.
    CHECK(detect_integer_overflow(build(read_corpus("overflow_price.minisol"))->art).size() == 1);
}

TEST_CASE("timestamp lottery is witnessed only when the timestamp is even") {
    auto b = build(read_corpus("timestamp_lottery.minisol"));
    auto fs = detect_timestamp_dependency(b->art);
    REQUIRE(fs.size() == 1);
    CHECK(fs[0].function == "play");
    CHECK_FALSE(detect_timestamp_dependency(b->art, {run(*b, {{"block.timestamp", 7}})})[0].witnessed);
    CHECK(detect_timestamp_dependency(b->art, {run(*b, {{"block.timestamp", 8}})})[0].witnessed);
}

TEST_CASE("timestamps that only reach logs, or no timestamp at all, are clean") {
    CHECK(detect_timestamp_dependency(build(read_corpus("timestamp_safe_log.minisol"))->art).empty());
    CHECK(detect_timestamp_dependency(build(read_corpus("timestamp_safe_owner.minisol"))->art).empty());
}

TEST_CASE("run_all: empty contract, two-class contract, determinism") {
    CHECK(run_all(build("contract A { }")->art).empty());
    auto b = build(read_corpus("two_class_vault.minisol"));
    auto fs = run_all(b->art);
    REQUIRE(fs.size() == 2);
    std::set<VulnType> types{fs[0].vuln, fs[1].vuln};
    CHECK(types == std::set<VulnType>{VulnType::Reentrancy, VulnType::IntegerOverflow});
    auto again = run_all(b->art);
    REQUIRE(again.size() == fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i)
        CHECK(key(fs[i]) == key(again[i]));
}

TEST_CASE("witnessing is monotone and evidence points at real events") {
    std::mt19937_64 rng(11);
    for (const char* name : {"two_class_vault.minisol", "reentrancy_vuln.minisol", "timestamp_lottery.minisol",
                             "overflow_token.minisol", "callstack_unchecked_send.minisol"}) {
        CAPTURE(name);
        auto b = build(read_corpus(name));
        std::vector<ExecTrace> traces;
        auto prev = run_all(b->art, traces);
        for (int k = 0; k < 30; ++k) {
            traces.push_back(execute(b->prog, nullptr, b->layout, random_input(rng, b->layout)).trace);
            auto now = run_all(b->art, traces);
            REQUIRE(now.size() == prev.size());
            for (std::size_t i = 0; i < now.size(); ++i) {
                CHECK(key(now[i]) == key(prev[i]));
                CHECK(now[i].score >= prev[i].score);
                CHECK((now[i].witnessed || !prev[i].witnessed));
                if (now[i].witnessed) {
                    REQUIRE(now[i].witness_trace < traces.size());
                    CHECK(now[i].witness_event < traces[now[i].witness_trace].events.size());
                }
            }
            prev = std::move(now);
        }
    }
}

TEST_CASE("static findings on the corpus agree with the labels") {
    auto labels = nlohmann::json::parse(read_corpus("labels.json"));
    std::size_t checked = 0;
    for (const auto& entry : labels["entries"]) {
        std::string path = entry["path"];
        CAPTURE(path);
        auto b = build(read_corpus(path));
        std::set<std::pair<std::string, std::string>> want, got;
        for (const auto& v : entry["vulnerabilities"])
            want.insert({v["type"], v.value("function", "")});
        for (const auto& f : run_all(b->art)) {
            CHECK_FALSE(f.witnessed);
            std::string fn = f.function;
            for (const auto& w : want)
                if (w.first == to_string(f.vuln) && w.second.empty())
                    fn.clear();
            got.insert({to_string(f.vuln), fn});
        }
        CHECK(got == want);
        ++checked;
    }
    CHECK(checked >= 24);
}
