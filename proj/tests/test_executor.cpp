#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/executor.hpp"
#include "sentry/frontend.hpp"
#include "test_util.hpp"

#include <gmpxx.h>

#include <filesystem>
#include <random>

using namespace sentry;

namespace {

struct Built {
    SourceUnit unit;
    Program prog;
    InputLayout layout;
};

std::unique_ptr<Built> build(const std::string& src) {
    auto b = std::make_unique<Built>();
    b->unit = parse(src, "t.minisol");
    b->prog = build_program(b->unit);
    b->layout = collect_input_slots(b->prog);
    return b;
}

BigInt random_in(std::mt19937_64& rng, const BigInt& lo, const BigInt& hi) {
    BigInt span = hi - lo + 1;
    BigInt r = 0;
    for (int i = 0; i < 5; ++i)
        r = (r << 64) + rng();
    return lo + r % span;
}

InputVector random_input(std::mt19937_64& rng, const InputLayout& layout) {
    InputVector v;
    for (const auto& s : layout.slots)
        v.push_back(random_in(rng, s.lo, s.hi));
    return v;
}

std::size_t slot_named(const InputLayout& layout, const std::string& name) {
    for (const auto& s : layout.slots)
        if (s.name == name)
            return s.index;
    throw std::runtime_error("no input slot " + name);
}

const TraceEvent* first(const ExecTrace& t, EventKind k) {
    for (const auto& e : t.events)
        if (e.kind == k)
            return &e;
    return nullptr;
}

std::size_t count(const ExecTrace& t, EventKind k) {
    std::size_t n = 0;
    for (const auto& e : t.events)
        n += e.kind == k;
    return n;
}

mpz_class to_mpz(const BigInt& v) { return mpz_class(to_string(v)); }

// Operand biased toward the edges of the type's range.
BigInt operand(std::mt19937_64& rng, const TypeName& ty) {
    BigInt lo = ty.min_value(), hi = ty.max_value();
    switch (rng() % 8) {
    case 0: return lo;
    case 1: return hi;
    case 2: return 0;
    case 3: return ty.kind == TypeName::Kind::Int ? BigInt(-1) : BigInt(1);
    default: return random_in(rng, lo, hi);
    }
}

} // namespace

TEST_CASE("fixed-width arithmetic matches an unbounded GMP computation reduced afterwards") {
    std::mt19937_64 rng(20240601);
    const char* ops[] = {"+", "-", "*", "/", "%"};
    const unsigned widths[] = {8, 16, 32, 64, 128, 256};
    int cases = 0, div_zero = 0;
    for (bool is_signed : {false, true})
        for (unsigned w : widths)
            for (int op = 0; op < 5; ++op) {
                std::string ty = (is_signed ? "int" : "uint") + std::to_string(w);
                auto b = build("contract A { " + ty + " r; function f(" + ty + " a, " + ty +
                               " b) public { r = a " + ops[op] + " b; } }");
                TypeName t = is_signed ? TypeName::sint(w) : TypeName::uint(w);
                mpz_class m = mpz_class(1) << w;
                mpz_class half = mpz_class(1) << (w - 1);
                for (int k = 0; k < 170; ++k, ++cases) {
                    InputVector in(b->layout.size(), 0);
                    BigInt a = operand(rng, t), c = operand(rng, t);
                    in[slot_named(b->layout, "A.f.a")] = a;
                    in[slot_named(b->layout, "A.f.b")] = c;
                    in[slot_named(b->layout, "r")] = 7;
                    ExecResult res = execute(b->prog, nullptr, b->layout, in);
                    mpz_class x = to_mpz(a), y = to_mpz(c), raw;
                    if (op >= 3 && y == 0) {
                        ++div_zero;
                        const TraceEvent* rv = first(res.trace, EventKind::Revert);
                        REQUIRE(rv);
                        CHECK(rv->text == "division by zero");
                        CHECK(first(res.trace, EventKind::StorageWrite) == nullptr);
                        continue;
                    }
                    switch (op) {
                    case 0: raw = x + y; break;
                    case 1: raw = x - y; break;
                    case 2: raw = x * y; break;
                    case 3: mpz_tdiv_q(raw.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t()); break;
                    default: mpz_tdiv_r(raw.get_mpz_t(), x.get_mpz_t(), y.get_mpz_t()); break;
                    }
                    mpz_class red;
                    mpz_fdiv_r(red.get_mpz_t(), raw.get_mpz_t(), m.get_mpz_t());
                    if (is_signed && red >= half)
                        red -= m;
                    const TraceEvent* wr = first(res.trace, EventKind::StorageWrite);
                    REQUIRE(wr);
                    CHECK(to_string(wr->new_value) == red.get_str());
                    const TraceEvent* wrap = first(res.trace, EventKind::ArithWrap);
                    CHECK((wrap != nullptr) == (raw != red));
                    if (wrap)
                        CHECK(to_string(wrap->raw) == raw.get_str());
                }
            }
    CHECK(cases >= 10000);
    CHECK(div_zero > 0);
}

TEST_CASE("reduce wraps into the type range") {
    CHECK(reduce(256, TypeName::uint(8)) == 0);
    CHECK(reduce(-1, TypeName::uint(8)) == 255);
    CHECK(reduce(128, TypeName::sint(8)) == -128);
    CHECK(reduce(-129, TypeName::sint(8)) == 127);
    CHECK(reduce(5, TypeName::boolean()) == 1);
}

TEST_CASE("instrumented and plain runs agree once counter events are removed") {
    std::mt19937_64 rng(7);
    for (const auto& entry : std::filesystem::directory_iterator(corpus_path(""))) {
        if (entry.path().extension() != ".minisol")
            continue;
        CAPTURE(entry.path().string());
        auto unit = parse(read_text(entry.path().string()), entry.path().string());
        Program prog = build_program(unit);
        InputLayout layout = collect_input_slots(prog);
        InstrumentedProgram inst = instrument(prog);
        Limits lim;
        lim.trace_counters = true;
        for (int k = 0; k < 10; ++k) {
            InputVector in = random_input(rng, layout);
            ExecResult plain = execute(prog, nullptr, layout, in, lim);
            ExecResult instr = execute(prog, &inst, layout, in, lim);
            CHECK(first(plain.trace, EventKind::Counter) == nullptr);
            CHECK(first(instr.trace, EventKind::Counter) != nullptr);
            ExecTrace stripped;
            stripped.events = without_counters(instr.trace.events);
            CHECK(to_jsonl(prog, stripped) == to_jsonl(prog, plain.trace));
        }
    }
}

TEST_CASE("instrumenting twice is rejected") {
    auto b = build("contract A { function f() public { } }");
    InstrumentedFunction once = instrument(b->prog.functions[0]);
    CHECK(once.fn.instrumented);
    CHECK_THROWS_AS(instrument(once.fn), std::logic_error);
}

TEST_CASE("diamond join JUMPDEST gets before and after counters") {
    auto b = build("contract A { uint256 x; function f(uint256 a) public { if (a > 1) { x = 1; } else { x = 2; } x = 3; } }");
    InstrumentedProgram inst = instrument(b->prog);
    const auto& fn = b->prog.functions[0];
    BlockId join = kNone;
    for (const auto& blk : fn.blocks)
        if (!blk.instrs.empty() && blk.instrs[0].op == Op::JumpDest)
            join = blk.id;
    REQUIRE(join != kNone);
    auto tc = inst.fns[0].target_counter[join];
    CHECK(tc[0] != kNone);
    CHECK(tc[1] != kNone);
    InputVector in(b->layout.size(), 0);
    in[slot_named(b->layout, "A.f.a")] = 5;
    ExecResult r = execute(b->prog, &inst, b->layout, in);
    CHECK(r.counters.counters[tc[0]] == 1);
    CHECK(r.counters.counters[tc[1]] == 1);
    // JUMPI, taken ASSIGN + JUMP, join JUMPDEST + ASSIGN + STOP; the else arm adds ASSIGN + JUMP
    CHECK(r.counters.k_covered == 2);
    CHECK(r.counters.j_total() == 4);
    CHECK(coverage_ratio(r.counters, b->prog.census()).den == 8);
}

TEST_CASE("coverage formula on counters") {
    Census census;
    census.K = 10;
    census.J = {1, 1, 0, 0, 0, 0};
    CoverageCounters c;
    c.k_covered = 8;
    c.j_covered = {1, 1, 0, 0, 0, 0};
    Ratio r = coverage_ratio(c, census);
    CHECK(r.num == 10);
    CHECK(r.den == 12);
    CHECK(coverage(c, census) == doctest::Approx(10.0 / 12.0).epsilon(1e-12));
    CHECK(coverage(CoverageCounters{}, Census{}) == 1.0);
    c.k_covered = 11;
    CHECK_THROWS(coverage(c, census));
}

TEST_CASE("guarded branch: random key covers 7 of 9, the magic key covers all") {
    auto b = build(read_corpus("guarded_branch.minisol"));
    InstrumentedProgram inst = instrument(b->prog);
    Census census = b->prog.census();
    REQUIRE(census.total() == 9);
    std::size_t key = slot_named(b->layout, "GuardedBranch.unlock.key");
    InputVector in(b->layout.size(), 0);
    in[key] = 12345;
    ExecResult miss = execute(b->prog, &inst, b->layout, in);
    CHECK(coverage_ratio(miss.counters, census).num == 7);
    in[key] = BigInt(3735928559u);
    ExecResult hit = execute(b->prog, &inst, b->layout, in);
    CHECK(coverage(hit.counters, census) == 1.0);

    CoverageCounters u = miss.counters;
    u.merge(hit.counters, b->prog);
    CHECK(coverage(u, census) >= coverage(miss.counters, census));
    CHECK(coverage(u, census) >= coverage(hit.counters, census));
}

TEST_CASE("union coverage is monotone over random runs") {
    auto b = build(read_corpus("reentrancy_vuln.minisol"));
    InstrumentedProgram inst = instrument(b->prog);
    Census census = b->prog.census();
    std::mt19937_64 rng(3);
    CoverageCounters u;
    double last = 0;
    for (int k = 0; k < 20; ++k) {
        ExecResult r = execute(b->prog, &inst, b->layout, random_input(rng, b->layout));
        u.merge(r.counters, b->prog);
        double now = coverage(u, census);
        CHECK(now >= last);
        CHECK(now >= coverage(r.counters, census));
        last = now;
    }
}

TEST_CASE("call re-enters the caller once and the write happens after the call") {
    auto b = build(read_corpus("reentrancy_vuln.minisol"));
    InputVector in(b->layout.size(), 0);
    in[slot_named(b->layout, "ReentrancyVuln.withdraw.amount")] = 10;
    in[slot_named(b->layout, "balances[*]")] = 100;
    ExecResult r = execute(b->prog, nullptr, b->layout, in);
    CHECK(count(r.trace, EventKind::Reenter) == 1);
    CHECK(r.trace.max_depth == 2);
    const TraceEvent* call = first(r.trace, EventKind::ExtCall);
    REQUIRE(call);
    CHECK(call->flag);
    bool write_after = false;
    for (const auto& e : r.trace.events)
        if (e.kind == EventKind::StorageWrite && e.id > call->id && e.frame == call->frame)
            write_after = true;
    CHECK(write_after);
}

TEST_CASE("transfer failure reverts and send returns false") {
    auto b = build("contract A { uint256 x; function f(uint256 a) public { bool ok = msg.sender.send(a); if (ok) { x = 1; } else { x = 2; } }"
                   " function g(uint256 a) public { msg.sender.transfer(a); x = 3; } }");
    InputVector in(b->layout.size(), 0);
    BigInt huge = pow2(200);
    in[slot_named(b->layout, "A.f.a")] = huge;
    in[slot_named(b->layout, "A.g.a")] = huge;
    ExecResult r = execute(b->prog, nullptr, b->layout, in);
    std::vector<BigInt> writes;
    for (const auto& e : r.trace.events)
        if (e.kind == EventKind::StorageWrite)
            writes.push_back(e.new_value);
    REQUIRE(writes.size() == 1);
    CHECK(writes[0] == 2);
    const TraceEvent* rv = first(r.trace, EventKind::Revert);
    REQUIRE(rv);
    CHECK(rv->text == "transfer failed");
}

TEST_CASE("recursion stops at the depth limit") {
    auto b = build("contract A { function f(uint256 n) public { f(n); } }");
    InputVector in(b->layout.size(), 0);
    Limits lim;
    lim.max_depth = 50;
    ExecResult r = execute(b->prog, nullptr, b->layout, in, lim);
    CHECK(count(r.trace, EventKind::DepthLimit) == 1);
    CHECK(r.trace.max_depth == 50);
    ExecResult full = execute(b->prog, nullptr, b->layout, in);
    CHECK(full.trace.max_depth == 1024);
}

TEST_CASE("loops are capped and the step limit is recorded") {
    auto b = build("contract A { uint256 c; function f() public { uint256 i = 0; while (i < 1000) { i = i + 1; } c = i; } }");
    InputVector in(b->layout.size(), 0);
    ExecResult r = execute(b->prog, nullptr, b->layout, in);
    CHECK(count(r.trace, EventKind::LoopCap) == 1);
    const TraceEvent* wr = first(r.trace, EventKind::StorageWrite);
    REQUIRE(wr);
    CHECK(wr->new_value == 256);
    CHECK_FALSE(r.trace.limit_exceeded);

    Limits lim;
    lim.total_steps = 100;
    ExecResult cut = execute(b->prog, nullptr, b->layout, in, lim);
    CHECK(cut.trace.limit_exceeded);
    CHECK(first(cut.trace, EventKind::StepLimit) != nullptr);
}

TEST_CASE("revert restores storage for the next transaction") {
    auto b = build("contract A { uint256 x; function f() public { x = 5; revert(); } function g() public { x = x + 1; } }");
    InputVector in(b->layout.size(), 0);
    in[slot_named(b->layout, "x")] = 1;
    ExecResult r = execute(b->prog, nullptr, b->layout, in);
    std::vector<BigInt> writes;
    for (const auto& e : r.trace.events)
        if (e.kind == EventKind::StorageWrite)
            writes.push_back(e.new_value);
    REQUIRE(writes.size() == 2);
    CHECK(writes[1] == 2);
}

TEST_CASE("trace lines are JSON objects with stable ids") {
    auto b = build(read_corpus("timestamp_lottery.minisol"));
    std::mt19937_64 rng(1);
    InputVector in = random_input(rng, b->layout);
    ExecResult r = execute(b->prog, nullptr, b->layout, in);
    std::string jl = to_jsonl(b->prog, r.trace);
    CHECK(jl == to_jsonl(b->prog, execute(b->prog, nullptr, b->layout, in).trace));
    std::size_t lines = static_cast<std::size_t>(std::count(jl.begin(), jl.end(), '\n'));
    CHECK(lines == r.trace.events.size());
    CHECK(jl.rfind("{\"id\":0,", 0) == 0);
}
