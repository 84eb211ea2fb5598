#pragma once

// Concrete interpreter over the SSA IR with counter instrumentation.

#include "sentry/dataflow.hpp"
#include "sentry/ir.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sentry {

using InputVector = std::vector<BigInt>;

// msg.sender for every simulated transaction.
const BigInt& attacker_address();

struct Limits {
    std::uint32_t max_loop_iter = 256;
    std::uint32_t max_depth = 1024;
    std::uint64_t total_steps = 1'000'000;
    std::uint32_t reentry_count = 1;
    bool trace_counters = false; // emit Counter events (large; for testing)
};

enum class EventKind {
    Invoke,
    BlockEntered,
    BranchTaken,
    ExtCall,
    Reenter,
    StorageWrite,
    ArithWrap,
    Revert,
    Return,
    Stop,
    DepthLimit,
    LoopCap,
    StepLimit,
    Counter,
};

const char* to_string(EventKind k);

struct TraceEvent {
    std::uint64_t id = 0;
    EventKind kind = EventKind::BlockEntered;
    std::uint32_t fn = kNone; // program function index
    BlockId block = kNone;
    std::uint32_t instr = kNone;
    std::uint32_t depth = 0;
    std::uint32_t frame = 0;
    std::uint32_t invocation = 0; // top-level transaction number

    bool flag = false;         // BranchTaken: condition; ExtCall: success
    bool checked = false;      // ExtCall: return value checked
    ExternalCallKind call_kind = ExternalCallKind::Call;
    BigInt value;              // ExtCall amount; Return value
    std::uint32_t slot = kNone;
    std::vector<BigInt> keys;
    BigInt old_value, new_value; // StorageWrite
    BinaryOp op = BinaryOp::Add; // ArithWrap
    unsigned width = 0;
    bool is_signed = false;
    BigInt raw, reduced;
    SourceLocation loc;        // ArithWrap site, Revert statement
    std::string text;          // Revert reason
    std::uint32_t counter = kNone;
};

struct ExecTrace {
    std::vector<TraceEvent> events;
    std::uint32_t max_depth = 0;
    bool limit_exceeded = false;
};

// Counter layout attached to one function.
struct InstrumentedFunction {
    SsaFunction fn;
    std::uint32_t first_counter = 0;
    std::vector<std::uint32_t> block_counter;                // per block
    std::vector<std::vector<std::uint32_t>> stmt_counter;    // per block, per instruction (kNone for PHI)
    std::vector<std::array<std::uint32_t, 2>> target_counter; // per block: before/after its JUMPDEST
    std::uint32_t counter_count = 0;
};

// Throws std::logic_error if fn is already instrumented.
InstrumentedFunction instrument(const SsaFunction& fn, std::uint32_t first_counter = 0);

struct InstrumentedProgram {
    const Program* prog = nullptr;
    std::vector<InstrumentedFunction> fns; // aligned with prog->functions
    std::uint32_t counter_count = 0;
};

InstrumentedProgram instrument(const Program& prog);

struct CoverageCounters {
    std::vector<std::uint64_t> counters;                 // raw counter values
    std::vector<std::vector<std::vector<std::uint64_t>>> stmt; // [fn][block][instr] executions
    std::array<std::uint64_t, 6> j_covered{};
    std::uint64_t k_covered = 0;

    std::uint64_t j_total() const;
    // Union of two runs of the same program.
    void merge(const CoverageCounters& o, const Program& prog);
    // Recomputes the covered aggregates from the statement counts.
    void recount(const Program& prog);
};

struct ExecResult {
    ExecTrace trace;
    CoverageCounters counters; // empty unless run instrumented
};

// Runs the constructor then every public function once, storage persisting.
ExecResult execute(const Program& prog, const InstrumentedProgram* inst, const InputLayout& layout,
                   const InputVector& input, const Limits& limits = {});

struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 0;
    double value() const { return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den); }
};

// (j + k) / (sum J + K); 1 when the census is empty.
Ratio coverage_ratio(const CoverageCounters& c, const Census& census);
double coverage(const CoverageCounters& c, const Census& census);

// Fixed-width reduction: two's complement for signed types.
BigInt reduce(const BigInt& raw, const TypeName& ty);

// Event stream with counter events removed and ids renumbered.
std::vector<TraceEvent> without_counters(const std::vector<TraceEvent>& events);

std::string to_jsonl(const Program& prog, const ExecTrace& trace);

} // namespace sentry
