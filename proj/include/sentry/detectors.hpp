#pragma once

// The four vulnerability detectors. Static rules run once over the program;
// execution traces can only upgrade a finding to witnessed.

#include "sentry/dataflow.hpp"
#include "sentry/executor.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sentry {

enum class VulnType { Reentrancy, CallStackOverflow, IntegerOverflow, TimestampDependency };

inline constexpr std::array<VulnType, 4> kAllVulnTypes = {
    VulnType::Reentrancy, VulnType::CallStackOverflow, VulnType::IntegerOverflow, VulnType::TimestampDependency};

// "reentrancy", "call_stack_overflow", "integer_overflow", "timestamp_dependency"
const char* to_string(VulnType v);
std::optional<VulnType> parse_vuln_type(std::string_view s);

struct Site {
    std::uint32_t fn = kNone;
    BlockId block = kNone;
    std::uint32_t instr = kNone;

    friend bool operator==(const Site&, const Site&) = default;
    friend auto operator<=>(const Site&, const Site&) = default;
};

inline constexpr std::uint64_t kNoTrace = UINT64_MAX;

struct Finding {
    VulnType vuln = VulnType::Reentrancy;
    std::string contract;
    std::string function; // source name; "constructor" for constructors
    SourceLocation loc;
    double score = 0.0;
    bool witnessed = false;
    std::string evidence;

    // Matching data for witnesses.
    std::string rule;
    std::uint32_t fn = kNone;
    Site site;                  // the flagged instruction
    std::vector<Site> follow;   // sites that must execute after it
    std::vector<std::uint32_t> fns; // recursion: functions on the cycle
    std::uint64_t witness_trace = kNoTrace;
    std::uint64_t witness_event = 0;
};

inline constexpr double kReentrancyStaticScore = 0.6;
inline constexpr double kStaticScore = 0.5;

// Static artifacts shared by the detectors.
struct Artifacts {
    const Program* prog = nullptr;
    DepGraph dep;
    std::vector<FunctionAnalysis> analysis; // per program function
};

Artifacts analyze(const Program& prog);

std::vector<Finding> detect_reentrancy(const Artifacts& a, const std::vector<ExecTrace>& traces = {});
std::vector<Finding> detect_callstack_overflow(const Artifacts& a, const std::vector<ExecTrace>& traces = {});
std::vector<Finding> detect_integer_overflow(const Artifacts& a, const std::vector<ExecTrace>& traces = {});
std::vector<Finding> detect_timestamp_dependency(const Artifacts& a, const std::vector<ExecTrace>& traces = {});

// Upgrades f if the trace supports it. Returns true when f became witnessed.
bool witness(Finding& f, const ExecTrace& trace, std::uint64_t trace_id);
void witness_all(std::vector<Finding>& fs, const ExecTrace& trace, std::uint64_t trace_id);

// Deduplicates on (vuln, function, loc) and sorts.
void normalize(std::vector<Finding>& fs);

// All four detectors, normalized; traces are numbered by position.
std::vector<Finding> run_all(const Artifacts& a, const std::vector<ExecTrace>& traces = {});

// Findings with a stable order key; contract, vuln, function, line, column.
bool finding_less(const Finding& a, const Finding& b);

} // namespace sentry
