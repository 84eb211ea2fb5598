#pragma once

// One contract, or a whole corpus, through the full pipeline, plus the JSON
// and text renderings of the results.

#include "sentry/corpus.hpp"
#include "sentry/frontend.hpp"
#include "sentry/metrics.hpp"
#include "sentry/search.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sentry {

inline constexpr const char* kToolName = "sentry";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

enum class Mode { Static, Search };

const char* to_string(Mode m);

struct PipelineOptions {
    Mode mode = Mode::Search;
    SearchConfig search;
    Limits limits;
};

struct LoadedContract {
    std::string path;
    SourceUnit unit;
    Program prog;
};

// Throws SourceError, InheritanceError or LoweringError.
std::unique_ptr<LoadedContract> load_contract(const std::string& text, const std::string& path);

struct ObjectiveSummary {
    double initial_mean = 0, initial_best = 0;
    double final_best = 0, final_mean = 0;
};

struct ContractRun {
    std::string path;
    std::string contract;
    SizeClass size = SizeClass::Simple;
    Mode mode = Mode::Search;
    SearchConfig config;
    Limits limits;
    Census census;
    std::vector<InputSlot> inputs;
    ObjectiveSummary coverage;
    ObjectiveSummary accuracy;
    double union_coverage = 0;
    std::vector<GenerationStats> history;
    std::vector<Individual> front;
    std::size_t generations = 0;
    std::uint64_t evaluations = 0;
    bool stagnated = false;
    std::vector<Finding> findings;
    InputVector trace_input; // best front member, or the default input in static mode
    double wall_time = 0;    // seconds
};

// Throws InfeasibleConstraints in search mode.
ContractRun run_contract(const LoadedContract& c, const std::vector<Label>& labels, const PipelineOptions& opt);

// Every gene at 0, or the nearest bound.
InputVector default_input(const InputLayout& layout);

nlohmann::ordered_json to_json(const ContractRun& r, bool timing);
std::string to_text(const ContractRun& r, bool timing);

struct CorpusContract {
    std::string path;
    std::optional<SizeClass> size;
    std::string error; // load or search failure
    std::optional<ContractRun> run;
};

struct CorpusRun {
    std::string dir;
    Mode mode = Mode::Search;
    PipelineOptions options;
    std::vector<CorpusContract> contracts; // path order
    std::vector<std::string> dangling;
    std::array<TypeEvaluation, 4> metrics;
    ObjectiveSummary mean_coverage; // over contracts that ran
    double wall_time = 0;
};

CorpusRun run_corpus(const std::string& dir, const LabelFile& labels, const PipelineOptions& opt);

nlohmann::ordered_json to_json(const CorpusRun& r, bool timing);
std::string to_text(const CorpusRun& r, bool timing);

// Inheritance, call graph, storage layout and per-function sizes.
nlohmann::ordered_json graphs_to_json(const Program& prog);

} // namespace sentry
