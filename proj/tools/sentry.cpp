#include "sentry/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace sentry;
namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string path;
    std::string mode;
    std::string labels;
    SearchConfig search;
    Limits limits;
    std::string format = "text";
    std::string dump_ir, dump_deps, dump_graphs, trace;
    unsigned threads = 0;
    bool timing = false;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_out(const std::string& dest, const std::string& text) {
    if (dest == "-") {
        std::cerr << text;
        return;
    }
    std::ofstream out(dest, std::ios::binary);
    if (!out)
        throw UsageError("cannot write " + dest);
    out << text;
}

void add_search_flags(CLI::App* app, Flags& f) {
    app->add_option("--pop-size", f.search.N, "population size N")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", f.search.T, "maximum generations T");
    app->add_option("--select-k", f.search.K, "mating pool size K")->check(CLI::PositiveNumber);
    app->add_option("--pc", f.search.Pc, "crossover rate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--pm", f.search.Pm, "mutation rate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", f.search.seed, "random seed (default: $SENTRY_SEED, else 1)")->envname("SENTRY_SEED");
    app->add_option("--stagnation", f.search.stagnation_window, "stop after this many unchanged generations, 0 = never");
    app->add_option("--threads", f.threads, "evaluation threads, 0 = one per core");
}

void add_exec_flags(CLI::App* app, Flags& f) {
    app->add_option("--loop-cap", f.limits.max_loop_iter, "iterations per loop before forcing the exit")
        ->check(CLI::PositiveNumber);
    app->add_option("--depth-limit", f.limits.max_depth, "maximum call depth")->check(CLI::PositiveNumber);
    app->add_option("--reentry-count", f.limits.reentry_count, "reentrant calls per external call");
    app->add_option("--format", f.format, "output format")->check(CLI::IsMember({"json", "text"}));
    app->add_flag("--timing", f.timing, "include wall time in the report");
}

void add_dump_flags(CLI::App* app, Flags& f) {
    app->add_option("--dump-ir", f.dump_ir, "write the SSA IR and input layout to FILE ('-' = stderr)");
    app->add_option("--dump-deps", f.dump_deps, "write the dependency graph as DOT to FILE");
    app->add_option("--dump-graphs", f.dump_graphs, "write inheritance, call graph and storage layout as JSON to FILE");
    app->add_option("--trace", f.trace, "write the execution trace of the best input as JSONL to FILE");
}

PipelineOptions options(const Flags& f, Mode mode) {
    PipelineOptions o;
    o.mode = mode;
    o.search = f.search;
    o.search.threads = f.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : f.threads;
    o.limits = f.limits;
    if (mode == Mode::Search)
        o.search.validate();
    return o;
}

std::vector<Label> labels_for(const std::string& labels_path, const std::string& contract_path) {
    if (labels_path.empty())
        return {};
    LabelFile lf = load_labels(labels_path);
    for (const auto& w : lf.warnings)
        std::cerr << "warning: " << labels_path << ": " << w << "\n";
    std::error_code ec;
    fs::path base = fs::weakly_canonical(fs::path(labels_path), ec).parent_path();
    fs::path rel = fs::weakly_canonical(fs::path(contract_path), ec).lexically_relative(base);
    for (const std::string& key : {rel.generic_string(), fs::path(contract_path).lexically_normal().generic_string()})
        if (const LabelEntry* e = lf.find(key))
            return e->vulnerabilities;
    std::cerr << "note: no label entry for " << contract_path << "\n";
    return {};
}

int cmd_contract(const Flags& f, Mode mode) {
    auto c = load_contract(read_file(f.path), f.path);
    if (!f.dump_ir.empty()) {
        InputLayout layout = collect_input_slots(c->prog);
        Artifacts art = analyze(c->prog);
        SpecialValues sv = collect_special_values(c->prog, art.dep, layout);
        write_out(f.dump_ir, dump(c->prog) + "\n" + dump(layout, &sv));
    }
    if (!f.dump_deps.empty())
        write_out(f.dump_deps, to_dot(c->prog, build_dep_graph(c->prog)));
    if (!f.dump_graphs.empty())
        write_out(f.dump_graphs, graphs_to_json(c->prog).dump(2) + "\n");

    ContractRun r = run_contract(*c, labels_for(f.labels, f.path), options(f, mode));

    if (!f.trace.empty()) {
        InputLayout layout = collect_input_slots(c->prog);
        ExecResult ex = execute(c->prog, nullptr, layout, r.trace_input, f.limits);
        write_out(f.trace, to_jsonl(c->prog, ex.trace));
    }
    if (f.format == "json")
        std::cout << to_json(r, f.timing).dump(2) << "\n";
    else
        std::cout << to_text(r, f.timing);
    return r.findings.empty() ? 0 : 1;
}

int cmd_evaluate(const Flags& f, Mode mode) {
    if (!fs::is_directory(f.path))
        throw UsageError(f.path + " is not a directory");
    LabelFile lf = load_labels(f.labels);
    for (const auto& w : lf.warnings)
        std::cerr << "warning: " << f.labels << ": " << w << "\n";
    CorpusRun r = run_corpus(f.path, lf, options(f, mode));
    if (r.contracts.empty())
        throw UsageError("no contracts found under " + f.path);
    for (const auto& c : r.contracts)
        if (!c.error.empty())
            std::cerr << "error: " << c.path << ": " << c.error << "\n";
    if (f.format == "json")
        std::cout << to_json(r, f.timing).dump(2) << "\n";
    else
        std::cout << to_text(r, f.timing);
    for (const auto& c : r.contracts)
        if (c.run && !c.run->findings.empty())
            return 1;
    return 0;
}

Mode parse_mode(const std::string& s, Mode fallback) {
    if (s.empty())
        return fallback;
    return s == "static" ? Mode::Static : Mode::Search;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vulnerability detection for MiniSol contracts: static analysis plus NSGA-II input search"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);
    Flags f;

    auto* analyze = app.add_subcommand("analyze", "static analysis only");
    analyze->add_option("contract", f.path, "contract file")->required();
    analyze->add_option("--labels", f.labels, "label file (accuracy objective)");
    add_exec_flags(analyze, f);
    add_dump_flags(analyze, f);

    auto* search = app.add_subcommand("search", "static analysis plus NSGA-II input search");
    search->add_option("contract", f.path, "contract file")->required();
    search->add_option("--mode", f.mode, "static or search")->check(CLI::IsMember({"static", "search"}));
    search->add_option("--labels", f.labels, "label file (accuracy objective)");
    add_search_flags(search, f);
    add_exec_flags(search, f);
    add_dump_flags(search, f);

    auto* evaluate = app.add_subcommand("evaluate", "per-type metrics over a labeled corpus");
    evaluate->add_option("dir", f.path, "corpus directory")->required();
    evaluate->add_option("--labels", f.labels, "label file")->required();
    evaluate->add_option("--mode", f.mode, "static or search")->check(CLI::IsMember({"static", "search"}));
    add_search_flags(evaluate, f);
    add_exec_flags(evaluate, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*analyze)
            return cmd_contract(f, Mode::Static);
        if (*search)
            return cmd_contract(f, parse_mode(f.mode, Mode::Search));
        return cmd_evaluate(f, parse_mode(f.mode, Mode::Search));
    } catch (const SourceError& e) {
        std::cerr << f.path << ":" << to_string(e.location()) << ": error: " << e.what() << "\n";
    } catch (const LoweringError& e) {
        std::cerr << f.path << ":" << to_string(e.location()) << ": error: " << e.what() << "\n";
    } catch (const LabelParseError& e) {
        std::cerr << f.labels << ": " << e.where() << ": error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return 2;
}
