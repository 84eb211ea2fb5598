#include "sentry/report.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sentry {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w)
        s.append(w - s.size(), ' ');
    return s;
}

std::string lpad(std::string s, std::size_t w) {
    if (s.size() < w)
        s.insert(0, w - s.size(), ' ');
    return s;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json summary_json(const ObjectiveSummary& s) {
    return Json{{"initial_mean", s.initial_mean},
                {"initial_best", s.initial_best},
                {"final_best", s.final_best},
                {"final_mean", s.final_mean}};
}

Json config_json(Mode mode, const SearchConfig& c, const Limits& l) {
    Json j;
    if (mode == Mode::Search) {
        j["pop_size"] = c.N;
        j["max_iters"] = c.T;
        j["select_k"] = c.K;
        j["pc"] = c.Pc;
        j["pm"] = c.Pm;
        j["stagnation"] = c.stagnation_window;
    }
    j["loop_cap"] = l.max_loop_iter;
    j["depth_limit"] = l.max_depth;
    j["reentry_count"] = l.reentry_count;
    return j;
}

Json finding_json(const Finding& f) {
    return Json{{"type", to_string(f.vuln)},
                {"contract", f.contract},
                {"function", f.function},
                {"line", f.loc.line},
                {"column", f.loc.column},
                {"rule", f.rule},
                {"score", f.score},
                {"witnessed", f.witnessed},
                {"evidence", f.evidence}};
}

Json genes_json(const InputVector& genes) {
    Json a = Json::array();
    for (const auto& g : genes)
        a.push_back(to_string(g));
    return a;
}

} // namespace

const char* to_string(Mode m) { return m == Mode::Static ? "static" : "search"; }

std::unique_ptr<LoadedContract> load_contract(const std::string& text, const std::string& path) {
    auto c = std::make_unique<LoadedContract>();
    c->path = path;
    c->unit = parse(text, path);
    c->prog = build_program(c->unit);
    return c;
}

InputVector default_input(const InputLayout& layout) {
    InputVector v;
    for (const auto& s : layout.slots)
        v.push_back(s.lo > 0 ? s.lo : (s.hi < 0 ? s.hi : BigInt(0)));
    return v;
}

ContractRun run_contract(const LoadedContract& c, const std::vector<Label>& labels, const PipelineOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    ContractRun r;
    r.path = c.path;
    r.contract = c.prog.contract;
    r.size = classify_size(c.unit);
    r.mode = opt.mode;
    r.config = opt.search;
    r.limits = opt.limits;
    r.census = c.prog.census();

    if (opt.mode == Mode::Static) {
        // One run of the default input for coverage; its trace never witnesses.
        Artifacts art = analyze(c.prog);
        InputLayout layout = collect_input_slots(c.prog);
        r.inputs = layout.slots;
        r.findings = run_all(art);
        r.trace_input = default_input(layout);
        InstrumentedProgram inst = instrument(c.prog);
        ExecResult ex = execute(c.prog, &inst, layout, r.trace_input, opt.limits);
        double cov = coverage(ex.counters, r.census);
        double acc = accuracy_objective(r.findings, labels, r.census.total());
        r.coverage = {cov, cov, cov, cov};
        r.accuracy = {acc, acc, acc, acc};
        r.union_coverage = cov;
        r.wall_time = seconds_since(t0);
        return r;
    }

    SearchProblem p = make_problem(c.prog, labels, opt.limits);
    r.inputs = p.layout.slots;
    SearchResult res = run(p, opt.search);
    const auto& first = res.history.front();
    const auto& last = res.history.back();
    r.coverage = {first.mean_f2, first.best_f2, last.best_f2, last.mean_f2};
    r.accuracy = {first.mean_f1, first.best_f1, last.best_f1, last.mean_f1};
    r.union_coverage = coverage(res.union_counters, r.census);
    r.history = res.history;
    for (std::size_t i : res.front)
        r.front.push_back(res.population[i]);
    r.generations = res.generations;
    r.evaluations = res.evaluations;
    r.stagnated = res.stagnated;
    r.findings = std::move(res.findings);
    const Individual* best = nullptr;
    for (const auto& ind : r.front)
        if (!best || ind.fitness.f2 > best->fitness.f2 ||
            (ind.fitness.f2 == best->fitness.f2 && ind.fitness.f1 > best->fitness.f1))
            best = &ind;
    if (best)
        r.trace_input = best->genes;
    r.wall_time = seconds_since(t0);
    return r;
}

Json to_json(const ContractRun& r, bool timing) {
    Json j;
    j["schema"] = kReportSchema;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["mode"] = to_string(r.mode);
    j["contract"] = Json{{"path", r.path}, {"name", r.contract}, {"size_class", to_string(r.size)}};
    if (r.mode == Mode::Search)
        j["seed"] = r.config.seed;
    else
        j["seed"] = nullptr;
    j["config"] = config_json(r.mode, r.config, r.limits);
    Json jumps;
    static const char* kNames[6] = {"JUMP", "JUMPI", "JUMPDEST", "RETURN", "REVERT", "STOP"};
    for (int k = 0; k < 6; ++k)
        jumps[kNames[k]] = r.census.J[k];
    j["census"] = Json{{"statements", r.census.K}, {"jumps", jumps}, {"total", r.census.total()}};
    Json inputs = Json::array();
    for (const auto& s : r.inputs)
        inputs.push_back(Json{{"name", s.name}, {"type", to_string(s.ty)}, {"lo", to_string(s.lo)}, {"hi", to_string(s.hi)}});
    j["inputs"] = inputs;
    j["coverage"] = summary_json(r.coverage);
    j["coverage"]["union"] = r.union_coverage;
    j["accuracy"] = summary_json(r.accuracy);
    if (r.mode == Mode::Search)
        j["search"] = Json{{"generations", r.generations}, {"evaluations", r.evaluations}, {"stagnated", r.stagnated}};
    else
        j["search"] = nullptr;
    Json hist = Json::array();
    for (const auto& h : r.history)
        hist.push_back(Json{{"generation", h.generation},
                            {"best_accuracy", h.best_f1},
                            {"mean_accuracy", h.mean_f1},
                            {"best_coverage", h.best_f2},
                            {"mean_coverage", h.mean_f2}});
    j["history"] = hist;
    Json front = Json::array();
    for (const auto& ind : r.front)
        front.push_back(Json{{"genes", genes_json(ind.genes)}, {"accuracy", ind.fitness.f1}, {"coverage", ind.fitness.f2}});
    j["pareto_front"] = front;
    Json fs = Json::array();
    for (const auto& f : r.findings)
        fs.push_back(finding_json(f));
    j["findings"] = fs;
    if (timing)
        j["wall_time"] = r.wall_time;
    return j;
}

std::string to_text(const ContractRun& r, bool timing) {
    std::ostringstream os;
    os << kToolName << " " << kToolVersion << "  " << to_string(r.mode) << "  " << r.path << "  (" << r.contract
       << ", " << to_string(r.size) << ")\n";
    if (r.mode == Mode::Search) {
        const auto& c = r.config;
        os << "seed " << c.seed << "  N=" << c.N << " T=" << c.T << " K=" << c.K << " Pc=" << c.Pc
           << " Pm=" << c.Pm << " stagnation=" << c.stagnation_window << "\n";
        os << "generations " << r.generations << (r.stagnated ? " (stagnated)" : "") << ", evaluations "
           << r.evaluations << "\n";
    }
    os << "statements " << r.census.total() << " (K=" << r.census.K << ", jumps=" << r.census.jumps() << "), inputs "
       << r.inputs.size() << "\n\n";
    os << pad("", 10) << lpad("init mean", 11) << lpad("init best", 11) << lpad("final best", 11)
       << lpad("final mean", 11) << "\n";
    auto row = [&](const char* name, const ObjectiveSummary& s) {
        os << pad(name, 10) << lpad(fixed(s.initial_mean), 11) << lpad(fixed(s.initial_best), 11)
           << lpad(fixed(s.final_best), 11) << lpad(fixed(s.final_mean), 11) << "\n";
    };
    row("coverage", r.coverage);
    row("accuracy", r.accuracy);
    os << "union coverage " << fixed(r.union_coverage) << "\n\n";
    os << "findings: " << r.findings.size() << "\n";
    for (const auto& f : r.findings) {
        os << "  " << pad(to_string(f.vuln), 22) << pad(f.function, 16) << pad(to_string(f.loc), 8) << "score "
           << fixed(f.score, 2) << (f.witnessed ? "  witnessed" : "  static") << "\n";
        os << "      " << f.evidence << "\n";
    }
    if (timing)
        os << "\nwall time " << fixed(r.wall_time, 3) << " s\n";
    return os.str();
}

CorpusRun run_corpus(const std::string& dir, const LabelFile& labels, const PipelineOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    CorpusRun out;
    out.dir = dir;
    out.mode = opt.mode;
    out.options = opt;
    CorpusIndex idx = index_corpus(dir, &labels);
    out.dangling = idx.dangling;
    std::vector<ContractFindings> results;
    std::size_t ran = 0;
    for (const auto& e : idx.contracts) {
        CorpusContract cc;
        cc.path = e.path;
        cc.size = e.size;
        cc.error = e.error;
        if (cc.error.empty()) {
            try {
                auto c = load_contract(read_file(e.file), e.path);
                const LabelEntry* le = labels.find(e.path);
                cc.run = run_contract(*c, le ? le->vulnerabilities : std::vector<Label>{}, opt);
            } catch (const std::exception& ex) {
                cc.error = ex.what();
            }
        }
        if (cc.run) {
            results.push_back({cc.path, cc.run->findings});
            const auto& s = cc.run->coverage;
            out.mean_coverage.initial_mean += s.initial_mean;
            out.mean_coverage.initial_best += s.initial_best;
            out.mean_coverage.final_best += s.final_best;
            out.mean_coverage.final_mean += s.final_mean;
            ++ran;
        }
        out.contracts.push_back(std::move(cc));
    }
    if (ran > 0) {
        double n = static_cast<double>(ran);
        out.mean_coverage.initial_mean /= n;
        out.mean_coverage.initial_best /= n;
        out.mean_coverage.final_best /= n;
        out.mean_coverage.final_mean /= n;
    }
    out.metrics = evaluate(results, labels);
    out.wall_time = seconds_since(t0);
    return out;
}

Json to_json(const CorpusRun& r, bool timing) {
    Json j;
    j["schema"] = kReportSchema;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["mode"] = to_string(r.mode);
    j["corpus"] = r.dir;
    if (r.mode == Mode::Search)
        j["seed"] = r.options.search.seed;
    else
        j["seed"] = nullptr;
    j["config"] = config_json(r.mode, r.options.search, r.options.limits);
    Json cs = Json::array();
    for (const auto& c : r.contracts) {
        Json e;
        e["path"] = c.path;
        e["size_class"] = c.size ? Json(to_string(*c.size)) : Json(nullptr);
        if (c.run) {
            e["findings"] = c.run->findings.size();
            std::size_t w = 0;
            for (const auto& f : c.run->findings)
                w += f.witnessed;
            e["witnessed"] = w;
            e["coverage"] = summary_json(c.run->coverage);
            if (timing)
                e["wall_time"] = c.run->wall_time;
        }
        e["error"] = c.error.empty() ? Json(nullptr) : Json(c.error);
        cs.push_back(e);
    }
    j["contracts"] = cs;
    j["dangling_labels"] = r.dangling;
    Json ms = Json::array();
    for (const auto& m : r.metrics)
        ms.push_back(Json{{"type", to_string(m.type)},
                          {"tp", m.cm.tp},
                          {"fp", m.cm.fp},
                          {"fn", m.cm.fn},
                          {"tn", m.cm.tn},
                          {"accuracy", m.accuracy},
                          {"precision", m.precision},
                          {"recall", m.recall},
                          {"f1", m.f1},
                          {"tpr", m.tpr},
                          {"fpr", m.fpr},
                          {"fnr", m.fnr},
                          {"tnr", m.tnr},
                          {"auc", m.auc},
                          {"mcc", m.mcc},
                          {"fmi", m.fmi}});
    j["metrics"] = ms;
    j["mean_coverage"] = summary_json(r.mean_coverage);
    if (timing)
        j["wall_time"] = r.wall_time;
    return j;
}

std::string to_text(const CorpusRun& r, bool timing) {
    std::ostringstream os;
    os << kToolName << " " << kToolVersion << "  evaluate  " << r.dir << "  mode " << to_string(r.mode) << "\n\n";
    os << pad("contract", 40) << pad("size", 10) << lpad("findings", 9) << lpad("witnessed", 10)
       << lpad("coverage", 10) << "\n";
    for (const auto& c : r.contracts) {
        os << pad(c.path, 40) << pad(c.size ? to_string(*c.size) : "-", 10);
        if (c.run) {
            std::size_t w = 0;
            for (const auto& f : c.run->findings)
                w += f.witnessed;
            os << lpad(std::to_string(c.run->findings.size()), 9) << lpad(std::to_string(w), 10)
               << lpad(fixed(c.run->coverage.final_best), 10);
        }
        if (!c.error.empty())
            os << "  error: " << c.error;
        os << "\n";
    }
    for (const auto& d : r.dangling)
        os << "dangling label: " << d << "\n";
    os << "\n" << pad("type", 22);
    for (const char* h : {"TP", "FP", "FN", "TN"})
        os << lpad(h, 5);
    for (const char* h : {"Acc", "Prec", "Rec", "F1", "TPR", "FPR", "FNR", "TNR", "AUC", "MCC", "FMI"})
        os << lpad(h, 8);
    os << "\n";
    for (const auto& m : r.metrics) {
        os << pad(to_string(m.type), 22);
        for (auto v : {m.cm.tp, m.cm.fp, m.cm.fn, m.cm.tn})
            os << lpad(std::to_string(v), 5);
        for (double v : {m.accuracy, m.precision, m.recall, m.f1, m.tpr, m.fpr, m.fnr, m.tnr, m.auc, m.mcc, m.fmi})
            os << lpad(fixed(v, 3), 8);
        os << "\n";
    }
    os << "\nmean coverage: initial " << fixed(r.mean_coverage.initial_mean) << ", final best "
       << fixed(r.mean_coverage.final_best) << "\n";
    if (timing)
        os << "wall time " << fixed(r.wall_time, 3) << " s\n";
    return os.str();
}

Json graphs_to_json(const Program& prog) {
    Json j;
    j["schema"] = kReportSchema;
    j["contract"] = prog.contract;
    Json inh;
    for (const auto& [derived, bases] : prog.ig.edges)
        inh[derived] = bases;
    j["inheritance"] = inh.is_null() ? Json::object() : inh;
    j["linearization"] = prog.ig.linearize(prog.contract);
    Json edges = Json::array();
    for (const auto& e : prog.cg.edges)
        edges.push_back(Json{{"from", e.from},
                             {"to", e.to},
                             {"kind", e.kind == CallEdgeKind::Internal ? "internal" : "external"},
                             {"line", e.loc.line},
                             {"column", e.loc.column}});
    j["call_graph"] = Json{{"nodes", prog.cg.nodes}, {"edges", edges}};
    Json slots = Json::array();
    for (const auto& s : prog.layout.slots)
        slots.push_back(Json{{"slot", s.index}, {"contract", s.contract}, {"name", s.name}, {"type", to_string(s.ty)}});
    j["storage"] = slots;
    Json fns = Json::array();
    for (const auto& fn : prog.functions) {
        Census c = fn.census();
        fns.push_back(Json{{"id", fn.id},
                           {"entry", fn.is_entry},
                           {"constructor", fn.is_constructor},
                           {"blocks", fn.blocks.size()},
                           {"statements", c.K},
                           {"jumps", c.jumps()}});
    }
    j["functions"] = fns;
    return j;
}

} // namespace sentry
