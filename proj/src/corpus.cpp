#include "sentry/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sentry {

namespace {

using nlohmann::json;

std::string normalize_path(std::string p) {
    std::replace(p.begin(), p.end(), '\\', '/');
    while (p.rfind("./", 0) == 0)
        p.erase(0, 2);
    return p;
}

const json& member(const json& obj, const char* name, const std::string& where) {
    auto it = obj.find(name);
    if (it == obj.end())
        throw LabelParseError(std::string("missing field '") + name + "'", where);
    return *it;
}

Label parse_label(const json& v, const std::string& where) {
    if (!v.is_object())
        throw LabelParseError("vulnerability must be an object", where);
    const json& type = member(v, "type", where);
    if (!type.is_string())
        throw LabelParseError("'type' must be a string", where + ".type");
    Label l;
    auto t = parse_vuln_type(type.get<std::string>());
    if (!t)
        throw UnknownVulnType(type.get<std::string>(), where + ".type");
    l.type = *t;
    if (auto it = v.find("function"); it != v.end() && !it->is_null()) {
        if (!it->is_string() || it->get<std::string>().empty())
            throw LabelParseError("'function' must be a non-empty string", where + ".function");
        l.function = it->get<std::string>();
    }
    if (auto it = v.find("line"); it != v.end() && !it->is_null()) {
        if (!it->is_number_integer() || it->get<long long>() < 1)
            throw LabelParseError("'line' must be a positive integer", where + ".line");
        l.line = static_cast<int>(it->get<long long>());
    }
    return l;
}

} // namespace

const LabelEntry* LabelFile::find(const std::string& path) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), path,
                               [](const LabelEntry& e, const std::string& p) { return e.path < p; });
    return it != entries.end() && it->path == path ? &*it : nullptr;
}

std::size_t LabelFile::label_count() const {
    std::size_t n = 0;
    for (const auto& e : entries)
        n += e.vulnerabilities.size();
    return n;
}

LabelFile parse_labels(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LabelParseError(e.what(), "byte " + std::to_string(e.byte));
    }
    if (!doc.is_object())
        throw LabelParseError("label file must be a JSON object", "$");
    const json& schema = member(doc, "schema", "$");
    if (!schema.is_number_integer() || schema.get<long long>() != 1)
        throw LabelParseError("unsupported schema version", "schema");
    const json& entries = member(doc, "entries", "$");
    if (!entries.is_array())
        throw LabelParseError("'entries' must be an array", "entries");

    LabelFile out;
    std::map<std::string, LabelEntry> by_path;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        std::string where = "entries[" + std::to_string(i) + "]";
        const json& e = entries[i];
        if (!e.is_object())
            throw LabelParseError("entry must be an object", where);
        const json& path = member(e, "path", where);
        if (!path.is_string() || path.get<std::string>().empty())
            throw LabelParseError("'path' must be a non-empty string", where + ".path");
        std::string p = normalize_path(path.get<std::string>());
        LabelEntry& entry = by_path[p];
        entry.path = p;
        auto vs = e.find("vulnerabilities");
        if (vs == e.end())
            continue;
        if (!vs->is_array())
            throw LabelParseError("'vulnerabilities' must be an array", where + ".vulnerabilities");
        for (std::size_t k = 0; k < vs->size(); ++k) {
            Label l = parse_label((*vs)[k], where + ".vulnerabilities[" + std::to_string(k) + "]");
            bool dup = std::any_of(entry.vulnerabilities.begin(), entry.vulnerabilities.end(),
                                   [&](const Label& o) { return o.type == l.type && o.function == l.function; });
            if (dup) {
                out.warnings.push_back("duplicate label " + std::string(to_string(l.type)) +
                                       (l.function ? " in " + *l.function : "") + " for " + p + " collapsed");
                continue;
            }
            entry.vulnerabilities.push_back(std::move(l));
        }
    }
    for (auto& [p, e] : by_path)
        out.entries.push_back(std::move(e));
    return out;
}

LabelFile load_labels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LabelParseError("cannot open label file", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_labels(ss.str());
}

std::size_t CorpusIndex::vulnerable(VulnType t) const {
    std::size_t n = 0;
    for (const auto& c : contracts)
        n += c.label_counts[static_cast<std::size_t>(t)] > 0;
    return n;
}

std::size_t CorpusIndex::safe(VulnType t) const {
    std::size_t n = 0;
    for (const auto& c : contracts)
        n += c.labeled && c.label_counts[static_cast<std::size_t>(t)] == 0;
    return n;
}

CorpusIndex index_corpus(const std::filesystem::path& dir, const LabelFile* labels) {
    namespace fs = std::filesystem;
    CorpusIndex out;
    if (!fs::is_directory(dir))
        return out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file())
            continue;
        auto ext = e.path().extension();
        if (ext != ".minisol" && ext != ".sol")
            continue;
        CorpusEntry c;
        c.file = fs::absolute(e.path());
        c.path = normalize_path(fs::relative(e.path(), dir).generic_string());
        out.contracts.push_back(std::move(c));
    }
    std::sort(out.contracts.begin(), out.contracts.end(),
              [](const CorpusEntry& a, const CorpusEntry& b) { return a.path < b.path; });
    for (auto& c : out.contracts) {
        std::ifstream in(c.file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        c.lines = count_lines(text);
        try {
            parse(text, c.path);
            c.size = classify_size(c.lines);
            ++out.size_tally[static_cast<std::size_t>(*c.size)];
        } catch (const SourceError& err) {
            c.error = to_string(err.location()) + ": " + err.what();
        }
        if (labels)
            if (const LabelEntry* le = labels->find(c.path)) {
                c.labeled = true;
                for (const auto& l : le->vulnerabilities)
                    ++c.label_counts[static_cast<std::size_t>(l.type)];
            }
    }
    if (labels) {
        std::set<std::string> paths;
        for (const auto& c : out.contracts)
            paths.insert(c.path);
        for (const auto& le : labels->entries)
            if (!paths.count(le.path))
                out.dangling.push_back(le.path);
    }
    return out;
}

} // namespace sentry
