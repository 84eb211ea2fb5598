#pragma once

// Label files and corpus directory indexing.

#include "sentry/detectors.hpp"
#include "sentry/frontend.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentry {

class LabelParseError : public std::runtime_error {
public:
    // `where` is a byte offset ("byte 17") or a JSON path ("entries[2].path").
    LabelParseError(const std::string& what, std::string where)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

class UnknownVulnType : public LabelParseError {
public:
    UnknownVulnType(const std::string& name, std::string where)
        : LabelParseError("unknown vulnerability type '" + name + "'", std::move(where)), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

struct Label {
    VulnType type = VulnType::Reentrancy;
    std::optional<std::string> function;
    std::optional<int> line;
};

struct LabelEntry {
    std::string path; // relative to the corpus directory, '/' separated
    std::vector<Label> vulnerabilities;
};

struct LabelFile {
    std::vector<LabelEntry> entries; // sorted by path, one per path
    std::vector<std::string> warnings;

    const LabelEntry* find(const std::string& path) const;
    std::size_t label_count() const;
};

LabelFile parse_labels(const std::string& text);
LabelFile load_labels(const std::filesystem::path& path);

struct CorpusEntry {
    std::string path;                 // relative, '/' separated
    std::filesystem::path file;       // absolute
    std::size_t lines = 0;
    std::optional<SizeClass> size;    // unset when the contract does not parse
    std::string error;
    bool labeled = false;
    std::array<std::size_t, 4> label_counts{}; // indexed by VulnType
};

struct CorpusIndex {
    std::vector<CorpusEntry> contracts; // lexicographic by path
    std::vector<std::string> dangling;  // label paths with no contract
    std::array<std::size_t, 3> size_tally{};

    std::size_t vulnerable(VulnType t) const;
    std::size_t safe(VulnType t) const; // labeled contracts without this type
};

// Recursively collects *.minisol and *.sol files under dir.
CorpusIndex index_corpus(const std::filesystem::path& dir, const LabelFile* labels = nullptr);

} // namespace sentry
