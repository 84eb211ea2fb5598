#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sentry/corpus.hpp"
#include "test_util.hpp"

#include <fstream>

using namespace sentry;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sentry_corpus_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

} // namespace

TEST_CASE("label parsing") {
    auto empty = parse_labels(R"({"schema": 1, "entries": []})");
    CHECK(empty.entries.empty());
    CHECK(empty.label_count() == 0);

    auto one = parse_labels(R"({"schema": 1, "entries": [
        {"path": "./a.minisol", "vulnerabilities": [{"type": "reentrancy", "function": "withdraw", "line": 12}]}]})");
    REQUIRE(one.entries.size() == 1);
    CHECK(one.entries[0].path == "a.minisol");
    CHECK(one.entries[0].vulnerabilities[0].type == VulnType::Reentrancy);
    CHECK(*one.entries[0].vulnerabilities[0].function == "withdraw");
    CHECK(*one.entries[0].vulnerabilities[0].line == 12);

    CHECK_THROWS_AS(parse_labels(R"({"schema": 1, "entries": [{"path": "a", "vulnerabilities": [{"type": "gas_grief"}]}]})"),
                    UnknownVulnType);
    try {
        parse_labels(R"({"schema": 1, "entries": [{"path": "a", "vulnerabilities": [{"type": "gas_grief"}]}]})");
    } catch (const UnknownVulnType& e) {
        CHECK(e.where() == "entries[0].vulnerabilities[0].type");
        CHECK(e.name() == "gas_grief");
    }
    CHECK_THROWS_AS(parse_labels(R"({"schema": 2, "entries": []})"), LabelParseError);
    CHECK_THROWS_AS(parse_labels(R"({"schema": 1, "entries": [{"vulnerabilities": []}]})"), LabelParseError);
    try {
        parse_labels("{\"schema\": 1,\n \"entries\": [}");
        FAIL("expected a parse error");
    } catch (const LabelParseError& e) {
        CHECK(e.where().rfind("byte ", 0) == 0);
    }
}

TEST_CASE("duplicate labels collapse with a warning") {
    auto lf = parse_labels(R"({"schema": 1, "entries": [
        {"path": "a.minisol", "vulnerabilities": [{"type": "integer_overflow"}, {"type": "integer_overflow"}]},
        {"path": "a.minisol", "vulnerabilities": [{"type": "integer_overflow", "function": "f"}]}]})");
    REQUIRE(lf.entries.size() == 1);
    CHECK(lf.entries[0].vulnerabilities.size() == 2);
    CHECK(lf.warnings.size() == 1);
}

TEST_CASE("indexing: empty dir, nested duplicates, dangling labels, order") {
    CHECK(index_corpus(scratch_dir("empty")).contracts.empty());

    fs::path d = scratch_dir("nested");
    write(d / "x" / "a.minisol", "contract A { }\n");
    write(d / "y" / "a.minisol", "contract A { }\n");
    write(d / "b.sol", "contract B { function f() public { assembly { } } }\n");
    write(d / "notes.txt", "ignored");
    auto labels = parse_labels(R"({"schema": 1, "entries": [
        {"path": "x/a.minisol", "vulnerabilities": [{"type": "reentrancy"}]},
        {"path": "gone.minisol", "vulnerabilities": []}]})");
    CorpusIndex idx = index_corpus(d, &labels);
    REQUIRE(idx.contracts.size() == 3);
    CHECK(idx.contracts[0].path == "b.sol");
    CHECK(idx.contracts[1].path == "x/a.minisol");
    CHECK(idx.contracts[2].path == "y/a.minisol");
    CHECK_FALSE(idx.contracts[0].error.empty());
    CHECK_FALSE(idx.contracts[0].size.has_value());
    CHECK(idx.contracts[1].label_counts[0] == 1);
    CHECK(idx.dangling == std::vector<std::string>{"gone.minisol"});
    CHECK(idx.size_tally[static_cast<std::size_t>(SizeClass::Simple)] == 2);
    fs::remove_all(d);
}

TEST_CASE("bundled corpus has enough vulnerable and safe contracts per class") {
    LabelFile labels = load_labels(corpus_path("labels.json"));
    CorpusIndex idx = index_corpus(corpus_path(""), &labels);
    CHECK(idx.contracts.size() >= 24);
    CHECK(idx.dangling.empty());
    for (const auto& c : idx.contracts) {
        CAPTURE(c.path);
        CHECK(c.error.empty());
        CHECK(c.labeled);
    }
    for (auto t : kAllVulnTypes) {
        CAPTURE(to_string(t));
        CHECK(idx.vulnerable(t) >= 3);
        CHECK(idx.safe(t) >= 3);
    }
}
