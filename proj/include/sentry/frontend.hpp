#pragma once

#include "sentry/ast.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentry {

// Base for diagnostics that carry a source position.
class SourceError : public std::runtime_error {
public:
    SourceError(const std::string& what, SourceLocation loc)
        : std::runtime_error(what), loc_(loc) {}
    const SourceLocation& location() const { return loc_; }

private:
    SourceLocation loc_;
};

class SyntaxError : public SourceError {
public:
    using SourceError::SourceError;
};

// Valid Solidity outside the MiniSol subset (assembly, libraries, ...).
class UnsupportedFeature : public SourceError {
public:
    using SourceError::SourceError;
};

SourceUnit parse(std::string_view source_text, std::string path);

// Number of newline-delimited physical lines, blank and comment lines included.
std::size_t count_lines(std::string_view text);

enum class SizeClass { Simple, Ordinary, Complex };

const char* to_string(SizeClass c);

// Simple below 50 lines, Ordinary for 50..300 inclusive, Complex above 300.
SizeClass classify_size(std::size_t line_count);
inline SizeClass classify_size(const SourceUnit& unit) { return classify_size(unit.line_count); }

// Canonical MiniSol rendering; parse(print(u)) is structurally equal to u.
std::string print(const SourceUnit& unit);
std::string print(const Expr& expr);

} // namespace sentry
