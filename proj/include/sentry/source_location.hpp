#pragma once

#include <cstdint>
#include <string>
#include <tuple>

namespace sentry {

// Byte offset plus 1-based line/column of the first character of a node.
struct SourceLocation {
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
    std::uint32_t line = 1;
    std::uint32_t column = 1;

    friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
    friend auto operator<=>(const SourceLocation& a, const SourceLocation& b) {
        return std::tie(a.line, a.column, a.offset, a.length) <=>
               std::tie(b.line, b.column, b.offset, b.length);
    }
};

inline std::string to_string(const SourceLocation& loc) {
    return std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

} // namespace sentry
