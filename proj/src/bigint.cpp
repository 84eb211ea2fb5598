#include "sentry/bigint.hpp"

#include <stdexcept>

namespace sentry {

BigInt pow2(unsigned bits) {
    BigInt r = 1;
    r <<= bits;
    return r;
}

BigInt parse_bigint(std::string_view text) {
    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.remove_prefix(1);
    }
    unsigned base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        base = 16;
        text.remove_prefix(2);
    }
    if (text.empty())
        throw std::invalid_argument("empty integer literal");
    BigInt r = 0;
    bool any = false;
    for (char c : text) {
        if (c == '_')
            continue;
        unsigned digit;
        if (c >= '0' && c <= '9')
            digit = static_cast<unsigned>(c - '0');
        else if (base == 16 && c >= 'a' && c <= 'f')
            digit = static_cast<unsigned>(c - 'a' + 10);
        else if (base == 16 && c >= 'A' && c <= 'F')
            digit = static_cast<unsigned>(c - 'A' + 10);
        else
            throw std::invalid_argument("bad digit in integer literal: " + std::string(text));
        r = r * base + digit;
        any = true;
    }
    if (!any)
        throw std::invalid_argument("empty integer literal");
    return negative ? BigInt(-r) : r;
}

std::string to_string(const BigInt& value) { return value.str(); }

} // namespace sentry
