#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace sentry {

using BigInt = boost::multiprecision::cpp_int;

// 2^bits as an unbounded integer.
BigInt pow2(unsigned bits);

// Parses decimal or 0x-prefixed hexadecimal digits (underscores allowed).
// Throws std::invalid_argument on malformed text.
BigInt parse_bigint(std::string_view text);

std::string to_string(const BigInt& value);

} // namespace sentry
