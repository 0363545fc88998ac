#pragma once

// Locale-independent double <-> text helpers for the structured-text
// outputs. Shortest round-trip form, so re-parsing reproduces the exact
// bit pattern.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "pocl/errors.hpp"

namespace pocl::detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("bad double: '" + std::string(s) + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("bad integer: '" + std::string(s) + "'");
    }
    return v;
}

inline std::int64_t parse_i64(std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("bad integer: '" + std::string(s) + "'");
    }
    return v;
}

} // namespace pocl::detail
