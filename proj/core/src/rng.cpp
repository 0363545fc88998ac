#include "pocl/rng.hpp"

#include <cmath>
#include <numbers>

namespace pocl {

double Rng::normal() {
    const double u1 = next_double_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace

std::uint64_t Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> parts,
                          std::string_view tag) {
    std::uint64_t h = mix(seed + 0x9E3779B97F4A7C15ULL);
    for (std::uint64_t p : parts) {
        h = mix(h ^ (p + 0x9E3779B97F4A7C15ULL));
    }
    if (!tag.empty()) {
        h = mix(h ^ fnv1a(tag));
    }
    return h;
}

} // namespace pocl
