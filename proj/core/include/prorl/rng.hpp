#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace prorl {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a key tuple into a 64-bit seed. Used to derive
/// independent, reproducible streams such as (seed, step, prompt, sample).
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

inline std::mt19937_64 make_stream(std::initializer_list<std::uint64_t> keys) {
    return std::mt19937_64(derive_seed(keys));
}

} // namespace prorl
