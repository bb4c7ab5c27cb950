#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace dift {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-sensitive combination of a seed with a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// FNV-1a over bytes, for turning identifiers into seeds.
constexpr std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stateless counter-based generator: value(i) depends only on (key, i).
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const { return derive_seed(key_, counter); }

    /// Uniform integer in [0, bound) (bound > 0), via 128-bit multiply-shift.
    std::uint64_t below(std::uint64_t counter, std::uint64_t bound) const {
        const auto wide = static_cast<unsigned __int128>(bits(counter)) * bound;
        return static_cast<std::uint64_t>(wide >> 64);
    }

private:
    std::uint64_t key_;
};

/// Fills `out` with standard-normal deviates generated from `seed`
/// (mt19937_64 + Box-Muller, so the stream is identical on every platform).
void fill_standard_normal(std::span<double> out, std::uint64_t seed);

}  // namespace dift
