#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace semitrans {

using Engine = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream `path` under `master`: folds each key through mix64, so
/// a replicate's stream depends only on (master, keys), never on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = mix64(master);
    for (std::uint64_t key : path) state = mix64(state ^ mix64(key));
    return state;
}

inline Engine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Engine(derive_seed(master, path));
}

} // namespace semitrans
