#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tbn {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, stable across platforms (std::hash is not).
constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named sub-stream of a run seed ("sampler", "init", "dropout", "datagen", ...).
/// Changing how one component draws never perturbs another component's stream.
inline Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return Rng(mix64(mix64(seed ^ hash_name(name)) + index));
}

}  // namespace tbn
