#pragma once

#include <cstdint>
#include <random>

namespace mosaic {

// SplitMix64 finalizer. Used to derive per-chain seeds so that reruns are
// portable: the mixing is pinned here, and mt19937_64 output is pinned by
// the C++ standard.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for one chain: mix(master_seed) folded with the fragment id and the
// chain index. Distinct chain indices give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::uint64_t fragment_id,
                                    std::uint64_t chain_index) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ fragment_id);
    h = splitmix64(h ^ chain_index);
    return h;
}

// Deterministic RNG handle. Bounded draws avoid std::uniform_int_distribution,
// whose value mapping is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased draw from [0, n). Requires n >= 1.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (0 - un) % un;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return static_cast<std::size_t>(r % un);
        }
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

}  // namespace mosaic
