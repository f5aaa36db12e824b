#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ooi {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to turn structured seed material into
// well-mixed 64-bit stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Independent randomness streams consumed by one experiment run.
enum class StreamRole : std::uint64_t {
    Env = 0,          // environment dynamics (resets, refills, tapes)
    NetInit = 1,      // network weight initialization
    Sampling = 2,     // action/option sampling and termination coins
    InitiationSets = 3 // randomized initiation-set construction
};

// Seed derivation scheme: seed(base, run, role) is a SplitMix64 chain over
// (base, run index, stream role). Streams for different (run, role) pairs
// are decorrelated, and the mapping is frozen - changing it invalidates
// recorded experiment outputs.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t run_index,
                                 StreamRole role) {
    std::uint64_t s = mix64(base_seed);
    s = mix64(s ^ (0x9E3779B97F4A7C15ull * (run_index + 1)));
    s = mix64(s ^ (0xD1B54A32D192ED03ull * (static_cast<std::uint64_t>(role) + 1)));
    return s;
}

inline Rng make_stream(std::uint64_t base_seed, std::uint64_t run_index, StreamRole role) {
    return Rng(derive_seed(base_seed, run_index, role));
}

// Uniform double in [0, 1) from the top 53 bits; avoids distribution
// objects so the draw sequence is identical across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi]. Modulo bias at 64 bits is negligible.
inline int uniform_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

// Samples an index from an (approximately normalized) probability vector.
// Falls back to the last strictly positive entry on accumulated rounding.
inline int sample_index(const std::vector<double>& probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) last_positive = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return last_positive;
}

} // namespace ooi
