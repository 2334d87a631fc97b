#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace icbandit {

// Seed splitting. A master seed expands into independent child streams through
// splitmix64 finalization; every replication, inner draw and learner gets its
// own child, so the schedule of worker threads never changes results.
inline constexpr std::uint64_t kSplitIncrement = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += kSplitIncrement;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(parent) ^ (stream * kSplitIncrement + 0x632BE59BD9B4E019ULL));
}

template <typename... Streams>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream, Streams... rest) noexcept {
    return derive_seed(derive_seed(parent, stream), static_cast<std::uint64_t>(rest)...);
}

/// Portable random stream. std::mt19937_64 output is fully specified by the
/// standard; the variate transforms below are written out by hand because the
/// standard library distributions differ between implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (one variate per call, the pair is not cached).
    double normal();

    /// Index drawn from a probability vector; mass left over by rounding goes to the last positive entry.
    std::size_t categorical(std::span<const double> probs);

    Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

}  // namespace icbandit
