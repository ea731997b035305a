#pragma once
// Counter-based uniform sampler.
//
// The k-th draw of a stream with seed s is
//
//     mix64(s + (k + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. A draw is mapped to [0, 1) by
// taking its top 53 bits and multiplying by 2^-53. Only integer arithmetic
// with defined wraparound is involved, so the same seed yields the same bits
// on every platform.

#include <cstdint>

namespace attnflow {

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Raw 64-bit draw at an explicit counter position.
    constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
        return mix64(seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform double in [0, 1) at an explicit counter position.
    constexpr double uniform_at(std::uint64_t counter) const noexcept {
        return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
    }

    std::uint64_t next() noexcept { return at(counter_++); }
    double uniform() noexcept { return uniform_at(counter_++); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace attnflow
