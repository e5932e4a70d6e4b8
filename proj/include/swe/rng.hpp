#pragma once

#include <cstdint>
#include <limits>

namespace swe {

/// Counter-based generator: output i of the stream keyed by
/// (seed, replica, step) is a SplitMix64 finalisation of key + i * golden.
/// Streams for distinct keys are independent of scheduling order, which is
/// what makes replica-parallel runs reproducible at any thread count.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t replica, std::uint64_t step);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        counter_ += kGolden;
        return mix(key_ + counter_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace swe
