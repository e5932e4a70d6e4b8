#include "swe/rng.hpp"

namespace swe {

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replica, std::uint64_t step) {
    std::uint64_t k = mix(seed ^ 0x243f6a8885a308d3ULL);
    k = mix(k ^ (replica * 0x13198a2e03707344ULL + 0xa4093822299f31d0ULL));
    k = mix(k ^ (step * 0x082efa98ec4e6c89ULL + 0x452821e638d01377ULL));
    key_ = k;
}

}  // namespace swe
