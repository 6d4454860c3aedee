#pragma once

#include <cstdint>

namespace habench {

/// splitmix64 step; the entire generator state is one 64-bit word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent substream keyed by (seed, domain, index). Streams can be
/// created in any order, so parallel generation is deterministic.
class Substream {
public:
    Substream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
        std::uint64_t s = index;
        const std::uint64_t a = splitmix64(s);
        s = domain ^ a;
        const std::uint64_t b = splitmix64(s);
        state_ = seed ^ b;
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in the open interval (0, 1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; two uniforms per draw.
    double next_normal();

private:
    std::uint64_t state_;
};

}  // namespace habench
