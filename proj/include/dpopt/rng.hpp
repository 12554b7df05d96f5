#pragma once

#include <cmath>
#include <cstdint>

namespace dpopt {

inline std::uint64_t splitmix64_step(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic random stream derived from a master seed and up to three
/// key words. Streams with distinct keys are independent, so per-lot noise
/// and per-epoch shuffles can be drawn without sharing mutable state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed,
                       std::uint64_t k1 = 0,
                       std::uint64_t k2 = 0,
                       std::uint64_t k3 = 0) {
        state_ = seed;
        mix(k1 ^ 0xd1b54a32d192ed03ULL);
        mix(k2 ^ 0xaef17502108ef2d9ULL);
        mix(k3 ^ 0x94d049bb133111ebULL);
    }

    std::uint64_t next_u64() { return splitmix64_step(state_); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal draw (Box-Muller, spare value cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void mix(std::uint64_t key) {
        state_ ^= key;
        splitmix64_step(state_);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace dpopt
