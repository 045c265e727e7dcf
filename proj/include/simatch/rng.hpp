#pragma once

#include <cstdint>

namespace simatch {

// Counter-based generator: stream k of master seed s is a pure function of
// (s, k), so sample streams are identical regardless of worker scheduling.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream) {
        state_ = mix(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
        state_ = mix(state_ ^ 0xBF58476D1CE4E5B9ull);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, k), k >= 1. Rejection-free multiply-shift.
    int next_below(int k) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(k)) >> 64);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }
    std::uint64_t state_;
};

}  // namespace simatch
