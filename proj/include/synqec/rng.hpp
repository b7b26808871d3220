#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace synqec {

// Deterministic xoshiro256** generator. All randomness in the library flows
// through streams derived from one master seed, so a run is reproducible
// bit-for-bit from the seed alone. Streams are derived by a counter scheme:
//   stream(master, purpose, counter)
// hashes (master, purpose, counter) through splitmix64 to build the state.
// Distribution sampling is hand-rolled (not <random>) so the byte stream does
// not depend on the standard library implementation.

inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Rng {
  public:
    Rng() : Rng(0, 0, 0) {}
    Rng(uint64_t master, uint64_t purpose, uint64_t counter) {
        uint64_t x = master;
        (void)splitmix64(x);
        x ^= 0xD1B54A32D192ED03ull * (purpose + 1);
        (void)splitmix64(x);
        x ^= 0xABCC5167CCAD925Full * counter + 0x9E3779B97F4A7C15ull;
        for (auto& w : s_) w = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // Lemire-style rejection; unbiased.
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        uint64_t l = static_cast<uint64_t>(m);
        if (l < n) {
            uint64_t t = (0 - n) % n;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                l = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Box-Muller; caches the second draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = u01();
        while (u1 <= 0.0) u1 = u01();
        const double u2 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream purposes, fixed so stream identities stay stable across versions.
enum class StreamPurpose : uint64_t {
    init_weights = 1,
    pretrain_data = 2,
    pretrain_shuffle = 3,
    rollout = 4,
    replay_sample = 5,
    select_eval = 6,
    final_eval = 7,
    stage_eval = 8,
    transfer_noise = 9,
    test_misc = 100,
};

inline Rng make_stream(uint64_t master, StreamPurpose purpose, uint64_t counter) {
    return Rng(master, static_cast<uint64_t>(purpose), counter);
}

}  // namespace synqec
