#pragma once

// Counter-based pseudo-random generator. Output i for seed s is
// mix64(s + (i+1) * 0x9E3779B97F4A7C15) where mix64 is the splitmix64
// finalizer. Pure integer arithmetic, so identical streams on every
// platform; any draw is addressable by (seed, counter).

#include <cmath>
#include <cstdint>

namespace eagle {

inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_str64(const char* s) {
    // FNV-1a
    uint64_t h = 0xcbf29ce484222325ULL;
    for (; *s; ++s) h = (h ^ static_cast<uint8_t>(*s)) * 0x100000001b3ULL;
    return h;
}

class rng {
  public:
    explicit rng(uint64_t seed) : seed_(seed) {}
    rng(uint64_t seed, uint64_t stream) : seed_(mix64(seed ^ mix64(stream))) {}

    uint64_t next_u64() { return mix64(seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // uniform in [0, 1) with 24 bits of mantissa
    float next_float() { return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f); }

    float next_uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    // Box-Muller; one value per call, pairs drawn deterministically
    float next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        float u1 = next_float(), u2 = next_float();
        if (u1 < 1e-12f) u1 = 1e-12f;
        const float r = std::sqrt(-2.0f * std::log(u1));
        const float a = 6.2831853071795864769f * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t next_range(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  private:
    uint64_t seed_ = 0;
    uint64_t counter_ = 0;
    float spare_ = 0.0f;
    bool have_spare_ = false;
};

}  // namespace eagle
