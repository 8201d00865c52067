// Counter-based random numbers. Each path owns an independent stream keyed by
// (seed, path index); draws are pure functions of (key, counter), so batches
// are reproducible bit-for-bit under any parallel decomposition.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qrbsde {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Philox 4x32, 10 rounds. Key is 64 bits, counter 128 bits (we use 64).
struct Philox4x32 {
    static inline void mulhilo(std::uint32_t a, std::uint32_t b,
                               std::uint32_t& hi, std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }
    static std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t counter) {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
        std::uint32_t c2 = 0x2E21AD46u, c3 = 0x8F51AE32u;  // fixed high lanes
        std::uint32_t k0 = static_cast<std::uint32_t>(key);
        std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
        for (int r = 0; r < 10; ++r) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, c0, hi0, lo0);
            mulhilo(0xCD9E8D57u, c2, hi1, lo1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return {c0, c1, c2, c3};
    }
};

// Standard normal stream for one path: Box-Muller over Philox uniforms.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path)
        : key_(splitmix64(splitmix64(seed) ^ (path * 0xA24BAED4963EE407ULL + 1))) {}

    double next() {
        if (have_) {
            have_ = false;
            return cached_;
        }
        auto b = Philox4x32::block(key_, ctr_++);
        double u1 = to_unit(b[0], b[1]);
        double u2 = to_unit(b[2], b[3]);
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_ = true;
        return r * std::cos(a);
    }

private:
    // 53-bit mantissa from two 32-bit lanes, strictly inside (0,1).
    static double to_unit(std::uint32_t a, std::uint32_t b) {
        std::uint64_t x = (static_cast<std::uint64_t>(a) << 32) | b;
        return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
    }
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    bool have_ = false;
    double cached_ = 0.0;
};

}  // namespace qrbsde
