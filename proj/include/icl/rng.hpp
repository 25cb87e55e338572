#pragma once

#include <cstdint>
#include <random>

namespace icl {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Sub-stream key from (master seed, a, b); a and b are usually (k, trial).
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

// Seeded 64-bit Mersenne twister addressed by (seed, a, b).
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0)
    {
        const std::uint64_t key = derive_key(seed, a, b);
        const std::uint64_t key2 = splitmix64(key);
        std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                          static_cast<std::uint32_t>(key2), static_cast<std::uint32_t>(key2 >> 32)};
        engine_.seed(seq);
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace icl
