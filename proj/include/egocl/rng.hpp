#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace egocl {

// All randomness in the toolkit flows through this header. The generators are
// self-contained (no std::uniform_* distributions) so that a fixed seed gives
// bit-identical streams on every platform and standard library.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a base seed plus tags. Used to
/// give each purpose (splits, walks, init, shuffle, replay, ...) its own
/// stream so strategies that skip one draw do not shift another.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t salt = 0) {
    uint64_t s = base ^ (0x9e3779b97f4a7c15ULL + hash_tag(tag));
    splitmix64(s);
    s ^= salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    splitmix64(s);
    return s;
}

/// xoshiro256** with splitmix-expanded seeding.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next() {
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

    /// Uniform integer in [0, bound) by rejection (unbiased). bound > 0.
    uint64_t below(uint64_t bound) {
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices uniformly drawn from [0, n) (partial Fisher-Yates).
    std::vector<int32_t> sample_without_replacement(int32_t n, int32_t k) {
        std::vector<int32_t> pool(static_cast<size_t>(n));
        for (int32_t i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
        if (k > n) k = n;
        for (int32_t i = 0; i < k; ++i) {
            int32_t j = i + static_cast<int32_t>(below(static_cast<uint64_t>(n - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        }
        pool.resize(static_cast<size_t>(k));
        return pool;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace egocl
