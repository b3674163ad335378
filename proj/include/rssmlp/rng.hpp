#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "rssmlp/error.hpp"

namespace rssmlp {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (mix64(b + kGolden) + (a << 6) + (a >> 2)));
}

// Counter-based stream: output n is a pure function of (seed, stream_id, n),
// so identical construction gives byte-identical sequences regardless of
// thread count or call site. Substreams derive fresh independent ids, which
// lets each parallel task own its own stream without coordination.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id),
          key_(mix64(hash_combine(mix64(seed + kGolden), stream_id))) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    RngStream substream(std::uint64_t idx) const {
        return RngStream(seed_, hash_combine(stream_id_, idx));
    }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * kGolden);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); unbiased via rejection.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ContractViolation("next_below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Fisher-Yates; uniform over all permutations.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

    // Uniformly places a random k-subset (in random order) in v[0..k).
    template <typename T>
    void partial_shuffle(std::vector<T>& v, std::size_t k) {
        if (k > v.size()) throw ContractViolation("partial_shuffle: k exceeds size");
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(v[i], v[i + next_below(v.size() - i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rssmlp
