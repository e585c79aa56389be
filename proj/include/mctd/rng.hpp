#pragma once

#include <cmath>
#include <cstdint>

// Deterministic RNG used everywhere randomness enters. splitmix64 core with a
// hand-rolled Box-Muller gaussian, so streams are reproducible across
// platforms and standard-library versions.

namespace mctd {

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30u)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27u)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31u);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53;
    }

    // Uniform integer in [0, n); n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        return next_u64() % n;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Child stream decorrelated from this one; does not advance this stream.
    Rng split(std::uint64_t stream) const {
        Rng mix(state_ ^ 0xd1b54a32d192ed03ull);
        std::uint64_t a = mix.next_u64();
        Rng mix2(stream + 0x2545f4914f6cdd1dull);
        return Rng(a ^ mix2.next_u64());
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable seed derivation for parallel episodes: hash(seed, a, b, c).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    Rng r(seed);
    std::uint64_t h = r.next_u64();
    h ^= Rng(a + 0x9e3779b97f4a7c15ull).next_u64();
    h ^= Rng(b + 0xbf58476d1ce4e5b9ull).next_u64();
    h ^= Rng(c + 0x94d049bb133111ebull).next_u64();
    return h;
}

}  // namespace mctd
