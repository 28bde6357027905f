#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace survey {

// SplitMix64 finalizer; used both for seeding Rng state and for deriving
// independent stream seeds from a root seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed + 0x9e3779b97f4a7c15ULL * (stream + 0x632be59bd9b4e019ULL));
}

// xoshiro256++ with SplitMix64 seeding. Small state so per-trial streams are
// cheap; all floating-point conversions are done from the raw 64-bit output
// so sequences are reproducible for a given seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto &word : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            word = mix64(s);
        }
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in the open interval (0, 1); never returns an exact endpoint.
    double uniform_open() noexcept {
        return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52;
    }

    // Unbiased uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }

    // Standard normal via Box-Muller (one value per call).
    double normal() noexcept {
        const double u1 = uniform_open();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        return radius * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

// Root of a family of deterministically derived rng streams. Parallel kernels
// give each trial (or trial block) its own stream so results do not depend on
// scheduling or thread count.
struct SeedStream {
    std::uint64_t root = 0;

    [[nodiscard]] Rng stream(std::uint64_t index) const noexcept {
        return Rng(derive_seed(root, index));
    }
    [[nodiscard]] SeedStream substream(std::uint64_t tag) const noexcept {
        return SeedStream{derive_seed(root, tag)};
    }
};

// k distinct indices drawn uniformly from [0, n), returned sorted ascending.
// Floyd's algorithm: O(k) draws independent of n.
inline std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k,
                                                             Rng &rng) {
    if (k > n) {
        throw std::invalid_argument("sample_without_replacement: k exceeds population size");
    }
    std::vector<std::uint32_t> picked;
    picked.reserve(k);
    std::unordered_set<std::uint32_t> seen;
    seen.reserve(k * 2);
    for (std::uint32_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::uint32_t>(rng.below(j + 1));
        if (seen.insert(t).second) {
            picked.push_back(t);
        } else {
            seen.insert(j);
            picked.push_back(j);
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace survey
