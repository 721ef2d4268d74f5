#pragma once

#include <cstdint>
#include <random>

namespace lbt {

// Seeded random stream. Every stochastic component takes one of these
// explicitly; independent streams are derived with mix() so that episode
// generation stays reproducible regardless of evaluation order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    // Standard normal.
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

    // Integer in [lo, hi).
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi - 1)(gen_);
    }

    std::uint64_t next_u64() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

    // splitmix64 stream derivation: mix(master, stream_id) gives a seed that is
    // decorrelated from both inputs.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace lbt
