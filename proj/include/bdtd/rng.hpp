#pragma once

#include <cstdint>
#include <random>

namespace bdtd {

// splitmix64 step; used both as a generator and as a seed mixer.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a child seed from a master seed and up to three stream labels.
// Used to give every (round, agent, neighbor) its own reproducible
// substream so parallel and serial execution sample identical values.
inline std::uint64_t substream(std::uint64_t master, std::uint64_t a,
                               std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s ^= a * 0xff51afd7ed558ccdULL;
    h ^= splitmix64(s);
    s ^= b * 0xc4ceb9fe1a85ec53ULL;
    h ^= splitmix64(s);
    s ^= c * 0x2545f4914f6cdd1dULL;
    h ^= splitmix64(s);
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

    // Sample an index from an unnormalized nonnegative weight vector.
    template <typename Container>
    int categorical(const Container& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        double acc = 0.0;
        int last = 0;
        int i = 0;
        for (double w : weights) {
            acc += w;
            if (u < acc) return i;
            if (w > 0.0) last = i;
            ++i;
        }
        return last;  // u landed on the accumulated rounding tail
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace bdtd
