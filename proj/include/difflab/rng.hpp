#pragma once

#include <cstdint>
#include <random>

namespace difflab {

// splitmix64; used to derive independent per-trial seeds from a master seed.
inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for stream `stream`, element `index`. Streams keep e.g. trial seeds
// and advice-search seeds from colliding.
inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index) {
    uint64_t s = master;
    splitmix64_next(s);
    s ^= 0x632be59bd9b4e019ULL * (stream + 1);
    splitmix64_next(s);
    s ^= 0x9e6c63d0876a9a47ULL * (index + 1);
    return splitmix64_next(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double normal() { return gauss_(eng_); }
    double uniform() { return unif_(eng_); }            // [0, 1)
    uint64_t next_u64() { return eng_(); }
    // integer in [0, n)
    uint64_t below(uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(eng_); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

} // namespace difflab
