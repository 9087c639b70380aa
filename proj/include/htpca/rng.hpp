#pragma once

#include <cstdint>
#include <random>

namespace htpca {

// Seed plus substream id. Identical (seed, stream) pairs reproduce identical
// draws no matter how work is scheduled across threads: every independent unit
// of work (a sample column, a replicate, a grid point) derives its own engine
// from the pair and a fixed index chain.
struct RngSeed {
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    std::uint64_t stream = 0;

    RngSeed with_stream(std::uint64_t s) const { return {seed, s}; }
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive mix of up to three words into one well-scrambled word.
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x632be59bd9b4e019ULL + (s << 6);
    h ^= splitmix64(s);
    s ^= c + 0x9e3779b97f4a7c15ULL + (h >> 3);
    h ^= splitmix64(s);
    return h;
}

inline std::mt19937_64 make_engine(const RngSeed& rs, std::uint64_t substream = 0) {
    return std::mt19937_64(mix64(rs.seed, rs.stream, substream));
}

} // namespace htpca
