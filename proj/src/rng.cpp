#include "ded/rng.hpp"

namespace ded {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
}

Rng Rng::stream(std::uint64_t master, std::uint64_t index) noexcept {
    // Two rounds of mixing so that neighbouring (master, index) pairs land
    // on unrelated seeds.
    std::uint64_t sm = master;
    std::uint64_t key = splitmix64(sm);
    std::uint64_t mix = key ^ (index * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull);
    return Rng(splitmix64(mix));
}

}  // namespace ded
