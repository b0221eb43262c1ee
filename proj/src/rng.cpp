#include "xattn/rng.hpp"

#include <cmath>

namespace xattn {

namespace {

// splitmix64 finalizer; full-period mixing of a 64-bit state.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

uint64_t CounterRng::word(uint64_t stream, uint64_t counter) const {
    // Three mixing rounds decorrelate (seed, stream, counter) lanes.
    uint64_t z = mix64(seed_ ^ 0x6a09e667f3bcc909ull);
    z = mix64(z ^ stream);
    return mix64(z ^ counter);
}

double CounterRng::uniform(uint64_t stream, uint64_t counter) const {
    // Top 53 bits -> (0,1); offset by half an ulp to exclude 0.
    uint64_t w = word(stream, counter);
    return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

float CounterRng::normal(uint64_t stream, uint64_t index) const {
    double u1 = uniform(stream, 2 * index);
    double u2 = uniform(stream, 2 * index + 1);
    double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(r * std::cos(6.283185307179586 * u2));
}

void CounterRng::fill_normal(std::vector<float>& out, uint64_t stream) const {
    fill_normal(out.data(), out.size(), stream);
}

void CounterRng::fill_normal(float* out, size_t n, uint64_t stream) const {
    for (size_t i = 0; i < n; ++i)
        out[i] = normal(stream, i);
}

uint64_t fnv1a64(const void* bytes, size_t n, uint64_t basis) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = basis;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace xattn
