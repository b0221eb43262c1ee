#ifndef XATTN_RNG_HPP
#define XATTN_RNG_HPP

#include <cstdint>
#include <vector>

namespace xattn {

/// Counter-based deterministic generator. Every draw is a pure function of
/// (seed, stream, counter), so independent consumers can share one seed
/// without coordinating state and any value can be regenerated on demand.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t seed() const { return seed_; }

    /// Raw 64-bit word for (stream, counter).
    uint64_t word(uint64_t stream, uint64_t counter) const;

    /// Uniform in (0, 1), never exactly 0 or 1.
    double uniform(uint64_t stream, uint64_t counter) const;

    /// Standard normal via Box-Muller; consumes counters 2i and 2i+1.
    float normal(uint64_t stream, uint64_t index) const;

    /// Fills a buffer with standard normals from one stream.
    void fill_normal(std::vector<float>& out, uint64_t stream) const;
    void fill_normal(float* out, size_t n, uint64_t stream) const;

private:
    uint64_t seed_;
};

/// FNV-1a over a byte range; used for content hashes and prompt conditioning.
uint64_t fnv1a64(const void* bytes, size_t n, uint64_t basis = 0xcbf29ce484222325ull);

} // namespace xattn

#endif // XATTN_RNG_HPP
