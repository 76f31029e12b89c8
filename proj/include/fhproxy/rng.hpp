#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace fhproxy {

// Deterministic 64-bit generator with a fixed, documented algorithm so that
// identical seeds produce identical streams on every platform.
//
// State setup: the four 64-bit words are filled by iterating splitmix64 on
// the seed (state += 0x9E3779B97F4A7C15; z = state; z = (z ^ z>>30) *
// 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB; z ^= z>>31).
//
// Stream: xoshiro256** — result = rotl(s1 * 5, 7) * 9, then
//   t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
//   s3 = rotl(s3, 45).
//
// Derived draws (uniform, uniform_int, normal, shuffle) are built only from
// next_u64() in the orders given below, so whole-object reproducibility
// follows from the raw stream.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // [0, 1): top 53 bits of one draw scaled by 2^-53.
    double uniform();
    double uniform(double lo, double hi);

    // Inclusive, unbiased via rejection on the top of the 64-bit range.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Standard normal, Marsaglia polar method; the paired value is discarded
    // so every call starts from a clean state.
    double normal();

    // Fisher-Yates, descending index, j = uniform_int(0, i).
    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (size_t i = items.size() - 1; i > 0; --i) {
            const auto j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i)));
            if (j != i) std::swap(items[i], items[j]);
        }
    }

    // Child generator seeded from one parent draw.
    Rng fork();

    // Stable stream derivation: one splitmix64 finalize over a mixed key.
    // Used to give per-epoch / per-member children that do not depend on
    // evaluation order.
    static uint64_t mix(uint64_t a, uint64_t b);

    std::array<uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

private:
    std::array<uint64_t, 4> s_{};
};

} // namespace fhproxy
