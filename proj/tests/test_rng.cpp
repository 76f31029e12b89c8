#include "fhproxy/rng.hpp"

#include "fhproxy/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

using namespace fhproxy;

namespace {

// Straight transcription of the published splitmix64 + xoshiro256**
// algorithms, kept independent of the library implementation.
struct ReferenceRng {
    uint64_t s[4];

    explicit ReferenceRng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s) {
            x += 0x9E3779B97F4A7C15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            word = z ^ (z >> 31);
        }
    }

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t next() {
        const uint64_t result = rotl(s[1] * 5, 7) * 9;
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
};

} // namespace

TEST_SUITE("rng") {

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 10000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("matches the reference algorithm") {
    for (uint64_t seed : {0ull, 1ull, 42ull, 0xDEADBEEFull}) {
        Rng impl(seed);
        ReferenceRng ref(seed);
        for (int i = 0; i < 1000; ++i) CHECK(impl.next_u64() == ref.next());
    }
}

TEST_CASE("uniform_int stays in bounds and covers the range") {
    Rng rng(7);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 2000; ++i) {
        const int64_t v = rng.uniform_int(-2, 2);
        REQUIRE(v >= -2);
        REQUIRE(v <= 2);
        ++seen[static_cast<size_t>(v + 2)];
    }
    for (int count : seen) CHECK(count > 0);
    CHECK_THROWS_AS(rng.uniform_int(3, 2), InvalidInputError);
}

TEST_CASE("uniform in [0,1)") {
    Rng rng(9);
    for (int i = 0; i < 5000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    Rng rng(13);
    const int n = 40000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("fork and mix are deterministic") {
    Rng a(100), b(100);
    Rng ca = a.fork(), cb = b.fork();
    for (int i = 0; i < 100; ++i) CHECK(ca.next_u64() == cb.next_u64());
    CHECK(Rng::mix(1, 2) == Rng::mix(1, 2));
    CHECK(Rng::mix(1, 2) != Rng::mix(2, 1));
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(50), w(50);
    std::iota(v.begin(), v.end(), 0);
    std::iota(w.begin(), w.end(), 0);
    Rng a(21), b(21);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}

TEST_CASE("state round trip") {
    Rng a(77);
    a.next_u64();
    const auto st = a.state();
    Rng b(0);
    b.set_state(st);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

} // TEST_SUITE
