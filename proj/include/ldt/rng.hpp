#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ldt/error.hpp"

namespace ldt {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is pinned by the standard, and every distribution here is
// hand-rolled from raw engine words, so a given seed yields the same values
// on every platform. (The library-provided <random> distributions are
// implementation-defined and would break golden files.)
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0,1): 53-bit mantissa offset by half an ulp.
    double uniform_open01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform on [0,1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on the open interval (lo, hi).
    double uniform_open(double lo, double hi) {
        return lo + uniform_open01() * (hi - lo);
    }

    // Unbiased integer in [0, n) via rejection on a power-of-two mask.
    uint64_t below(uint64_t n) {
        require(n > 0, ErrorKind::Domain, "Rng::below: n must be positive");
        uint64_t mask = n - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const uint64_t v = engine_() & mask;
            if (v < n) return v;
        }
    }

    // Zero-mean unit-variance sample as a sum of 12 uniforms minus 6
    // (Irwin-Hall). Variance is exactly 1 and no libm call is involved,
    // which keeps parameter initialization bit-reproducible everywhere.
    // Support is [-6, 6]; ample for initialization and additive noise.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform01();
        return s - 6.0;
    }

    // Poisson sample via the exponential race: the count of exponential
    // arrivals fitting into [0, lambda). O(lambda) time, no underflow for
    // any lambda, unlike the classic product-of-uniforms form.
    int64_t poisson(double lambda) {
        require(lambda >= 0.0, ErrorKind::Domain, "poisson: lambda must be >= 0");
        int64_t count = -1;
        double acc = 0.0;
        while (acc < lambda) {
            acc += -std::log(uniform_open01());
            ++count;
        }
        return count < 0 ? 0 : count;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives an independent stream seed from (seed, index) so per-item work is
// order-independent. SplitMix64 finalizer.
inline uint64_t derive_stream(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace ldt
