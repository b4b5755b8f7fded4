#pragma once

#include <cstdint>

#include "xdiff/matrix.hpp"

namespace xdiff {

/// Deterministic seeded random stream.
///
/// Core generator is splitmix64 (fixed 64-bit algorithm, no platform-dependent
/// state). Uniforms map the top 53 bits to [0,1); normals use Box-Muller with a
/// cached spare. The stream is a pure function of (seed, call sequence).
/// Reproducibility assumptions: IEEE-754 double, round-to-nearest, and a fixed
/// libm for sqrt/log/cos; identical binaries reproduce bit-for-bit.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : seed_(seed), state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in {0, ..., n-1}. Requires n > 0.
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    /// Standard normal draw (Box-Muller, spare cached in the stream state).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Independent child stream. Derived from the construction seed and the
    /// stream id only, so forks are stable no matter how much of the parent
    /// stream has been consumed.
    SeededRng fork(uint64_t stream) const {
        uint64_t z = seed_ ^ (0x632BE59BD9B4E019ULL + stream * 0xD1B54A32D192ED03ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return SeededRng(z ^ (z >> 31));
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// i.i.d. standard-normal matrix. Empty shapes leave the stream untouched.
inline Matrix normal_sample(SeededRng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.normal();
    return m;
}

inline Vec normal_sample(SeededRng& rng, int n) {
    Vec v(static_cast<size_t>(n));
    for (double& x : v) x = rng.normal();
    return v;
}

}  // namespace xdiff
