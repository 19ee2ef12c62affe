#pragma once

#include "gcslab/types.hpp"

#include <cmath>
#include <cstdint>

namespace gcslab {

/// Deterministic splitmix64 generator. Hand-rolled so that streams are
/// bit-reproducible across platforms and standard-library versions; run
/// replay (run.lock) depends on this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        std::uint64_t span = std::uint64_t(hi - lo) + 1;
        return lo + int(next_u64() % span);
    }

    /// Standard normal via Box-Muller (no cached state).
    double normal() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Vec normal_vec(int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

private:
    std::uint64_t state_;
};

/// Stable 64-bit FNV-1a hash of a vector's bytes. Used to pin the
/// per-view noise eps* across epochs.
inline std::uint64_t hash_vec(const Vec& v) {
    std::uint64_t h = 1469598103934665603ull;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(v.data());
    for (long i = 0; i < long(v.size()) * long(sizeof(double)); ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace gcslab
