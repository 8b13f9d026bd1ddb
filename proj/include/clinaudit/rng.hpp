#pragma once

// Deterministic random primitives shared by every module.
//
// All randomized operations in the library are pure functions of
// (inputs, seed). The generator is fixed to std::mt19937_64 and every
// distribution transform is implemented here by hand, so identical seeds
// produce identical streams on any conforming platform (the standard
// <random> distributions are implementation-defined and would break that).

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace clinaudit {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound) via rejection.
    std::uint64_t uniform_index(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    // Standard normal via Box-Muller (one value per call, no caching, so
    // the stream layout is trivially reproducible).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Laplace(0, b) by inverse CDF.
    double laplace(double scale) {
        const double u = uniform() - 0.5;
        const double sign = u < 0.0 ? -1.0 : 1.0;
        return -scale * sign * std::log1p(-2.0 * std::fabs(u));
    }

    // Fisher-Yates, explicit so shuffles are identical across builds.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream, e.g. one per federated client.
    Rng fork(std::uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
    }

private:
    std::mt19937_64 engine_;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    return idx;
}

}  // namespace clinaudit
