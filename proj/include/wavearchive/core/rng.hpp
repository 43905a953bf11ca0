/**
 * @file rng.hpp
 * @brief Platform-stable pseudo-random helpers
 *
 * std::mt19937_64 output is fully specified by the standard, but the
 * std::*_distribution adaptors are not; these helpers map raw engine output
 * to ranges with fixed arithmetic so generated corpora are byte-identical
 * across standard libraries.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace wavearchive {

class stable_rng {
public:
    explicit stable_rng(std::uint64_t seed) : engine_(seed) {}

    /// Derives an independent stream from a parent seed and a label.
    static stable_rng derive(std::uint64_t seed, std::string_view label) {
        std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return stable_rng(splitmix(h));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) {
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }

    bool chance(double p) { return uniform() < p; }

    /// Sum-of-uniforms approximation to N(0, 1); deterministic and cheap.
    double gaussian() {
        double s = 0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(next() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace wavearchive
