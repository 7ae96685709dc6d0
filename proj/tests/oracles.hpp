#pragma once

// Test-only oracles. These stay independent of the library code paths they
// check: brute-force enumeration, closed forms, and statistics helpers only.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "optsim/types.hpp"

namespace oracles {

inline double gauss_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double binom_std(double p, double n_trials) {
    return std::sqrt(p * (1.0 - p) / n_trials);
}

// Brute-force nearest point in the 4D metric, lowest index on ties.
inline std::size_t nearest_index(const std::vector<optsim::SymbolVec4>& pts,
                                 const optsim::SymbolVec4& r) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = (r.ix - pts[i].ix) * (r.ix - pts[i].ix) +
                         (r.qx - pts[i].qx) * (r.qx - pts[i].qx) +
                         (r.iy - pts[i].iy) * (r.iy - pts[i].iy) +
                         (r.qy - pts[i].qy) * (r.qy - pts[i].qy);
        if (d < best_d - 1e-300 || (d < best_d)) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// All cyclic n-bit windows of a sequence are distinct.
inline bool debruijn_window_property(const std::vector<std::uint8_t>& bits, int order) {
    const std::size_t n = bits.size();
    std::vector<bool> seen(std::size_t{1} << order, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (int b = 0; b < order; ++b) w = (w << 1) | bits[(i + b) % n];
        if (seen[w]) return false;
        seen[w] = true;
    }
    return true;
}

// Smallest cyclic period of a bit sequence by direct shift comparison.
inline std::size_t smallest_period(const std::vector<std::uint8_t>& bits) {
    const std::size_t n = bits.size();
    for (std::size_t p = 1; p < n; ++p) {
        bool ok = true;
        for (std::size_t i = 0; i + p < n && ok; ++i) ok = bits[i] == bits[i + p];
        if (ok) return p;
    }
    return n;
}

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng() & 1u);
    return out;
}

}  // namespace oracles
