#include "optsim/constellation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "optsim/dsp_math.hpp"

namespace optsim {

Codebook::Codebook(std::string name, int bits_per_symbol, std::vector<SymbolVec4> points,
                   std::vector<std::uint32_t> labels)
    : name_(std::move(name)),
      bits_per_symbol_(bits_per_symbol),
      points_(std::move(points)),
      labels_(std::move(labels)) {
    const std::size_t n = points_.size();
    if (bits_per_symbol_ < 1 || bits_per_symbol_ > 20)
        throw ParameterError("codebook: bits per symbol out of range");
    if (n != (std::size_t{1} << bits_per_symbol_))
        throw ParameterError("codebook: point count must equal 2^bits_per_symbol");
    if (labels_.size() != n) throw ParameterError("codebook: one label per point required");

    label_to_index_.assign(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = points_[i];
        if (!std::isfinite(p.ix) || !std::isfinite(p.qx) || !std::isfinite(p.iy) ||
            !std::isfinite(p.qy))
            throw ParameterError("codebook: non-finite point coordinate");
        if (labels_[i] >= n) throw ParameterError("codebook: label exceeds bit width");
        if (label_to_index_[labels_[i]] != n) throw ParameterError("codebook: duplicate label");
        label_to_index_[labels_[i]] = i;
        for (std::size_t j = 0; j < i; ++j) {
            const auto& q = points_[j];
            if (p.ix == q.ix && p.qx == q.qx && p.iy == q.iy && p.qy == q.qy)
                throw ParameterError("codebook: duplicate point");
        }
    }
}

namespace constellation {

namespace {

double sqdist(const SymbolVec4& a, const SymbolVec4& b) {
    const double d0 = a.ix - b.ix;
    const double d1 = a.qx - b.qx;
    const double d2 = a.iy - b.iy;
    const double d3 = a.qy - b.qy;
    return d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
}

}  // namespace

Codebook simplex_codebook() {
    // Label bits (b1 b0): b1 -> Ix, b0 -> Qx, Iy = XOR with opposite sign,
    // Qy blocked. 0 maps to -1, 1 to +1.
    std::vector<SymbolVec4> pts = {
        {-1.0, -1.0, -1.0, 0.0},  // 00
        {-1.0, +1.0, +1.0, 0.0},  // 01
        {+1.0, -1.0, +1.0, 0.0},  // 10
        {+1.0, +1.0, -1.0, 0.0},  // 11
    };
    return Codebook("simplex3d", 2, std::move(pts), {0, 1, 2, 3});
}

Codebook dpbpsk_codebook() {
    // First bit of the pair drives Ix, second drives Iy; quadratures unused.
    std::vector<SymbolVec4> pts = {
        {-1.0, 0.0, -1.0, 0.0},  // 00
        {-1.0, 0.0, +1.0, 0.0},  // 01
        {+1.0, 0.0, -1.0, 0.0},  // 10
        {+1.0, 0.0, +1.0, 0.0},  // 11
    };
    return Codebook("dpbpsk", 2, std::move(pts), {0, 1, 2, 3});
}

std::vector<SymbolVec4> map_bits(const Codebook& cb, const std::vector<std::uint8_t>& bits) {
    const int bps = cb.bits_per_symbol();
    if (bits.size() % static_cast<std::size_t>(bps) != 0)
        throw ShapeError("map_bits: bit count " + std::to_string(bits.size()) +
                         " not divisible by " + std::to_string(bps));
    std::vector<SymbolVec4> out;
    out.reserve(bits.size() / bps);
    for (std::size_t i = 0; i < bits.size(); i += bps) {
        std::uint32_t label = 0;
        for (int b = 0; b < bps; ++b) label = (label << 1) | (bits[i + b] & 1u);
        out.push_back(cb.point(cb.index_of_label(label)));
    }
    return out;
}

std::vector<SymbolVec4> map_bits(const Codebook& cb, const BitStream& bits) {
    return map_bits(cb, bits.bits);
}

Demapped demap_ml(const Codebook& cb, const SymbolVec4& received) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < cb.size(); ++i) {
        const double d = sqdist(received, cb.point(i));
        if (d < best) {
            best = d;
            best_idx = i;
        }
    }
    return {cb.label(best_idx), std::sqrt(best)};
}

void append_label_bits(const Codebook& cb, std::uint32_t label, std::vector<std::uint8_t>& out) {
    for (int b = cb.bits_per_symbol() - 1; b >= 0; --b)
        out.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
}

double min_distance(const Codebook& cb) {
    if (cb.size() < 2) throw ParameterError("min_distance: need at least 2 points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cb.size(); ++i)
        for (std::size_t j = i + 1; j < cb.size(); ++j)
            best = std::min(best, sqdist(cb.point(i), cb.point(j)));
    return std::sqrt(best);
}

double avg_power(const Codebook& cb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cb.size(); ++i) {
        const auto& p = cb.point(i);
        acc += p.ix * p.ix + p.qx * p.qx + p.iy * p.iy + p.qy * p.qy;
    }
    return acc / static_cast<double>(cb.size());
}

double asymptotic_gain_db(const Codebook& a, const Codebook& b) {
    const double da = min_distance(a), db = min_distance(b);
    const double pa = avg_power(a), pb = avg_power(b);
    if (da <= 0.0 || db <= 0.0 || pa <= 0.0 || pb <= 0.0)
        throw DomainError("asymptotic_gain_db: degenerate codebook");
    return linear_to_db((da * da / pa) / (db * db / pb));
}

double union_bound_ber(const Codebook& cb, NoiseSigma sigma) {
    if (!(sigma.sigma > 0.0)) throw DomainError("union_bound_ber: sigma must be positive");
    const std::size_t n = cb.size();
    const int bps = cb.bits_per_symbol();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const int ham = std::popcount(cb.label(i) ^ cb.label(j));
            const double d = std::sqrt(sqdist(cb.point(i), cb.point(j)));
            acc += ham * q_func(d / (2.0 * sigma.sigma));
        }
    }
    return acc / (static_cast<double>(n) * bps);
}

McBerResult mc_ber_awgn(const Codebook& cb, NoiseSigma sigma, std::uint64_t n_symbols,
                        std::uint64_t seed) {
    if (n_symbols < 1) throw ParameterError("mc_ber_awgn: need at least one symbol");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(cb.size() - 1));
    std::normal_distribution<double> gauss(0.0, sigma.sigma);

    std::uint64_t bit_errors = 0;
    for (std::uint64_t k = 0; k < n_symbols; ++k) {
        const std::size_t idx = pick(rng);
        SymbolVec4 r = cb.point(idx);
        r.ix += gauss(rng);
        r.qx += gauss(rng);
        r.iy += gauss(rng);
        r.qy += gauss(rng);
        const Demapped d = demap_ml(cb, r);
        bit_errors += static_cast<std::uint64_t>(std::popcount(d.label ^ cb.label(idx)));
    }
    const std::uint64_t bits = n_symbols * static_cast<std::uint64_t>(cb.bits_per_symbol());
    return {static_cast<double>(bit_errors) / static_cast<double>(bits), bit_errors, bits};
}

NoiseSigma osnr_to_sigma(double osnr_db, double symbol_rate, const Codebook& cb) {
    if (!(symbol_rate > 0.0)) throw ParameterError("osnr_to_sigma: symbol rate must be positive");
    const double osnr = db_to_linear(osnr_db);
    const double var = avg_power(cb) * symbol_rate / (4.0 * osnr * kRefBandwidthHz);
    return {std::sqrt(var)};
}

}  // namespace constellation
}  // namespace optsim
