#pragma once

#include <cstdint>
#include <vector>

#include "optsim/types.hpp"

namespace optsim::constellation {

// The 3D-Simplex format: QPSK on the x-polarization, the y-polarization
// I-branch carries the XOR of the two QPSK bits, Qy unused. The four points
// are alternate corners of a cube, i.e. a regular tetrahedron with
// D_min = sqrt(8) and P_avg = 3.
Codebook simplex_codebook();

// Dual-polarization BPSK: one antipodal bit per polarization I-branch.
// D_min = 2, P_avg = 2.
Codebook dpbpsk_codebook();

// Consecutive groups of bits_per_symbol bits (stream order, first bit is the
// label MSB) are looked up by label. Length must divide evenly.
std::vector<SymbolVec4> map_bits(const Codebook& cb, const std::vector<std::uint8_t>& bits);
std::vector<SymbolVec4> map_bits(const Codebook& cb, const BitStream& bits);

struct Demapped {
    std::uint32_t label = 0;
    double distance = 0.0;
};

// Nearest codebook point in the 4D Euclidean metric; ties go to the lowest
// codebook index.
Demapped demap_ml(const Codebook& cb, const SymbolVec4& received);

// Appends the label bits of `label` (MSB first) to `out`.
void append_label_bits(const Codebook& cb, std::uint32_t label, std::vector<std::uint8_t>& out);

double min_distance(const Codebook& cb);
double avg_power(const Codebook& cb);

// 10*log10( (Dmin_a^2/Pavg_a) / (Dmin_b^2/Pavg_b) ): the asymptotic OSNR
// advantage of format a over format b at equal symbol rate.
double asymptotic_gain_db(const Codebook& a, const Codebook& b);

// Pairwise union bound with Hamming weighting:
//   BER ~ 1/(N*bps) * sum_{i != j} hamming(label_i, label_j) * Q(d_ij / (2 sigma))
double union_bound_ber(const Codebook& cb, NoiseSigma sigma);

struct McBerResult {
    double ber = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t bits = 0;
};

// Monte-Carlo BER over the memoryless AWGN channel: uniform labels, white
// Gaussian noise of std `sigma` on each of the four real dimensions, ML
// demapping. Deterministic given seed.
McBerResult mc_ber_awgn(const Codebook& cb, NoiseSigma sigma, std::uint64_t n_symbols,
                        std::uint64_t seed);

// Per-dimension noise std at a target OSNR (12.5 GHz reference bandwidth,
// noise in both polarizations and quadratures) for a one-sample-per-symbol
// model: sigma^2 = P_avg * Rs / (4 * OSNR_lin * B_ref).
NoiseSigma osnr_to_sigma(double osnr_db, double symbol_rate, const Codebook& cb);

constexpr double kRefBandwidthHz = 12.5e9;  // 0.1 nm at 1550 nm

}  // namespace optsim::constellation
