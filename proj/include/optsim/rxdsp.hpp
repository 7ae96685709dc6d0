#pragma once

#include <cstdint>
#include <vector>

#include "optsim/types.hpp"

namespace optsim {

enum class Format { Simplex3D, DpBpsk };

}  // namespace optsim

namespace optsim::rxdsp {

enum class EqMode { CmaQpsk, BpskDD, SimplexCombined };

struct EqualizerConfig {
    int num_taps = 13;  // odd
    double step_size = 1e-3;
    EqMode mode = EqMode::SimplexCombined;
    double cma_radius_sq = 2.0;
    std::size_t convergence_symbols = 16384;
    // Weight of the two-symbol collinearity term in the BPSK criterion.
    double bpsk_collinearity_weight = 0.5;
};

struct EqualizerState {
    std::vector<cplx> hxx, hxy, hyx, hyy;
    std::size_t symbols_processed = 0;
};

struct EqualizerOutput {
    std::vector<cplx> x, y;  // one per symbol
    EqualizerState state;
    int singularity_resets = 0;
    int row_swaps = 0;
};

struct PhaseEstimate {
    std::vector<cplx> x, y;
    std::vector<double> phase_traj;  // unwrapped x-tributary phase, rad
};

struct AlignResult {
    std::vector<cplx> x, y;  // equal length, trimmed to the lag overlap
    int quadrant = 0;        // applied x rotation exp(-i pi/2 * quadrant)
    int bpsk_sign = 1;       // applied y sign
    int lag = 0;             // y leads x by this many symbols
    bool resolved_by_reference = false;
    double parity_score = 0.0;
};

// Receiver-side diagnostics for one processed frame.
struct DspReport {
    double est_freq_offset_hz = 0.0;
    std::vector<double> mean_phase_trajectory;
    int tributary_quadrant = 0;
    int tributary_sign = 1;
    double parity_score = 0.0;
    bool converged = false;
    int singularity_resets = 0;
    int row_swaps = 0;
};

// Exact inverse of channel::apply_cd.
DualPolWaveform cd_compensate(const DualPolWaveform& sig, double dispersion_total_ps_nm);

// Gardner timing recovery with cubic Lagrange resampling; x-polarization
// drives the detector, both polarizations are resampled. Output is exactly
// 2 samples per symbol with strobes on even indices.
DualPolWaveform clock_recover(const DualPolWaveform& sig, double symbol_rate);

// T/2-spaced 2x2 butterfly FIR with stochastic-gradient adaptation.
// Error signal per mode:
//   CmaQpsk:         e = (R^2 - |z|^2) z on both outputs
//   BpskDD:          modulus-1 CMA plus a two-symbol collinearity term that
//                    makes any antipodal line a fixed point, both outputs
//   SimplexCombined: CMA (R^2 = cma_radius_sq) on x, BPSK criterion on y
// Inputs are expected near codebook scale (unit coordinates).
EqualizerOutput butterfly_equalize(const DualPolWaveform& two_sps, const EqualizerConfig& cfg);

// 4th-power periodogram frequency estimate with parabolic interpolation,
// range +-symbol_rate/8. Throws EstimationError when no dominant line.
double estimate_freq_offset(const std::vector<cplx>& x_symbols, double symbol_rate);

std::vector<cplx> derotate_freq(const std::vector<cplx>& symbols, double freq_hz,
                                double symbol_rate);

// Viterbi-Viterbi per tributary: 4th power on x when it carries QPSK
// (2nd power otherwise), 2nd power on y; block phases unwrapped before
// division. Residual ambiguities: pi/2 on the QPSK tributary, pi on BPSK.
PhaseEstimate carrier_phase_estimate(const std::vector<cplx>& x_symbols,
                                     const std::vector<cplx>& y_symbols, int window,
                                     bool x_is_qpsk = true);

// |mean(z^2)| / mean(|z|^2): ~1 for an antipodal line, ~0 for QPSK.
double collinearity_stat(const std::vector<cplx>& z);
double collinearity_stat(const cplx* z, std::size_t n);

// Resolves the residual {4 QPSK quadrants} x {2 BPSK signs} hypotheses plus
// a small relative tributary delay (the butterfly rows are free to converge
// a few symbols apart) by the simplex parity
// sign(Re y) = -sign(Re x) sign(Im x). The labeled codebook has a 4-element
// automorphism group (identity, x*exp(-+i pi/2) combined with a y sign
// flip, and the x-only pi rotation), so parity ties across four hypotheses;
// reference bits pick among them when provided.
AlignResult tributary_align(const std::vector<cplx>& x_symbols,
                            const std::vector<cplx>& y_symbols,
                            const BitStream* reference_bits);

// Hard decisions. Simplex: ML against the tetrahedron on (Re x, Im x, Re y, 0).
// DP-BPSK: per-polarization sign decisions followed by differential decoding,
// bit order (x, y) per symbol.
BitStream decide_and_decode(const std::vector<cplx>& x_symbols,
                            const std::vector<cplx>& y_symbols, Format format);

}  // namespace optsim::rxdsp
