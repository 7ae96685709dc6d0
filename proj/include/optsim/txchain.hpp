#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "optsim/types.hpp"

namespace optsim::txchain {

// Binary de Bruijn sequence B(2, order): length 2^order, every cyclic
// order-bit window occurs exactly once. Lexicographically least
// (necklace/Lyndon-word concatenation), so fully deterministic.
BitStream de_bruijn_sequence(int order);

// Maximal-length LFSR sequence, period 2^order - 1, standard characteristic
// polynomial per order (7, 9, 11, 15, 23). Seed selects the starting state.
BitStream prbs(int order, std::uint64_t seed);

// d_k = b_k XOR d_{k-1}, d_{-1} = 0. Applied per polarization lane by the
// caller when a format needs it.
BitStream differential_encode(const BitStream& bits);
BitStream differential_decode(const BitStream& bits);

// NRZ sample-and-hold upsampling of the four coordinate lanes followed by a
// 5th-order Bessel low-pass of the given 3-dB bandwidth (applied cyclically
// in the frequency domain). Pass +inf to bypass the filter.
DriveWaveform generate_drive(const std::vector<SymbolVec4>& symbols, int samples_per_symbol,
                             double dac_bandwidth_hz, double symbol_rate);

// Ideal linear field modulator: ex = ix + i*qx, ey = iy (the y-pol Q branch
// is biased to blocking and contributes nothing). Output scaled so the mean
// dual-pol power equals launch_power_dbm.
DualPolWaveform modulate(const DriveWaveform& drive, double launch_power_dbm);

// Analog magnitude/phase response of the 5th-order Bessel prototype at
// f relative to its 3-dB frequency; H(0) = 1.
cplx bessel5_response(double f, double f3db);

// Golden-fixture export: <path>.f64 holds interleaved little-endian doubles
// (ix, qx, iy, qy per sample), <path>.meta a key=value sidecar.
void write_waveform(const std::string& path_base, const DriveWaveform& drive);
void write_waveform(const std::string& path_base, const DualPolWaveform& wave,
                    double symbol_rate);
DriveWaveform read_drive_waveform(const std::string& path_base);

}  // namespace optsim::txchain
