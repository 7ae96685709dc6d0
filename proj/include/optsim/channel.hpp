#pragma once

#include <cstdint>

#include "optsim/types.hpp"

namespace optsim::channel {

// Single-span fiber description. Raman gain is a simplified distributed
// profile over the last raman_length_km, shaped like a counter-propagating
// pump (exponential toward the receive end).
struct FiberSpec {
    double length_km = 300.0;
    double attenuation_db_km = 0.21;
    double dispersion_ps_nm_km = 16.5;
    double gamma_per_w_km = 1.3;
    double raman_gain_db = 0.0;
    double raman_length_km = 80.0;
    double steps_per_km = 1.0;
};

// Unitary polarization rotation U = Rz(phi) * Ry(alpha) * Rz(theta).
struct JonesAngles {
    double alpha = 0.0;
    double phi = 0.0;
    double theta = 0.0;
};

constexpr double kRefBandwidthHz = 12.5e9;  // 0.1 nm at 1550 nm

// Loads complex white Gaussian noise on both polarizations, scaled so the
// clean-signal power over the noise power referred to the 12.5 GHz reference
// bandwidth equals osnr_db. The drawn noise block is renormalized to its
// exact target power, so the calibration holds for any record length.
DualPolWaveform load_awgn_to_osnr(const DualPolWaveform& sig, double osnr_db,
                                  std::uint64_t seed);

// OSNR estimate given the clean reference: signal power from the reference,
// noise power from the difference, rescaled to the reference bandwidth.
// Returns +inf when the difference is identically zero.
double measure_osnr(const DualPolWaveform& sig_plus_noise, const DualPolWaveform& clean_ref);

// All-pass quadratic phase exp(i * pi * lambda^2 * D_tot / c * f^2) on both
// polarizations; dispersion_total in ps/nm.
DualPolWaveform apply_cd(const DualPolWaveform& sig, double dispersion_total_ps_nm);

DualPolWaveform apply_jones_rotation(const DualPolWaveform& sig, const JonesAngles& angles);

// Common (Tx+LO) Wiener phase walk, increment variance 2*pi*linewidth/fs.
DualPolWaveform apply_phase_noise(const DualPolWaveform& sig, double linewidth_total_hz,
                                  std::uint64_t seed);

DualPolWaveform apply_freq_offset(const DualPolWaveform& sig, double freq_offset_hz);

// Symmetrized split-step integration of the Manakov equation (polarization
// averaged nonlinearity 8/9 * gamma * (|ex|^2 + |ey|^2)) with loss and the
// distributed Raman gain profile. The step size adapts so the nonlinear
// phase per step stays below 0.05 rad.
DualPolWaveform ssfm_span(const DualPolWaveform& sig, const FiberSpec& fiber);

// Receive optical bandpass: 2nd-order super-Gaussian, 3-dB full width =
// bandwidth, zero phase.
DualPolWaveform optical_bpf(const DualPolWaveform& sig, double bandwidth_hz);

}  // namespace optsim::channel
