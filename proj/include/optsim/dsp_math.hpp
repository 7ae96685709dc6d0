#pragma once

#include <cstddef>
#include <vector>

#include "optsim/types.hpp"

namespace optsim {

// In-place FFT: radix-2 for power-of-two lengths, Bluestein otherwise.
// Hand-rolled so results are bit-reproducible across threads and runs.
void fft_inplace(std::vector<cplx>& data, bool inverse);
std::vector<cplx> fft(std::vector<cplx> data);
std::vector<cplx> ifft(std::vector<cplx> data);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// FFT bin center frequency in Hz for bin k of an n-point transform at fs,
// in the usual wrap-around layout (negative frequencies in the upper half).
double fft_bin_freq(std::size_t k, std::size_t n, double fs);

// Gaussian tail probability Q(x) = P(N(0,1) > x).
double q_func(double x);

// Inverse of Q on (0, 1): x such that Q(x) = p. Acklam seed plus Halley
// refinement against erfc, accurate to ~1e-15 relative.
double q_func_inv(double p);

double db_to_linear(double db);
double linear_to_db(double lin);
double dbm_to_watts(double dbm);

double mean_power(const std::vector<cplx>& v);
// Total mean power per sample across both polarizations.
double mean_power(const DualPolWaveform& w);

// sqrt(mean |a-b|^2) / sqrt(mean |b|^2); shape mismatch throws ShapeError.
double relative_rms_error(const std::vector<cplx>& a, const std::vector<cplx>& b);
double relative_rms_error(const DualPolWaveform& a, const DualPolWaveform& b);

constexpr double kSpeedOfLight = 299792458.0;  // m/s

}  // namespace optsim
