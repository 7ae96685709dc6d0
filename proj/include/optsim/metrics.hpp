#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "optsim/types.hpp"

namespace optsim::metrics {

struct SyncResult {
    std::size_t offset = 0;  // cyclic shift of the reference that matches rx
    int polarity = 1;        // -1 when the complemented stream matches better
    double agreement = 0.0;
};

// Cyclic cross-correlation of rx against the (cyclic) reference frame over
// all offsets and both polarities; lowest offset wins ties. Agreement below
// 0.6 throws SyncError.
SyncResult synchronize(const BitStream& ref_bits, const BitStream& rx_bits);

struct BerPoint {
    double x_value = 0.0;  // OSNR dB, launch power dBm, or added loss dB
    double ber = 0.0;
    std::uint64_t bits_counted = 0;
    std::uint64_t errors = 0;
    bool low_confidence = false;  // fewer than 25 errors counted
};

// Hamming distance after applying the sync offset/polarity.
BerPoint count_ber(const BitStream& ref_bits, const BitStream& rx_bits, const SyncResult& sync);

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
};

struct BerCurve {
    std::vector<BerPoint> points;  // sorted by x_value
    std::optional<Regression> regression;  // least squares of log10(ber) vs x
};

// Sorts points and fits the straight line in (x, log10 ber) over points with
// ber > 0. Fewer than two such points throws FitError.
BerCurve fit_curve(std::vector<BerPoint> points);

struct RequiredOsnr {
    double osnr_db = 0.0;
    bool extrapolated = false;  // more than 2 dB past the measured range
};

// Inverts the regression line at target_ber.
RequiredOsnr required_osnr(const BerCurve& curve, double target_ber);

// Q_dB = 20 log10(sqrt(2) * erfc^-1(2 ber)), defined on (0, 0.5).
double q_from_ber(double ber);
double ber_from_q_db(double q_db);

// Shortest round-trip decimal representation.
std::string format_double(double v);

// CSV contract: header row, one row per point, footer comment with the fit.
void write_csv(std::ostream& os, const BerCurve& curve);

constexpr std::uint64_t kMinErrorsForConfidence = 25;

}  // namespace optsim::metrics
