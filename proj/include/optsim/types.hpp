#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace optsim {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Error taxonomy. Every throwing path in the library uses one of these so
// callers (CLI, harness) can attribute failures to a stage.
// ---------------------------------------------------------------------------

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument value (out-of-range order, zero seed, ...).
struct ParameterError : SimError {
    using SimError::SimError;
};

// Mismatched lengths / metadata between inputs.
struct ShapeError : SimError {
    using SimError::SimError;
};

// Mathematically undefined request (sigma = 0, ber outside (0, 0.5), ...).
struct DomainError : SimError {
    using SimError::SimError;
};

// Iterative stage failed to settle.
struct ConvergenceError : SimError {
    using SimError::SimError;
};

// Equalizer taps blew up; carries how far adaptation got.
struct DivergenceError : ConvergenceError {
    DivergenceError(const std::string& msg, std::size_t symbols)
        : ConvergenceError(msg), symbols_processed(symbols) {}
    std::size_t symbols_processed = 0;
};

struct SyncError : SimError {
    using SimError::SimError;
};

struct AlignmentError : SimError {
    using SimError::SimError;
};

struct EstimationError : SimError {
    using SimError::SimError;
};

struct NumericalConfigError : SimError {
    using SimError::SimError;
};

struct FitError : SimError {
    using SimError::SimError;
};

struct ConfigError : SimError {
    using SimError::SimError;
};

// ---------------------------------------------------------------------------
// Modulation-domain types
// ---------------------------------------------------------------------------

// One modulation symbol as four real coordinates: I/Q of x-pol, I/Q of y-pol.
struct SymbolVec4 {
    double ix = 0.0;
    double qx = 0.0;
    double iy = 0.0;
    double qy = 0.0;
};

// A labeled constellation. Point count is a power of two, labels are the
// complete set of bit patterns of that width, all points distinct.
class Codebook {
  public:
    Codebook(std::string name, int bits_per_symbol,
             std::vector<SymbolVec4> points, std::vector<std::uint32_t> labels);

    const std::string& name() const { return name_; }
    int bits_per_symbol() const { return bits_per_symbol_; }
    std::size_t size() const { return points_.size(); }
    const SymbolVec4& point(std::size_t i) const { return points_[i]; }
    std::uint32_t label(std::size_t i) const { return labels_[i]; }
    const std::vector<SymbolVec4>& points() const { return points_; }
    // Point index for a label value (labels are exhaustive so this is total).
    std::size_t index_of_label(std::uint32_t label) const { return label_to_index_[label]; }

  private:
    std::string name_;
    int bits_per_symbol_ = 0;
    std::vector<SymbolVec4> points_;
    std::vector<std::uint32_t> labels_;
    std::vector<std::size_t> label_to_index_;
};

// Std deviation of additive white Gaussian noise per real dimension,
// in the same units as SymbolVec4 coordinates.
struct NoiseSigma {
    double sigma = 0.0;
};

// ---------------------------------------------------------------------------
// Bit streams and waveforms
// ---------------------------------------------------------------------------

enum class BitOrigin { DeBruijn, Prbs, Explicit };

struct BitStream {
    std::vector<std::uint8_t> bits;  // values 0/1
    BitOrigin origin = BitOrigin::Explicit;
    int order = 0;  // generator order for DeBruijn/Prbs

    std::size_t size() const { return bits.size(); }
};

// Four-lane electrical drive (modulator inputs), oversampled.
struct DriveWaveform {
    std::vector<double> ix, qx, iy, qy;
    int samples_per_symbol = 0;
    double symbol_rate = 0.0;  // Hz

    std::size_t size() const { return ix.size(); }
    double sample_rate() const { return symbol_rate * samples_per_symbol; }
};

// Sampled dual-polarization complex baseband field, sqrt(W) units.
struct DualPolWaveform {
    std::vector<cplx> ex, ey;
    double sample_rate = 0.0;           // Hz
    double center_wavelength = 1550e-9; // m

    std::size_t size() const { return ex.size(); }
};

}  // namespace optsim
