#include "optsim/txchain.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "optsim/dsp_math.hpp"

namespace optsim::txchain {

BitStream de_bruijn_sequence(int order) {
    if (order < 1 || order > 24)
        throw ParameterError("de_bruijn_sequence: order must be in [1, 24]");

    // FKM necklace concatenation, iterative. Produces the lexicographically
    // least B(2, n) starting with n zeros.
    const int n = order;
    std::vector<std::uint8_t> a(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::uint8_t> seq;
    seq.reserve(std::size_t{1} << n);

    // Recursion turned into an explicit helper (depth <= n+1, cheap).
    struct Gen {
        int n;
        std::vector<std::uint8_t>& a;
        std::vector<std::uint8_t>& seq;
        void db(int t, int p) {
            if (t > n) {
                if (n % p == 0)
                    for (int i = 1; i <= p; ++i) seq.push_back(a[static_cast<std::size_t>(i)]);
                return;
            }
            a[static_cast<std::size_t>(t)] = a[static_cast<std::size_t>(t - p)];
            db(t + 1, p);
            for (int j = a[static_cast<std::size_t>(t - p)] + 1; j <= 1; ++j) {
                a[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(j);
                db(t + 1, t);
            }
        }
    };
    Gen g{n, a, seq};
    g.db(1, 1);

    BitStream out;
    out.bits = std::move(seq);
    out.origin = BitOrigin::DeBruijn;
    out.order = order;
    return out;
}

BitStream prbs(int order, std::uint64_t seed) {
    // Fibonacci LFSR feedback taps (x^n + x^m + 1) per the usual test-set
    // polynomials for each supported order.
    static const std::map<int, int> kSecondTap = {{7, 6}, {9, 5}, {11, 9}, {15, 14}, {23, 18}};
    auto it = kSecondTap.find(order);
    if (it == kSecondTap.end())
        throw ParameterError("prbs: order must be one of 7, 9, 11, 15, 23");

    const std::uint64_t mask = (std::uint64_t{1} << order) - 1;
    std::uint64_t state = seed & mask;
    if (state == 0) throw ParameterError("prbs: seed must be nonzero modulo 2^order");

    const int m = it->second;
    const std::uint64_t len = (std::uint64_t{1} << order) - 1;
    BitStream out;
    out.bits.reserve(len);
    out.origin = BitOrigin::Prbs;
    out.order = order;
    for (std::uint64_t k = 0; k < len; ++k) {
        const std::uint64_t bit = ((state >> (order - 1)) ^ (state >> (m - 1))) & 1u;
        out.bits.push_back(static_cast<std::uint8_t>(state >> (order - 1) & 1u));
        state = ((state << 1) | bit) & mask;
    }
    return out;
}

BitStream differential_encode(const BitStream& bits) {
    BitStream out;
    out.bits.reserve(bits.size());
    std::uint8_t prev = 0;
    for (std::uint8_t b : bits.bits) {
        prev = static_cast<std::uint8_t>((b ^ prev) & 1u);
        out.bits.push_back(prev);
    }
    return out;
}

BitStream differential_decode(const BitStream& bits) {
    BitStream out;
    out.bits.reserve(bits.size());
    std::uint8_t prev = 0;
    for (std::uint8_t d : bits.bits) {
        out.bits.push_back(static_cast<std::uint8_t>((d ^ prev) & 1u));
        prev = d & 1u;
    }
    return out;
}

cplx bessel5_response(double f, double f3db) {
    // Reverse Bessel polynomial theta_5(s) = s^5 + 15s^4 + 105s^3 + 420s^2
    // + 945s + 945, evaluated at s = j * w, with w scaled so |H| = 1/sqrt(2)
    // at f = f3db. The unit-group-delay prototype hits -3 dB at w ~ 2.42741.
    constexpr double kOmega3dB = 2.4274107021526262;
    const cplx s(0.0, kOmega3dB * f / f3db);
    const cplx denom = ((((s + 15.0) * s + 105.0) * s + 420.0) * s + 945.0) * s + 945.0;
    return 945.0 / denom;
}

namespace {

// Cyclic filtering at the exact record length; frames are cyclic by
// construction so the wrap-around is the correct continuation.
void bessel_filter_lane(std::vector<double>& lane, double f3db, double fs) {
    const std::size_t n = lane.size();
    if (n == 0) return;
    std::vector<cplx> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(lane[i], 0.0);
    fft_inplace(buf, false);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft_bin_freq(k, n, fs);
        buf[k] *= bessel5_response(f, f3db);
    }
    fft_inplace(buf, true);
    for (std::size_t i = 0; i < n; ++i) lane[i] = buf[i].real();
}

}  // namespace

DriveWaveform generate_drive(const std::vector<SymbolVec4>& symbols, int samples_per_symbol,
                             double dac_bandwidth_hz, double symbol_rate) {
    if (samples_per_symbol < 2)
        throw ParameterError("generate_drive: samples_per_symbol must be >= 2");
    if (!(dac_bandwidth_hz > 0.0))
        throw ParameterError("generate_drive: dac bandwidth must be positive");
    if (!(symbol_rate > 0.0)) throw ParameterError("generate_drive: symbol rate must be positive");

    DriveWaveform d;
    d.samples_per_symbol = samples_per_symbol;
    d.symbol_rate = symbol_rate;
    const std::size_t n = symbols.size() * static_cast<std::size_t>(samples_per_symbol);
    d.ix.resize(n);
    d.qx.resize(n);
    d.iy.resize(n);
    d.qy.resize(n);
    std::size_t w = 0;
    for (const auto& s : symbols) {
        for (int k = 0; k < samples_per_symbol; ++k, ++w) {
            d.ix[w] = s.ix;
            d.qx[w] = s.qx;
            d.iy[w] = s.iy;
            d.qy[w] = s.qy;
        }
    }

    if (std::isfinite(dac_bandwidth_hz)) {
        const double fs = d.sample_rate();
        bessel_filter_lane(d.ix, dac_bandwidth_hz, fs);
        bessel_filter_lane(d.qx, dac_bandwidth_hz, fs);
        bessel_filter_lane(d.iy, dac_bandwidth_hz, fs);
        bessel_filter_lane(d.qy, dac_bandwidth_hz, fs);
    }
    return d;
}

DualPolWaveform modulate(const DriveWaveform& drive, double launch_power_dbm) {
    const std::size_t n = drive.size();
    if (n == 0) throw ParameterError("modulate: empty drive");

    DualPolWaveform w;
    w.sample_rate = drive.sample_rate();
    w.ex.resize(n);
    w.ey.resize(n);
    double power = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // The y-pol Q branch is blocked at the modulator, whatever the lane holds.
        w.ex[i] = cplx(drive.ix[i], drive.qx[i]);
        w.ey[i] = cplx(drive.iy[i], 0.0);
        power += std::norm(w.ex[i]) + std::norm(w.ey[i]);
    }
    power /= static_cast<double>(n);
    if (power <= 0.0) throw DomainError("modulate: drive has zero power");

    const double scale = std::sqrt(dbm_to_watts(launch_power_dbm) / power);
    for (std::size_t i = 0; i < n; ++i) {
        w.ex[i] *= scale;
        w.ey[i] *= scale;
    }
    return w;
}

namespace {

void write_f64(std::ofstream& f, const double* data, std::size_t count) {
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

}  // namespace

void write_waveform(const std::string& path_base, const DriveWaveform& drive) {
    std::ofstream bin(path_base + ".f64", std::ios::binary | std::ios::trunc);
    if (!bin) throw ParameterError("write_waveform: cannot open " + path_base + ".f64");
    for (std::size_t i = 0; i < drive.size(); ++i) {
        const double row[4] = {drive.ix[i], drive.qx[i], drive.iy[i], drive.qy[i]};
        write_f64(bin, row, 4);
    }
    std::ofstream meta(path_base + ".meta", std::ios::trunc);
    meta << "format = drive4\n"
         << "samples = " << drive.size() << "\n"
         << "samples_per_symbol = " << drive.samples_per_symbol << "\n"
         << "symbol_rate_hz = " << drive.symbol_rate << "\n"
         << "sample_rate_hz = " << drive.sample_rate() << "\n";
}

void write_waveform(const std::string& path_base, const DualPolWaveform& wave,
                    double symbol_rate) {
    std::ofstream bin(path_base + ".f64", std::ios::binary | std::ios::trunc);
    if (!bin) throw ParameterError("write_waveform: cannot open " + path_base + ".f64");
    for (std::size_t i = 0; i < wave.size(); ++i) {
        const double row[4] = {wave.ex[i].real(), wave.ex[i].imag(), wave.ey[i].real(),
                               wave.ey[i].imag()};
        write_f64(bin, row, 4);
    }
    std::ofstream meta(path_base + ".meta", std::ios::trunc);
    meta << "format = dualpol\n"
         << "samples = " << wave.size() << "\n"
         << "symbol_rate_hz = " << symbol_rate << "\n"
         << "sample_rate_hz = " << wave.sample_rate << "\n";
}

DriveWaveform read_drive_waveform(const std::string& path_base) {
    std::ifstream meta(path_base + ".meta");
    if (!meta) throw ParameterError("read_drive_waveform: cannot open " + path_base + ".meta");
    std::size_t samples = 0;
    DriveWaveform d;
    std::string key, eq;
    double value = 0.0;
    while (meta >> key >> eq) {
        if (key == "format") {
            std::string fmt;
            meta >> fmt;
            continue;
        }
        meta >> value;
        if (key == "samples") samples = static_cast<std::size_t>(value);
        else if (key == "samples_per_symbol") d.samples_per_symbol = static_cast<int>(value);
        else if (key == "symbol_rate_hz") d.symbol_rate = value;
    }
    std::ifstream bin(path_base + ".f64", std::ios::binary);
    if (!bin) throw ParameterError("read_drive_waveform: cannot open " + path_base + ".f64");
    d.ix.resize(samples);
    d.qx.resize(samples);
    d.iy.resize(samples);
    d.qy.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        double row[4];
        bin.read(reinterpret_cast<char*>(row), sizeof(row));
        if (!bin) throw ShapeError("read_drive_waveform: truncated binary file");
        d.ix[i] = row[0];
        d.qx[i] = row[1];
        d.iy[i] = row[2];
        d.qy[i] = row[3];
    }
    return d;
}

}  // namespace optsim::txchain
