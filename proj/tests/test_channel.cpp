#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "optsim/channel.hpp"
#include "optsim/constellation.hpp"
#include "optsim/dsp_math.hpp"
#include "optsim/txchain.hpp"
#include "oracles.hpp"

using namespace optsim;
using namespace optsim::channel;

namespace {

DualPolWaveform test_signal(std::size_t symbols = 2048, int sps = 4, double launch_dbm = 0.0,
                            std::uint64_t seed = 21) {
    const Codebook cb = constellation::simplex_codebook();
    const auto syms = constellation::map_bits(cb, oracles::random_bits(2 * symbols, seed));
    const auto drive = txchain::generate_drive(syms, sps, 13e9, 16e9);
    return txchain::modulate(drive, launch_dbm);
}

DualPolWaveform white_noise(std::size_t n, double fs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    DualPolWaveform w;
    w.sample_rate = fs;
    w.ex.resize(n);
    w.ey.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.ex[i] = cplx(g(rng), g(rng));
        w.ey[i] = cplx(g(rng), g(rng));
    }
    return w;
}

}  // namespace

TEST_CASE("noise loading calibrates to the target OSNR") {
    const DualPolWaveform sig = test_signal();
    for (double osnr : {9.0, 12.0, 15.0, 18.0, 15.9, 12.9}) {
        const DualPolWaveform noisy = load_awgn_to_osnr(sig, osnr, 1234);
        CHECK(std::abs(measure_osnr(noisy, sig) - osnr) < 0.05);
    }
}

TEST_CASE("different seeds give different noise at the same measured OSNR") {
    const DualPolWaveform sig = test_signal();
    const DualPolWaveform a = load_awgn_to_osnr(sig, 14.0, 1);
    const DualPolWaveform b = load_awgn_to_osnr(sig, 14.0, 2);
    CHECK(relative_rms_error(a.ex, b.ex) > 1e-3);
    CHECK(std::abs(measure_osnr(a, sig) - 14.0) < 0.05);
    CHECK(std::abs(measure_osnr(b, sig) - 14.0) < 0.05);
}

TEST_CASE("noise loading is polarization balanced") {
    const DualPolWaveform sig = test_signal(16384, 2);
    const DualPolWaveform noisy = load_awgn_to_osnr(sig, 10.0, 77);
    double px = 0.0, py = 0.0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        px += std::norm(noisy.ex[i] - sig.ex[i]);
        py += std::norm(noisy.ey[i] - sig.ey[i]);
    }
    CHECK(std::abs(px / py - 1.0) < 0.06);
}

TEST_CASE("measure_osnr basics") {
    const DualPolWaveform sig = test_signal();
    CHECK(measure_osnr(sig, sig) == std::numeric_limits<double>::infinity());

    // halving the noise power raises the OSNR by 3.01 dB
    DualPolWaveform n1 = sig, n2 = sig;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1e-3);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const cplx nx(g(rng), g(rng)), ny(g(rng), g(rng));
        n1.ex[i] += nx;
        n1.ey[i] += ny;
        n2.ex[i] += nx / std::sqrt(2.0);
        n2.ey[i] += ny / std::sqrt(2.0);
    }
    CHECK(measure_osnr(n2, sig) - measure_osnr(n1, sig) ==
          doctest::Approx(linear_to_db(2.0)).epsilon(1e-9));

    DualPolWaveform other = sig;
    other.ex.pop_back();
    other.ey.pop_back();
    CHECK_THROWS_AS(measure_osnr(other, sig), ShapeError);
}

TEST_CASE("chromatic dispersion operator") {
    const DualPolWaveform sig = test_signal();

    const DualPolWaveform same = apply_cd(sig, 0.0);
    CHECK(relative_rms_error(same, sig) < 1e-12);

    const DualPolWaveform disp = apply_cd(sig, 4950.0);
    CHECK(relative_rms_error(apply_cd(disp, -4950.0), sig) < 1e-6);

    // power preserved exactly (all-pass)
    CHECK(mean_power(disp) == doctest::Approx(mean_power(sig)).epsilon(1e-9));

    // a 16 GBaud pulse spreads far beyond one symbol over 4950 ps/nm: the
    // analytic group-delay spread across the signal band is
    // lambda^2/c * D_tot * Rs ~ 317 ps ~ 5 symbols.
    DualPolWaveform pulse;
    pulse.sample_rate = 64e9;
    pulse.ex.assign(4096, cplx(0, 0));
    pulse.ey.assign(4096, cplx(0, 0));
    for (int i = 0; i < 4; ++i) pulse.ex[2048 + i] = cplx(1, 0);  // one NRZ symbol
    const DualPolWaveform spread = apply_cd(pulse, 4950.0);
    auto rms_width = [](const std::vector<cplx>& v) {
        double p = 0, m1 = 0, m2 = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double w = std::norm(v[i]);
            p += w;
            m1 += w * static_cast<double>(i);
            m2 += w * static_cast<double>(i) * static_cast<double>(i);
        }
        m1 /= p;
        m2 /= p;
        return std::sqrt(std::max(0.0, m2 - m1 * m1));
    };
    const double spread_samples = rms_width(spread.ex);
    const double predicted = 317e-12 * 64e9;  // ~20 samples
    CHECK(spread_samples > predicted / 2.0);
    CHECK(spread_samples > 4.0 * rms_width(pulse.ex));
}

TEST_CASE("jones rotation") {
    const DualPolWaveform sig = test_signal();

    const DualPolWaveform id = apply_jones_rotation(sig, {0, 0, 0});
    CHECK(relative_rms_error(id, sig) < 1e-12);

    // alpha = pi/2 swaps the polarizations up to sign
    const DualPolWaveform sw = apply_jones_rotation(sig, {M_PI / 2.0, 0, 0});
    double err = 0, ref = 0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        err += std::norm(sw.ex[i] + sig.ey[i]) + std::norm(sw.ey[i] - sig.ex[i]);
        ref += std::norm(sig.ex[i]) + std::norm(sig.ey[i]);
    }
    CHECK(std::sqrt(err / ref) < 1e-12);

    // U followed by U^dagger is the identity; power preserved
    const JonesAngles a{0.7, -1.1, 2.3};
    const JonesAngles a_inv{-a.alpha, -a.theta, -a.phi};
    const DualPolWaveform rt = apply_jones_rotation(apply_jones_rotation(sig, a), a_inv);
    CHECK(relative_rms_error(rt, sig) < 1e-12);
    CHECK(mean_power(apply_jones_rotation(sig, a)) ==
          doctest::Approx(mean_power(sig)).epsilon(1e-9));
}

TEST_CASE("laser phase noise is a common Wiener walk") {
    DualPolWaveform cw;
    cw.sample_rate = 64e9;
    cw.ex.assign(std::size_t{1} << 18, cplx(1, 0));
    cw.ey.assign(std::size_t{1} << 18, cplx(1, 0));

    CHECK(relative_rms_error(apply_phase_noise(cw, 0.0, 3), cw) == 0.0);

    const double lw = 200e3;
    const DualPolWaveform pn = apply_phase_noise(cw, lw, 31337);
    CHECK(mean_power(pn) == doctest::Approx(mean_power(cw)).epsilon(1e-9));

    // same phase on both polarizations
    double diff = 0;
    for (std::size_t i = 0; i < pn.size(); i += 97) diff += std::abs(pn.ex[i] - pn.ey[i]);
    CHECK(diff == 0.0);

    // Wiener increment statistics: var(phi_{k+n} - phi_k) = 2 pi lw n / fs
    const std::size_t lag = 64;
    std::vector<double> phi(pn.size());
    for (std::size_t i = 0; i < pn.size(); ++i) phi[i] = std::arg(pn.ex[i]);
    double var = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i + lag < pn.size(); i += lag, ++cnt) {
        double d = phi[i + lag] - phi[i];
        while (d > M_PI) d -= 2.0 * M_PI;
        while (d < -M_PI) d += 2.0 * M_PI;
        var += d * d;
    }
    var /= static_cast<double>(cnt);
    const double expected = 2.0 * M_PI * lw * static_cast<double>(lag) / cw.sample_rate;
    CHECK(var == doctest::Approx(expected).epsilon(0.10));

    // normalized linewidth at 16 GBaud
    CHECK(lw / 16e9 == doctest::Approx(1.25e-5).epsilon(1e-12));
}

TEST_CASE("frequency offset operator") {
    const DualPolWaveform sig = test_signal();
    CHECK(relative_rms_error(apply_freq_offset(sig, 0.0), sig) == 0.0);

    const DualPolWaveform fwd = apply_freq_offset(sig, 100e6);
    CHECK(relative_rms_error(apply_freq_offset(fwd, -100e6), sig) < 1e-12);
    CHECK(mean_power(fwd) == doctest::Approx(mean_power(sig)).epsilon(1e-9));

    CHECK_THROWS_AS(apply_freq_offset(sig, sig.sample_rate / 3.0), ParameterError);

    // spectral line of a tone moves by the offset, within a bin
    DualPolWaveform tone;
    tone.sample_rate = 64e9;
    tone.ex.assign(8192, cplx(1, 0));
    tone.ey.assign(8192, cplx(0, 0));
    const DualPolWaveform shifted = apply_freq_offset(tone, 500e6);
    auto spec = fft(shifted.ex);
    std::size_t kmax = 0;
    for (std::size_t k = 1; k < spec.size(); ++k)
        if (std::norm(spec[k]) > std::norm(spec[kmax])) kmax = k;
    const double bin = tone.sample_rate / 8192.0;
    CHECK(std::abs(fft_bin_freq(kmax, 8192, tone.sample_rate) - 500e6) <= bin);
}

TEST_CASE("ssfm reduces to the dispersion operator in the linear limit") {
    const DualPolWaveform sig = test_signal(2048, 4, 10.0);
    FiberSpec fiber;
    fiber.length_km = 300.0;
    fiber.attenuation_db_km = 0.0;
    fiber.gamma_per_w_km = 0.0;
    fiber.raman_gain_db = 0.0;
    const DualPolWaveform out = ssfm_span(sig, fiber);
    const DualPolWaveform ref = apply_cd(sig, 16.5 * 300.0);
    CHECK(relative_rms_error(out, ref) < 1e-6);
}

TEST_CASE("ssfm with everything off is the identity") {
    const DualPolWaveform sig = test_signal(512, 4);
    FiberSpec fiber;
    fiber.length_km = 100.0;
    fiber.attenuation_db_km = 0.0;
    fiber.dispersion_ps_nm_km = 0.0;
    fiber.gamma_per_w_km = 0.0;
    fiber.raman_gain_db = 0.0;
    CHECK(relative_rms_error(ssfm_span(sig, fiber), sig) < 1e-9);
}

TEST_CASE("pure self-phase modulation preserves the modulus samplewise") {
    const DualPolWaveform sig = test_signal(1024, 4, 17.0);
    FiberSpec fiber;
    fiber.length_km = 300.0;
    fiber.attenuation_db_km = 0.0;
    fiber.dispersion_ps_nm_km = 0.0;
    fiber.gamma_per_w_km = 1.3;
    fiber.raman_gain_db = 0.0;
    const DualPolWaveform out = ssfm_span(sig, fiber);
    for (std::size_t i = 0; i < sig.size(); i += 37) {
        CHECK(std::abs(out.ex[i]) == doctest::Approx(std::abs(sig.ex[i])).epsilon(1e-9));
        CHECK(std::abs(out.ey[i]) == doctest::Approx(std::abs(sig.ey[i])).epsilon(1e-9));
    }
}

TEST_CASE("ssfm step-halving convergence at the operating point") {
    const DualPolWaveform sig = test_signal(2048, 4, 10.0);
    FiberSpec fiber;  // defaults: 300 km, 0.21 dB/km, D 16.5, gamma 1.3
    fiber.raman_gain_db = 20.0;
    fiber.steps_per_km = 1.0;
    const DualPolWaveform coarse = ssfm_span(sig, fiber);
    fiber.steps_per_km = 2.0;
    const DualPolWaveform fine = ssfm_span(sig, fiber);
    CHECK(relative_rms_error(coarse, fine) < 1e-4);
}

TEST_CASE("ssfm power budget: span loss minus distributed gain") {
    const DualPolWaveform sig = test_signal(1024, 4, 17.0);
    FiberSpec fiber;
    fiber.gamma_per_w_km = 0.0;
    fiber.raman_gain_db = 20.0;
    const DualPolWaveform out = ssfm_span(sig, fiber);
    const double gain_db = linear_to_db(mean_power(out) / mean_power(sig));
    CHECK(gain_db == doctest::Approx(-63.0 + 20.0).epsilon(0.001));
}

TEST_CASE("optical bandpass filter") {
    const DualPolWaveform sig = test_signal();
    const DualPolWaveform wide = optical_bpf(sig, 1e12);
    CHECK(relative_rms_error(wide, sig) < 1e-3);
    CHECK_THROWS_AS(optical_bpf(sig, 0.0), ParameterError);

    // white-noise power reduction equals the numeric integral of |H(f)|^2
    const DualPolWaveform noise = white_noise(1 << 16, 64e9, 11);
    const double bw = 35e9;
    const DualPolWaveform filtered = optical_bpf(noise, bw);
    double integral = 0.0;
    const std::size_t n = noise.size();
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft_bin_freq(k, n, noise.sample_rate);
        const double u = 2.0 * f / bw;
        integral += std::exp(-std::log(2.0) * u * u * u * u);
    }
    integral /= static_cast<double>(n);
    CHECK(mean_power(filtered) / mean_power(noise) == doctest::Approx(integral).epsilon(0.05));

    // 35 GHz at 16 GBaud leaves noiseless decisions intact
    const Codebook cb = constellation::simplex_codebook();
    const auto bits = oracles::random_bits(4096, 23);
    const auto syms = constellation::map_bits(cb, bits);
    const auto drive = txchain::generate_drive(syms, 4, 13e9, 16e9);
    const DualPolWaveform w = optical_bpf(txchain::modulate(drive, 0.0), 35e9);
    const double scale = std::sqrt(constellation::avg_power(cb) / mean_power(w));
    std::vector<std::uint8_t> rt;
    for (std::size_t k = 0; k < syms.size(); ++k) {
        const cplx ex = w.ex[k * 4 + 2] * scale;
        const cplx ey = w.ey[k * 4 + 2] * scale;
        constellation::append_label_bits(
            cb, constellation::demap_ml(cb, {ex.real(), ex.imag(), ey.real(), ey.imag()}).label,
            rt);
    }
    CHECK(rt == bits);
}
