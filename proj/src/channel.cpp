#include "optsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "optsim/dsp_math.hpp"

namespace optsim::channel {

namespace {

void check_pair(const DualPolWaveform& w) {
    if (w.ex.size() != w.ey.size()) throw ShapeError("waveform: ex/ey length mismatch");
    if (!(w.sample_rate > 0.0)) throw ShapeError("waveform: sample rate not set");
}

// Applies a per-bin multiplier H(f) to both polarizations, cyclic at the
// exact record length.
template <typename H>
DualPolWaveform filter_freq(const DualPolWaveform& sig, H&& response) {
    check_pair(sig);
    DualPolWaveform out = sig;
    const std::size_t n = out.size();
    if (n == 0) return out;
    fft_inplace(out.ex, false);
    fft_inplace(out.ey, false);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft_bin_freq(k, n, sig.sample_rate);
        const cplx h = response(f);
        out.ex[k] *= h;
        out.ey[k] *= h;
    }
    fft_inplace(out.ex, true);
    fft_inplace(out.ey, true);
    return out;
}

double cd_phase_coeff(double dispersion_total_ps_nm, double lambda_m) {
    // ps/nm -> s/m, then pi * lambda^2 * D / c  [s^2]
    const double d_si = dispersion_total_ps_nm * 1e-3;
    return M_PI * lambda_m * lambda_m * d_si / kSpeedOfLight;
}

}  // namespace

DualPolWaveform load_awgn_to_osnr(const DualPolWaveform& sig, double osnr_db,
                                  std::uint64_t seed) {
    check_pair(sig);
    const std::size_t n = sig.size();
    const double p_sig = mean_power(sig);
    if (!(p_sig > 0.0)) throw DomainError("load_awgn_to_osnr: signal power must be positive");

    // Total (both-pol) noise power per sample that puts the target OSNR in
    // the reference bandwidth, split evenly over 2 pols x 2 quadratures:
    // white noise over fs carries P_n * B_ref / fs into the reference band.
    const double noise_total_per_sample =
        p_sig * sig.sample_rate / (db_to_linear(osnr_db) * kRefBandwidthHz);
    const double var_per_quadrature = noise_total_per_sample / 4.0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(var_per_quadrature));
    std::vector<cplx> nx(n), ny(n);
    double realized = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        nx[i] = cplx(gauss(rng), gauss(rng));
        ny[i] = cplx(gauss(rng), gauss(rng));
        realized += std::norm(nx[i]) + std::norm(ny[i]);
    }
    realized /= static_cast<double>(n);
    const double fix = std::sqrt(noise_total_per_sample / realized);

    DualPolWaveform out = sig;
    for (std::size_t i = 0; i < n; ++i) {
        out.ex[i] += nx[i] * fix;
        out.ey[i] += ny[i] * fix;
    }
    return out;
}

double measure_osnr(const DualPolWaveform& sig_plus_noise, const DualPolWaveform& clean_ref) {
    check_pair(sig_plus_noise);
    check_pair(clean_ref);
    if (sig_plus_noise.size() != clean_ref.size() ||
        sig_plus_noise.sample_rate != clean_ref.sample_rate)
        throw ShapeError("measure_osnr: waveform metadata mismatch");

    const double p_sig = mean_power(clean_ref);
    double p_noise = 0.0;
    for (std::size_t i = 0; i < clean_ref.size(); ++i) {
        p_noise += std::norm(sig_plus_noise.ex[i] - clean_ref.ex[i]) +
                   std::norm(sig_plus_noise.ey[i] - clean_ref.ey[i]);
    }
    p_noise /= static_cast<double>(clean_ref.size());
    if (p_noise == 0.0) return std::numeric_limits<double>::infinity();

    const double noise_in_ref_bw = p_noise * kRefBandwidthHz / clean_ref.sample_rate;
    return linear_to_db(p_sig / noise_in_ref_bw);
}

DualPolWaveform apply_cd(const DualPolWaveform& sig, double dispersion_total_ps_nm) {
    const double coeff = cd_phase_coeff(dispersion_total_ps_nm, sig.center_wavelength);
    return filter_freq(sig, [coeff](double f) {
        const double phase = coeff * f * f;
        return cplx(std::cos(phase), std::sin(phase));
    });
}

DualPolWaveform apply_jones_rotation(const DualPolWaveform& sig, const JonesAngles& a) {
    check_pair(sig);
    const cplx uzp(std::cos(a.phi), -std::sin(a.phi));    // exp(-i phi)
    const cplx uzm = std::conj(uzp);
    const cplx tzp(std::cos(a.theta), -std::sin(a.theta));
    const cplx tzm = std::conj(tzp);
    const double c = std::cos(a.alpha), s = std::sin(a.alpha);
    // U = diag(e^{-i phi}, e^{i phi}) * [[cos a, -sin a], [sin a, cos a]]
    //       * diag(e^{-i theta}, e^{i theta})
    const cplx u00 = uzp * c * tzp;
    const cplx u01 = uzp * -s * tzm;
    const cplx u10 = uzm * s * tzp;
    const cplx u11 = uzm * c * tzm;

    DualPolWaveform out = sig;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const cplx x = sig.ex[i], y = sig.ey[i];
        out.ex[i] = u00 * x + u01 * y;
        out.ey[i] = u10 * x + u11 * y;
    }
    return out;
}

DualPolWaveform apply_phase_noise(const DualPolWaveform& sig, double linewidth_total_hz,
                                  std::uint64_t seed) {
    check_pair(sig);
    if (linewidth_total_hz < 0.0) throw ParameterError("apply_phase_noise: negative linewidth");
    if (linewidth_total_hz == 0.0) return sig;

    const double inc_std = std::sqrt(2.0 * M_PI * linewidth_total_hz / sig.sample_rate);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, inc_std);

    DualPolWaveform out = sig;
    double phi = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        phi += gauss(rng);
        const cplx rot(std::cos(phi), std::sin(phi));
        out.ex[i] *= rot;
        out.ey[i] *= rot;
    }
    return out;
}

DualPolWaveform apply_freq_offset(const DualPolWaveform& sig, double freq_offset_hz) {
    check_pair(sig);
    if (std::abs(freq_offset_hz) >= sig.sample_rate / 4.0)
        throw ParameterError("apply_freq_offset: offset must satisfy |df| < fs/4");
    DualPolWaveform out = sig;
    const double w = 2.0 * M_PI * freq_offset_hz / sig.sample_rate;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double ph = w * static_cast<double>(i);
        const cplx rot(std::cos(ph), std::sin(ph));
        out.ex[i] *= rot;
        out.ey[i] *= rot;
    }
    return out;
}

DualPolWaveform optical_bpf(const DualPolWaveform& sig, double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0)) throw ParameterError("optical_bpf: bandwidth must be positive");
    // |H(f)| = exp(-ln2/2 * (2f/B)^4): 2nd-order super-Gaussian whose power
    // response is -3 dB at f = +-B/2.
    const double half_ln2 = 0.5 * std::log(2.0);
    return filter_freq(sig, [=](double f) {
        const double u = 2.0 * f / bandwidth_hz;
        const double u2 = u * u;
        return cplx(std::exp(-half_ln2 * u2 * u2), 0.0);
    });
}

namespace {

// Integrated ln power gain of the pump-shaped Raman profile over [z, z+dz].
// Counter-pumped shape g(z) ~ exp(-a_p (L - z)) over the last
// raman_length_km, normalized so the whole-span gain is raman_gain_db.
double raman_gain_ln(const FiberSpec& fiber, double z_km, double dz_km) {
    if (fiber.raman_gain_db == 0.0 || fiber.raman_length_km <= 0.0) return 0.0;
    const double total_ln = fiber.raman_gain_db * std::log(10.0) / 10.0;
    const double z0 = fiber.length_km - fiber.raman_length_km;
    const double ap = 0.25 * std::log(10.0) / 10.0;  // 0.25 dB/km pump attenuation
    const double norm = (1.0 - std::exp(-ap * fiber.raman_length_km)) / ap;
    auto cum = [&](double z) {  // integral of the shape from z0 to z
        if (z <= z0) return 0.0;
        const double zz = std::min(z, fiber.length_km);
        return (std::exp(-ap * (fiber.length_km - zz)) - std::exp(-ap * fiber.raman_length_km)) /
               ap;
    };
    return total_ln * (cum(z_km + dz_km) - cum(z_km)) / norm;
}

// Dispersion phase + scalar loss/gain applied in the frequency domain for a
// linear segment [z, z+dz].
void linear_segment(std::vector<cplx>& spec_x, std::vector<cplx>& spec_y,
                    const std::vector<double>& f2, double lambda, const FiberSpec& fiber,
                    double z_km, double dz_km) {
    const double coeff = cd_phase_coeff(fiber.dispersion_ps_nm_km * dz_km, lambda);
    const double alpha_ln = fiber.attenuation_db_km * std::log(10.0) / 10.0;
    const double amp =
        std::exp(0.5 * (raman_gain_ln(fiber, z_km, dz_km) - alpha_ln * dz_km));
    for (std::size_t k = 0; k < spec_x.size(); ++k) {
        const double phase = coeff * f2[k];
        const cplx h = amp * cplx(std::cos(phase), std::sin(phase));
        spec_x[k] *= h;
        spec_y[k] *= h;
    }
}

}  // namespace

DualPolWaveform ssfm_span(const DualPolWaveform& sig, const FiberSpec& fiber) {
    check_pair(sig);
    if (!(fiber.length_km > 0.0)) throw ParameterError("ssfm_span: fiber length must be positive");
    if (!(fiber.steps_per_km > 0.0)) throw ParameterError("ssfm_span: steps_per_km must be positive");

    const std::size_t n = sig.size();
    std::vector<double> f2(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft_bin_freq(k, n, sig.sample_rate);
        f2[k] = f * f;
    }

    // Linear-only fiber collapses to a single step.
    if (fiber.gamma_per_w_km == 0.0) {
        DualPolWaveform out = sig;
        fft_inplace(out.ex, false);
        fft_inplace(out.ey, false);
        linear_segment(out.ex, out.ey, f2, sig.center_wavelength, fiber, 0.0, fiber.length_km);
        fft_inplace(out.ex, true);
        fft_inplace(out.ey, true);
        return out;
    }

    const double gamma_eff = (8.0 / 9.0) * fiber.gamma_per_w_km;  // Manakov factor
    constexpr double kMaxPhasePerStep = 0.05;                     // rad
    constexpr std::size_t kMaxSteps = 2'000'000;

    // Symmetrized split-step with adjacent linear half-steps merged:
    // L(dz0/2) N L(dz0/2 + dz1/2) N ... N L(dzLast/2).
    DualPolWaveform out = sig;
    double z = 0.0;
    double pending_half = 0.0;  // trailing half-step not yet applied
    double pending_z = 0.0;
    std::size_t steps = 0;

    const double base_dz = 1.0 / fiber.steps_per_km;
    while (z < fiber.length_km - 1e-12) {
        double peak = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            peak = std::max(peak, std::norm(out.ex[i]) + std::norm(out.ey[i]));
        double dz = base_dz;
        if (gamma_eff * peak * dz > kMaxPhasePerStep) dz = kMaxPhasePerStep / (gamma_eff * peak);
        dz = std::min(dz, fiber.length_km - z);
        if (++steps > kMaxSteps)
            throw NumericalConfigError("ssfm_span: step-size constraint requires > 2e6 steps");

        // Merged linear segment: previous trailing half plus this leading half.
        fft_inplace(out.ex, false);
        fft_inplace(out.ey, false);
        linear_segment(out.ex, out.ey, f2, sig.center_wavelength, fiber, pending_z,
                       pending_half + dz / 2.0);
        fft_inplace(out.ex, true);
        fft_inplace(out.ey, true);

        for (std::size_t i = 0; i < n; ++i) {
            const double p = std::norm(out.ex[i]) + std::norm(out.ey[i]);
            const double phase = gamma_eff * p * dz;
            const cplx rot(std::cos(phase), std::sin(phase));
            out.ex[i] *= rot;
            out.ey[i] *= rot;
        }

        pending_z = z + dz / 2.0;
        pending_half = dz / 2.0;
        z += dz;
    }

    fft_inplace(out.ex, false);
    fft_inplace(out.ey, false);
    linear_segment(out.ex, out.ey, f2, sig.center_wavelength, fiber, pending_z, pending_half);
    fft_inplace(out.ex, true);
    fft_inplace(out.ey, true);
    return out;
}

}  // namespace optsim::channel
