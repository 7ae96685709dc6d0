#include "optsim/rxdsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "optsim/channel.hpp"
#include "optsim/constellation.hpp"
#include "optsim/dsp_math.hpp"
#include "optsim/metrics.hpp"
#include "optsim/txchain.hpp"

namespace optsim::rxdsp {

DualPolWaveform cd_compensate(const DualPolWaveform& sig, double dispersion_total_ps_nm) {
    return channel::apply_cd(sig, -dispersion_total_ps_nm);
}

// ---------------------------------------------------------------------------
// Clock recovery
// ---------------------------------------------------------------------------

namespace {

// Cubic Lagrange interpolation at fractional position pos (basepoint i0 such
// that the four support samples are i0-1 .. i0+2, mu in [0,1)).
cplx interp_cubic(const std::vector<cplx>& v, std::size_t i0, double mu) {
    const cplx ym1 = v[i0 - 1], y0 = v[i0], y1 = v[i0 + 1], y2 = v[i0 + 2];
    const double m2 = mu * mu;
    const double cm1 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    const double c0 = (m2 - 1.0) * (mu - 2.0) / 2.0;
    const double c1 = -mu * (mu + 1.0) * (mu - 2.0) / 2.0;
    const double c2 = mu * (m2 - 1.0) / 6.0;
    return cm1 * ym1 + c0 * y0 + c1 * y1 + c2 * y2;
}

}  // namespace

DualPolWaveform clock_recover(const DualPolWaveform& sig, double symbol_rate) {
    if (!(symbol_rate > 0.0)) throw ParameterError("clock_recover: symbol rate must be positive");
    if (sig.sample_rate < 2.0 * symbol_rate - 1e-3)
        throw ParameterError("clock_recover: need at least 2 samples per symbol");
    const std::size_t n = sig.size();
    if (n < 64) throw ParameterError("clock_recover: record too short");

    const double step0 = sig.sample_rate / (2.0 * symbol_rate);
    const double power = mean_power(sig.ex);
    const double gain_norm = power > 0.0 ? 1.0 / power : 1.0;

    // Proportional/integral gains on the normalized Gardner error.
    const double kp = 8e-3;
    const double ki = 4e-6;

    DualPolWaveform out;
    out.sample_rate = 2.0 * symbol_rate;
    out.center_wavelength = sig.center_wavelength;
    out.ex.reserve(static_cast<std::size_t>(static_cast<double>(n) / step0) + 2);
    out.ey.reserve(out.ex.capacity());

    double pos = 2.0;       // fractional read position in input samples
    double rate = 0.0;      // fractional rate correction
    cplx prev_strobe(0.0, 0.0), mid(0.0, 0.0);
    bool have_prev = false;
    std::size_t out_idx = 0;

    // Track detector activity to notice a loop that fails to settle.
    double err_acc[4] = {0, 0, 0, 0};
    std::size_t err_cnt[4] = {0, 0, 0, 0};

    while (pos + 3.0 < static_cast<double>(n)) {
        const std::size_t i0 = static_cast<std::size_t>(pos);
        const double mu = pos - static_cast<double>(i0);
        const cplx sx = interp_cubic(sig.ex, i0, mu);
        const cplx sy = interp_cubic(sig.ey, i0, mu);
        out.ex.push_back(sx);
        out.ey.push_back(sy);

        if ((out_idx & 1u) == 0) {
            // strobe sample
            if (have_prev) {
                const double e = ((sx - prev_strobe) * std::conj(mid)).real() * gain_norm;
                rate -= ki * e;
                pos -= kp * e * step0;
                const std::size_t q = std::min<std::size_t>(3, 4 * i0 / n);
                err_acc[q] += std::abs(e);
                err_cnt[q] += 1;
            }
            prev_strobe = sx;
            have_prev = true;
        } else {
            mid = sx;
        }
        ++out_idx;
        pos += step0 * (1.0 + rate);
    }

    if (err_cnt[0] > 16 && err_cnt[3] > 16) {
        const double first = err_acc[0] / static_cast<double>(err_cnt[0]);
        const double last = err_acc[3] / static_cast<double>(err_cnt[3]);
        if (last > 2.5 * first && last > 0.2)
            throw ConvergenceError("clock_recover: timing error variance not decreasing");
    }

    if (out.ex.size() % 2 != 0) {
        out.ex.pop_back();
        out.ey.pop_back();
    }
    if (out.ex.size() < 32) throw ConvergenceError("clock_recover: produced too few samples");
    return out;
}

// ---------------------------------------------------------------------------
// Butterfly equalizer
// ---------------------------------------------------------------------------

double collinearity_stat(const cplx* z, std::size_t n) {
    if (n == 0) return 0.0;
    cplx acc2(0.0, 0.0);
    double accp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc2 += z[i] * z[i];
        accp += std::norm(z[i]);
    }
    return accp > 0.0 ? std::abs(acc2) / accp : 0.0;
}

double collinearity_stat(const std::vector<cplx>& z) { return collinearity_stat(z.data(), z.size()); }

namespace {

struct TapRow {
    std::vector<cplx> hx, hy;  // taps against x and y input windows
};

cplx dot_window(const std::vector<cplx>& taps, const std::vector<cplx>& sig, std::size_t base) {
    cplx acc(0.0, 0.0);
    for (std::size_t m = 0; m < taps.size(); ++m) acc += taps[m] * sig[base + m];
    return acc;
}

// Seed `dst` with the orthogonal complement of `src`: conjugate reversal
// with a sign flip, reflected around the source row's energy centroid so
// both rows keep the same group delay (a plain reversal would move the
// extracted tributary by the centroid offset and desynchronize the pair).
void seed_orthogonal(TapRow& dst, const TapRow& src) {
    const std::size_t taps = src.hx.size();
    double w_sum = 0.0, w_idx = 0.0;
    for (std::size_t m = 0; m < taps; ++m) {
        const double w = std::norm(src.hx[m]) + std::norm(src.hy[m]);
        w_sum += w;
        w_idx += w * static_cast<double>(m);
    }
    const long c = w_sum > 0.0 ? std::lround(w_idx / w_sum) : static_cast<long>(taps / 2);
    for (std::size_t m = 0; m < taps; ++m) {
        const long r = 2 * c - static_cast<long>(m);
        if (r < 0 || r >= static_cast<long>(taps)) {
            dst.hx[m] = cplx(0.0, 0.0);
            dst.hy[m] = cplx(0.0, 0.0);
        } else {
            dst.hx[m] = -std::conj(src.hy[static_cast<std::size_t>(r)]);
            dst.hy[m] = std::conj(src.hx[static_cast<std::size_t>(r)]);
        }
    }
}

// Scales a freshly seeded row so its output power over a recent stretch of
// input sits at the target radius; re-convergence then only has to fix the
// fine structure, not the gross gain.
void rescale_row(TapRow& row, const DualPolWaveform& sig, std::size_t base_end, double r2) {
    const std::size_t taps = row.hx.size();
    const std::size_t span = 256;
    if (base_end < 2 * span + taps) return;
    double p = 0.0;
    std::size_t cnt = 0;
    for (std::size_t b = base_end - 2 * span; b + taps <= base_end; b += 2, ++cnt) {
        const cplx z = dot_window(row.hx, sig.ex, b) + dot_window(row.hy, sig.ey, b);
        p += std::norm(z);
    }
    if (cnt == 0 || p <= 0.0) return;
    const double g = std::sqrt(r2 / (p / static_cast<double>(cnt)));
    for (std::size_t m = 0; m < taps; ++m) {
        row.hx[m] *= g;
        row.hy[m] *= g;
    }
}

// Mean squared modulus error of the recent outputs relative to the target
// radius; large values mean the row is still extracting a mixture.
double modulus_dispersion(const cplx* z, std::size_t n, double r2) {
    if (n == 0) return 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = r2 - std::norm(z[i]);
        acc += e * e;
    }
    return acc / (static_cast<double>(n) * r2 * r2);
}

void update_row(TapRow& row, const cplx& err, double mu, const std::vector<cplx>& ux,
                const std::vector<cplx>& uy, std::size_t base) {
    const cplx g = mu * err;
    for (std::size_t m = 0; m < row.hx.size(); ++m) {
        row.hx[m] += g * std::conj(ux[base + m]);
        row.hy[m] += g * std::conj(uy[base + m]);
    }
}

// CMA error toward squared radius r2.
cplx cma_error(const cplx& z, double r2) { return (r2 - std::norm(z)) * z; }

// Two-symbol BPSK criterion: unit-modulus pull plus a penalty on the
// imaginary part of z_k * conj(z_{k-1}), whose fixed points are antipodal
// pairs on a line of arbitrary angle.
cplx bpsk_error(const cplx& z, const cplx& z_prev, double kappa) {
    const cplx c = z * std::conj(z_prev);
    return cma_error(z, 1.0) - kappa * cplx(0.0, 1.0) * c.imag() * z_prev;
}

// Normalized inner product of the concatenated (hx|hy) rows; close to 1 when
// both butterfly rows extract the same source.
double row_correlation(const TapRow& a, const TapRow& b) {
    cplx acc(0.0, 0.0);
    double na = 0.0, nb = 0.0;
    for (std::size_t m = 0; m < a.hx.size(); ++m) {
        acc += a.hx[m] * std::conj(b.hx[m]) + a.hy[m] * std::conj(b.hy[m]);
        na += std::norm(a.hx[m]) + std::norm(a.hy[m]);
        nb += std::norm(b.hx[m]) + std::norm(b.hy[m]);
    }
    const double den = std::sqrt(na * nb);
    return den > 0.0 ? std::abs(acc) / den : 0.0;
}

}  // namespace

EqualizerOutput butterfly_equalize(const DualPolWaveform& two_sps, const EqualizerConfig& cfg) {
    if (cfg.num_taps < 1 || cfg.num_taps % 2 == 0)
        throw ParameterError("butterfly_equalize: num_taps must be odd and >= 1");
    if (!(cfg.step_size > 0.0) || cfg.step_size > 0.1)
        throw ParameterError("butterfly_equalize: step_size must be in (0, 0.1]");
    const std::size_t taps = static_cast<std::size_t>(cfg.num_taps);
    const std::size_t n_samp = two_sps.size();
    if (n_samp < 2 * cfg.convergence_symbols || n_samp < taps + 2)
        throw ParameterError("butterfly_equalize: record shorter than convergence window");

    const std::size_t n_sym = (n_samp - taps) / 2 + 1;
    EqualizerOutput out;
    out.x.reserve(n_sym);
    out.y.reserve(n_sym);

    TapRow rx{std::vector<cplx>(taps, 0.0), std::vector<cplx>(taps, 0.0)};
    TapRow ry{std::vector<cplx>(taps, 0.0), std::vector<cplx>(taps, 0.0)};
    // Center spike on a strobe index (even) so initial outputs sit on symbols.
    std::size_t spike = (taps - 1) / 2;
    if (spike % 2 != 0 && taps > 1) spike -= 1;
    rx.hx[spike] = cplx(1.0, 0.0);
    ry.hy[spike] = cplx(1.0, 0.0);

    const double mu = cfg.step_size;
    cplx prev_x(0.0, 0.0), prev_y(0.0, 0.0);

    // The two-symbol BPSK criterion distorts the acquisition landscape while
    // the rows are still mixed, so the first portion of the convergence
    // window runs plain CMA on every branch (the collinearity term only has
    // a meaningful gradient once a single source dominates the output).
    const std::size_t acquire = std::min<std::size_t>(cfg.convergence_symbols / 2, 6144);

    constexpr std::size_t kCheckInterval = 1024;
    constexpr double kTapLimitSq = 1e6;
    std::size_t last_reset = 0;

    for (std::size_t k = 0; k < n_sym; ++k) {
        const std::size_t base = 2 * k;
        const cplx zx = dot_window(rx.hx, two_sps.ex, base) + dot_window(rx.hy, two_sps.ey, base);
        const cplx zy = dot_window(ry.hx, two_sps.ex, base) + dot_window(ry.hy, two_sps.ey, base);
        out.x.push_back(zx);
        out.y.push_back(zy);

        const bool acquiring = k < acquire;
        const double mu_k = acquiring ? 2.0 * mu : mu;
        cplx ex, ey;
        switch (cfg.mode) {
            case EqMode::CmaQpsk:
                ex = cma_error(zx, cfg.cma_radius_sq);
                ey = cma_error(zy, cfg.cma_radius_sq);
                break;
            case EqMode::BpskDD:
                ex = acquiring ? cma_error(zx, 1.0)
                               : bpsk_error(zx, prev_x, cfg.bpsk_collinearity_weight);
                ey = acquiring ? cma_error(zy, 1.0)
                               : bpsk_error(zy, prev_y, cfg.bpsk_collinearity_weight);
                break;
            case EqMode::SimplexCombined:
                ex = cma_error(zx, cfg.cma_radius_sq);
                ey = acquiring ? cma_error(zy, 1.0)
                               : bpsk_error(zy, prev_y, cfg.bpsk_collinearity_weight);
                break;
        }
        update_row(rx, ex, mu_k, two_sps.ex, two_sps.ey, base);
        update_row(ry, ey, mu_k, two_sps.ex, two_sps.ey, base);
        prev_x = zx;
        prev_y = zy;

        if ((k + 1) % 256 == 0) {
            double worst = 0.0;
            for (std::size_t m = 0; m < taps; ++m) {
                worst = std::max({worst, std::norm(rx.hx[m]), std::norm(rx.hy[m]),
                                  std::norm(ry.hx[m]), std::norm(ry.hy[m])});
            }
            // NaN-poisoned taps must trip this too, hence the negated form.
            if (!(worst < kTapLimitSq))
                throw DivergenceError("butterfly_equalize: tap magnitude exceeded limit", k + 1);
        }

        if ((k + 1) % kCheckInterval == 0) {

            // Both rows collapsing onto the same source. The tap-domain
            // correlation catches proportional rows; the output-domain
            // correlation additionally catches distinct polyphase tap
            // vectors that still extract the same tributary.
            bool same_source = row_correlation(rx, ry) > 0.9;
            if (!same_source && k + 1 >= 2048) {
                const std::size_t lb = 1024;
                for (int lag = -1; lag <= 1 && !same_source; ++lag) {
                    cplx acc(0.0, 0.0);
                    double nx2 = 0.0, ny2 = 0.0;
                    for (std::size_t i = k + 1 - lb + 2; i + 2 <= k; ++i) {
                        const cplx& a = out.y[i];
                        const cplx& b =
                            out.x[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + lag)];
                        acc += a * std::conj(b);
                        ny2 += std::norm(a);
                        nx2 += std::norm(b);
                    }
                    const double den = std::sqrt(nx2 * ny2);
                    if (den > 0.0 && std::abs(acc) / den > 0.85) same_source = true;
                }
            }
            if (same_source && k + 1 <= cfg.convergence_symbols &&
                k + 1 >= last_reset + 2048) {
                if (getenv("OPTSIM_EQ_DEBUG")) fprintf(stderr, "k=%zu same_source reset\n", k+1);
                seed_orthogonal(ry, rx);
                rescale_row(ry, two_sps, 2 * k, 1.0);
                prev_y = cplx(0.0, 0.0);
                last_reset = k + 1;
                ++out.singularity_resets;
            }

            if (k + 1 <= cfg.convergence_symbols && k + 1 >= 2048 &&
                k + 1 >= last_reset + 2048) {
                const std::size_t lookback = std::min<std::size_t>(1024, k + 1);
                const double r2x =
                    cfg.mode == EqMode::SimplexCombined ? cfg.cma_radius_sq : 1.0;
                const double dx = modulus_dispersion(out.x.data() + (k + 1 - lookback), lookback,
                                                     r2x);
                const double dy = modulus_dispersion(out.y.data() + (k + 1 - lookback), lookback,
                                                     cfg.mode == EqMode::CmaQpsk
                                                         ? cfg.cma_radius_sq
                                                         : 1.0);
                // A row stuck on a source mixture (a known CMA local
                // minimum) carries excess modulus dispersion over the noise
                // floor the healthy row shows; re-seed it from the healthy
                // row's orthogonal complement. The relative form keeps the
                // test quiet at low OSNR where both rows are equally noisy.
                if (dy > 4.0 * dx + 0.08) {
                    if (getenv("OPTSIM_EQ_DEBUG")) fprintf(stderr, "k=%zu rescue-y dx=%.4f dy=%.4f\n", k+1, dx, dy);
                    seed_orthogonal(ry, rx);
                    rescale_row(ry, two_sps, 2 * k, cfg.mode == EqMode::CmaQpsk
                                                        ? cfg.cma_radius_sq
                                                        : 1.0);
                    prev_y = cplx(0.0, 0.0);
                    last_reset = k + 1;
                    ++out.singularity_resets;
                } else if (dx > 4.0 * dy + 0.08) {
                    if (getenv("OPTSIM_EQ_DEBUG")) fprintf(stderr, "k=%zu rescue-x dx=%.4f dy=%.4f\n", k+1, dx, dy);
                    seed_orthogonal(rx, ry);
                    rescale_row(rx, two_sps, 2 * k, r2x);
                    prev_x = cplx(0.0, 0.0);
                    last_reset = k + 1;
                    ++out.singularity_resets;
                }
            }

            // Tributary roles can converge swapped for the simplex format
            // (the BPSK tributary is constant-modulus too). Detect via the
            // collinearity statistic over the recent outputs and swap rows
            // while still inside the convergence window.
            if (cfg.mode == EqMode::SimplexCombined && k + 1 <= cfg.convergence_symbols &&
                k + 1 > acquire) {
                const std::size_t lookback = std::min<std::size_t>(1024, k + 1);
                const double cx = collinearity_stat(out.x.data() + (k + 1 - lookback), lookback);
                const double cy = collinearity_stat(out.y.data() + (k + 1 - lookback), lookback);
                if (cx > 0.6 && cy < 0.4) {
                    std::swap(rx, ry);
                    std::swap(prev_x, prev_y);
                    ++out.row_swaps;
                }
            }
        }
    }

    out.state.hxx = std::move(rx.hx);
    out.state.hxy = std::move(rx.hy);
    out.state.hyx = std::move(ry.hx);
    out.state.hyy = std::move(ry.hy);
    out.state.symbols_processed = n_sym;
    return out;
}

// ---------------------------------------------------------------------------
// Frequency offset estimation
// ---------------------------------------------------------------------------

double estimate_freq_offset(const std::vector<cplx>& x_symbols, double symbol_rate) {
    if (x_symbols.size() < 4096)
        throw ParameterError("estimate_freq_offset: need at least 4096 symbols");
    std::size_t nfft = 1;
    while (nfft * 2 <= x_symbols.size()) nfft *= 2;

    std::vector<cplx> z(nfft);
    for (std::size_t i = 0; i < nfft; ++i) {
        const cplx v = x_symbols[i];
        const cplx v2 = v * v;
        z[i] = v2 * v2;
    }
    fft_inplace(z, false);

    std::vector<double> p(nfft);
    for (std::size_t k = 0; k < nfft; ++k) p[k] = std::norm(z[k]);

    std::size_t kmax = 0;
    for (std::size_t k = 1; k < nfft; ++k)
        if (p[k] > p[kmax]) kmax = k;

    std::vector<double> med = p;
    std::nth_element(med.begin(), med.begin() + nfft / 2, med.end());
    if (p[kmax] < med[nfft / 2] * std::pow(10.0, 0.6))
        throw EstimationError("estimate_freq_offset: no dominant spectral line (peak-to-median < 6 dB)");

    // Parabolic interpolation around the peak (cyclic neighbors).
    const double pm = p[(kmax + nfft - 1) % nfft];
    const double pp = p[(kmax + 1) % nfft];
    const double denom = pm - 2.0 * p[kmax] + pp;
    double delta = 0.0;
    if (denom != 0.0) delta = 0.5 * (pm - pp) / denom;
    delta = std::clamp(delta, -0.5, 0.5);

    double bin = static_cast<double>(kmax);
    if (bin >= static_cast<double>(nfft) / 2.0) bin -= static_cast<double>(nfft);
    const double f4 = (bin + delta) * symbol_rate / static_cast<double>(nfft);
    return f4 / 4.0;
}

std::vector<cplx> derotate_freq(const std::vector<cplx>& symbols, double freq_hz,
                                double symbol_rate) {
    std::vector<cplx> out(symbols.size());
    const double w = -2.0 * M_PI * freq_hz / symbol_rate;
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const double ph = w * static_cast<double>(k);
        out[k] = symbols[k] * cplx(std::cos(ph), std::sin(ph));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Carrier phase estimation
// ---------------------------------------------------------------------------

namespace {

// Sliding-window Viterbi-Viterbi on one tributary. The M-th power argument
// is unwrapped across symbols before dividing, so slow phase walks stay
// continuous instead of jumping at branch cuts.
std::vector<double> vv_phase(const std::vector<cplx>& z, int window, int power,
                             double arg_offset) {
    const std::size_t n = z.size();
    std::vector<cplx> zp(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx v = z[i];
        cplx acc = v;
        for (int p = 1; p < power; ++p) acc *= v;
        zp[i] = acc;
    }

    const int half = window / 2;
    std::vector<double> theta(n);
    cplx sum(0.0, 0.0);
    // Prime the window for index 0.
    for (int j = -half; j <= half; ++j) {
        const std::size_t idx = static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(n) - 1));
        sum += zp[idx];
    }
    double prev_psi = std::arg(sum);
    double unwrapped = prev_psi;
    theta[0] = (unwrapped - arg_offset) / power;

    for (std::size_t i = 1; i < n; ++i) {
        const long lo_old = std::clamp<long>(static_cast<long>(i) - 1 - half, 0, static_cast<long>(n) - 1);
        const long hi_new = std::clamp<long>(static_cast<long>(i) + half, 0, static_cast<long>(n) - 1);
        sum -= zp[static_cast<std::size_t>(lo_old)];
        sum += zp[static_cast<std::size_t>(hi_new)];
        // Periodic exact refresh bounds accumulation drift.
        if ((i & 4095u) == 0) {
            sum = cplx(0.0, 0.0);
            for (long j = static_cast<long>(i) - half; j <= static_cast<long>(i) + half; ++j) {
                const std::size_t idx =
                    static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(n) - 1));
                sum += zp[idx];
            }
        }
        double psi = std::arg(sum);
        double d = psi - prev_psi;
        while (d > M_PI) d -= 2.0 * M_PI;
        while (d < -M_PI) d += 2.0 * M_PI;
        unwrapped += d;
        prev_psi = psi;
        theta[i] = (unwrapped - arg_offset) / power;
    }
    return theta;
}

}  // namespace

PhaseEstimate carrier_phase_estimate(const std::vector<cplx>& x_symbols,
                                     const std::vector<cplx>& y_symbols, int window,
                                     bool x_is_qpsk) {
    if (window < 5 || window % 2 == 0)
        throw ParameterError("carrier_phase_estimate: window must be odd and >= 5");
    if (x_symbols.size() != y_symbols.size())
        throw ShapeError("carrier_phase_estimate: tributary length mismatch");

    // Diagonal QPSK raised to the 4th lands on the negative real axis; an
    // antipodal line squared lands on the positive axis.
    const std::vector<double> tx = x_is_qpsk ? vv_phase(x_symbols, window, 4, M_PI)
                                             : vv_phase(x_symbols, window, 2, 0.0);
    const std::vector<double> ty = vv_phase(y_symbols, window, 2, 0.0);

    PhaseEstimate out;
    out.x.resize(x_symbols.size());
    out.y.resize(y_symbols.size());
    for (std::size_t i = 0; i < x_symbols.size(); ++i)
        out.x[i] = x_symbols[i] * cplx(std::cos(-tx[i]), std::sin(-tx[i]));
    for (std::size_t i = 0; i < y_symbols.size(); ++i)
        out.y[i] = y_symbols[i] * cplx(std::cos(-ty[i]), std::sin(-ty[i]));
    out.phase_traj = tx;
    return out;
}

// ---------------------------------------------------------------------------
// Tributary alignment and decisions
// ---------------------------------------------------------------------------

namespace {

double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

double parity_score(const std::vector<cplx>& x, const std::vector<cplx>& y, int quadrant,
                    int ysign) {
    // x rotated by exp(-i pi/2 q) permutes (Re, Im) with signs; evaluate
    // without materializing the rotated vectors.
    std::size_t hits = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        double re = x[k].real(), im = x[k].imag();
        switch (quadrant & 3) {
            case 0: break;
            case 1: {  // * exp(-i pi/2): (re, im) -> (im, -re)
                const double t = re;
                re = im;
                im = -t;
                break;
            }
            case 2:
                re = -re;
                im = -im;
                break;
            case 3: {  // * exp(+i pi/2)
                const double t = re;
                re = -im;
                im = t;
                break;
            }
        }
        const double ry = y[k].real() * ysign;
        if (sgn(ry) == -sgn(re) * sgn(im)) ++hits;
    }
    return x.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(x.size());
}

std::vector<cplx> rotate_quadrant(const std::vector<cplx>& x, int quadrant) {
    static const cplx rot[4] = {cplx(1, 0), cplx(0, -1), cplx(-1, 0), cplx(0, 1)};
    std::vector<cplx> out(x.size());
    const cplx r = rot[quadrant & 3];
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * r;
    return out;
}

// Best cyclic agreement with strict polarity. The x-only pi automorphism
// complements every decoded bit, so a polarity-tolerant correlation (as used
// for BPSK sign checks) cannot separate it from the true hypothesis.
double reference_agreement(const std::vector<cplx>& x, const std::vector<cplx>& y,
                           const BitStream& ref) {
    const BitStream decoded = decide_and_decode(x, y, Format::Simplex3D);
    const std::size_t n = ref.size();
    if (n == 0 || decoded.size() < n) return 0.0;
    const std::size_t m = std::min(decoded.size(), 2 * n);
    double best = 0.0;
    for (std::size_t off = 0; off < n; ++off) {
        std::size_t agree = 0;
        std::size_t ri = off;
        for (std::size_t i = 0; i < m; ++i) {
            agree += (decoded.bits[i] == ref.bits[ri]) ? 1u : 0u;
            if (++ri == n) ri = 0;
        }
        best = std::max(best, static_cast<double>(agree) / static_cast<double>(m));
    }
    return best;
}

}  // namespace

namespace {

// Overlapping views of x and y with y advanced by `lag` symbols.
struct LaggedPair {
    std::vector<cplx> x, y;
};

LaggedPair apply_lag(const std::vector<cplx>& x, const std::vector<cplx>& y, int lag) {
    LaggedPair p;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, -lag);
    const std::ptrdiff_t to = std::min<std::ptrdiff_t>(n, n - lag);
    for (std::ptrdiff_t k = from; k < to; ++k) {
        p.x.push_back(x[static_cast<std::size_t>(k)]);
        p.y.push_back(y[static_cast<std::size_t>(k + lag)]);
    }
    return p;
}

}  // namespace

AlignResult tributary_align(const std::vector<cplx>& x_symbols,
                            const std::vector<cplx>& y_symbols,
                            const BitStream* reference_bits) {
    if (x_symbols.size() != y_symbols.size())
        throw ShapeError("tributary_align: tributary length mismatch");
    if (x_symbols.size() < 32) throw ParameterError("tributary_align: record too short");

    constexpr int kMaxLag = 4;

    double best = -1.0;
    int best_lag = 0;
    for (int lag = -kMaxLag; lag <= kMaxLag; ++lag) {
        const LaggedPair p = apply_lag(x_symbols, y_symbols, lag);
        for (int q = 0; q < 4; ++q) {
            for (int s = 0; s < 2; ++s) {
                const double sc = parity_score(p.x, p.y, q, s == 0 ? 1 : -1);
                if (sc > best + 1e-12) {
                    best = sc;
                    best_lag = lag;
                }
            }
        }
    }
    if (best < 0.75)
        throw AlignmentError("tributary_align: best parity score " + std::to_string(best) +
                             " below 0.75");

    const LaggedPair pair = apply_lag(x_symbols, y_symbols, best_lag);
    double score[4][2];
    int bq = 0, bs = 0;
    double lag_best = -1.0;
    for (int q = 0; q < 4; ++q) {
        for (int s = 0; s < 2; ++s) {
            score[q][s] = parity_score(pair.x, pair.y, q, s == 0 ? 1 : -1);
            if (score[q][s] > lag_best + 1e-12) {
                lag_best = score[q][s];
                bq = q;
                bs = s;
            }
        }
    }

    AlignResult res;
    res.parity_score = lag_best;
    res.quadrant = bq;
    res.bpsk_sign = bs == 0 ? 1 : -1;
    res.lag = best_lag;

    if (reference_bits != nullptr && reference_bits->size() > 0) {
        // Parity cannot separate the codebook automorphisms; test every
        // hypothesis whose score is statistically tied with the best.
        double best_agree = -1.0;
        for (int q = 0; q < 4; ++q) {
            for (int s = 0; s < 2; ++s) {
                if (score[q][s] < lag_best - 0.02) continue;
                std::vector<cplx> xr = rotate_quadrant(pair.x, q);
                std::vector<cplx> yr = pair.y;
                if (s == 1)
                    for (auto& v : yr) v = -v;
                const double agree = reference_agreement(xr, yr, *reference_bits);
                if (agree > best_agree + 1e-12) {
                    best_agree = agree;
                    res.quadrant = q;
                    res.bpsk_sign = s == 0 ? 1 : -1;
                }
            }
        }
        res.resolved_by_reference = true;
    }

    res.x = rotate_quadrant(pair.x, res.quadrant);
    res.y = pair.y;
    if (res.bpsk_sign < 0)
        for (auto& v : res.y) v = -v;
    return res;
}

BitStream decide_and_decode(const std::vector<cplx>& x_symbols,
                            const std::vector<cplx>& y_symbols, Format format) {
    if (x_symbols.size() != y_symbols.size())
        throw ShapeError("decide_and_decode: tributary length mismatch");

    BitStream out;
    out.bits.reserve(2 * x_symbols.size());

    if (format == Format::Simplex3D) {
        static const Codebook cb = constellation::simplex_codebook();
        for (std::size_t k = 0; k < x_symbols.size(); ++k) {
            const SymbolVec4 r{x_symbols[k].real(), x_symbols[k].imag(), y_symbols[k].real(), 0.0};
            const auto d = constellation::demap_ml(cb, r);
            constellation::append_label_bits(cb, d.label, out.bits);
        }
        return out;
    }

    // DP-BPSK: sign decisions, then per-polarization differential decode.
    std::uint8_t prev_x = 0, prev_y = 0;
    for (std::size_t k = 0; k < x_symbols.size(); ++k) {
        const std::uint8_t dx = x_symbols[k].real() > 0.0 ? 1 : 0;
        const std::uint8_t dy = y_symbols[k].real() > 0.0 ? 1 : 0;
        out.bits.push_back(static_cast<std::uint8_t>(dx ^ prev_x));
        out.bits.push_back(static_cast<std::uint8_t>(dy ^ prev_y));
        prev_x = dx;
        prev_y = dy;
    }
    return out;
}

}  // namespace optsim::rxdsp
