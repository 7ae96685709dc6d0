#include "optsim/dsp_math.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <unordered_map>

namespace optsim {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace {

// Twiddle tables are cached per size; read-mostly after warmup.
const std::vector<cplx>& twiddles_for(std::size_t n) {
    static std::mutex mu;
    static std::unordered_map<std::size_t, std::vector<cplx>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> tw(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        tw[k] = cplx(std::cos(ang), std::sin(ang));
    }
    return cache.emplace(n, std::move(tw)).first->second;
}

}  // namespace

namespace {

void fft_radix2(std::vector<cplx>& data, bool inverse);

// Bluestein chirp-z: re-expresses an arbitrary-length DFT as a cyclic
// convolution carried by power-of-two FFTs. Chirp exponents are reduced
// mod 2n in integer arithmetic so the phase stays exact for long records.
void fft_bluestein(std::vector<cplx>& data, bool inverse) {
    const std::size_t n = data.size();
    const std::size_t m = next_power_of_two(2 * n + 1);
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t e = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        double ang = -M_PI * static_cast<double>(e) / static_cast<double>(n);
        if (inverse) ang = -ang;
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> a(m, cplx(0.0, 0.0)), b(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) a[k] = data[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
    fft_radix2(a, false);
    fft_radix2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_radix2(a, true);
    for (std::size_t k = 0; k < n; ++k) data[k] = a[k] * chirp[k];
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& x : data) x *= scale;
    }
}

}  // namespace

void fft_inplace(std::vector<cplx>& data, bool inverse) {
    if (data.size() <= 1) return;
    if (is_power_of_two(data.size()))
        fft_radix2(data, inverse);
    else
        fft_bluestein(data, inverse);
}

namespace {

void fft_radix2(std::vector<cplx>& data, bool inverse) {
    const std::size_t n = data.size();
    if (n <= 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    const std::vector<cplx>& tw = twiddles_for(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx w = tw[k * stride];
                if (inverse) w = std::conj(w);
                cplx u = data[i + k];
                cplx v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
            }
        }
    }

    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& x : data) x *= scale;
    }
}

}  // namespace

std::vector<cplx> fft(std::vector<cplx> data) {
    fft_inplace(data, false);
    return data;
}

std::vector<cplx> ifft(std::vector<cplx> data) {
    fft_inplace(data, true);
    return data;
}

double fft_bin_freq(std::size_t k, std::size_t n, double fs) {
    const double half = static_cast<double>(n) / 2.0;
    double idx = static_cast<double>(k);
    if (idx >= half) idx -= static_cast<double>(n);
    return idx * fs / static_cast<double>(n);
}

double q_func(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation to the standard normal quantile.
double norm_quantile_seed(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double q_func_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("q_func_inv: p must be in (0, 1)");
    // Q(x) = p  <=>  x = -Phi^{-1}(p)
    double x = -norm_quantile_seed(p);
    // Halley refinement on f(x) = Q(x) - p; f' = -phi(x), f'' = x*phi(x).
    for (int it = 0; it < 3; ++it) {
        double f = q_func(x) - p;
        double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (pdf == 0.0) break;
        double u = f / (-pdf);
        x = x - u / (1.0 + 0.5 * u * x);
    }
    return x;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double mean_power(const std::vector<cplx>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : v) acc += std::norm(s);
    return acc / static_cast<double>(v.size());
}

double mean_power(const DualPolWaveform& w) {
    if (w.ex.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.ex.size(); ++i) acc += std::norm(w.ex[i]) + std::norm(w.ey[i]);
    return acc / static_cast<double>(w.ex.size());
}

double relative_rms_error(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    if (a.size() != b.size()) throw ShapeError("relative_rms_error: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

double relative_rms_error(const DualPolWaveform& a, const DualPolWaveform& b) {
    if (a.size() != b.size()) throw ShapeError("relative_rms_error: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a.ex[i] - b.ex[i]) + std::norm(a.ey[i] - b.ey[i]);
        den += std::norm(b.ex[i]) + std::norm(b.ey[i]);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

}  // namespace optsim
