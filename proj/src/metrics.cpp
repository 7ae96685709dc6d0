#include "optsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "optsim/dsp_math.hpp"

namespace optsim::metrics {

SyncResult synchronize(const BitStream& ref_bits, const BitStream& rx_bits) {
    const std::size_t n = ref_bits.size();
    const std::size_t m = rx_bits.size();
    if (n == 0) throw ParameterError("synchronize: empty reference");
    if (m < n) throw ShapeError("synchronize: rx shorter than reference");

    SyncResult best;
    best.agreement = -1.0;
    for (std::size_t off = 0; off < n; ++off) {
        std::size_t agree = 0;
        std::size_t ri = off;
        for (std::size_t i = 0; i < m; ++i) {
            agree += (rx_bits.bits[i] == ref_bits.bits[ri]) ? 1u : 0u;
            if (++ri == n) ri = 0;
        }
        const double frac = static_cast<double>(agree) / static_cast<double>(m);
        if (frac > best.agreement + 1e-15) {
            best.agreement = frac;
            best.offset = off;
            best.polarity = 1;
        }
        const double comp = 1.0 - frac;
        if (comp > best.agreement + 1e-15) {
            best.agreement = comp;
            best.offset = off;
            best.polarity = -1;
        }
    }
    if (best.agreement < 0.6)
        throw SyncError("synchronize: best agreement " + std::to_string(best.agreement) +
                        " below 0.6");
    return best;
}

BerPoint count_ber(const BitStream& ref_bits, const BitStream& rx_bits, const SyncResult& sync) {
    const std::size_t n = ref_bits.size();
    const std::size_t m = rx_bits.size();
    if (n == 0 || m < n) throw ShapeError("count_ber: stream sizes invalid");

    std::uint64_t errors = 0;
    std::size_t ri = sync.offset;
    for (std::size_t i = 0; i < m; ++i) {
        std::uint8_t r = rx_bits.bits[i];
        if (sync.polarity < 0) r ^= 1u;
        errors += (r != ref_bits.bits[ri]) ? 1u : 0u;
        if (++ri == n) ri = 0;
    }
    BerPoint p;
    p.bits_counted = m;
    p.errors = errors;
    p.ber = static_cast<double>(errors) / static_cast<double>(m);
    p.low_confidence = errors < kMinErrorsForConfidence;
    return p;
}

BerCurve fit_curve(std::vector<BerPoint> points) {
    std::sort(points.begin(), points.end(),
              [](const BerPoint& a, const BerPoint& b) { return a.x_value < b.x_value; });

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (const auto& p : points) {
        if (p.ber <= 0.0) continue;
        const double y = std::log10(p.ber);
        sx += p.x_value;
        sy += y;
        sxx += p.x_value * p.x_value;
        sxy += p.x_value * y;
        ++n;
    }
    BerCurve curve;
    curve.points = std::move(points);
    if (n < 2) throw FitError("fit_curve: need at least 2 points with ber > 0");
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (denom == 0.0) throw FitError("fit_curve: degenerate abscissa");
    Regression r;
    r.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    r.intercept = (sy - r.slope * sx) / static_cast<double>(n);
    curve.regression = r;
    return curve;
}

RequiredOsnr required_osnr(const BerCurve& curve, double target_ber) {
    if (!curve.regression) throw FitError("required_osnr: curve has no regression");
    if (!(target_ber > 0.0)) throw DomainError("required_osnr: target ber must be positive");
    const auto& r = *curve.regression;
    if (r.slope == 0.0) throw FitError("required_osnr: zero slope");

    RequiredOsnr out;
    out.osnr_db = (std::log10(target_ber) - r.intercept) / r.slope;

    double lo = 0.0, hi = 0.0;
    bool have_range = false;
    for (const auto& p : curve.points) {
        if (p.ber <= 0.0) continue;
        if (!have_range) {
            lo = hi = p.x_value;
            have_range = true;
        } else {
            lo = std::min(lo, p.x_value);
            hi = std::max(hi, p.x_value);
        }
    }
    if (have_range && (out.osnr_db < lo - 2.0 || out.osnr_db > hi + 2.0)) out.extrapolated = true;
    return out;
}

double q_from_ber(double ber) {
    if (!(ber > 0.0 && ber < 0.5)) throw DomainError("q_from_ber: ber must be in (0, 0.5)");
    // BER = Q(q_lin)  =>  q_lin = Q^-1(ber)
    const double q_lin = q_func_inv(ber);
    return 20.0 * std::log10(q_lin);
}

double ber_from_q_db(double q_db) {
    const double q_lin = std::pow(10.0, q_db / 20.0);
    return q_func(q_lin);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& os, const BerCurve& curve) {
    os << "x_value,ber,bits_counted,errors\n";
    for (const auto& p : curve.points) {
        os << format_double(p.x_value) << ',' << format_double(p.ber) << ',' << p.bits_counted
           << ',' << p.errors << '\n';
    }
    if (curve.regression) {
        os << "# regression slope=" << format_double(curve.regression->slope)
           << " intercept=" << format_double(curve.regression->intercept) << '\n';
    }
}

}  // namespace optsim::metrics
