#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "optsim/constellation.hpp"
#include "optsim/dsp_math.hpp"
#include "oracles.hpp"

using namespace optsim;
using namespace optsim::constellation;

namespace {

Codebook scaled(const Codebook& cb, double s) {
    std::vector<SymbolVec4> pts;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < cb.size(); ++i) {
        const auto& p = cb.point(i);
        pts.push_back({p.ix * s, p.qx * s, p.iy * s, p.qy * s});
        labels.push_back(cb.label(i));
    }
    return Codebook(cb.name() + "_scaled", cb.bits_per_symbol(), pts, labels);
}

// Reference AWGN run for a format as actually transmitted: DP-BPSK carries
// per-lane differential coding, the simplex format does not.
double format_ber_awgn(const Codebook& cb, bool differential, double sigma,
                       std::size_t n_symbols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_int_distribution<std::uint32_t> pick(0, 3);

    std::uint64_t errors = 0;
    std::uint32_t prev_tx = 0, prev_rx = 0;
    for (std::size_t k = 0; k < n_symbols; ++k) {
        const std::uint32_t data = pick(rng);
        std::uint32_t tx_label = data;
        if (differential) {
            tx_label = data ^ prev_tx;  // per-lane XOR == XOR of the 2-bit words
            prev_tx = tx_label;
        }
        SymbolVec4 r = cb.point(cb.index_of_label(tx_label));
        r.ix += gauss(rng);
        r.qx += gauss(rng);
        r.iy += gauss(rng);
        r.qy += gauss(rng);
        std::uint32_t rx_label = demap_ml(cb, r).label;
        if (differential) {
            const std::uint32_t decoded = rx_label ^ prev_rx;
            prev_rx = rx_label;
            rx_label = decoded;
        }
        const std::uint32_t diff = rx_label ^ data;
        errors += (diff & 1u) + ((diff >> 1) & 1u);
    }
    return static_cast<double>(errors) / (2.0 * static_cast<double>(n_symbols));
}

double osnr_db_for_sigma(const Codebook& cb, double sigma, double symbol_rate) {
    return linear_to_db(avg_power(cb) * symbol_rate / (4.0 * sigma * sigma * kRefBandwidthHz));
}

// Bisect the sigma at which the format reaches target_ber.
double sigma_at_ber(const Codebook& cb, bool differential, double target_ber,
                    std::size_t n_symbols, std::uint64_t seed) {
    double lo = 0.05, hi = 1.5;
    for (int it = 0; it < 14; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double ber = format_ber_awgn(cb, differential, mid, n_symbols, seed + it);
        if (ber < target_ber)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("simplex codebook matches the published points") {
    const Codebook cb = simplex_codebook();
    REQUIRE(cb.size() == 4);
    CHECK(cb.bits_per_symbol() == 2);

    const auto& p00 = cb.point(cb.index_of_label(0));
    CHECK(p00.ix == -1.0);
    CHECK(p00.qx == -1.0);
    CHECK(p00.iy == -1.0);
    CHECK(p00.qy == 0.0);

    const auto& p11 = cb.point(cb.index_of_label(3));
    CHECK(p11.ix == 1.0);
    CHECK(p11.qx == 1.0);
    CHECK(p11.iy == -1.0);
    CHECK(p11.qy == 0.0);

    // product identity over all four rows
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& p = cb.point(i);
        CHECK(p.iy == -p.ix * p.qx);
        CHECK(p.qy == 0.0);
    }
}

TEST_CASE("simplex is a regular tetrahedron") {
    const Codebook cb = simplex_codebook();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            const auto &a = cb.point(i), &b = cb.point(j);
            const double d = std::sqrt((a.ix - b.ix) * (a.ix - b.ix) + (a.qx - b.qx) * (a.qx - b.qx) +
                                       (a.iy - b.iy) * (a.iy - b.iy) + (a.qy - b.qy) * (a.qy - b.qy));
            CHECK(d == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
        }
    CHECK(min_distance(cb) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
    CHECK(avg_power(cb) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("dpbpsk codebook geometry") {
    const Codebook cb = dpbpsk_codebook();
    const auto& p00 = cb.point(cb.index_of_label(0));
    CHECK(p00.ix == -1.0);
    CHECK(p00.qx == 0.0);
    CHECK(p00.iy == -1.0);
    CHECK(p00.qy == 0.0);
    CHECK(min_distance(cb) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(avg_power(cb) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("codebook invariants are enforced") {
    std::vector<SymbolVec4> pts = {{1, 0, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    CHECK_THROWS_AS(Codebook("dup", 2, pts, {0, 1, 2, 3}), ParameterError);
    pts[1] = {2, 0, 0, 0};
    CHECK_THROWS_AS(Codebook("badlabel", 2, pts, {0, 1, 2, 2}), ParameterError);
    CHECK_THROWS_AS(Codebook("count", 1, pts, {0, 1}), ParameterError);
}

TEST_CASE("map_bits follows label order and rejects ragged input") {
    const Codebook cb = simplex_codebook();
    const std::vector<std::uint8_t> bits = {0, 0, 0, 1, 1, 0, 1, 1};
    const auto syms = map_bits(cb, bits);
    REQUIRE(syms.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(syms[i].ix == cb.point(i).ix);
        CHECK(syms[i].qx == cb.point(i).qx);
        CHECK(syms[i].iy == cb.point(i).iy);
    }

    const auto one = map_bits(cb, std::vector<std::uint8_t>{0, 0});
    REQUIRE(one.size() == 1);
    CHECK(one[0].ix == -1.0);
    CHECK(one[0].qx == -1.0);
    CHECK(one[0].iy == -1.0);

    CHECK(map_bits(cb, std::vector<std::uint8_t>{}).empty());
    CHECK_THROWS_AS(map_bits(cb, std::vector<std::uint8_t>{1}), ShapeError);
}

TEST_CASE("demap_ml agrees with the brute-force oracle") {
    const Codebook cb = simplex_codebook();

    // exact point -> its own label at distance 0
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = demap_ml(cb, cb.point(i));
        CHECK(d.label == cb.label(i));
        CHECK(d.distance == 0.0);
    }

    const SymbolVec4 r{-0.9, -1.1, -0.8, 0.1};
    CHECK(demap_ml(cb, r).label == cb.label(oracles::nearest_index(cb.points(), r)));
    CHECK(demap_ml(cb, r).label == 0);

    // random received vectors against the oracle
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 0.8);
    for (int t = 0; t < 500; ++t) {
        const SymbolVec4 v{g(rng), g(rng), g(rng), g(rng)};
        CHECK(demap_ml(cb, v).label == cb.label(oracles::nearest_index(cb.points(), v)));
    }
}

TEST_CASE("demap_ml tie-break is the lowest codebook index") {
    const Codebook cb = simplex_codebook();
    const auto d = demap_ml(cb, {0, 0, 0, 0});
    CHECK(d.label == cb.label(0));
    CHECK(d.distance == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("demap decisions are scale invariant") {
    const Codebook cb = simplex_codebook();
    const Codebook cb3 = scaled(cb, 3.7);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const SymbolVec4 v{g(rng), g(rng), g(rng), g(rng)};
        const SymbolVec4 v3{3.7 * v.ix, 3.7 * v.qx, 3.7 * v.iy, 3.7 * v.qy};
        CHECK(demap_ml(cb, v).label == demap_ml(cb3, v3).label);
    }
}

TEST_CASE("avg_power scales quadratically") {
    const Codebook cb = simplex_codebook();
    CHECK(avg_power(scaled(cb, 2.5)) == doctest::Approx(2.5 * 2.5 * 3.0).epsilon(1e-12));
}

TEST_CASE("asymptotic gain") {
    const Codebook s = simplex_codebook();
    const Codebook d = dpbpsk_codebook();
    CHECK(asymptotic_gain_db(s, d) == doctest::Approx(1.2494).epsilon(1e-4));
    CHECK(asymptotic_gain_db(s, s) == doctest::Approx(0.0));
    CHECK(asymptotic_gain_db(s, d) == doctest::Approx(-asymptotic_gain_db(d, s)).epsilon(1e-12));
}

TEST_CASE("union bound reduces to the BPSK closed form for dpbpsk") {
    const Codebook d = dpbpsk_codebook();
    for (double sigma : {0.25, 0.4, 0.5}) {
        // Analytic enumeration of the 12 ordered pairs: per point two
        // neighbors at distance 2 / Hamming 1 and one at sqrt 8 / Hamming 2.
        const double expected = oracles::gauss_tail(1.0 / sigma) +
                                oracles::gauss_tail(std::sqrt(2.0) / sigma);
        CHECK(union_bound_ber(d, {sigma}) == doctest::Approx(expected).epsilon(1e-12));
    }
    // asymptotically the cross-polarization term vanishes
    const double sigma = 0.25;
    CHECK(union_bound_ber(d, {sigma}) ==
          doctest::Approx(oracles::gauss_tail(1.0 / sigma)).epsilon(1e-3));
    CHECK_THROWS_AS(union_bound_ber(d, {0.0}), DomainError);
}

TEST_CASE("union bound tracks Monte-Carlo near 1e-3") {
    const Codebook s = simplex_codebook();
    const double sigma = 0.43;  // simplex lands in the 1e-3 decade here
    const auto mc = mc_ber_awgn(s, {sigma}, 400000, 2024);
    const double ub = union_bound_ber(s, {sigma});
    CHECK(ub >= mc.ber * 0.9);  // union bound is an upper bound modulo noise
    CHECK(ub <= mc.ber * 2.0);
    CHECK(mc.ber > 3e-4);
    CHECK(mc.ber < 3e-3);
}

TEST_CASE("mc_ber_awgn basics") {
    const Codebook s = simplex_codebook();
    const auto quiet = mc_ber_awgn(s, {1e-3}, 100000, 7);
    CHECK(quiet.errors == 0);

    const auto a = mc_ber_awgn(s, {0.5}, 50000, 99);
    const auto b = mc_ber_awgn(s, {0.5}, 50000, 99);
    CHECK(a.errors == b.errors);
    CHECK(a.ber == b.ber);

    CHECK_THROWS_AS(mc_ber_awgn(s, {0.5}, 0, 1), ParameterError);
}

TEST_CASE("mc_ber_awgn matches Q(1/sigma) for dpbpsk") {
    const Codebook d = dpbpsk_codebook();
    for (double sigma : {0.4, 0.5, 0.6}) {
        const auto mc = mc_ber_awgn(d, {sigma}, 1000000, 424242);
        const double p = oracles::gauss_tail(1.0 / sigma);
        const double tol = 3.0 * oracles::binom_std(p, static_cast<double>(mc.bits));
        CHECK(std::abs(mc.ber - p) < tol);
    }
    // spot value: sigma = 0.5 sits at Q(2)
    CHECK(oracles::gauss_tail(2.0) == doctest::Approx(0.0227501).epsilon(1e-4));
}

TEST_CASE("osnr_to_sigma calibration and limits") {
    const Codebook s = simplex_codebook();
    const double rs = 16e9;

    const double s10 = osnr_to_sigma(10.0, rs, s).sigma;
    const double s13 = osnr_to_sigma(10.0 + linear_to_db(2.0), rs, s).sigma;
    CHECK(s13 == doctest::Approx(s10 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(osnr_to_sigma(13.0, rs, s).sigma ==
          doctest::Approx(s10 / std::sqrt(2.0)).epsilon(2e-3));

    CHECK(osnr_to_sigma(200.0, rs, s).sigma < 1e-9);
    CHECK(osnr_to_sigma(10.0, rs, s).sigma > osnr_to_sigma(11.0, rs, s).sigma);

    // closed-form round trip: sigma^2 = P_avg Rs / (4 OSNR B_ref)
    const double sigma = osnr_to_sigma(9.5, rs, s).sigma;
    CHECK(sigma * sigma ==
          doctest::Approx(3.0 * rs / (4.0 * db_to_linear(9.5) * 12.5e9)).epsilon(1e-12));

    // the returned sigma reproduces the union-bound decade under Monte-Carlo
    const auto mc = mc_ber_awgn(s, {sigma}, 2000000, 5150);
    const double ub = union_bound_ber(s, {sigma});
    CHECK(mc.ber > ub / 3.0);
    CHECK(mc.ber < ub * 1.5);

    CHECK_THROWS_AS(osnr_to_sigma(10.0, 0.0, s), ParameterError);
}

TEST_CASE("map -> demap is the identity on clean symbols") {
    for (const Codebook& cb : {simplex_codebook(), dpbpsk_codebook()}) {
        // all four labels
        for (std::uint32_t label = 0; label < 4; ++label) {
            const auto d = demap_ml(cb, cb.point(cb.index_of_label(label)));
            CHECK(d.label == label);
        }
        // random streams
        const auto bits = oracles::random_bits(2048, 314);
        const auto syms = map_bits(cb, bits);
        std::vector<std::uint8_t> rt;
        for (const auto& v : syms) append_label_bits(cb, demap_ml(cb, v).label, rt);
        CHECK(rt == bits);
    }
}

TEST_CASE("format OSNR gain at fixed target BER sits in the expected band") {
    // DP-BPSK is differentially encoded end to end; the simplex format is
    // not. The differential doubling offsets the simplex neighbor
    // multiplicity, which is what keeps the finite-BER gain near the
    // asymptotic 1.25 dB.
    const Codebook s = simplex_codebook();
    const Codebook d = dpbpsk_codebook();
    const double rs = 16e9;

    struct Target {
        double ber;
        std::size_t n;
    };
    for (const Target t : {Target{1e-3, 400000}, Target{3e-4, 800000}, Target{1e-4, 1600000}}) {
        const double sig_s = sigma_at_ber(s, false, t.ber, t.n, 1000);
        const double sig_d = sigma_at_ber(d, true, t.ber, t.n, 2000);
        const double gain = osnr_db_for_sigma(d, sig_d, rs) - osnr_db_for_sigma(s, sig_s, rs);
        INFO("target ", t.ber, " gain ", gain);
        CHECK(gain > 1.0);
        CHECK(gain < 1.35);
    }
}
