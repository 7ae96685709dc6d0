#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "optsim/channel.hpp"
#include "optsim/constellation.hpp"
#include "optsim/dsp_math.hpp"
#include "optsim/harness.hpp"
#include "optsim/txchain.hpp"

namespace optsim::harness {

namespace {

Codebook codebook_by_name(const std::string& name) {
    if (name == "simplex3d") return constellation::simplex_codebook();
    if (name == "dpbpsk") return constellation::dpbpsk_codebook();
    throw ConfigError("unknown format '" + name + "' (expected simplex3d or dpbpsk)");
}

struct OsnrRange {
    double from = 0, to = 0, step = 0;
};

OsnrRange parse_range(const std::string& spec) {
    OsnrRange r;
    char c1 = 0, c2 = 0;
    std::istringstream ss(spec);
    if (!(ss >> r.from >> c1 >> r.to >> c2 >> r.step) || c1 != ':' || c2 != ':' || !ss.eof())
        throw ConfigError("bad range '" + spec + "', expected a:b:step");
    if (r.from > r.to) throw ConfigError("range start " + std::to_string(r.from) +
                                         " exceeds end " + std::to_string(r.to));
    if (!(r.step > 0.0)) throw ConfigError("range step must be positive");
    return r;
}

int cmd_codebook(const std::string& format) {
    const Codebook cb = codebook_by_name(format);
    std::printf("format: %s\n", cb.name().c_str());
    std::printf("bits  Ix  Qx  Iy  Qy\n");
    for (std::size_t i = 0; i < cb.size(); ++i) {
        const auto& p = cb.point(i);
        std::string bits;
        for (int b = cb.bits_per_symbol() - 1; b >= 0; --b)
            bits += ((cb.label(i) >> b) & 1u) ? '1' : '0';
        std::printf("%s   %+.0f  %+.0f  %+.0f  %+.0f\n", bits.c_str(), p.ix, p.qx, p.iy, p.qy);
    }
    std::printf("D_min = %.4f\n", constellation::min_distance(cb));
    std::printf("P_avg = %g\n", constellation::avg_power(cb));
    const Codebook ref = constellation::dpbpsk_codebook();
    std::printf("asymptotic gain vs dpbpsk = %.4f dB\n",
                constellation::asymptotic_gain_db(cb, ref));
    return 0;
}

int cmd_theory(const std::string& format, const std::string& range_spec, double symbol_rate,
               std::uint64_t mc_symbols, std::uint64_t seed, const std::string& out_path) {
    const Codebook cb = codebook_by_name(format);
    const OsnrRange r = parse_range(range_spec);

    std::ostringstream os;
    os << "osnr_db,union_bound_ber";
    if (mc_symbols > 0) os << ",mc_ber,mc_errors,mc_bits";
    os << "\n";
    for (double x = r.from; x <= r.to + 1e-9; x += r.step) {
        const NoiseSigma sig = constellation::osnr_to_sigma(x, symbol_rate, cb);
        os << metrics::format_double(x) << ','
           << metrics::format_double(constellation::union_bound_ber(cb, sig));
        if (mc_symbols > 0) {
            const auto mc = constellation::mc_ber_awgn(cb, sig, mc_symbols, seed);
            os << ',' << metrics::format_double(mc.ber) << ',' << mc.errors << ',' << mc.bits;
        }
        os << '\n';
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << os.str();
    } else {
        std::ofstream f(out_path, std::ios::trunc);
        if (!f) throw SimError("cannot write " + out_path);
        f << os.str();
        std::cerr << "wrote " << out_path << "\n";
    }
    return 0;
}

bool check(const char* name, bool ok) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
    return ok;
}

int cmd_selftest() {
    bool all = true;
    {
        const Codebook s = constellation::simplex_codebook();
        const Codebook d = constellation::dpbpsk_codebook();
        all &= check("codebook geometry",
                     std::abs(constellation::min_distance(s) - std::sqrt(8.0)) < 1e-12 &&
                         std::abs(constellation::avg_power(s) - 3.0) < 1e-12 &&
                         std::abs(constellation::min_distance(d) - 2.0) < 1e-12 &&
                         std::abs(constellation::avg_power(d) - 2.0) < 1e-12);
        all &= check("asymptotic gain 1.2494 dB",
                     std::abs(constellation::asymptotic_gain_db(s, d) - 1.2494) < 1e-4);
    }
    {
        const BitStream db = txchain::de_bruijn_sequence(11);
        bool ok = db.size() == 2048;
        std::vector<bool> seen(2048, false);
        for (std::size_t i = 0; i < 2048 && ok; ++i) {
            unsigned w = 0;
            for (int b = 0; b < 11; ++b) w = (w << 1) | db.bits[(i + b) % 2048];
            if (seen[w]) ok = false;
            seen[w] = true;
        }
        all &= check("de Bruijn 2^11 window property", ok);
    }
    {
        std::mt19937_64 rng(7);
        BitStream b;
        for (int i = 0; i < 997; ++i) b.bits.push_back(rng() & 1u);
        const BitStream rt = txchain::differential_decode(txchain::differential_encode(b));
        all &= check("differential round trip", rt.bits == b.bits);
    }
    {
        const Codebook s = constellation::simplex_codebook();
        const auto a = constellation::mc_ber_awgn(s, {0.4}, 20000, 123);
        const auto b = constellation::mc_ber_awgn(s, {0.4}, 20000, 123);
        all &= check("mc_ber_awgn determinism", a.errors == b.errors && a.ber == b.ber);
    }
    {
        const Codebook s = constellation::simplex_codebook();
        const auto syms = constellation::map_bits(s, txchain::de_bruijn_sequence(10));
        const auto drive = txchain::generate_drive(
            syms, 4, std::numeric_limits<double>::infinity(), 16e9);
        const auto wave = txchain::modulate(drive, 0.0);
        const auto noisy = channel::load_awgn_to_osnr(wave, 12.0, 99);
        const double meas = channel::measure_osnr(noisy, wave);
        all &= check("osnr calibration 12 dB +-0.05", std::abs(meas - 12.0) < 0.05);

        const auto disp = channel::apply_cd(wave, 4950.0);
        const auto back = channel::apply_cd(disp, -4950.0);
        all &= check("cd inverse pair", relative_rms_error(back.ex, wave.ex) < 1e-6);
    }
    return all ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"coherent optical transmission simulator (3D-Simplex vs DP-BPSK)"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario config and write outputs");
    std::string config_path;
    std::string out_dir = ".";
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    bool dump_const = false;
    run->add_option("config", config_path, "scenario config file")->required();
    run->add_option("--workers", workers, "worker threads");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--dump-constellations", dump_const, "write per-point symbol dumps");

    // theory
    auto* theory = app.add_subcommand("theory", "emit reference BER curves");
    std::string t_format;
    std::string t_range;
    double t_rate = 16e9;
    std::uint64_t t_mc = 0;
    std::uint64_t t_seed = 1;
    std::string t_out;
    theory->add_option("--format", t_format, "simplex3d or dpbpsk")->required();
    theory->add_option("--osnr-range", t_range, "a:b:step in dB")->required();
    theory->add_option("--symbol-rate", t_rate, "symbol rate in Hz");
    theory->add_option("--mc", t_mc, "Monte-Carlo symbols per point (0 = off)");
    theory->add_option("--seed", t_seed, "Monte-Carlo seed");
    theory->add_option("--out", t_out, "output file ('-' for stdout)");

    // codebook
    auto* codebook = app.add_subcommand("codebook", "print constellation points and figures");
    std::string c_format;
    codebook->add_option("--format", c_format, "simplex3d or dpbpsk")->required();

    // selftest
    app.add_subcommand("selftest", "run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand("codebook")) return cmd_codebook(c_format);
        if (app.got_subcommand("theory"))
            return cmd_theory(t_format, t_range, t_rate, t_mc, t_seed, t_out);
        if (app.got_subcommand("selftest")) return cmd_selftest();
        if (app.got_subcommand("run")) {
            const Scenario s = load_scenario(config_path);
            const RunResult r = run_scenario(s, workers);
            const auto files = write_outputs(r, out_dir, dump_const, workers);
            std::cerr << "completed in " << r.wall_seconds << " s\n";
            for (const auto& f : files) std::cerr << "wrote " << f << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParameterError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace optsim::harness
