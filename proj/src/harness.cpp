#include "optsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "optsim/constellation.hpp"
#include "optsim/dsp_math.hpp"
#include "optsim/txchain.hpp"

namespace optsim::harness {

std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t point_index,
                         std::size_t frame_index) {
    return base_seed + static_cast<std::uint64_t>(point_index) * 1000 +
           static_cast<std::uint64_t>(frame_index);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role) {
    std::uint64_t z = seed ^ (role * 0x9E3779B97F4A7C15ull);
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t kRoleJones = 1;
constexpr std::uint64_t kRolePhase = 2;
constexpr std::uint64_t kRoleAwgn = 3;

ScenarioKind kind_from_name(const std::string& s) {
    if (s == "back_to_back") return ScenarioKind::BackToBack;
    if (s == "launch_power_sweep") return ScenarioKind::LaunchPowerSweep;
    if (s == "span_loss_sweep") return ScenarioKind::SpanLossSweep;
    throw ConfigError("unknown scenario kind '" + s + "'");
}

Format format_from_name(const std::string& s) {
    if (s == "simplex3d") return Format::Simplex3D;
    if (s == "dpbpsk") return Format::DpBpsk;
    throw ConfigError("unknown format '" + s + "'");
}

Codebook codebook_for(Format f) {
    return f == Format::Simplex3D ? constellation::simplex_codebook()
                                  : constellation::dpbpsk_codebook();
}

int log2_exact(std::size_t v) {
    int b = 0;
    while ((std::size_t{1} << b) < v) ++b;
    if ((std::size_t{1} << b) != v) return -1;
    return b;
}

}  // namespace

std::string kind_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::BackToBack: return "back_to_back";
        case ScenarioKind::LaunchPowerSweep: return "launch_power_sweep";
        case ScenarioKind::SpanLossSweep: return "span_loss_sweep";
    }
    return "?";
}

std::string format_name(Format f) { return f == Format::Simplex3D ? "simplex3d" : "dpbpsk"; }

Scenario scenario_from_table(const config::Table& t) {
    Scenario s;
    s.kind = kind_from_name(t.text("scenario.kind"));
    s.format = format_from_name(t.text("scenario.format"));
    s.symbol_rate = t.number("scenario.symbol_rate_hz");
    s.sweep_values = t.number_list("scenario.sweep");
    s.frames_per_point = static_cast<std::size_t>(t.number_or("scenario.frames_per_point", 8));
    s.base_seed = static_cast<std::uint64_t>(t.number_or("scenario.base_seed", 1));
    s.frame_symbols = static_cast<std::size_t>(t.number_or("scenario.frame_symbols", 2048));

    s.tx.samples_per_symbol = static_cast<int>(t.number_or("tx.samples_per_symbol", 4));
    s.tx.dac_bandwidth_hz = t.number_or("tx.dac_bandwidth_hz", 13e9);
    s.tx.launch_power_dbm = t.number_or("tx.launch_power_dbm", 0.0);

    s.impairments.jones.alpha = t.number_or("impairments.jones_alpha_rad", 0.0);
    s.impairments.jones.phi = t.number_or("impairments.jones_phi_rad", 0.0);
    s.impairments.jones.theta = t.number_or("impairments.jones_theta_rad", 0.0);
    s.impairments.jones_random = t.boolean_or("impairments.jones_random", false);
    s.impairments.linewidth_total_hz = t.number_or("impairments.linewidth_total_hz", 0.0);
    s.impairments.freq_offset_hz = t.number_or("impairments.freq_offset_hz", 0.0);
    s.impairments.bpf_bandwidth_hz = t.number_or("impairments.bpf_bandwidth_hz", 0.0);
    s.impairments.awgn_off = t.boolean_or("impairments.awgn_off", false);

    s.dsp.ideal = t.boolean_or("dsp.ideal", false);
    s.dsp.num_taps = static_cast<int>(t.number_or("dsp.num_taps", 13));
    s.dsp.step_size = t.number_or("dsp.step_size", 1e-3);
    s.dsp.cma_radius_sq = t.number_or("dsp.cma_radius_sq", 2.0);
    s.dsp.convergence_symbols =
        static_cast<std::size_t>(t.number_or("dsp.convergence_symbols", 16384));
    s.dsp.measure_symbols = static_cast<std::size_t>(t.number_or("dsp.measure_symbols", 4096));
    s.dsp.phase_window = static_cast<int>(t.number_or("dsp.phase_window", 33));

    if (t.has("fiber.length_km")) {
        channel::FiberSpec f;
        f.length_km = t.number("fiber.length_km");
        f.attenuation_db_km = t.number_or("fiber.attenuation_db_km", 0.21);
        f.dispersion_ps_nm_km = t.number_or("fiber.dispersion_ps_nm_km", 16.5);
        f.gamma_per_w_km = t.number_or("fiber.gamma_per_w_km", 1.3);
        f.raman_gain_db = t.number_or("fiber.raman_gain_db", 20.0);
        f.raman_length_km = t.number_or("fiber.raman_length_km", 80.0);
        f.steps_per_km = t.number_or("fiber.steps_per_km", 1.0);
        s.fiber = f;
    }

    s.osnr_at_ref_db = t.number_or("launch_power.osnr_at_ref_db", 13.9);
    s.ref_power_dbm = t.number_or("launch_power.ref_power_dbm", 17.0);
    s.baseline_osnr_db = t.number_or("span_loss.baseline_osnr_db", 13.9);
    s.span_launch_power_dbm = t.number_or("span_loss.launch_power_dbm", 17.0);

    // ---- validation ----
    if (s.sweep_values.empty()) throw ConfigError("scenario.sweep must be nonempty");
    for (std::size_t i = 1; i < s.sweep_values.size(); ++i)
        if (!(s.sweep_values[i] > s.sweep_values[i - 1]))
            throw ConfigError("scenario.sweep must be strictly increasing");
    if (s.frames_per_point < 1) throw ConfigError("scenario.frames_per_point must be >= 1");
    if (log2_exact(s.frame_symbols) < 0)
        throw ConfigError("scenario.frame_symbols must be a power of two");
    if (log2_exact(static_cast<std::size_t>(s.tx.samples_per_symbol)) < 0 ||
        s.tx.samples_per_symbol < 2)
        throw ConfigError("tx.samples_per_symbol must be a power of two >= 2");
    if (!(s.symbol_rate > 0.0)) throw ConfigError("scenario.symbol_rate_hz must be positive");
    if (s.kind == ScenarioKind::BackToBack && s.fiber)
        throw ConfigError("back_to_back scenario must not define a fiber table");
    if (s.kind != ScenarioKind::BackToBack && !s.fiber)
        throw ConfigError(kind_name(s.kind) + " scenario requires a fiber table");
    if (s.dsp.ideal && s.kind != ScenarioKind::BackToBack)
        throw ConfigError("dsp.ideal is only meaningful for back_to_back");
    if (s.impairments.bpf_bandwidth_hz < 0.0) throw ConfigError("bpf bandwidth must be >= 0");
    return s;
}

Scenario load_scenario(const std::string& path) {
    return scenario_from_table(config::Table::parse_file(path));
}

std::string scenario_to_config_text(const Scenario& s) {
    std::ostringstream os;
    auto num = [](double v) { return metrics::format_double(v); };
    os << "schema_version = " << kSchemaVersion << "\n\n";
    os << "[scenario]\n";
    os << "kind = \"" << kind_name(s.kind) << "\"\n";
    os << "format = \"" << format_name(s.format) << "\"\n";
    os << "symbol_rate_hz = " << num(s.symbol_rate) << "\n";
    os << "sweep = [";
    for (std::size_t i = 0; i < s.sweep_values.size(); ++i)
        os << (i ? ", " : "") << num(s.sweep_values[i]);
    os << "]\n";
    os << "frames_per_point = " << s.frames_per_point << "\n";
    os << "base_seed = " << s.base_seed << "\n";
    os << "frame_symbols = " << s.frame_symbols << "\n\n";

    os << "[tx]\n";
    os << "samples_per_symbol = " << s.tx.samples_per_symbol << "\n";
    os << "dac_bandwidth_hz = " << num(s.tx.dac_bandwidth_hz) << "\n";
    os << "launch_power_dbm = " << num(s.tx.launch_power_dbm) << "\n\n";

    os << "[impairments]\n";
    os << "jones_alpha_rad = " << num(s.impairments.jones.alpha) << "\n";
    os << "jones_phi_rad = " << num(s.impairments.jones.phi) << "\n";
    os << "jones_theta_rad = " << num(s.impairments.jones.theta) << "\n";
    os << "jones_random = " << (s.impairments.jones_random ? "true" : "false") << "\n";
    os << "linewidth_total_hz = " << num(s.impairments.linewidth_total_hz) << "\n";
    os << "freq_offset_hz = " << num(s.impairments.freq_offset_hz) << "\n";
    os << "bpf_bandwidth_hz = " << num(s.impairments.bpf_bandwidth_hz) << "\n";
    os << "awgn_off = " << (s.impairments.awgn_off ? "true" : "false") << "\n\n";

    os << "[dsp]\n";
    os << "ideal = " << (s.dsp.ideal ? "true" : "false") << "\n";
    os << "num_taps = " << s.dsp.num_taps << "\n";
    os << "step_size = " << num(s.dsp.step_size) << "\n";
    os << "cma_radius_sq = " << num(s.dsp.cma_radius_sq) << "\n";
    os << "convergence_symbols = " << s.dsp.convergence_symbols << "\n";
    os << "measure_symbols = " << s.dsp.measure_symbols << "\n";
    os << "phase_window = " << s.dsp.phase_window << "\n";

    if (s.fiber) {
        os << "\n[fiber]\n";
        os << "length_km = " << num(s.fiber->length_km) << "\n";
        os << "attenuation_db_km = " << num(s.fiber->attenuation_db_km) << "\n";
        os << "dispersion_ps_nm_km = " << num(s.fiber->dispersion_ps_nm_km) << "\n";
        os << "gamma_per_w_km = " << num(s.fiber->gamma_per_w_km) << "\n";
        os << "raman_gain_db = " << num(s.fiber->raman_gain_db) << "\n";
        os << "raman_length_km = " << num(s.fiber->raman_length_km) << "\n";
        os << "steps_per_km = " << num(s.fiber->steps_per_km) << "\n";
    }
    if (s.kind == ScenarioKind::LaunchPowerSweep) {
        os << "\n[launch_power]\n";
        os << "osnr_at_ref_db = " << num(s.osnr_at_ref_db) << "\n";
        os << "ref_power_dbm = " << num(s.ref_power_dbm) << "\n";
    }
    if (s.kind == ScenarioKind::SpanLossSweep) {
        os << "\n[span_loss]\n";
        os << "baseline_osnr_db = " << num(s.baseline_osnr_db) << "\n";
        os << "launch_power_dbm = " << num(s.span_launch_power_dbm) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Frame pipeline
// ---------------------------------------------------------------------------

namespace {

struct FrameBits {
    BitStream source;  // the cyclic reference frame
    BitStream mapped;  // after per-lane differential encoding when required
};

FrameBits make_frame_bits(const Scenario& s) {
    const std::size_t frame_bits = s.frame_symbols * 2;
    const int order = log2_exact(frame_bits);
    if (order < 0) throw ConfigError("frame bit count must be a power of two");
    FrameBits fb;
    fb.source = txchain::de_bruijn_sequence(order);
    if (s.format == Format::DpBpsk) {
        // Split into the two polarization lanes, differentially encode each,
        // re-interleave. The simplex format needs no differential encoding.
        BitStream lane_x, lane_y;
        for (std::size_t i = 0; i < fb.source.size(); i += 2) {
            lane_x.bits.push_back(fb.source.bits[i]);
            lane_y.bits.push_back(fb.source.bits[i + 1]);
        }
        const BitStream dx = txchain::differential_encode(lane_x);
        const BitStream dy = txchain::differential_encode(lane_y);
        fb.mapped.bits.reserve(fb.source.size());
        for (std::size_t i = 0; i < dx.size(); ++i) {
            fb.mapped.bits.push_back(dx.bits[i]);
            fb.mapped.bits.push_back(dy.bits[i]);
        }
    } else {
        fb.mapped = fb.source;
    }
    return fb;
}

double point_osnr_db(const Scenario& s, double sweep_value) {
    switch (s.kind) {
        case ScenarioKind::BackToBack: return sweep_value;
        case ScenarioKind::LaunchPowerSweep:
            return s.osnr_at_ref_db + (sweep_value - s.ref_power_dbm);
        case ScenarioKind::SpanLossSweep: return s.baseline_osnr_db - sweep_value;
    }
    return sweep_value;
}

double point_launch_dbm(const Scenario& s, double sweep_value) {
    switch (s.kind) {
        case ScenarioKind::BackToBack: return s.tx.launch_power_dbm;
        case ScenarioKind::LaunchPowerSweep: return sweep_value;
        case ScenarioKind::SpanLossSweep: return s.span_launch_power_dbm;
    }
    return s.tx.launch_power_dbm;
}

std::vector<double> downsample_traj(const std::vector<double>& traj, std::size_t max_len = 128) {
    if (traj.size() <= max_len) return traj;
    std::vector<double> out;
    out.reserve(max_len);
    const std::size_t stride = (traj.size() + max_len - 1) / max_len;
    for (std::size_t i = 0; i < traj.size(); i += stride) out.push_back(traj[i]);
    return out;
}

// Symbol-domain reference path: calibrated AWGN, ML decisions, no waveform
// synthesis. This is the "ideal DSP" curve everything else is compared to.
FrameOutcome run_frame_ideal(const Scenario& s, double osnr_db, std::uint64_t seed,
                             const FrameBits& fb, const Codebook& cb) {
    const NoiseSigma sigma = constellation::osnr_to_sigma(osnr_db, s.symbol_rate, cb);
    const std::size_t n_sym = std::max<std::size_t>(s.dsp.measure_symbols, 1);

    std::mt19937_64 rng(derive_seed(seed, kRoleAwgn));
    std::normal_distribution<double> gauss(0.0, sigma.sigma);

    const std::vector<SymbolVec4> frame_syms = constellation::map_bits(cb, fb.mapped);
    BitStream decoded;
    decoded.bits.reserve(2 * n_sym);
    for (std::size_t k = 0; k < n_sym; ++k) {
        SymbolVec4 r = frame_syms[k % frame_syms.size()];
        r.ix += gauss(rng);
        r.qx += gauss(rng);
        r.iy += gauss(rng);
        r.qy += gauss(rng);
        const auto d = constellation::demap_ml(cb, r);
        constellation::append_label_bits(cb, d.label, decoded.bits);
    }

    if (s.format == Format::DpBpsk) {
        BitStream lane_x, lane_y;
        for (std::size_t i = 0; i < decoded.size(); i += 2) {
            lane_x.bits.push_back(decoded.bits[i]);
            lane_y.bits.push_back(decoded.bits[i + 1]);
        }
        const BitStream bx = txchain::differential_decode(lane_x);
        const BitStream by = txchain::differential_decode(lane_y);
        decoded.bits.clear();
        for (std::size_t i = 0; i < bx.size(); ++i) {
            decoded.bits.push_back(bx.bits[i]);
            decoded.bits.push_back(by.bits[i]);
        }
    }

    // Alignment is known in the symbol-domain path.
    std::uint64_t errors = 0;
    for (std::size_t i = 0; i < decoded.size(); ++i)
        errors += decoded.bits[i] != fb.source.bits[i % fb.source.size()] ? 1u : 0u;

    FrameOutcome out;
    out.bits = decoded.size();
    out.errors = errors;
    out.report.converged = true;
    return out;
}

std::vector<cplx> slice(const std::vector<cplx>& v, std::size_t from, std::size_t count) {
    return std::vector<cplx>(v.begin() + static_cast<std::ptrdiff_t>(from),
                             v.begin() + static_cast<std::ptrdiff_t>(from + count));
}

void normalize_to_power(std::vector<cplx>& v, double target_power) {
    const double p = mean_power(v);
    if (p <= 0.0) return;
    const double g = std::sqrt(target_power / p);
    for (auto& z : v) z *= g;
}

}  // namespace

FrameOutcome run_single_frame(const Scenario& s, double sweep_value, std::uint64_t seed,
                              bool keep_dump) {
    const Codebook cb = codebook_for(s.format);
    const FrameBits fb = make_frame_bits(s);
    const double osnr_db = point_osnr_db(s, sweep_value);

    if (s.dsp.ideal) return run_frame_ideal(s, osnr_db, seed, fb, cb);

    // ---- transmitter ----
    const std::size_t margin = 256;
    const std::size_t needed = s.dsp.convergence_symbols + s.dsp.measure_symbols + margin;
    std::size_t tiles = 1;
    while (tiles * s.frame_symbols < needed) tiles *= 2;
    const std::size_t total_syms = tiles * s.frame_symbols;

    std::vector<SymbolVec4> frame_syms = constellation::map_bits(cb, fb.mapped);
    std::vector<SymbolVec4> symbols;
    symbols.reserve(total_syms);
    for (std::size_t i = 0; i < total_syms; ++i) symbols.push_back(frame_syms[i % frame_syms.size()]);

    const double dac_bw = s.tx.dac_bandwidth_hz > 0.0
                              ? s.tx.dac_bandwidth_hz
                              : std::numeric_limits<double>::infinity();
    const DriveWaveform drive =
        txchain::generate_drive(symbols, s.tx.samples_per_symbol, dac_bw, s.symbol_rate);
    DualPolWaveform wave = txchain::modulate(drive, point_launch_dbm(s, sweep_value));

    // ---- channel ----
    channel::JonesAngles jones = s.impairments.jones;
    if (s.impairments.jones_random) {
        std::mt19937_64 jrng(derive_seed(seed, kRoleJones));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        jones.alpha = uni(jrng) * M_PI;
        jones.phi = uni(jrng) * 2.0 * M_PI;
        jones.theta = uni(jrng) * 2.0 * M_PI;
    }
    if (jones.alpha != 0.0 || jones.phi != 0.0 || jones.theta != 0.0)
        wave = channel::apply_jones_rotation(wave, jones);

    if (s.fiber) wave = channel::ssfm_span(wave, *s.fiber);

    if (s.impairments.linewidth_total_hz > 0.0)
        wave = channel::apply_phase_noise(wave, s.impairments.linewidth_total_hz,
                                          derive_seed(seed, kRolePhase));
    if (s.impairments.freq_offset_hz != 0.0)
        wave = channel::apply_freq_offset(wave, s.impairments.freq_offset_hz);

    if (!s.impairments.awgn_off)
        wave = channel::load_awgn_to_osnr(wave, osnr_db, derive_seed(seed, kRoleAwgn));

    if (s.impairments.bpf_bandwidth_hz > 0.0)
        wave = channel::optical_bpf(wave, s.impairments.bpf_bandwidth_hz);

    // ---- receiver ----
    if (s.fiber)
        wave = rxdsp::cd_compensate(wave, s.fiber->dispersion_ps_nm_km * s.fiber->length_km);

    DualPolWaveform two_sps = rxdsp::clock_recover(wave, s.symbol_rate);
    {
        const double p = mean_power(two_sps);
        if (p <= 0.0) throw DomainError("pipeline: received power is zero");
        const double g = std::sqrt(constellation::avg_power(cb) / p);
        for (auto& z : two_sps.ex) z *= g;
        for (auto& z : two_sps.ey) z *= g;
    }

    rxdsp::EqualizerConfig eq_cfg;
    eq_cfg.num_taps = s.dsp.num_taps;
    eq_cfg.step_size = s.dsp.step_size;
    eq_cfg.cma_radius_sq = s.dsp.cma_radius_sq;
    eq_cfg.convergence_symbols = s.dsp.convergence_symbols;
    eq_cfg.mode = s.format == Format::Simplex3D ? rxdsp::EqMode::SimplexCombined
                                                : rxdsp::EqMode::BpskDD;
    const rxdsp::EqualizerOutput eq = rxdsp::butterfly_equalize(two_sps, eq_cfg);

    const std::size_t tail_guard = 64;
    if (eq.x.size() < s.dsp.convergence_symbols + tail_guard + 16)
        throw ConvergenceError("pipeline: record too short after equalization");
    const std::size_t avail = eq.x.size() - s.dsp.convergence_symbols - tail_guard;
    const std::size_t meas = std::min(s.dsp.measure_symbols, avail);

    std::vector<cplx> x = slice(eq.x, s.dsp.convergence_symbols, meas);
    std::vector<cplx> y = slice(eq.y, s.dsp.convergence_symbols, meas);

    FrameOutcome out;
    out.report.singularity_resets = eq.singularity_resets;
    out.report.row_swaps = eq.row_swaps;

    double freq_est = 0.0;
    if (x.size() >= 4096) {
        try {
            freq_est = rxdsp::estimate_freq_offset(x, s.symbol_rate);
        } catch (const EstimationError&) {
            freq_est = 0.0;  // leave correction off; BER will reflect reality
        }
    }
    out.report.est_freq_offset_hz = freq_est;
    if (freq_est != 0.0) {
        x = rxdsp::derotate_freq(x, freq_est, s.symbol_rate);
        y = rxdsp::derotate_freq(y, freq_est, s.symbol_rate);
    }

    const bool x_is_qpsk = s.format == Format::Simplex3D;
    rxdsp::PhaseEstimate pe = rxdsp::carrier_phase_estimate(x, y, s.dsp.phase_window, x_is_qpsk);
    out.report.mean_phase_trajectory = downsample_traj(pe.phase_traj);

    if (s.format == Format::Simplex3D) {
        normalize_to_power(pe.x, 2.0);
        normalize_to_power(pe.y, 1.0);
        const rxdsp::AlignResult ar = rxdsp::tributary_align(pe.x, pe.y, &fb.source);
        out.report.tributary_quadrant = ar.quadrant;
        out.report.tributary_sign = ar.bpsk_sign;
        out.report.parity_score = ar.parity_score;
        const BitStream decoded = rxdsp::decide_and_decode(ar.x, ar.y, Format::Simplex3D);
        if (keep_dump) {
            out.dump_x = ar.x;
            out.dump_y = ar.y;
        }
        const metrics::SyncResult sync = metrics::synchronize(fb.source, decoded);
        const metrics::BerPoint p = metrics::count_ber(fb.source, decoded, sync);
        out.bits = p.bits_counted;
        out.errors = p.errors;
    } else {
        normalize_to_power(pe.x, 1.0);
        normalize_to_power(pe.y, 1.0);
        // The butterfly rows may settle on either polarization and at
        // slightly different delays, so each decoded lane is synchronized
        // on its own against both reference lanes and assigned greedily.
        const BitStream dec = rxdsp::decide_and_decode(pe.x, pe.y, Format::DpBpsk);
        BitStream lane_a, lane_b;
        for (std::size_t i = 0; i + 1 < dec.size(); i += 2) {
            lane_a.bits.push_back(dec.bits[i]);
            lane_b.bits.push_back(dec.bits[i + 1]);
        }
        BitStream ref_x, ref_y;
        for (std::size_t i = 0; i + 1 < fb.source.size(); i += 2) {
            ref_x.bits.push_back(fb.source.bits[i]);
            ref_y.bits.push_back(fb.source.bits[i + 1]);
        }
        auto lane_agreement = [](const BitStream& ref, const BitStream& lane) {
            try {
                return metrics::synchronize(ref, lane).agreement;
            } catch (const SyncError&) {
                return 0.0;
            }
        };
        const double straight =
            lane_agreement(ref_x, lane_a) + lane_agreement(ref_y, lane_b);
        const double crossed =
            lane_agreement(ref_y, lane_a) + lane_agreement(ref_x, lane_b);
        const BitStream& ra = straight >= crossed ? ref_x : ref_y;
        const BitStream& rb = straight >= crossed ? ref_y : ref_x;
        const metrics::BerPoint pa = metrics::count_ber(ra, lane_a, metrics::synchronize(ra, lane_a));
        const metrics::BerPoint pb = metrics::count_ber(rb, lane_b, metrics::synchronize(rb, lane_b));
        out.bits = pa.bits_counted + pb.bits_counted;
        out.errors = pa.errors + pb.errors;
        if (keep_dump) {
            out.dump_x = pe.x;
            out.dump_y = pe.y;
        }
    }

    out.report.converged = true;
    return out;
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

namespace {

// Fixed work slots indexed by (point, frame) keep the output independent of
// the worker count and completion order.
template <typename Fn>
void parallel_for(std::size_t n_items, int workers, Fn&& fn) {
    if (workers < 1) workers = 1;
    if (n_items == 0) return;
    const int n_threads = static_cast<int>(std::min<std::size_t>(n_items, workers));
    if (n_threads == 1) {
        for (std::size_t i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(n_items);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_items) return;
                try {
                    fn(i);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                } catch (...) {
                    errors[i] = "unknown error";
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < n_items; ++i)
        if (!errors[i].empty()) throw SimError(errors[i]);
}

}  // namespace

RunResult run_scenario(const Scenario& s, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_points = s.sweep_values.size();
    const std::size_t n_frames = s.frames_per_point;
    const std::size_t n_items = n_points * n_frames;

    std::vector<FrameOutcome> outcomes(n_items);
    std::vector<std::string> contexts(n_items);

    parallel_for(n_items, workers, [&](std::size_t i) {
        const std::size_t p = i / n_frames;
        const std::size_t f = i % n_frames;
        const std::uint64_t seed = frame_seed(s.base_seed, p, f);
        try {
            outcomes[i] = run_single_frame(s, s.sweep_values[p], seed);
        } catch (const SimError& e) {
            std::ostringstream os;
            os << "point " << p << " (sweep value " << s.sweep_values[p] << ") frame " << f
               << " seed " << seed << ": " << e.what();
            throw SimError(os.str());
        }
    });

    RunResult r;
    r.scenario = s;

    std::vector<metrics::BerPoint> points;
    const Codebook cb = codebook_for(s.format);
    for (std::size_t p = 0; p < n_points; ++p) {
        std::uint64_t bits = 0, errors = 0;
        PointResult pr;
        pr.x_value = s.kind == ScenarioKind::SpanLossSweep
                         ? s.baseline_osnr_db - s.sweep_values[p]
                         : s.sweep_values[p];
        for (std::size_t f = 0; f < n_frames; ++f) {
            const FrameOutcome& o = outcomes[p * n_frames + f];
            bits += o.bits;
            errors += o.errors;
            FrameDiagnostics fd;
            fd.seed = frame_seed(s.base_seed, p, f);
            fd.report = o.report;
            fd.bits = o.bits;
            fd.errors = o.errors;
            pr.frames.push_back(std::move(fd));
        }
        metrics::BerPoint bp;
        bp.x_value = pr.x_value;
        bp.bits_counted = bits;
        bp.errors = errors;
        bp.ber = bits > 0 ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0;
        bp.low_confidence = errors < metrics::kMinErrorsForConfidence;
        points.push_back(bp);
        r.diagnostics.push_back(std::move(pr));

        if (s.kind == ScenarioKind::BackToBack) {
            const NoiseSigma sig =
                constellation::osnr_to_sigma(s.sweep_values[p], s.symbol_rate, cb);
            r.theory_union_bound.emplace_back(s.sweep_values[p],
                                              constellation::union_bound_ber(cb, sig));
        }
    }

    try {
        r.curve = metrics::fit_curve(points);
    } catch (const FitError&) {
        std::sort(points.begin(), points.end(),
                  [](const metrics::BerPoint& a, const metrics::BerPoint& b) {
                      return a.x_value < b.x_value;
                  });
        r.curve.points = std::move(points);
    }

    const auto t1 = std::chrono::steady_clock::now();
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return r;
}

}  // namespace optsim::harness
