#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optsim/channel.hpp"
#include "optsim/config.hpp"
#include "optsim/metrics.hpp"
#include "optsim/rxdsp.hpp"
#include "optsim/types.hpp"

namespace optsim::harness {

inline constexpr const char* kSoftwareVersion = "optsim 0.1.0";
inline constexpr int kSchemaVersion = 1;

enum class ScenarioKind { BackToBack, LaunchPowerSweep, SpanLossSweep };

struct ImpairmentConfig {
    channel::JonesAngles jones;
    bool jones_random = false;  // draw angles per frame from the frame seed
    double linewidth_total_hz = 0.0;
    double freq_offset_hz = 0.0;
    double bpf_bandwidth_hz = 0.0;  // 0 disables the receive filter
    bool awgn_off = false;          // bypass noise loading (loopback checks)
};

struct TxConfig {
    int samples_per_symbol = 4;
    double dac_bandwidth_hz = 13e9;  // 0 disables the DAC filter
    double launch_power_dbm = 0.0;
};

struct DspConfig {
    bool ideal = false;  // symbol-domain AWGN reference path, back-to-back only
    int num_taps = 13;
    double step_size = 1e-3;
    double cma_radius_sq = 2.0;
    std::size_t convergence_symbols = 16384;
    std::size_t measure_symbols = 4096;
    int phase_window = 33;
};

struct Scenario {
    ScenarioKind kind = ScenarioKind::BackToBack;
    Format format = Format::Simplex3D;
    double symbol_rate = 16e9;
    std::vector<double> sweep_values;  // OSNR dB / launch dBm / added loss dB
    std::size_t frames_per_point = 8;
    std::uint64_t base_seed = 1;
    std::size_t frame_symbols = 2048;  // cyclic frame length; frame bits = 2x
    TxConfig tx;
    ImpairmentConfig impairments;
    DspConfig dsp;
    std::optional<channel::FiberSpec> fiber;
    // launch_power_sweep: receive OSNR model OSNR = osnr_at_ref + (P - ref_power)
    double osnr_at_ref_db = 13.9;
    double ref_power_dbm = 17.0;
    // span_loss_sweep: OSNR = baseline - added loss, at fixed launch power
    double baseline_osnr_db = 13.9;
    double span_launch_power_dbm = 17.0;
};

Scenario scenario_from_table(const config::Table& t);
Scenario load_scenario(const std::string& path);
// Canonical config text; parsing it reproduces the scenario exactly.
std::string scenario_to_config_text(const Scenario& s);

std::string kind_name(ScenarioKind k);
std::string format_name(Format f);

// Per-frame diagnostics surfaced into result.json.
struct FrameDiagnostics {
    std::uint64_t seed = 0;
    rxdsp::DspReport report;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
};

struct PointResult {
    double x_value = 0.0;
    std::vector<FrameDiagnostics> frames;
};

struct RunResult {
    Scenario scenario;
    metrics::BerCurve curve;
    std::vector<std::pair<double, double>> theory_union_bound;  // (x, ber), back-to-back
    std::vector<PointResult> diagnostics;
    double wall_seconds = 0.0;  // not serialized: outputs must be bit-stable
    std::string software_version = kSoftwareVersion;
};

// Seed contract: frame seed = base_seed + point_index * 1000 + frame_index.
std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t point_index,
                         std::size_t frame_index);

struct FrameOutcome {
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    rxdsp::DspReport report;
    // equalizer-output constellations for optional dumps
    std::vector<cplx> dump_x, dump_y;
};

// Runs one frame of the scenario at the given sweep value. keep_dump retains
// the aligned tributary symbols for constellation export.
FrameOutcome run_single_frame(const Scenario& s, double sweep_value, std::uint64_t seed,
                              bool keep_dump = false);

RunResult run_scenario(const Scenario& s, int workers);

// Writes <kind>_<format>.csv, result.json, theory CSV and optional
// constellation dumps into out_dir. Returns the list of files written.
std::vector<std::string> write_outputs(const RunResult& r, const std::string& out_dir,
                                       bool dump_constellations, int workers);

int cli_main(int argc, const char* const* argv);

// Deterministic sub-seed derivation for the independent noise processes of
// one frame.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role);

}  // namespace optsim::harness
