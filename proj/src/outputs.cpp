#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "optsim/harness.hpp"
#include "optsim/txchain.hpp"

namespace optsim::harness {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json scenario_json(const Scenario& s) {
    ordered_json j;
    j["kind"] = kind_name(s.kind);
    j["format"] = format_name(s.format);
    j["symbol_rate_hz"] = s.symbol_rate;
    j["sweep"] = s.sweep_values;
    j["frames_per_point"] = s.frames_per_point;
    j["base_seed"] = s.base_seed;
    j["frame_symbols"] = s.frame_symbols;
    j["tx"] = {{"samples_per_symbol", s.tx.samples_per_symbol},
               {"dac_bandwidth_hz", s.tx.dac_bandwidth_hz},
               {"launch_power_dbm", s.tx.launch_power_dbm}};
    j["impairments"] = {{"jones_alpha_rad", s.impairments.jones.alpha},
                        {"jones_phi_rad", s.impairments.jones.phi},
                        {"jones_theta_rad", s.impairments.jones.theta},
                        {"jones_random", s.impairments.jones_random},
                        {"linewidth_total_hz", s.impairments.linewidth_total_hz},
                        {"freq_offset_hz", s.impairments.freq_offset_hz},
                        {"bpf_bandwidth_hz", s.impairments.bpf_bandwidth_hz},
                        {"awgn_off", s.impairments.awgn_off}};
    j["dsp"] = {{"ideal", s.dsp.ideal},
                {"num_taps", s.dsp.num_taps},
                {"step_size", s.dsp.step_size},
                {"cma_radius_sq", s.dsp.cma_radius_sq},
                {"convergence_symbols", s.dsp.convergence_symbols},
                {"measure_symbols", s.dsp.measure_symbols},
                {"phase_window", s.dsp.phase_window}};
    if (s.fiber) {
        j["fiber"] = {{"length_km", s.fiber->length_km},
                      {"attenuation_db_km", s.fiber->attenuation_db_km},
                      {"dispersion_ps_nm_km", s.fiber->dispersion_ps_nm_km},
                      {"gamma_per_w_km", s.fiber->gamma_per_w_km},
                      {"raman_gain_db", s.fiber->raman_gain_db},
                      {"raman_length_km", s.fiber->raman_length_km},
                      {"steps_per_km", s.fiber->steps_per_km}};
    }
    if (s.kind == ScenarioKind::LaunchPowerSweep)
        j["launch_power"] = {{"osnr_at_ref_db", s.osnr_at_ref_db},
                             {"ref_power_dbm", s.ref_power_dbm}};
    if (s.kind == ScenarioKind::SpanLossSweep)
        j["span_loss"] = {{"baseline_osnr_db", s.baseline_osnr_db},
                          {"launch_power_dbm", s.span_launch_power_dbm}};
    return j;
}

ordered_json result_json(const RunResult& r) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["software_version"] = r.software_version;
    j["scenario"] = scenario_json(r.scenario);

    ordered_json pts = ordered_json::array();
    for (const auto& p : r.curve.points) {
        pts.push_back({{"x_value", p.x_value},
                       {"ber", p.ber},
                       {"bits_counted", p.bits_counted},
                       {"errors", p.errors},
                       {"low_confidence", p.low_confidence}});
    }
    j["curve"]["points"] = std::move(pts);
    if (r.curve.regression) {
        j["curve"]["regression"] = {{"slope", r.curve.regression->slope},
                                    {"intercept", r.curve.regression->intercept}};
    } else {
        j["curve"]["regression"] = nullptr;
    }

    if (!r.theory_union_bound.empty()) {
        ordered_json th = ordered_json::array();
        for (const auto& [x, ber] : r.theory_union_bound)
            th.push_back({{"x_value", x}, {"union_bound_ber", ber}});
        j["theory_union_bound"] = std::move(th);
    }

    ordered_json diag = ordered_json::array();
    for (const auto& pr : r.diagnostics) {
        ordered_json frames = ordered_json::array();
        for (const auto& f : pr.frames) {
            frames.push_back({{"seed", f.seed},
                              {"bits", f.bits},
                              {"errors", f.errors},
                              {"converged", f.report.converged},
                              {"est_freq_offset_hz", f.report.est_freq_offset_hz},
                              {"tributary_quadrant", f.report.tributary_quadrant},
                              {"tributary_sign", f.report.tributary_sign},
                              {"parity_score", f.report.parity_score},
                              {"singularity_resets", f.report.singularity_resets},
                              {"row_swaps", f.report.row_swaps}});
        }
        diag.push_back({{"x_value", pr.x_value}, {"frames", std::move(frames)}});
    }
    j["diagnostics"] = std::move(diag);
    return j;
}

}  // namespace

std::vector<std::string> write_outputs(const RunResult& r, const std::string& out_dir,
                                       bool dump_constellations, int workers) {
    (void)workers;
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    const std::string stem = kind_name(r.scenario.kind) + "_" + format_name(r.scenario.format);

    {
        const std::string path = (fs::path(out_dir) / (stem + ".csv")).string();
        std::ofstream csv(path, std::ios::trunc);
        if (!csv) throw SimError("cannot write " + path);
        metrics::write_csv(csv, r.curve);
        written.push_back(path);
    }

    if (!r.theory_union_bound.empty()) {
        const std::string path = (fs::path(out_dir) / (stem + "_theory.csv")).string();
        std::ofstream csv(path, std::ios::trunc);
        if (!csv) throw SimError("cannot write " + path);
        csv << "x_value,union_bound_ber\n";
        for (const auto& [x, ber] : r.theory_union_bound)
            csv << metrics::format_double(x) << ',' << metrics::format_double(ber) << '\n';
        written.push_back(path);
    }

    {
        const std::string path = (fs::path(out_dir) / "result.json").string();
        std::ofstream jf(path, std::ios::trunc);
        if (!jf) throw SimError("cannot write " + path);
        jf << result_json(r).dump(2) << '\n';
        written.push_back(path);
    }

    if (dump_constellations && !r.scenario.dsp.ideal) {
        // Re-run the first frame of every point with dumps enabled; seeds
        // make the replay identical to the recorded run.
        for (std::size_t p = 0; p < r.scenario.sweep_values.size(); ++p) {
            const std::uint64_t seed = frame_seed(r.scenario.base_seed, p, 0);
            const FrameOutcome o =
                run_single_frame(r.scenario, r.scenario.sweep_values[p], seed, true);
            DualPolWaveform w;
            w.sample_rate = r.scenario.symbol_rate;
            w.ex = o.dump_x;
            w.ey = o.dump_y;
            const std::string base =
                (fs::path(out_dir) / (stem + "_point" + std::to_string(p) + "_symbols")).string();
            txchain::write_waveform(base, w, r.scenario.symbol_rate);
            written.push_back(base + ".f64");
            written.push_back(base + ".meta");
        }
    }
    return written;
}

}  // namespace optsim::harness
