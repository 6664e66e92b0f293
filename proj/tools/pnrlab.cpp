// pnrlab: command-line front end for the photon-number-resolving detector
// simulator. Subcommands: stats, gn, subtract, discriminate, trace, helstrom.
// Every command is deterministic for a fixed --seed and writes its outputs
// plus a JSON run manifest.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnrlab/detector.hpp"
#include "pnrlab/experiments.hpp"
#include "pnrlab/fock.hpp"
#include "pnrlab/io.hpp"
#include "pnrlab/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDegraded = 3;

struct CommonOpts {
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_prefix;
    bool json = false;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("PNRLAB_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring unparseable PNRLAB_SEED\n";
        }
    }
    return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts, const std::string& default_prefix) {
    opts.out_prefix = default_prefix;
    cmd->add_option("--seed", opts.seed, "random seed (PNRLAB_SEED env as fallback)")
        ->capture_default_str();
    cmd->add_option("--workers", opts.workers, "worker threads for the shot blocks")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
    cmd->add_option("--out", opts.out_prefix, "output path prefix")->capture_default_str();
    cmd->add_flag("--json", opts.json, "write tabular outputs as JSON instead of CSV");
}

// Applies a JSON config file as defaults: for every top-level key not given
// on the command line, appends "--key[=value]" so flag > file > default.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    std::vector<std::string> merged = args;
    if (config_path.empty()) return merged;

    const nlohmann::json config = nlohmann::json::parse(pnrlab::read_file(config_path));
    if (!config.is_object()) throw std::invalid_argument("--config: expected a JSON object");
    auto given = [&args](const std::string& name) {
        const std::string flag = "--" + name;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    for (const auto& [key, value] : config.items()) {
        if (given(key)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) merged.push_back("--" + key);
        } else if (value.is_string()) {
            merged.push_back("--" + key + "=" + value.get<std::string>());
        } else {
            merged.push_back("--" + key + "=" + value.dump());
        }
    }
    return merged;
}

struct SourceOpts {
    std::string source = "thermal";
    double mean = 1.0;
    double tbp = 0.0;
    double bandwidth_hz = 0.0;
    double pulse_width_s = 0.0;
};

void add_source(CLI::App* cmd, SourceOpts& opts) {
    cmd->add_option("--source", opts.source, "light source: thermal | coherent")
        ->check(CLI::IsMember({"thermal", "coherent"}))
        ->capture_default_str();
    cmd->add_option("--mean", opts.mean, "mean photon number")->capture_default_str();
    cmd->add_option("--tbp", opts.tbp, "time-bandwidth product of the thermal source");
    cmd->add_option("--bandwidth", opts.bandwidth_hz, "filter FWHM bandwidth in Hz");
    cmd->add_option("--pulse-width", opts.pulse_width_s, "gate pulse width in seconds");
}

pnrlab::SourceSpec make_source(const SourceOpts& opts) {
    if (opts.source == "coherent") return pnrlab::SourceSpec::coherent(opts.mean);
    if (opts.tbp > 0.0) return pnrlab::SourceSpec::thermal_from_tbp(opts.mean, opts.tbp);
    if (opts.bandwidth_hz > 0.0 && opts.pulse_width_s > 0.0)
        return pnrlab::SourceSpec::thermal(opts.mean, opts.bandwidth_hz, opts.pulse_width_s);
    throw std::invalid_argument("thermal source needs --tbp or --bandwidth with --pulse-width");
}

struct ArrayOpts {
    int pixels = 100;
    double efficiency = 1.0;
    bool ideal = false;
};

void add_array(CLI::App* cmd, ArrayOpts& opts) {
    cmd->add_option("--pixels", opts.pixels, "detector pixel count")->capture_default_str();
    cmd->add_option("--efficiency", opts.efficiency, "per-photon survival probability")
        ->capture_default_str();
    cmd->add_flag("--ideal", opts.ideal, "ideal PNR mode: bypass pixel saturation");
}

pnrlab::ArrayConfig make_array(const ArrayOpts& opts, const CommonOpts& common) {
    pnrlab::ArrayConfig cfg;
    cfg.pixel_count = opts.pixels;
    cfg.efficiency = opts.efficiency;
    cfg.seed = common.seed;
    cfg.ideal_pnr = opts.ideal;
    cfg.validate();
    return cfg;
}

nlohmann::json source_json(const pnrlab::SourceSpec& src) {
    nlohmann::json j{{"kind", src.kind == pnrlab::SourceKind::Thermal ? "thermal" : "coherent"},
                     {"mean_n", src.mean_n}};
    if (src.kind == pnrlab::SourceKind::Thermal) {
        j["bandwidth_hz"] = src.bandwidth_hz;
        j["pulse_width_s"] = src.pulse_width_s;
        j["tbp"] = src.tbp();
    }
    return j;
}

nlohmann::json array_json(const pnrlab::ArrayConfig& cfg) {
    return {{"pixel_count", cfg.pixel_count},
            {"efficiency", cfg.efficiency},
            {"ideal_pnr", cfg.ideal_pnr}};
}

void finalize_manifest(pnrlab::RunManifest& manifest, const CommonOpts& common) {
    manifest.seed = common.seed;
    manifest.workers = common.workers;
    manifest.finished = pnrlab::utc_timestamp();
    const std::string path = common.out_prefix + "_manifest.json";
    manifest.outputs.push_back(path);
    manifest.write(path);
    std::cout << "manifest: " << path << "\n";
}

void write_table(const CommonOpts& common, const std::string& stem, const std::string& csv,
                 const nlohmann::json& rows, pnrlab::RunManifest& manifest) {
    const std::string path = common.out_prefix + "_" + stem + (common.json ? ".json" : ".csv");
    if (common.json) pnrlab::write_file_atomic(path, rows.dump(2) + "\n");
    else pnrlab::write_file_atomic(path, csv);
    manifest.outputs.push_back(path);
    std::cout << "wrote: " << path << "\n";
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        out.push_back(std::stod(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

// ---------------------------------------------------------------------------

int cmd_stats(const SourceOpts& source_opts, const ArrayOpts& array_opts,
              const CommonOpts& common, std::uint64_t shots) {
    const pnrlab::SourceSpec src = make_source(source_opts);
    const pnrlab::ArrayConfig cfg = make_array(array_opts, common);
    if (shots < 1) throw std::invalid_argument("--shots must be >= 1");

    pnrlab::RunManifest manifest;
    manifest.command = "stats";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"source", source_json(src)}, {"array", array_json(cfg)}, {"shots", shots}};

    const auto result = pnrlab::run_statistics_experiment(src, cfg, shots, common.workers);
    write_table(common, "hist", pnrlab::histogram_csv(result.histogram),
                pnrlab::histogram_json(result.histogram), manifest);
    write_table(common, "theory", pnrlab::pmf_csv(result.theory),
                pnrlab::pmf_json(result.theory), manifest);
    manifest.config["theory_cutoff"] = result.theory.cutoff;
    finalize_manifest(manifest, common);
    std::cout << "shots=" << shots << " mean_detected=" << result.histogram.mean() << "\n";
    return kExitOk;
}

int cmd_gn(const SourceOpts& source_opts, const ArrayOpts& array_opts, const CommonOpts& common,
           const std::string& orders_csv, std::uint64_t shots, const std::string& plan_kind) {
    const pnrlab::SourceSpec src = make_source(source_opts);
    const pnrlab::ArrayConfig cfg = make_array(array_opts, common);
    if (shots < 1) throw std::invalid_argument("--shots must be >= 1");
    const std::vector<int> orders = parse_int_list(orders_csv);
    for (int order : orders)
        if (order < 2)
            throw std::invalid_argument("--order must be >= 2 (pair correlation at minimum)");

    pnrlab::RunManifest manifest;
    manifest.command = "gn";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"source", source_json(src)},
                       {"array", array_json(cfg)},
                       {"shots", shots},
                       {"orders", orders},
                       {"plan", plan_kind}};

    std::string csv = "N,g_est,std_err,g_theory\n";
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json group_sizes = nlohmann::json::object();
    for (int order : orders) {
        std::optional<pnrlab::GroupingPlan> plan;
        if (plan_kind == "interleaved")
            plan = pnrlab::make_interleaved_grouping(cfg.pixel_count, order);
        const pnrlab::GnResult r =
            pnrlab::gn_estimate(src, cfg, order, shots, common.workers, plan);
        csv += std::to_string(r.order_n) + ',' + pnrlab::format_double(r.estimate) + ',' +
               pnrlab::format_double(r.std_error) + ',' + pnrlab::format_double(r.theory) + '\n';
        rows.push_back({{"N", r.order_n},
                        {"g_est", r.estimate},
                        {"std_err", r.std_error},
                        {"g_theory", r.theory}});
        group_sizes[std::to_string(order)] = r.group_sizes;
        std::cout << "g(" << r.order_n << ") = " << r.estimate << " +- " << r.std_error
                  << "  theory " << r.theory << "\n";
    }
    manifest.config["group_sizes"] = group_sizes;
    write_table(common, "gn", csv, rows, manifest);
    finalize_manifest(manifest, common);
    return kExitOk;
}

int cmd_subtract(const SourceOpts& source_opts, const ArrayOpts& array_opts,
                 const CommonOpts& common, const std::string& nr_csv, const std::string& split,
                 std::uint64_t shots) {
    const pnrlab::SourceSpec src = make_source(source_opts);
    const pnrlab::ArrayConfig cfg = make_array(array_opts, common);
    if (shots < 1) throw std::invalid_argument("--shots must be >= 1");
    const std::size_t colon = split.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("--split must be R:T pixel counts, e.g. 20:80");
    const int reflect_pixels = std::stoi(split.substr(0, colon));
    const int transmit_pixels = std::stoi(split.substr(colon + 1));
    const std::vector<int> conditions = parse_int_list(nr_csv);

    pnrlab::RunManifest manifest;
    manifest.command = "subtract";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"source", source_json(src)},
                       {"array", array_json(cfg)},
                       {"shots", shots},
                       {"split", {reflect_pixels, transmit_pixels}},
                       {"conditions", conditions}};

    const auto results = pnrlab::run_subtraction_scan(src, cfg, reflect_pixels, transmit_pixels,
                                                      conditions, shots, common.workers);

    std::string csv = "nR,mean_T,theory_mean_T,enhancement,theory\n";
    nlohmann::json rows = nlohmann::json::array();
    bool degraded = false;
    for (const auto& r : results) {
        csv += std::to_string(r.conditioned_on_nr) + ',' + pnrlab::format_double(r.mean_t) + ',' +
               pnrlab::format_double(r.theory_mean_t) + ',' +
               pnrlab::format_double(r.enhancement) + ',' +
               pnrlab::format_double(r.theory_enhancement) + '\n';
        rows.push_back({{"nR", r.conditioned_on_nr},
                        {"mean_T", r.mean_t},
                        {"theory_mean_T", r.theory_mean_t},
                        {"enhancement", r.enhancement},
                        {"theory", r.theory_enhancement},
                        {"conditioned_shots", r.conditioned_shots}});
        std::cout << "nR=" << r.conditioned_on_nr << " mean_T=" << r.mean_t << " theory "
                  << r.theory_mean_t << " enhancement=" << r.enhancement << " theory "
                  << r.theory_enhancement << " (" << r.conditioned_shots << " conditioned shots)"
                  << "\n";
        if (r.insufficient_samples) {
            degraded = true;
            std::cerr << "warning: nR=" << r.conditioned_on_nr << " conditioned on only "
                      << r.conditioned_shots << " shots (< 1000); estimates are noisy\n";
        }
    }
    write_table(common, "subtract", csv, rows, manifest);
    // conditional histogram and theory overlay of the first condition
    write_table(common, "hist_T", pnrlab::histogram_csv(results[0].histogram_t),
                pnrlab::histogram_json(results[0].histogram_t), manifest);
    write_table(common, "theory_T", pnrlab::pmf_csv(results[0].theory_pmf_t),
                pnrlab::pmf_json(results[0].theory_pmf_t), manifest);
    finalize_manifest(manifest, common);
    return degraded ? kExitDegraded : kExitOk;
}

int cmd_discriminate(const CommonOpts& common, const std::string& receiver_name,
                     const std::string& means_csv, std::uint64_t shots, double transmission,
                     double delta_n, int cutoff) {
    if (shots < 1) throw std::invalid_argument("--shots must be >= 1");
    pnrlab::ReceiverConfig receiver;
    if (receiver_name == "direct") receiver.kind = pnrlab::ReceiverKind::Direct;
    else if (receiver_name == "kennedy") receiver.kind = pnrlab::ReceiverKind::Kennedy;
    else receiver.kind = pnrlab::ReceiverKind::GeneralizedKennedy;
    receiver.transmission = transmission;
    if (delta_n >= 0.0) receiver.delta_n = delta_n;
    receiver.validate();
    const std::vector<double> means = parse_double_list(means_csv);

    pnrlab::RunManifest manifest;
    manifest.command = "discriminate";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"receiver", receiver_name},
                       {"transmission", transmission},
                       {"means", means},
                       {"shots", shots},
                       {"helstrom_cutoff", cutoff}};

    std::string csv = "n_bar,receiver,err_emp,err_theory,helstrom\n";
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json delta_used = nlohmann::json::object();
    for (double mean_n : means) {
        const auto r =
            pnrlab::run_discrimination(mean_n, receiver, shots, common.seed, common.workers);
        const double helstrom = pnrlab::helstrom_error(mean_n, cutoff);
        csv += pnrlab::format_double(mean_n) + ',' + receiver_name + ',' +
               pnrlab::format_double(r.error_rate) + ',' + pnrlab::format_double(r.theory) + ',' +
               pnrlab::format_double(helstrom) + '\n';
        rows.push_back({{"n_bar", mean_n},
                        {"receiver", receiver_name},
                        {"err_emp", r.error_rate},
                        {"err_theory", r.theory},
                        {"helstrom", helstrom}});
        if (receiver.kind == pnrlab::ReceiverKind::GeneralizedKennedy)
            delta_used[pnrlab::format_double(mean_n)] = r.delta_n_used;
        std::cout << "n_bar=" << mean_n << " err=" << r.error_rate << " +- " << r.std_error
                  << " theory=" << r.theory << " helstrom=" << helstrom << "\n";
    }
    if (!delta_used.empty()) manifest.config["delta_n_used"] = delta_used;
    write_table(common, "discriminate", csv, rows, manifest);
    finalize_manifest(manifest, common);
    return kExitOk;
}

int cmd_helstrom(const CommonOpts& common, const std::string& means_csv, int cutoff) {
    const std::vector<double> means = parse_double_list(means_csv);
    pnrlab::RunManifest manifest;
    manifest.command = "helstrom";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"means", means}, {"cutoff", cutoff}};

    std::string csv = "n_bar,helstrom\n";
    nlohmann::json rows = nlohmann::json::array();
    for (double mean_n : means) {
        const double err = pnrlab::helstrom_error(mean_n, cutoff);
        csv += pnrlab::format_double(mean_n) + ',' + pnrlab::format_double(err) + '\n';
        rows.push_back({{"n_bar", mean_n}, {"helstrom", err}});
        std::cout << "n_bar=" << mean_n << " helstrom=" << err << "\n";
    }
    write_table(common, "helstrom", csv, rows, manifest);
    finalize_manifest(manifest, common);
    return kExitOk;
}

pnrlab::TraceConfig make_trace_config(double slot_delay, double sample_rate, double amplitude,
                                      double ripple, double noise_sigma, double snr_db) {
    pnrlab::TraceConfig cfg;
    cfg.slot_delay_s = slot_delay;
    cfg.sample_rate_hz = sample_rate;
    cfg.amplitude = amplitude;
    cfg.ripple_coeff = ripple;
    if (noise_sigma >= 0.0) cfg.noise_sigma = noise_sigma;
    else if (snr_db > 0.0) cfg.noise_sigma = amplitude / std::pow(10.0, snr_db / 20.0);
    cfg.validate();
    return cfg;
}

int cmd_trace(const CommonOpts& common, bool synthesize, bool decode, const std::string& pattern,
              const std::string& in_path, const std::string& format, double threshold,
              const pnrlab::TraceConfig& cfg) {
    if (synthesize == decode)
        throw std::invalid_argument("trace: pass exactly one of --synthesize or --decode");

    pnrlab::RunManifest manifest;
    manifest.command = "trace";
    manifest.started = pnrlab::utc_timestamp();
    manifest.config = {{"slot_delay_s", cfg.slot_delay_s},
                       {"sample_rate_hz", cfg.sample_rate_hz},
                       {"amplitude", cfg.amplitude},
                       {"noise_sigma", cfg.noise_sigma},
                       {"ripple_coeff", cfg.ripple_coeff},
                       {"format", format}};

    if (synthesize) {
        if (pattern.empty()) throw std::invalid_argument("--synthesize needs --pattern");
        pnrlab::ClickPattern click;
        for (char c : pattern) {
            if (c != '0' && c != '1')
                throw std::invalid_argument("--pattern must be a string of 0s and 1s");
            click.fired.push_back(c == '1' ? 1 : 0);
        }
        click.detected_n = click.true_n =
            static_cast<int>(std::count(click.fired.begin(), click.fired.end(), 1));
        manifest.config["pattern"] = pattern;

        pnrlab::Rng rng = pnrlab::derive_stream(common.seed, 0);
        const pnrlab::TraceFrame frame = pnrlab::synthesize_trace(click, cfg, rng);
        const std::string path =
            common.out_prefix + "_trace." + (format == "bin" ? "bin" : "csv");
        if (format == "bin") pnrlab::write_file_atomic(path, pnrlab::trace_binary(frame));
        else pnrlab::write_file_atomic(path, pnrlab::trace_csv(frame));
        manifest.outputs.push_back(path);
        std::cout << "wrote: " << path << " (" << frame.samples.size() << " samples, "
                  << click.detected_n << " fired)\n";
    } else {
        if (in_path.empty()) throw std::invalid_argument("--decode needs --in");
        const std::string bytes = pnrlab::read_file(in_path);
        pnrlab::TraceFrame frame;
        if (format == "bin" || (format == "auto" && bytes.size() >= 8 &&
                                bytes.compare(0, 8, "PNRTRACE") == 0)) {
            frame = pnrlab::trace_from_binary(bytes);
        } else {
            // a CSV trace does not carry the slot count; recover it from time
            frame = pnrlab::trace_from_csv(bytes, 0);
            const double span = static_cast<double>(frame.samples.size()) * frame.dt;
            frame.slots = static_cast<int>(std::floor(span / cfg.slot_delay_s + 0.5)) - 2;
        }
        const double th = threshold > 0.0 ? threshold : pnrlab::default_threshold(cfg);
        const pnrlab::ClickPattern click = pnrlab::decode_trace(frame, th, cfg);
        std::string text;
        for (std::uint8_t b : click.fired) text += b ? '1' : '0';
        const std::string path = common.out_prefix + "_decoded.txt";
        pnrlab::write_file_atomic(path, text + "\n");
        manifest.outputs.push_back(path);
        manifest.config["threshold"] = th;
        std::cout << text << "\n";
        std::cout << "wrote: " << path << " (" << click.detected_n << " fired)\n";
    }
    finalize_manifest(manifest, common);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pnrlab: Monte Carlo simulator and numerics for a multiplexed "
                 "photon-number-resolving detector"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pnrlab::kToolVersion);

    const std::uint64_t seed0 = default_seed();

    // stats
    auto* stats = app.add_subcommand("stats", "photon-number histogram vs exact statistics");
    SourceOpts stats_source;
    ArrayOpts stats_array;
    CommonOpts stats_common;
    stats_common.seed = seed0;
    std::uint64_t stats_shots = 100000;
    std::string stats_config;
    add_source(stats, stats_source);
    add_array(stats, stats_array);
    add_common(stats, stats_common, "stats");
    stats->add_option("--shots", stats_shots, "number of pulses")->capture_default_str();
    stats->add_option("--config", stats_config, "JSON config file (flags take precedence)");

    // gn
    auto* gn = app.add_subcommand("gn", "high-order correlation g^(N) from grouped pixels");
    SourceOpts gn_source;
    ArrayOpts gn_array;
    CommonOpts gn_common;
    gn_common.seed = seed0;
    std::uint64_t gn_shots = 1000000;
    std::string gn_orders = "2";
    std::string gn_plan = "contiguous";
    std::string gn_config;
    add_source(gn, gn_source);
    add_array(gn, gn_array);
    add_common(gn, gn_common, "gn");
    gn->add_option("--order", gn_orders, "correlation order N (>= 2), or comma list")
        ->capture_default_str();
    gn->add_option("--shots", gn_shots, "number of pulses")->capture_default_str();
    gn->add_option("--plan", gn_plan, "pixel grouping: contiguous | interleaved")
        ->check(CLI::IsMember({"contiguous", "interleaved"}))
        ->capture_default_str();
    gn->add_option("--config", gn_config, "JSON config file (flags take precedence)");

    // subtract
    auto* subtract = app.add_subcommand("subtract", "photon subtraction via a pixel-group tap");
    SourceOpts sub_source;
    ArrayOpts sub_array;
    CommonOpts sub_common;
    sub_common.seed = seed0;
    std::uint64_t sub_shots = 400000;
    std::string sub_nr = "0";
    std::string sub_split = "20:80";
    std::string sub_config;
    add_source(subtract, sub_source);
    add_array(subtract, sub_array);
    add_common(subtract, sub_common, "subtract");
    subtract->add_option("--nR", sub_nr, "subtracted photon count(s), comma list")
        ->capture_default_str();
    subtract->add_option("--split", sub_split, "reflect:transmit pixel split")
        ->capture_default_str();
    subtract->add_option("--shots", sub_shots, "number of pulses")->capture_default_str();
    subtract->add_option("--config", sub_config, "JSON config file (flags take precedence)");

    // discriminate
    auto* disc = app.add_subcommand("discriminate", "thermal-vs-coherent state discrimination");
    CommonOpts disc_common;
    disc_common.seed = seed0;
    std::string disc_receiver = "direct";
    std::string disc_means = "1";
    std::uint64_t disc_shots = 1000000;
    double disc_transmission = 1.0;
    double disc_delta = -1.0;
    int disc_cutoff = 256;
    std::string disc_config;
    disc->add_option("--receiver", disc_receiver, "direct | kennedy | gk")
        ->check(CLI::IsMember({"direct", "kennedy", "gk"}))
        ->capture_default_str();
    disc->add_option("--mean", disc_means, "mean photon number(s), comma list")
        ->capture_default_str();
    disc->add_option("--shots", disc_shots, "number of pulses")->capture_default_str();
    disc->add_option("--transmission", disc_transmission, "signal-path transmission T")
        ->capture_default_str();
    disc->add_option("--delta-n", disc_delta,
                     "displacement offset for gk (optimized when omitted)");
    disc->add_option("--cutoff", disc_cutoff, "Fock cutoff for the reported Helstrom bound")
        ->capture_default_str();
    add_common(disc, disc_common, "discriminate");
    disc->add_option("--config", disc_config, "JSON config file (flags take precedence)");

    // helstrom
    auto* hel = app.add_subcommand("helstrom", "minimum discrimination error bound");
    CommonOpts hel_common;
    hel_common.seed = seed0;
    std::string hel_means = "0.5,1,2,3,4,5";
    int hel_cutoff = 256;
    std::string hel_config;
    hel->add_option("--mean", hel_means, "mean photon number(s), comma list")
        ->capture_default_str();
    hel->add_option("--cutoff", hel_cutoff, "Fock-space cutoff")->capture_default_str();
    add_common(hel, hel_common, "helstrom");
    hel->add_option("--config", hel_config, "JSON config file (flags take precedence)");

    // trace
    auto* trace = app.add_subcommand("trace", "synthesize or decode a readout waveform");
    CommonOpts trace_common;
    trace_common.seed = seed0;
    bool trace_synth = false, trace_decode = false;
    std::string trace_pattern, trace_in, trace_format = "auto";
    double trace_threshold = -1.0;
    double trace_slot = 1.09e-9, trace_rate = 4e10, trace_amp = 1.0, trace_ripple = 0.02;
    double trace_noise = -1.0, trace_snr = 0.0;
    std::string trace_config;
    trace->add_flag("--synthesize", trace_synth, "pattern -> waveform file");
    trace->add_flag("--decode", trace_decode, "waveform file -> pattern");
    trace->add_option("--pattern", trace_pattern, "pixel pattern, e.g. 0100110...");
    trace->add_option("--in", trace_in, "input waveform file for --decode");
    trace->add_option("--format", trace_format, "waveform file format: csv | bin | auto")
        ->check(CLI::IsMember({"csv", "bin", "auto"}))
        ->capture_default_str();
    trace->add_option("--threshold", trace_threshold,
                      "decode threshold (defaults to amplitude/2)");
    trace->add_option("--slot-delay", trace_slot, "slot spacing in seconds")
        ->capture_default_str();
    trace->add_option("--sample-rate", trace_rate, "sample rate in Hz")->capture_default_str();
    trace->add_option("--amplitude", trace_amp, "pulse amplitude")->capture_default_str();
    trace->add_option("--ripple", trace_ripple, "per-pulse background ripple coefficient")
        ->capture_default_str();
    trace->add_option("--noise-sigma", trace_noise, "additive white noise sigma");
    trace->add_option("--snr", trace_snr, "SNR in dB (sets noise sigma from amplitude)");
    add_common(trace, trace_common, "trace");
    trace->add_option("--config", trace_config, "JSON config file (flags take precedence)");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = merge_config(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    // CLI11 parses the reversed token vector
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (stats->parsed()) return cmd_stats(stats_source, stats_array, stats_common, stats_shots);
        if (gn->parsed()) return cmd_gn(gn_source, gn_array, gn_common, gn_orders, gn_shots, gn_plan);
        if (subtract->parsed())
            return cmd_subtract(sub_source, sub_array, sub_common, sub_nr, sub_split, sub_shots);
        if (disc->parsed())
            return cmd_discriminate(disc_common, disc_receiver, disc_means, disc_shots,
                                    disc_transmission, disc_delta, disc_cutoff);
        if (hel->parsed()) return cmd_helstrom(hel_common, hel_means, hel_cutoff);
        if (trace->parsed())
            return cmd_trace(trace_common, trace_synth, trace_decode, trace_pattern, trace_in,
                             trace_format, trace_threshold,
                             make_trace_config(trace_slot, trace_rate, trace_amp, trace_ripple,
                                               trace_noise, trace_snr));
    } catch (const pnrlab::ZeroDenominatorError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegraded;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
