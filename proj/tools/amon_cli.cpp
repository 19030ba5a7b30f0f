// amon: command-line front end for the traffic monitor.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amon/amon.hpp"

namespace fs = std::filesystem;
using namespace amon;

namespace {

enum Exit { ok = 0, config_error = 1, io_error = 2, invariant_error = 3 };

/// Flags that map one-to-one onto configuration keys.
struct ConfigFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::vector<std::string> attacks;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void attach(CLI::App& app) {
        app.add_option("-c,--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
        app.add_option("--set", sets, "override any configuration key (key=value), repeatable");
        app.add_option("--attack", attacks, "attack kind:magnitude:start:end:keys[:spread], repeatable");
        const std::vector<std::pair<std::string, std::string>> flags{
            {"m", "hash bins per dimension (power of two)"},
            {"m_prime", "sketch width per sub-stream"},
            {"bm_m", "Boyer-Moore sub-streams (0 = m)"},
            {"top_n", "cells in the top-N graph"},
            {"top_k", "heavy-hitter candidates reported per window"},
            {"window_seconds", "window length in seconds"},
            {"window_records", "records per window (overrides time windows)"},
            {"value_kind", "bytes or packets"},
            {"key_mode", "heavy-hitter key: pair, src or dst"},
            {"frechet_p0", "Frechet detector confidence"},
            {"frechet_lambda", "tail smoothing weight"},
            {"relvol_k", "bins in the relative volume"},
            {"relvol_p0", "relative-volume confidence"},
            {"mc_reps", "Monte Carlo replicates for relative-volume quantiles"},
            {"community_p0", "community detector confidence"},
            {"detectors", "comma-separated: frechet,relvol,relvol_chart,community"},
            {"hash_seed", "hash function master seed"},
            {"seed", "master seed"},
            {"input", "flow CSV (synthetic traffic when absent)"},
            {"synthetic_windows", "synthetic windows"},
            {"synthetic_rate", "synthetic records per window"},
            {"synthetic_alpha", "synthetic flow-size tail exponent"},
            {"suppress_dst", "comma-separated destinations dropped before hashing"},
            {"output", "output directory"},
        };
        for (const auto& [key, help] : flags) {
            std::string flag = "--" + key;
            for (auto& ch : flag)
                if (ch == '_') ch = '-';
            options.emplace_back(key, app.add_option(flag, values[key], help));
        }
    }

    bool given(const std::string& key) const {
        for (const auto& [k, opt] : options)
            if (k == key) return opt->count() > 0;
        return false;
    }

    PipelineConfig resolve(PipelineConfig base = {}) const {
        PipelineConfig cfg = config_file.empty() ? base : load_config(config_file, base);
        for (const auto& [key, opt] : options)
            if (opt->count()) set_config_value(cfg, key, values.at(key));
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + s + "'");
            set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& a : attacks) cfg.attacks.push_back(parse_attack(a));
        return cfg;
    }
};

std::string timestamp_dirname() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream o;
    o << "run-" << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    return o.str();
}

int cmd_run(const PipelineConfig& cfg) {
    cfg.validate();
    fs::path dir = cfg.output;
    if (cfg.timestamped_output) dir /= timestamp_dirname();
    RunWriter writer(dir, cfg);
    auto summary = run_pipeline(cfg, [&](const WindowResult& r, const Databrick& b) { writer(r, b); });
    writer.flush();
    json sj{{"windows", summary.windows},
            {"records", summary.records},
            {"suppressed", summary.suppressed},
            {"alerts", summary.alerts},
            {"alerts_by_detector", writer.alert_counts()},
            {"detector_errors", summary.detector_errors},
            {"seconds", summary.seconds},
            {"records_per_second", summary.records_per_second()}};
    std::ofstream(dir / "summary.json") << sj.dump(2) << '\n';
    std::cout << "output:      " << dir.string() << '\n'
              << "windows:     " << summary.windows << '\n'
              << "records:     " << summary.records << " (" << summary.suppressed << " suppressed)\n"
              << "alerts:      " << summary.alerts << '\n';
    for (const auto& [det, n] : writer.alert_counts()) std::cout << "  " << std::left << std::setw(13) << det << n << '\n';
    if (summary.detector_errors) std::cout << "errors:      " << summary.detector_errors << " (see errors.jsonl)\n";
    std::cout << "throughput:  " << std::fixed << std::setprecision(0) << summary.records_per_second()
              << " records/s (" << std::setprecision(3) << summary.seconds << " s)\n";
    return ok;
}

int cmd_generate(const PipelineConfig& cfg, const std::string& out_path) {
    auto spec = cfg.synthetic_spec();
    spec.validate();
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (out_path != "-") {
        file.open(out_path);
        if (!file) throw IoError("cannot write '" + out_path + "'");
        out = &file;
    }
    SyntheticGenerator gen(spec);
    std::vector<FlowRecord> recs;
    std::uint64_t n = 0;
    *out << "timestamp,src,dst,bytes,packets\n";
    while (!gen.done()) {
        gen.next(recs);
        for (const auto& r : recs) *out << format_flow_line(r) << '\n';
        n += recs.size();
    }
    if (!*out) throw IoError("write failed for '" + out_path + "'");
    if (out_path != "-") std::cerr << "wrote " << n << " records in " << spec.n_windows << " windows to " << out_path << '\n';
    return ok;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : detail::split_list(s)) out.push_back(detail::parse_number<double>("list", item));
    return out;
}

struct EvalArgs {
    std::size_t trials = 50;
    std::int64_t grace = 18;
    std::string kind = "many_to_one";
    std::size_t n_attacks = 5;
    std::int64_t length = 5;
    double factor = 10.0;
    std::uint64_t magnitude = 0;
    bool records = false;
    std::int64_t warmup = 10;
    std::string p0s, lambdas, array;
    std::string alert_log, json_out;
};

int cmd_evaluate(PipelineConfig cfg, const EvalArgs& a, bool windows_given) {
    if (!windows_given) cfg.synthetic_windows = 360;
    EvalOptions o;
    o.trials = a.trials;
    o.grace = a.grace;
    o.kind = parse_attack_kind(a.kind);
    o.n_attacks = a.n_attacks;
    o.attack_length = a.length;
    o.magnitude_factor = a.records ? 0.0 : a.factor;
    o.magnitude = a.magnitude;
    o.inject_records = a.records;
    o.warmup = a.warmup;
    o.attacks = cfg.attacks;
    cfg.attacks.clear();
    std::optional<ArrayKind> arr;
    if (a.array == "src") arr = ArrayKind::src;
    else if (a.array == "dst") arr = ArrayKind::dst;
    else if (!a.array.empty()) throw ParameterError("--array must be src or dst");
    if (!a.p0s.empty() || !a.lambdas.empty() || arr) {
        for (const auto& base : default_variants(cfg)) {
            auto p0s = a.p0s.empty() ? std::vector<double>{base.p0} : parse_list(a.p0s);
            auto lambdas = a.lambdas.empty() ? std::vector<double>{base.lambda} : parse_list(a.lambdas);
            for (double p : p0s)
                for (double l : lambdas) {
                    DetectorVariant v = base;
                    v.p0 = p;
                    v.lambda = l;
                    v.array = arr;
                    std::ostringstream label;
                    label << base.detector << "(p=" << p << ",l=" << l << ")";
                    v.label = label.str();
                    o.variants.push_back(v);
                }
        }
    }
    std::ofstream log;
    if (!a.alert_log.empty()) {
        log.open(a.alert_log);
        if (!log) throw IoError("cannot write '" + a.alert_log + "'");
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto res = evaluate(cfg, o, a.alert_log.empty() ? nullptr : &log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << std::left << std::setw(34) << "variant" << std::setw(10) << "array" << std::setw(11) << "precision"
              << std::setw(9) << "recall" << std::setw(9) << "alerts" << "detected\n";
    for (const auto& r : res.rows)
        std::cout << std::setw(34) << r.label << std::setw(10) << r.array << std::fixed << std::setprecision(3)
                  << std::setw(11) << r.precision << std::setw(9) << r.recall << std::setw(9) << r.alert_windows
                  << r.detected << '/' << r.episodes << '\n';
    std::cout << res.trials << " trials, grace " << res.grace << " windows, " << std::setprecision(1) << secs << " s\n";
    if (!a.json_out.empty()) {
        std::ofstream jf(a.json_out);
        if (!jf) throw IoError("cannot write '" + a.json_out + "'");
        jf << eval_json(res).dump(2) << '\n';
    }
    return ok;
}

int cmd_report(const std::string& path, bool as_json) {
    fs::path file = path;
    if (fs::is_directory(file)) file /= "alerts.jsonl";
    std::ifstream in(file);
    if (!in) throw IoError("cannot open '" + file.string() + "'");
    struct Stat {
        std::size_t alerts = 0;
        std::int64_t first = 0, last = 0;
        std::size_t max_bins = 0;
        std::map<std::size_t, std::size_t> bins;
    };
    std::map<std::string, Stat> stats;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.value("flagged", false)) continue;
        const std::string key = j.at("detector").get<std::string>() + "/" + j.at("array").get<std::string>();
        auto& s = stats[key];
        const auto w = j.at("window").get<std::int64_t>();
        if (s.alerts == 0) s.first = w;
        s.last = w;
        ++s.alerts;
        const auto bins = j.at("bins").get<std::vector<std::size_t>>();
        s.max_bins = std::max(s.max_bins, bins.size());
        for (auto b : bins) ++s.bins[b];
    }
    json out = json::object();
    for (const auto& [key, s] : stats) {
        std::vector<std::pair<std::size_t, std::size_t>> top(s.bins.begin(), s.bins.end());
        std::stable_sort(top.begin(), top.end(), [](auto& x, auto& y) { return x.second > y.second; });
        if (top.size() > 5) top.resize(5);
        json tj = json::array();
        for (auto& [b, n] : top) tj.push_back({{"bin", b}, {"windows", n}});
        out[key] = {{"alerts", s.alerts}, {"first_window", s.first}, {"last_window", s.last},
                    {"max_bins", s.max_bins}, {"top_bins", tj}};
    }
    if (as_json) {
        std::cout << out.dump(2) << '\n';
        return ok;
    }
    if (stats.empty()) std::cout << "no alerts in " << file.string() << '\n';
    for (const auto& [key, j] : out.items()) {
        std::cout << std::left << std::setw(22) << key << j["alerts"] << " alerts, windows " << j["first_window"]
                  << ".." << j["last_window"] << ", top bins:";
        for (const auto& b : j["top_bins"]) std::cout << ' ' << b["bin"] << '(' << b["windows"] << ')';
        std::cout << '\n';
    }
    return ok;
}

json diag_one(std::int64_t w, ArrayKind arr, const std::vector<std::uint64_t>& x, int j1, int j2) {
    json j{{"window", w}, {"array", to_string(arr)}};
    std::span<const std::uint64_t> s(x);
    j["positive"] = detail::positive_entries(s).size();
    try {
        auto fit = max_spectrum(s, j1, j2);
        j["max_spectrum"] = {{"alpha", fit.alpha}, {"c", fit.c}, {"j1", fit.j1}, {"j2", fit.j2},
                             {"spectrum", fit.spectrum}};
    } catch (const Error& e) {
        j["max_spectrum"] = {{"error", e.what()}};
    }
    try {
        j["hill"] = hill_estimator(s, std::max<std::size_t>(1, detail::positive_entries(s).size() / 10));
    } catch (const Error&) {
        j["hill"] = nullptr;
    }
    try {
        j["ccdf_alpha"] = ccdf_alpha(s, 0.5);
    } catch (const Error&) {
        j["ccdf_alpha"] = nullptr;
    }
    return j;
}

int cmd_diag(const PipelineConfig& cfg) {
    cfg.validate();
    const auto h = HashSuite::from_master(cfg.hash_seed, cfg.m, cfg.m_prime, cfg.substreams()).brick;
    Databrick brick(cfg.m);
    auto flush = [&] {
        const auto a = brick.arrays();
        std::cout << diag_one(brick.window(), ArrayKind::src, a.src, cfg.j1, cfg.j2).dump() << '\n';
        std::cout << diag_one(brick.window(), ArrayKind::dst, a.dst, cfg.j1, cfg.j2).dump() << '\n';
        brick.clear();
        brick.set_window(brick.window() + 1);
    };
    bool started = false;
    auto push = [&](const WindowedRecord& r) {
        if (!started) {
            brick.set_window(r.window);
            started = true;
        }
        while (brick.window() < r.window) flush();
        brick.update(r.record, h, cfg.value_kind);
    };
    if (!cfg.input.empty()) {
        std::ifstream in(cfg.input);
        if (!in) throw IoError("cannot open input '" + cfg.input + "'");
        FlowReader reader(in, cfg.window_spec());
        while (auto r = reader.next()) push(*r);
    } else {
        SyntheticGenerator gen(cfg.synthetic_spec());
        std::vector<FlowRecord> recs;
        while (!gen.done()) {
            const auto w = gen.window();
            gen.next(recs);
            for (const auto& r : recs) push({w, r});
        }
    }
    if (started) flush();
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"amon: sketch-based network traffic monitor"};
    app.require_subcommand(1);

    ConfigFlags run_flags, gen_flags, eval_flags, diag_flags;
    bool flat = false, no_bricks = false;
    auto* run = app.add_subcommand("run", "process flow records and write per-window products");
    run_flags.attach(*run);
    run->add_flag("--flat", flat, "write directly into --output instead of a timestamped run directory");
    run->add_flag("--no-databricks", no_bricks, "skip the databricks.jsonl export");

    std::string gen_out = "-";
    auto* gen = app.add_subcommand("generate", "write a synthetic flow CSV");
    gen_flags.attach(*gen);
    gen->add_option("-o,--out", gen_out, "CSV path, '-' for stdout");

    EvalArgs ea;
    auto* ev = app.add_subcommand("evaluate", "attack injection experiment with precision and recall");
    eval_flags.attach(*ev);
    ev->add_option("--trials", ea.trials, "independent trials")->check(CLI::PositiveNumber);
    ev->add_option("--grace", ea.grace, "grace period in windows");
    ev->add_option("--attack-kind", ea.kind, "many_to_one, one_to_many or many_to_many");
    ev->add_option("--n-attacks", ea.n_attacks, "attacks per trial");
    ev->add_option("--attack-length", ea.length, "windows per attack");
    ev->add_option("--factor", ea.factor, "attack volume as a multiple of the array maximum");
    ev->add_option("--magnitude", ea.magnitude, "absolute attack bytes per window (with --inject-records)");
    ev->add_flag("--inject-records", ea.records, "inject attack flows into the record stream");
    ev->add_option("--warmup", ea.warmup, "attack-free windows at the start of each trial");
    ev->add_option("--p0", ea.p0s, "comma-separated confidence levels to sweep");
    ev->add_option("--lambda", ea.lambdas, "comma-separated smoothing weights to sweep");
    ev->add_option("--array", ea.array, "force src or dst instead of the matching array");
    ev->add_option("--alert-log", ea.alert_log, "write flagged verdicts as JSON lines");
    ev->add_option("--json", ea.json_out, "write the result table as JSON");

    std::string report_path;
    bool report_json = false;
    auto* rep = app.add_subcommand("report", "summarise an alert log");
    rep->add_option("path", report_path, "run directory or alerts.jsonl")->required();
    rep->add_flag("--json", report_json, "JSON output");

    auto* diag = app.add_subcommand("diag", "per-window tail diagnostics (max-spectrum, Hill, CCDF)");
    diag_flags.attach(*diag);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : config_error;
    }

    try {
        if (*run) {
            auto cfg = run_flags.resolve();
            if (flat) cfg.timestamped_output = false;
            if (no_bricks) cfg.export_databricks = false;
            return cmd_run(cfg);
        }
        if (*gen) return cmd_generate(gen_flags.resolve(), gen_out);
        if (*ev) return cmd_evaluate(eval_flags.resolve(), ea, eval_flags.given("synthetic_windows"));
        if (*rep) return cmd_report(report_path, report_json);
        if (*diag) return cmd_diag(diag_flags.resolve());
    } catch (const InvariantError& e) {
        std::cerr << "internal invariant violated: " << e.what() << '\n';
        return invariant_error;
    } catch (const ParameterError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return config_error;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return io_error;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return io_error;
    } catch (const OrderingError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return io_error;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    }
    return ok;
}
