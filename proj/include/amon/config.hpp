#pragma once

// Pipeline configuration and its key=value file format.
//
//   # comment
//   m=128
//   attack=many_to_one:500000:20:24:167772161:20
//
// `attack` may repeat; list values (detectors, suppress_dst) are
// comma-separated.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "amon/detect_community.hpp"
#include "amon/detect_frechet.hpp"
#include "amon/detect_relvol.hpp"
#include "amon/error.hpp"
#include "amon/heavy_hitters.hpp"
#include "amon/ingest.hpp"

namespace amon {

inline const std::set<std::string>& known_detectors() {
    static const std::set<std::string> names{"frechet", "relvol", "relvol_chart", "community"};
    return names;
}

struct PipelineConfig {
    // Data products
    std::size_t m = 128;
    std::size_t m_prime = 256;
    std::size_t bm_m = 0;  ///< Boyer-Moore sub-streams; 0 means m
    std::size_t top_n = 3000;
    std::size_t top_k = 10;
    double window_seconds = 10.0;
    std::uint64_t window_records = 0;  ///< > 0 switches to record-count windows
    ValueKind value_kind = ValueKind::bytes;
    KeyMode key_mode = KeyMode::pair;

    // Detectors
    double frechet_p0 = 0.95;
    double frechet_lambda = 0.5;
    int j1 = 1;
    int j2 = 6;
    std::size_t relvol_k = 3;
    double relvol_p0 = 0.95;
    double relvol_lambda = 0.5;
    std::size_t mc_reps = 4000;
    double chart_lambda_p = 0.6;
    double chart_L = 1.64;
    double community_p0 = 0.9999;
    double lambda_comm = 0.5;
    std::uint32_t clique_threshold = 1;
    std::set<std::string> detectors = known_detectors();

    // Seeds
    std::uint64_t hash_seed = 1;
    std::uint64_t seed = 1;

    // Input: a CSV path, or synthetic traffic when empty
    std::string input;
    std::int64_t synthetic_windows = 60;
    std::uint64_t synthetic_rate = 10000;
    double synthetic_alpha = 1.6;
    double synthetic_byte_scale = 100.0;
    std::vector<AttackSpec> attacks;
    std::vector<std::uint32_t> suppress_dst;

    // Output
    std::string output = "amon-out";
    bool timestamped_output = true;
    bool export_databricks = true;
    bool cliques = true;

    std::size_t substreams() const noexcept { return bm_m == 0 ? m : bm_m; }

    bool enabled(const std::string& d) const { return detectors.count(d) != 0; }

    WindowSpec window_spec() const {
        WindowSpec w;
        w.duration = window_seconds;
        w.value_kind = value_kind;
        if (window_records > 0) w.records_per_window = window_records;
        return w;
    }

    SyntheticSpec synthetic_spec() const {
        SyntheticSpec s;
        s.seed = seed;
        s.n_windows = synthetic_windows;
        s.rate = synthetic_rate;
        s.tail_alpha = synthetic_alpha;
        s.window_seconds = window_seconds;
        s.byte_scale = synthetic_byte_scale;
        s.attacks = attacks;
        return s;
    }

    FrechetConfig frechet() const { return {frechet_p0, frechet_lambda, j1, j2}; }

    RelVolConfig relvol() const {
        RelVolConfig r;
        r.k = relvol_k;
        r.p0 = relvol_p0;
        r.lambda_alpha = relvol_lambda;
        r.mc_reps = mc_reps;
        r.seed = seed;
        r.j1 = j1;
        r.j2 = j2;
        r.chart = ChartConfig{chart_lambda_p, chart_L};
        return r;
    }

    CommunityConfig community() const { return {community_p0, lambda_comm}; }

    void validate() const {
        auto pow2 = [](std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; };
        if (!pow2(m) || m > 4096) throw ParameterError("m must be a power of two in [2, 4096]");
        if (!pow2(m_prime)) throw ParameterError("m_prime must be a power of two >= 2");
        if (!pow2(substreams())) throw ParameterError("bm_m must be a power of two >= 2");
        if (top_n < 1) throw ParameterError("top_n must be >= 1");
        if (top_k < 1 || top_k > substreams()) throw ParameterError("top_k must be in [1, bm_m]");
        if (relvol_k < 1 || relvol_k > m) throw ParameterError("relvol_k must be in [1, m]");
        if (clique_threshold < 1) throw ParameterError("clique_threshold must be >= 1");
        window_spec().validate();
        frechet().validate();
        relvol().validate();
        (void)ZChart(chart_lambda_p, chart_L);
        community().validate();
        TailConfig{frechet_lambda, j1, j2}.validate();
        for (const auto& d : detectors)
            if (!known_detectors().count(d)) throw ParameterError("unknown detector '" + d + "'");
        if (input.empty()) synthetic_spec().validate();
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
        throw ParameterError("config '" + std::string(key) + "': bad value '" + std::string(v) + "'");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParameterError("config '" + std::string(key) + "': expected true/false");
}

inline std::vector<std::string> split_list(std::string_view v) {
    std::vector<std::string> out;
    while (!v.empty()) {
        auto c = v.find(',');
        auto item = trim(v.substr(0, c));
        if (!item.empty()) out.emplace_back(item);
        if (c == std::string_view::npos) break;
        v.remove_prefix(c + 1);
    }
    return out;
}

} // namespace detail

/// Apply one key=value setting. Unknown keys are an error.
inline void set_config_value(PipelineConfig& c, std::string_view key, std::string_view value) {
    using detail::parse_number;
    if (key == "m") c.m = parse_number<std::size_t>(key, value);
    else if (key == "m_prime") c.m_prime = parse_number<std::size_t>(key, value);
    else if (key == "bm_m") c.bm_m = parse_number<std::size_t>(key, value);
    else if (key == "top_n") c.top_n = parse_number<std::size_t>(key, value);
    else if (key == "top_k") c.top_k = parse_number<std::size_t>(key, value);
    else if (key == "window_seconds") c.window_seconds = parse_number<double>(key, value);
    else if (key == "window_records") c.window_records = parse_number<std::uint64_t>(key, value);
    else if (key == "value_kind") c.value_kind = parse_value_kind(value);
    else if (key == "key_mode") c.key_mode = parse_key_mode(value);
    else if (key == "frechet_p0") c.frechet_p0 = parse_number<double>(key, value);
    else if (key == "frechet_lambda") c.frechet_lambda = parse_number<double>(key, value);
    else if (key == "j1") c.j1 = parse_number<int>(key, value);
    else if (key == "j2") c.j2 = parse_number<int>(key, value);
    else if (key == "relvol_k") c.relvol_k = parse_number<std::size_t>(key, value);
    else if (key == "relvol_p0") c.relvol_p0 = parse_number<double>(key, value);
    else if (key == "relvol_lambda") c.relvol_lambda = parse_number<double>(key, value);
    else if (key == "mc_reps") c.mc_reps = parse_number<std::size_t>(key, value);
    else if (key == "chart_lambda_p") c.chart_lambda_p = parse_number<double>(key, value);
    else if (key == "chart_L") c.chart_L = parse_number<double>(key, value);
    else if (key == "community_p0") c.community_p0 = parse_number<double>(key, value);
    else if (key == "lambda_comm") c.lambda_comm = parse_number<double>(key, value);
    else if (key == "clique_threshold") c.clique_threshold = parse_number<std::uint32_t>(key, value);
    else if (key == "detectors") {
        c.detectors.clear();
        for (auto& d : detail::split_list(value)) c.detectors.insert(d);
    }
    else if (key == "hash_seed") c.hash_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "input") c.input = std::string(value);
    else if (key == "synthetic_windows") c.synthetic_windows = parse_number<std::int64_t>(key, value);
    else if (key == "synthetic_rate") c.synthetic_rate = parse_number<std::uint64_t>(key, value);
    else if (key == "synthetic_alpha") c.synthetic_alpha = parse_number<double>(key, value);
    else if (key == "synthetic_byte_scale") c.synthetic_byte_scale = parse_number<double>(key, value);
    else if (key == "attack") c.attacks.push_back(parse_attack(value));
    else if (key == "suppress_dst") {
        c.suppress_dst.clear();
        for (auto& k : detail::split_list(value)) {
            auto key_v = parse_key(k);
            if (!key_v) throw ParameterError("config 'suppress_dst': bad key '" + k + "'");
            c.suppress_dst.push_back(*key_v);
        }
    }
    else if (key == "output") c.output = std::string(value);
    else if (key == "timestamped_output") c.timestamped_output = detail::parse_bool(key, value);
    else if (key == "export_databricks") c.export_databricks = detail::parse_bool(key, value);
    else if (key == "cliques") c.cliques = detail::parse_bool(key, value);
    else throw ParameterError("unknown config key '" + std::string(key) + "'");
}

inline PipelineConfig parse_config(std::istream& in, PipelineConfig base = {}) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.empty() || view.front() == '#') continue;
        auto eq = view.find('=');
        if (eq == std::string_view::npos)
            throw ParameterError("config line " + std::to_string(line_no) + ": expected key=value");
        set_config_value(base, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
    }
    return base;
}

inline PipelineConfig parse_config_text(const std::string& text, PipelineConfig base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    return parse_config(in, std::move(base));
}

/// Lossless text form; parse_config_text(to_config_text(c)) reproduces c.
inline std::string to_config_text(const PipelineConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    auto join = [](const auto& items, auto&& fmt) {
        std::string s;
        for (const auto& it : items) {
            if (!s.empty()) s += ',';
            s += fmt(it);
        }
        return s;
    };
    o << "m=" << c.m << '\n'
      << "m_prime=" << c.m_prime << '\n'
      << "bm_m=" << c.bm_m << '\n'
      << "top_n=" << c.top_n << '\n'
      << "top_k=" << c.top_k << '\n'
      << "window_seconds=" << fmt_double(c.window_seconds) << '\n'
      << "window_records=" << c.window_records << '\n'
      << "value_kind=" << to_string(c.value_kind) << '\n'
      << "key_mode=" << to_string(c.key_mode) << '\n'
      << "frechet_p0=" << fmt_double(c.frechet_p0) << '\n'
      << "frechet_lambda=" << fmt_double(c.frechet_lambda) << '\n'
      << "j1=" << c.j1 << '\n'
      << "j2=" << c.j2 << '\n'
      << "relvol_k=" << c.relvol_k << '\n'
      << "relvol_p0=" << fmt_double(c.relvol_p0) << '\n'
      << "relvol_lambda=" << fmt_double(c.relvol_lambda) << '\n'
      << "mc_reps=" << c.mc_reps << '\n'
      << "chart_lambda_p=" << fmt_double(c.chart_lambda_p) << '\n'
      << "chart_L=" << fmt_double(c.chart_L) << '\n'
      << "community_p0=" << fmt_double(c.community_p0) << '\n'
      << "lambda_comm=" << fmt_double(c.lambda_comm) << '\n'
      << "clique_threshold=" << c.clique_threshold << '\n'
      << "detectors=" << join(c.detectors, [](const std::string& s) { return s; }) << '\n'
      << "hash_seed=" << c.hash_seed << '\n'
      << "seed=" << c.seed << '\n'
      << "input=" << c.input << '\n'
      << "synthetic_windows=" << c.synthetic_windows << '\n'
      << "synthetic_rate=" << c.synthetic_rate << '\n'
      << "synthetic_alpha=" << fmt_double(c.synthetic_alpha) << '\n'
      << "synthetic_byte_scale=" << fmt_double(c.synthetic_byte_scale) << '\n';
    for (const auto& a : c.attacks) o << "attack=" << to_string(a) << '\n';
    o << "suppress_dst=" << join(c.suppress_dst, [](std::uint32_t k) { return std::to_string(k); }) << '\n'
      << "output=" << c.output << '\n'
      << "timestamped_output=" << (c.timestamped_output ? "true" : "false") << '\n'
      << "export_databricks=" << (c.export_databricks ? "true" : "false") << '\n'
      << "cliques=" << (c.cliques ? "true" : "false") << '\n';
    return o.str();
}

inline bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
    return to_config_text(a) == to_config_text(b);
}

} // namespace amon
