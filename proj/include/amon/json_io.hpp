#pragma once

// JSON-lines records for every per-window product.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amon/alert.hpp"
#include "amon/databrick.hpp"
#include "amon/detect_community.hpp"
#include "amon/heavy_hitters.hpp"
#include "amon/ingest.hpp"
#include "amon/tail.hpp"

namespace amon {

using json = nlohmann::json;

/// Dense row-major cells, or run-length [value, count] pairs when more than
/// half of the cells are zero.
inline json databrick_json(const Databrick& brick) {
    json j;
    j["window"] = brick.window();
    j["m"] = brick.m();
    j["total"] = brick.total();
    const auto cells = brick.cells();
    const std::size_t nz = brick.nonzero();
    if (2 * nz < cells.size()) {
        j["encoding"] = "rle";
        json runs = json::array();
        std::size_t i = 0;
        while (i < cells.size()) {
            std::size_t k = i;
            while (k < cells.size() && cells[k] == cells[i]) ++k;
            runs.push_back({cells[i], k - i});
            i = k;
        }
        j["cells"] = std::move(runs);
    } else {
        j["encoding"] = "dense";
        j["cells"] = std::vector<std::uint64_t>(cells.begin(), cells.end());
    }
    j["src"] = brick.col_sums();
    j["dst"] = brick.row_sums();
    return j;
}

inline Databrick databrick_from_json(const json& j) {
    Databrick b(j.at("m").get<std::size_t>(), j.at("window").get<std::int64_t>());
    const std::size_t m = b.m();
    std::size_t pos = 0;
    auto put = [&](std::uint64_t v) {
        if (pos >= m * m) throw ParseError(0, "databrick cells exceed m*m");
        if (v) b.add(pos / m, pos % m, v);
        ++pos;
    };
    if (j.at("encoding") == "rle") {
        for (const auto& run : j.at("cells"))
            for (std::uint64_t k = 0; k < run.at(1).get<std::uint64_t>(); ++k) put(run.at(0).get<std::uint64_t>());
    } else {
        for (const auto& v : j.at("cells")) put(v.get<std::uint64_t>());
    }
    if (pos != m * m) throw ParseError(0, "databrick cell count mismatch");
    return b;
}

inline json arrays_json(const HashArrays& a) {
    return {{"window", a.window}, {"src", a.src}, {"dst", a.dst}};
}

inline void add_key_fields(json& j, std::uint64_t key, KeyMode mode) {
    j["key"] = key;
    if (auto s = key_src(key, mode)) j["src_ip"] = dotted_quad(*s);
    if (auto d = key_dst(key, mode)) j["dst_ip"] = dotted_quad(*d);
}

/// One line per ranked candidate.
inline std::vector<json> hitter_lines(const HitterReport& r) {
    std::vector<json> out;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const auto& e = r.entries[i];
        json j;
        j["window"] = r.window;
        j["rank"] = i + 1;
        add_key_fields(j, e.key, r.key_mode);
        j["est_volume"] = e.est_volume;
        j["flag"] = e.flag;
        j["substream"] = e.substream;
        out.push_back(std::move(j));
    }
    return out;
}

inline json tail_json(std::int64_t window, ArrayKind array, const TailEstimate& t) {
    json j{{"window", window},        {"array", to_string(array)},   {"alpha_hat", t.alpha_hat},
           {"c_hat", t.c_hat},        {"alpha_t", t.alpha_smooth},   {"c_t", t.c_smooth},
           {"j1", t.j1},              {"j2", t.j2},                  {"fallback", t.fallback},
           {"clamped", t.clamped}};
    if (!t.note.empty()) j["note"] = t.note;
    return j;
}

inline json alert_json(const AlertEvent& e) {
    json j{{"window", e.window},      {"detector", e.detector}, {"array", to_string(e.array)},
           {"flagged", e.flagged},    {"bins", e.bins},         {"values", e.values},
           {"threshold", e.threshold}};
    if (e.skipped) j["skipped"] = true;
    for (const auto& [k, v] : e.diagnostics) j[k] = v;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

inline json clique_json(const CliqueResult& c) {
    return {{"size", c.size}, {"exact", c.exact}, {"members", c.members}};
}

inline json community_json(std::int64_t window, const TopNGraph& g, const AlertEvent* in_ev,
                           const AlertEvent* out_ev, const CliqueResult* d_clique, const CliqueResult* s_clique) {
    json j{{"window", window}, {"N", g.N}, {"edges", g.edges()}, {"in_degrees", g.in_degrees},
           {"out_degrees", g.out_degrees}};
    if (in_ev) {
        j["u_in"] = in_ev->threshold;
        j["flagged_in"] = in_ev->bins;
    }
    if (out_ev) {
        j["u_out"] = out_ev->threshold;
        j["flagged_out"] = out_ev->bins;
    }
    if (d_clique) j["clique_dst"] = clique_json(*d_clique);
    if (s_clique) j["clique_src"] = clique_json(*s_clique);
    return j;
}

inline void write_line(std::ostream& os, const json& j) { os << j.dump() << '\n'; }

} // namespace amon
