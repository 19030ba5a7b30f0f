#pragma once

// Streaming monitor: records -> per-window databrick and Boyer-Moore sketch
// -> detectors on both hash-binned arrays -> identification handoff.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "amon/config.hpp"
#include "amon/databrick.hpp"
#include "amon/detect_community.hpp"
#include "amon/detect_frechet.hpp"
#include "amon/detect_relvol.hpp"
#include "amon/hashing.hpp"
#include "amon/heavy_hitters.hpp"
#include "amon/json_io.hpp"

namespace amon {

/// Hitters whose key component on the alert's side hashes into a flagged
/// bin, in report order (highest P_est first). Keys lacking that component
/// (e.g. source-only keys against a destination alert) never match.
inline std::vector<HitterEntry> identify_handoff(const AlertEvent& alert, const HitterReport& report,
                                                 const HashFn& h) {
    std::vector<HitterEntry> out;
    if (!alert.flagged) return out;
    std::unordered_set<std::size_t> bins(alert.bins.begin(), alert.bins.end());
    for (const auto& e : report.entries) {
        auto part = alert.array == ArrayKind::dst ? key_dst(e.key, report.key_mode) : key_src(e.key, report.key_mode);
        if (part && bins.count(h(*part))) out.push_back(e);
    }
    return out;
}

struct DetectorError {
    std::int64_t window = 0;
    std::string detector;
    std::string message;
};

struct WindowResult {
    std::int64_t window = 0;
    std::uint64_t records = 0;
    HashArrays arrays;
    HitterReport hitters;
    std::vector<AlertEvent> events;  ///< every verdict, flagged or not
    std::optional<TailEstimate> tail_src, tail_dst;
    std::optional<TopNGraph> graph;
    std::optional<CliqueResult> clique_dst, clique_src;
    /// Parallel to `events`: hitters implicated by each flagged event.
    std::vector<std::vector<HitterEntry>> handoffs;
    std::vector<DetectorError> errors;

    std::size_t alerts() const {
        return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](auto& e) { return e.flagged; }));
    }
};

/// Runs the enabled detectors over finished bricks. Keeps the per-array
/// smoothing state between calls.
class DetectorBank {
public:
    explicit DetectorBank(const PipelineConfig& cfg) : cfg_(cfg) {
        if (cfg.enabled("frechet")) {
            frechet_src_.emplace(cfg.frechet(), ArrayKind::src);
            frechet_dst_.emplace(cfg.frechet(), ArrayKind::dst);
        }
        if (cfg.enabled("relvol") || cfg.enabled("relvol_chart")) {
            auto rc = cfg.relvol();
            if (!cfg.enabled("relvol_chart")) rc.chart.reset();
            relvol_src_.emplace(rc, ArrayKind::src);
            relvol_dst_.emplace(rc, ArrayKind::dst);
        }
        if (cfg.enabled("community")) {
            community_src_.emplace(cfg.community(), ArrayKind::src);
            community_dst_.emplace(cfg.community(), ArrayKind::dst);
        }
    }

    /// Fills events, tails, graph and cliques of `out` from `brick`.
    /// Detector failures are recorded in `out.errors`; the other detectors
    /// still run.
    void analyze(const Databrick& brick, WindowResult& out) {
        const std::int64_t w = brick.window();
        const auto& src = out.arrays.src;
        const auto& dst = out.arrays.dst;
        auto guarded = [&](const char* name, auto&& fn) {
            try {
                fn();
            } catch (const InvariantError&) {
                throw;
            } catch (const Error& e) {
                out.errors.push_back({w, name, e.what()});
            }
        };
        if (frechet_src_) {
            guarded("frechet", [&] {
                out.events.push_back(frechet_src_->step(w, src));
                out.tail_src = frechet_src_->last_tail();
            });
            guarded("frechet", [&] {
                out.events.push_back(frechet_dst_->step(w, dst));
                out.tail_dst = frechet_dst_->last_tail();
            });
        }
        if (relvol_src_) {
            const bool keep_relvol = cfg_.enabled("relvol");
            auto add = [&](RelVolResult r) {
                if (keep_relvol) out.events.push_back(std::move(r.relvol));
                if (r.chart) out.events.push_back(std::move(*r.chart));
            };
            guarded("relvol", [&] { add(relvol_src_->step(w, src)); });
            guarded("relvol", [&] { add(relvol_dst_->step(w, dst)); });
        }
        if (community_src_) {
            guarded("community", [&] {
                out.graph = build_topn(brick, cfg_.top_n);
                out.events.push_back(community_dst_->step(w, *out.graph));
                out.events.push_back(community_src_->step(w, *out.graph));
                if (cfg_.cliques) {
                    const auto co = co_connectivity(*out.graph);
                    out.clique_dst = max_clique_size(co, CoGraph::dst, cfg_.clique_threshold);
                    out.clique_src = max_clique_size(co, CoGraph::src, cfg_.clique_threshold);
                }
            });
        }
    }

private:
    PipelineConfig cfg_;
    std::optional<FrechetDetector> frechet_src_, frechet_dst_;
    std::optional<RelVolDetector> relvol_src_, relvol_dst_;
    std::optional<CommunityDetector> community_src_, community_dst_;
};

class Pipeline {
public:
    using Sink = std::function<void(const WindowResult&, const Databrick&)>;

    explicit Pipeline(PipelineConfig cfg)
        : cfg_((cfg.validate(), std::move(cfg))),
          hashes_(HashSuite::from_master(cfg_.hash_seed, cfg_.m, cfg_.m_prime, cfg_.substreams())),
          brick_(cfg_.m, 0),
          sketch_(cfg_.substreams(), cfg_.m_prime, hashes_.substream, hashes_.sketch),
          bank_(cfg_),
          suppressed_(cfg_.suppress_dst.begin(), cfg_.suppress_dst.end()) {}

    void set_sink(Sink s) { sink_ = std::move(s); }

    const PipelineConfig& config() const noexcept { return cfg_; }
    const HashSuite& hashes() const noexcept { return hashes_; }
    std::int64_t windows_done() const noexcept { return windows_done_; }
    std::uint64_t records_seen() const noexcept { return records_seen_; }
    std::uint64_t records_suppressed() const noexcept { return records_suppressed_; }

    /// Feed one record. Windows must not decrease; skipped windows are
    /// emitted empty.
    void push(const WindowedRecord& r) {
        if (started_ && r.window < brick_.window())
            throw OrderingError(0, "window index went backwards");
        if (!started_) {
            brick_.set_window(r.window);
            started_ = true;
        }
        while (brick_.window() < r.window) close_window();
        ++records_seen_;
        if (!suppressed_.empty() && suppressed_.count(r.record.dst)) {
            ++records_suppressed_;
            return;
        }
        const std::uint64_t v = value_of(r.record, cfg_.value_kind);
        brick_.add(hashes_.brick(r.record.dst), hashes_.brick(r.record.src), v);
        sketch_.update(key_of(r.record, cfg_.key_mode), v);
        ++window_records_;
    }

    /// Close the last open window.
    void finish() {
        if (started_) close_window();
        started_ = false;
    }

    /// Run detectors on an externally built brick.
    WindowResult analyze(const Databrick& brick) {
        WindowResult out;
        out.window = brick.window();
        out.arrays = brick.arrays();
        out.hitters.window = brick.window();
        out.hitters.key_mode = cfg_.key_mode;
        bank_.analyze(brick, out);
        return out;
    }

private:
    void close_window() {
        auto res = analyze(brick_);
        res.records = window_records_;
        res.hitters = sketch_.query(std::min(cfg_.top_k, sketch_.m()));
        res.hitters.window = brick_.window();
        res.hitters.key_mode = cfg_.key_mode;
        check_invariants(res);
        for (const auto& ev : res.events)
            res.handoffs.push_back(identify_handoff(ev, res.hitters, hashes_.brick));
        if (sink_) sink_(res, brick_);
        brick_.clear();
        brick_.set_window(brick_.window() + 1);
        sketch_.reset();
        window_records_ = 0;
        ++windows_done_;
    }

    void check_invariants(const WindowResult& res) const {
        const auto sum = [](const std::vector<std::uint64_t>& v) {
            return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
        };
        if (sum(res.arrays.src) != brick_.total() || sum(res.arrays.dst) != brick_.total())
            throw InvariantError("hash array totals disagree with the databrick in window " +
                                 std::to_string(res.window));
        if (sketch_.sketch_total() != brick_.total())
            throw InvariantError("sketch volume disagrees with the databrick in window " +
                                 std::to_string(res.window));
    }

    PipelineConfig cfg_;
    HashSuite hashes_;
    Databrick brick_;
    BmSketch sketch_;
    DetectorBank bank_;
    std::unordered_set<std::uint32_t> suppressed_;
    Sink sink_;
    bool started_ = false;
    std::uint64_t window_records_ = 0;
    std::int64_t windows_done_ = 0;
    std::uint64_t records_seen_ = 0;
    std::uint64_t records_suppressed_ = 0;
};

/// Writes a run's products as JSON-lines files into one directory.
class RunWriter {
public:
    RunWriter(const std::filesystem::path& dir, const PipelineConfig& cfg) : dir_(dir) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
        auto open = [&](const char* name) {
            auto f = std::make_unique<std::ofstream>(dir / name);
            if (!*f) throw IoError("cannot write '" + (dir / name).string() + "'");
            return f;
        };
        std::ofstream(dir / "config.conf") << to_config_text(cfg);
        export_bricks_ = cfg.export_databricks;
        if (export_bricks_) bricks_ = open("databricks.jsonl");
        arrays_ = open("arrays.jsonl");
        hitters_ = open("hitters.jsonl");
        tails_ = open("tail.jsonl");
        verdicts_ = open("verdicts.jsonl");
        alerts_ = open("alerts.jsonl");
        handoff_ = open("handoff.jsonl");
        community_ = open("community.jsonl");
        errors_ = open("errors.jsonl");
    }

    void operator()(const WindowResult& r, const Databrick& brick) {
        if (export_bricks_) write_line(*bricks_, databrick_json(brick));
        write_line(*arrays_, arrays_json(r.arrays));
        for (const auto& line : hitter_lines(r.hitters)) write_line(*hitters_, line);
        if (r.tail_src) write_line(*tails_, tail_json(r.window, ArrayKind::src, *r.tail_src));
        if (r.tail_dst) write_line(*tails_, tail_json(r.window, ArrayKind::dst, *r.tail_dst));
        for (std::size_t i = 0; i < r.events.size(); ++i) {
            const auto& ev = r.events[i];
            const auto j = alert_json(ev);
            write_line(*verdicts_, j);
            if (!ev.flagged) continue;
            write_line(*alerts_, j);
            ++alert_counts_[ev.detector];
            std::size_t rank = 0;
            for (const auto& h : r.handoffs[i]) {
                json hj{{"window", r.window}, {"detector", ev.detector}, {"array", to_string(ev.array)},
                        {"rank", ++rank}, {"est_volume", h.est_volume}, {"flag", h.flag},
                        {"substream", h.substream}};
                add_key_fields(hj, h.key, r.hitters.key_mode);
                write_line(*handoff_, hj);
            }
        }
        if (r.graph) {
            const AlertEvent* in_ev = nullptr;
            const AlertEvent* out_ev = nullptr;
            for (const auto& ev : r.events)
                if (ev.detector == "community") (ev.array == ArrayKind::dst ? in_ev : out_ev) = &ev;
            write_line(*community_, community_json(r.window, *r.graph, in_ev, out_ev,
                                                   r.clique_dst ? &*r.clique_dst : nullptr,
                                                   r.clique_src ? &*r.clique_src : nullptr));
        }
        for (const auto& e : r.errors)
            write_line(*errors_, json{{"window", e.window}, {"detector", e.detector}, {"error", e.message}});
    }

    /// Push everything to disk; a failed write surfaces here as IoError.
    void flush() {
        for (auto* f : {bricks_.get(), arrays_.get(), hitters_.get(), tails_.get(), verdicts_.get(), alerts_.get(),
                        handoff_.get(), community_.get(), errors_.get()}) {
            if (!f) continue;
            f->flush();
            if (!*f) throw IoError("write failed under '" + dir_.string() + "'");
        }
    }

    const std::map<std::string, std::size_t>& alert_counts() const noexcept { return alert_counts_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    bool export_bricks_ = true;
    std::unique_ptr<std::ofstream> bricks_, arrays_, hitters_, tails_, verdicts_, alerts_, handoff_, community_,
        errors_;
    std::map<std::string, std::size_t> alert_counts_;
};

struct RunSummary {
    std::int64_t windows = 0;
    std::uint64_t records = 0;
    std::uint64_t suppressed = 0;
    std::size_t alerts = 0;
    std::size_t detector_errors = 0;
    double seconds = 0.0;

    double records_per_second() const { return seconds > 0.0 ? static_cast<double>(records) / seconds : 0.0; }
};

/// Drive a pipeline from the configured input (CSV file or synthetic traffic).
inline RunSummary run_pipeline(const PipelineConfig& cfg, const Pipeline::Sink& sink) {
    const auto t0 = std::chrono::steady_clock::now();
    Pipeline p(cfg);
    RunSummary s;
    p.set_sink([&](const WindowResult& r, const Databrick& b) {
        s.alerts += r.alerts();
        s.detector_errors += r.errors.size();
        for (const auto& e : r.errors)
            std::cerr << "window " << e.window << ": " << e.detector << " failed: " << e.message << '\n';
        if (sink) sink(r, b);
    });
    if (!cfg.input.empty()) {
        std::ifstream in(cfg.input);
        if (!in) throw IoError("cannot open input '" + cfg.input + "'");
        FlowReader reader(in, cfg.window_spec());
        while (auto r = reader.next()) p.push(*r);
    } else {
        SyntheticGenerator gen(cfg.synthetic_spec());
        std::vector<FlowRecord> recs;
        while (!gen.done()) {
            const std::int64_t w = gen.window();
            gen.next(recs);
            for (const auto& r : recs) p.push({w, r});
        }
    }
    p.finish();
    s.windows = p.windows_done();
    s.records = p.records_seen();
    s.suppressed = p.records_suppressed();
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

} // namespace amon
