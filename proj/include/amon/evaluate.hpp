#pragma once

// Injection experiments: synthetic baseline traffic plus attacks at known
// windows, scored for precision and recall per detector variant.
//
// An alert window is a true positive when it falls in [start, end + grace] of
// some attack episode; an episode is detected when at least one alert window
// lands in that range. Per-trial precision and recall are averaged over
// trials. A variant that never fires scores precision 0.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "amon/config.hpp"
#include "amon/databrick.hpp"
#include "amon/detect_community.hpp"
#include "amon/detect_frechet.hpp"
#include "amon/detect_relvol.hpp"
#include "amon/hashing.hpp"
#include "amon/json_io.hpp"

namespace amon {

/// One detector at one parameter setting. An empty `array` means the array
/// matching the attack kind (src for one_to_many, dst otherwise).
struct DetectorVariant {
    std::string label;
    std::string detector = "frechet";
    std::optional<ArrayKind> array;
    double p0 = 0.95;
    double lambda = 0.5;
};

struct EvalOptions {
    /// Explicit attacks reused in every trial. When empty, `n_attacks` of
    /// `kind` are placed at random per trial with fresh target keys.
    std::vector<AttackSpec> attacks;
    AttackKind kind = AttackKind::many_to_one;
    std::size_t n_attacks = 5;
    std::int64_t attack_length = 5;
    std::uint32_t spread = 20;
    /// > 0: each attack window receives factor x the pre-attack maximum of the
    /// matching array, injected into the databrick. 0: AttackSpec magnitudes.
    double magnitude_factor = 10.0;
    std::uint64_t magnitude = 0;
    bool inject_records = false;  ///< inject flows into the record stream instead
    std::size_t trials = 50;
    std::int64_t grace = 18;
    std::int64_t warmup = 10;
    std::vector<DetectorVariant> variants;
};

struct EvalRow {
    std::string label;
    std::string detector;
    std::string array;
    double p0 = 0.0;
    double lambda = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::uint64_t alert_windows = 0;
    std::uint64_t true_alerts = 0;
    std::uint64_t episodes = 0;
    std::uint64_t detected = 0;
};

struct EvalResult {
    std::vector<EvalRow> rows;  ///< one per variant, then "any" (union of all)
    std::vector<std::set<std::int64_t>> truth;  ///< ground-truth windows per trial
    std::int64_t grace = 0;
    std::size_t trials = 0;

    const EvalRow& row(const std::string& label) const {
        for (const auto& r : rows)
            if (r.label == label) return r;
        throw ParameterError("no evaluation row '" + label + "'");
    }
};

/// Precision/recall of one trial from alert windows and episode ranges.
struct TrialScore {
    double precision = 0.0;
    double recall = 0.0;
    std::uint64_t alerts = 0, true_alerts = 0, detected = 0;
};

inline TrialScore score_trial(const std::set<std::int64_t>& alert_windows, const std::vector<AttackSpec>& episodes,
                              std::int64_t grace) {
    TrialScore s;
    auto relevant = [&](std::int64_t w) {
        for (const auto& a : episodes)
            if (w >= a.start_window && w <= a.end_window + grace) return true;
        return false;
    };
    for (auto w : alert_windows) {
        ++s.alerts;
        if (relevant(w)) ++s.true_alerts;
    }
    for (const auto& a : episodes) {
        auto it = alert_windows.lower_bound(a.start_window);
        if (it != alert_windows.end() && *it <= a.end_window + grace) ++s.detected;
    }
    s.precision = s.alerts ? static_cast<double>(s.true_alerts) / static_cast<double>(s.alerts) : 0.0;
    s.recall = episodes.empty() ? 0.0 : static_cast<double>(s.detected) / static_cast<double>(episodes.size());
    return s;
}

namespace detail {

inline ArrayKind matching_array(AttackKind k) { return k == AttackKind::one_to_many ? ArrayKind::src : ArrayKind::dst; }

/// Non-overlapping episodes separated by at least `grace` windows.
inline std::vector<AttackSpec> place_attacks(Engine& g, const EvalOptions& o, std::int64_t n_windows) {
    const std::int64_t slot = o.attack_length + o.grace;
    const auto n = static_cast<std::int64_t>(o.n_attacks);
    const std::int64_t slack = n_windows - o.warmup - n * slot;
    if (slack < 0)
        throw ParameterError("evaluation needs at least " + std::to_string(o.warmup + n * slot) +
                             " windows for the requested attacks");
    std::vector<std::int64_t> offsets(o.n_attacks);
    for (auto& off : offsets) off = static_cast<std::int64_t>(uniform_below(g, static_cast<std::uint64_t>(slack) + 1));
    std::sort(offsets.begin(), offsets.end());
    std::vector<AttackSpec> out;
    for (std::int64_t i = 0; i < n; ++i) {
        AttackSpec a;
        a.kind = o.kind;
        a.magnitude = o.magnitude > 0 ? o.magnitude : 1;
        a.start_window = o.warmup + i * slot + offsets[static_cast<std::size_t>(i)];
        a.end_window = a.start_window + o.attack_length - 1;
        a.spread = o.spread;
        a.target_keys = {static_cast<std::uint32_t>(g() >> 32)};
        if (o.kind == AttackKind::many_to_many) a.target_keys.push_back(static_cast<std::uint32_t>(g() >> 32));
        out.push_back(std::move(a));
    }
    return out;
}

class VariantRunner {
public:
    VariantRunner(const PipelineConfig& cfg, const DetectorVariant& v, ArrayKind array) : det_(v.detector), array_(array) {
        if (v.detector == "frechet") {
            frechet_.emplace(FrechetConfig{v.p0, v.lambda, cfg.j1, cfg.j2}, array);
        } else if (v.detector == "relvol" || v.detector == "relvol_chart") {
            auto rc = cfg.relvol();
            rc.p0 = v.p0;
            rc.lambda_alpha = v.lambda;
            if (v.detector == "relvol") rc.chart.reset();
            relvol_.emplace(rc, array);
        } else if (v.detector == "community") {
            community_.emplace(CommunityConfig{v.p0, v.lambda}, array);
        } else {
            throw ParameterError("unknown detector '" + v.detector + "'");
        }
    }

    bool needs_graph() const noexcept { return community_.has_value(); }

    AlertEvent step(std::int64_t w, const HashArrays& arrays, const TopNGraph* g) {
        const auto& x = array_ == ArrayKind::src ? arrays.src : arrays.dst;
        if (frechet_) return frechet_->step(w, x);
        if (community_) return community_->step(w, *g);
        auto r = relvol_->step(w, x);
        if (det_ == "relvol_chart") return std::move(*r.chart);
        return std::move(r.relvol);
    }

private:
    std::string det_;
    ArrayKind array_;
    std::optional<FrechetDetector> frechet_;
    std::optional<RelVolDetector> relvol_;
    std::optional<CommunityDetector> community_;
};

} // namespace detail

/// Default variants: each enabled detector at its configured parameters.
inline std::vector<DetectorVariant> default_variants(const PipelineConfig& cfg) {
    std::vector<DetectorVariant> v;
    if (cfg.enabled("frechet")) v.push_back({"frechet", "frechet", std::nullopt, cfg.frechet_p0, cfg.frechet_lambda});
    if (cfg.enabled("relvol")) v.push_back({"relvol", "relvol", std::nullopt, cfg.relvol_p0, cfg.relvol_lambda});
    if (cfg.enabled("relvol_chart"))
        v.push_back({"relvol_chart", "relvol_chart", std::nullopt, cfg.relvol_p0, cfg.relvol_lambda});
    if (cfg.enabled("community"))
        v.push_back({"community", "community", std::nullopt, cfg.community_p0, cfg.lambda_comm});
    return v;
}

/// Runs `opts.trials` independent trials of `cfg.synthetic_windows` windows.
/// Flagged verdicts go to `alert_log` as JSON lines when given.
inline EvalResult evaluate(const PipelineConfig& cfg, const EvalOptions& opts, std::ostream* alert_log = nullptr) {
    cfg.validate();
    if (opts.trials < 1) throw ParameterError("evaluate needs trials >= 1");
    if (opts.grace < 0) throw ParameterError("grace must be >= 0");
    if (opts.attacks.empty() && (opts.n_attacks < 1 || opts.attack_length < 1))
        throw ParameterError("evaluate needs at least one attack window");
    if (opts.inject_records && opts.magnitude == 0 && opts.attacks.empty())
        throw ParameterError("record injection needs an absolute magnitude");
    if (!(opts.magnitude_factor >= 0.0)) throw ParameterError("magnitude_factor must be >= 0");
    for (const auto& a : opts.attacks) a.validate();

    const auto variants = opts.variants.empty() ? default_variants(cfg) : opts.variants;
    if (variants.empty()) throw ParameterError("no detectors to evaluate");
    const std::size_t nv = variants.size();

    EvalResult res;
    res.grace = opts.grace;
    res.trials = opts.trials;
    std::vector<EvalRow> rows(nv + 1);
    std::vector<double> sum_p(nv + 1, 0.0), sum_r(nv + 1, 0.0);

    for (std::size_t t = 0; t < opts.trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(cfg.seed, t + 1);
        Engine g(derive_seed(trial_seed, 0));
        auto attacks = opts.attacks.empty() ? detail::place_attacks(g, opts, cfg.synthetic_windows) : opts.attacks;
        const bool relative = opts.magnitude_factor > 0.0 && !opts.inject_records;

        std::set<std::int64_t> truth;
        for (const auto& a : attacks)
            for (std::int64_t w = a.start_window; w <= a.end_window; ++w) truth.insert(w);
        res.truth.push_back(truth);

        auto spec = cfg.synthetic_spec();
        spec.seed = derive_seed(trial_seed, 1);
        spec.attacks = opts.inject_records ? attacks : std::vector<AttackSpec>{};
        SyntheticGenerator gen(spec);
        const HashFn h(derive_seed(trial_seed, 2), cfg.m);

        std::vector<detail::VariantRunner> runners;
        bool need_graph = false;
        for (const auto& v : variants) {
            const ArrayKind arr = v.array.value_or(detail::matching_array(opts.attacks.empty() ? opts.kind
                                                                                              : attacks.front().kind));
            runners.emplace_back(cfg, v, arr);
            need_graph = need_graph || runners.back().needs_graph();
        }
        std::vector<std::set<std::int64_t>> fired(nv + 1);

        Databrick brick(cfg.m);
        std::vector<FlowRecord> recs;
        while (!gen.done()) {
            const std::int64_t w = gen.window();
            gen.next(recs);
            brick.clear();
            brick.set_window(w);
            for (const auto& r : recs) brick.update(r, h, cfg.value_kind);
            if (!opts.inject_records) {
                std::optional<HashArrays> pre;
                for (std::size_t ai = 0; ai < attacks.size(); ++ai) {
                    AttackSpec a = attacks[ai];
                    if (!a.active(w)) continue;
                    if (relative) {
                        if (!pre) pre = brick.arrays();
                        const auto& x = detail::matching_array(a.kind) == ArrayKind::src ? pre->src : pre->dst;
                        const auto peak = x.empty() ? 0 : *std::max_element(x.begin(), x.end());
                        a.magnitude = std::max<std::uint64_t>(
                            1, static_cast<std::uint64_t>(std::llround(opts.magnitude_factor * static_cast<double>(peak))));
                    }
                    inject_matrix(brick, a, h, derive_seed(trial_seed, 1000 + static_cast<std::uint64_t>(w) * 64 + ai));
                }
            }
            const auto arrays = brick.arrays();
            std::optional<TopNGraph> graph;
            if (need_graph) graph = build_topn(brick, cfg.top_n);
            for (std::size_t vi = 0; vi < nv; ++vi) {
                AlertEvent ev;
                try {
                    ev = runners[vi].step(w, arrays, graph ? &*graph : nullptr);
                } catch (const InvariantError&) {
                    throw;
                } catch (const Error&) {
                    continue;  // a failed step raises no alert
                }
                if (!ev.flagged) continue;
                fired[vi].insert(w);
                fired[nv].insert(w);
                if (alert_log) {
                    auto j = alert_json(ev);
                    j["trial"] = t;
                    j["variant"] = variants[vi].label;
                    write_line(*alert_log, j);
                }
            }
        }

        for (std::size_t vi = 0; vi <= nv; ++vi) {
            const auto s = score_trial(fired[vi], attacks, opts.grace);
            sum_p[vi] += s.precision;
            sum_r[vi] += s.recall;
            rows[vi].alert_windows += s.alerts;
            rows[vi].true_alerts += s.true_alerts;
            rows[vi].detected += s.detected;
            rows[vi].episodes += attacks.size();
        }
    }

    for (std::size_t vi = 0; vi <= nv; ++vi) {
        auto& r = rows[vi];
        if (vi < nv) {
            const auto& v = variants[vi];
            r.label = v.label.empty() ? v.detector : v.label;
            r.detector = v.detector;
            r.array = v.array ? to_string(*v.array) : "matching";
            r.p0 = v.p0;
            r.lambda = v.lambda;
        } else {
            r.label = "any";
            r.detector = "any";
            r.array = "-";
        }
        r.precision = sum_p[vi] / static_cast<double>(opts.trials);
        r.recall = sum_r[vi] / static_cast<double>(opts.trials);
    }
    res.rows = std::move(rows);
    return res;
}

inline json eval_json(const EvalResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"label", row.label},         {"detector", row.detector},       {"array", row.array},
                        {"p0", row.p0},               {"lambda", row.lambda},           {"precision", row.precision},
                        {"recall", row.recall},       {"alert_windows", row.alert_windows},
                        {"true_alerts", row.true_alerts}, {"episodes", row.episodes}, {"detected", row.detected}});
    json truth = json::array();
    for (const auto& t : r.truth) truth.push_back(std::vector<std::int64_t>(t.begin(), t.end()));
    return {{"trials", r.trials}, {"grace", r.grace}, {"rows", rows}, {"truth", truth}};
}

} // namespace amon
