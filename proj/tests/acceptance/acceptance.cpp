// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amon/amon.hpp"
#include "oracles/oracles.hpp"

using namespace amon;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> pareto_array(Engine& g, std::size_t m, double alpha) {
    std::vector<double> x(m);
    for (auto& v : x) v = pareto(g, alpha);
    return x;
}

// ---------------------------------------------------------------------------

/// Every stream of up to 8 items over up to 4 keys (keys labelled in order of
/// first appearance) with weights 1..4, all routed to one sub-stream.
Outcome bm_exactness() {
    const BmSketch proto(2, 2, 17);
    std::vector<std::uint64_t> keys;
    for (std::uint64_t k = 1; keys.size() < 4; ++k)
        if (proto.h1()(k) == 0) keys.push_back(k);

    constexpr int kMaxLen = 8, kKeys = 4, kMaxW = 4;
    std::vector<BmSketch> state(kMaxLen + 1, proto);
    std::uint64_t w[kKeys] = {0, 0, 0, 0};
    std::uint64_t total = 0, streams = 0, with_majority = 0, cand_errors = 0, flag_errors = 0, raw_ties = 0;

    std::function<void(int, int)> rec = [&](int depth, int used) {
        for (int key = 0; key <= std::min(used, kKeys - 1); ++key) {
            for (std::uint64_t v = 1; v <= kMaxW; ++v) {
                BmSketch& sk = state[depth + 1];
                sk = state[depth];
                sk.update(keys[key], v);
                w[key] += v;
                total += v;
                ++streams;

                int maj = -1;
                for (int k = 0; k < kKeys; ++k)
                    if (2 * w[k] > total) maj = k;
                const std::uint64_t cand = *sk.candidate(0);
                if (maj >= 0) {
                    ++with_majority;
                    if (cand != keys[maj]) ++cand_errors;
                }
                if (sk.certified(0) && (maj < 0 || cand != keys[maj])) ++flag_errors;
                if (sk.flag(0) && maj < 0) ++raw_ties;

                if (depth + 1 < kMaxLen) rec(depth + 1, std::max(used, key + 1));
                w[key] -= v;
                total -= v;
            }
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    rec(0, 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // The reported flag must agree with the query output as well.
    BmSketch tie = proto;
    tie.update(keys[0], 1);
    tie.update(keys[1], 1);
    const bool report_ok = !tie.query(1).entries[0].flag;

    Outcome o;
    o.pass = cand_errors == 0 && flag_errors == 0 && report_ok && secs < 10.0;
    o.detail = fmt("%llu streams, %llu with a majority, cand errors %llu, flag errors %llu; "
                   "raw flag on at an exact tie in %llu streams (not reported as certified); %.1fs",
                   (unsigned long long)streams, (unsigned long long)with_majority, (unsigned long long)cand_errors,
                   (unsigned long long)flag_errors, (unsigned long long)raw_ties, secs);
    return o;
}

Outcome heavy_hitter_recall() {
    constexpr std::size_t kUniverse = 1'000'000, kItems = 1'000'000, kSeeds = 20;
    std::vector<double> cdf(kUniverse);
    double acc = 0;
    for (std::size_t r = 0; r < kUniverse; ++r) cdf[r] = acc += std::pow(static_cast<double>(r + 1), -1.2);
    for (auto& c : cdf) c /= acc;

    double recall_sum = 0, worst = 1;
    for (std::size_t s = 0; s < kSeeds; ++s) {
        Engine g(derive_seed(2024, s));
        BmSketch sk(1024, 256, derive_seed(99, s));
        oracle::ExactCounter exact;
        for (std::size_t i = 0; i < kItems; ++i) {
            const double u = uniform01(g);
            const auto rank = static_cast<std::uint64_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            const std::uint64_t key = splitmix64(rank ^ (s << 40));
            sk.update(key, 1);
            exact.add(key, 1);
        }
        const auto truth = exact.top(10);
        std::set<std::uint64_t> want(truth.begin(), truth.end());
        std::size_t hit = 0;
        for (const auto& e : sk.query(10).entries) hit += want.count(e.key);
        const double r = static_cast<double>(hit) / 10.0;
        recall_sum += r;
        worst = std::min(worst, r);
    }
    const double mean = recall_sum / kSeeds;
    return {mean >= 0.90, fmt("mean top-10 recall %.3f over %zu seeds (worst %.2f)", mean, kSeeds, worst)};
}

Outcome frechet_limit() {
    constexpr std::size_t kReps = 10'000, m = 128;
    const double alpha = 1.6;
    Engine g(31);
    std::vector<double> x(kReps);
    const double scale = std::pow(static_cast<double>(m), -1.0 / alpha);
    for (auto& v : x) {
        double mx = 0;
        for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, pareto(g, alpha));
        v = scale * mx;
    }
    const double d = oracle::ks_one_sample(x, [&](double t) { return t > 0 ? std::exp(-std::pow(t, -alpha)) : 0.0; });
    return {d <= 0.05, fmt("KS distance %.4f (limit 0.05)", d)};
}

Outcome relvol_limit() {
    constexpr std::size_t kReps = 10'000, m = 128;
    const double alpha = 1.6;
    Outcome o{true, ""};
    for (std::size_t k : {1, 2, 3}) {
        Engine g(derive_seed(41, k));
        std::vector<double> v(kReps);
        for (auto& x : v) x = relative_volume(pareto_array(g, m, alpha), k);
        const double d = oracle::ks_two_sample(v, sample_W(alpha, k, m, kReps, derive_seed(43, k)));
        o.pass = o.pass && d <= 0.03;
        o.detail += fmt("%sk=%zu KS %.4f", k == 1 ? "" : ", ", k, d);
    }
    o.detail += " (limit 0.03)";
    return o;
}

Outcome frechet_calibration() {
    FrechetDetector d(FrechetConfig{0.95, 0.5, 1, 6});
    Engine g(51);
    const int n = 500;
    int any = 0;
    for (int w = 0; w < n; ++w) any += d.step(w, pareto_array(g, 128, 1.6)).flagged;
    const double rate = any / double(n);
    return {std::abs(rate - 0.05) <= 0.02, fmt("any-flag rate %.3f over %d windows (target 0.05 +- 0.02)", rate, n)};
}

Outcome relvol_calibration() {
    RelVolConfig cfg;
    cfg.k = 3;
    cfg.p0 = 0.95;
    cfg.fixed_alpha = 1.6;
    cfg.chart.reset();
    RelVolDetector d(cfg);
    Engine g(61);
    const int n = 1000;
    int flags = 0;
    for (int w = 0; w < n; ++w) flags += d.step(w, pareto_array(g, 128, 1.6)).relvol.flagged;
    const double rate = flags / double(n);
    return {std::abs(rate - 0.05) <= 0.02, fmt("flag rate %.3f over %d windows at fixed alpha (target 0.05 +- 0.02)", rate, n)};
}

Outcome chart_variance() {
    Outcome o{true, ""};
    for (double lp : {0.5, 0.6}) {
        ZChart c(lp, 1.64);
        Engine g(derive_seed(71, static_cast<std::uint64_t>(lp * 10)));
        const int burn = 200, n = 200'000;
        double s = 0, ss = 0;
        for (int i = 0; i < burn + n; ++i) {
            const double z = c.update(uniform01_open_low(g)).first;
            if (i < burn) continue;
            s += z;
            ss += z * z;
        }
        const double mean = s / n, var = ss / n - mean * mean;
        const double want = lp / (2 - lp);
        const double rel = std::abs(var - want) / want;
        o.pass = o.pass && rel <= 0.10;
        o.detail += fmt("%slambda_p=%.1f var %.4f vs %.4f (%.1f%%)", o.detail.empty() ? "" : ", ", lp, var, want, 100 * rel);
    }
    return o;
}

Outcome injection_protocol() {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineConfig cfg;
    cfg.m = 128;
    cfg.synthetic_rate = 5000;
    cfg.synthetic_windows = 140;
    cfg.seed = 8;
    EvalOptions o;
    o.trials = 50;
    o.n_attacks = 5;
    o.attack_length = 5;
    o.grace = 18;
    o.warmup = 10;
    o.magnitude_factor = 10.0;
    o.variants = {{"p95", "frechet", std::nullopt, 0.95, 0.5}, {"p99", "frechet", std::nullopt, 0.99, 0.5}};
    Outcome out{true, ""};
    for (auto kind : {AttackKind::many_to_one, AttackKind::one_to_many}) {
        o.kind = kind;
        const auto r = evaluate(cfg, o);
        const double r95 = r.row("p95").recall, r99 = r.row("p99").recall;
        out.pass = out.pass && r95 >= 0.9 && r99 <= r95;
        out.detail += fmt("%s%s: recall p.95 %.3f, p.99 %.3f, precision p.95 %.3f", out.detail.empty() ? "" : "; ",
                          to_string(kind).c_str(), r95, r99, r.row("p95").precision);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.pass = out.pass && secs < 600;
    out.detail += fmt("; %.0fs", secs);
    return out;
}

Outcome community_catch() {
    constexpr int kTrials = 50, kWarm = 10;
    int caught = 0, comm_hits = 0, frechet_misses = 0, frechet_any = 0;
    for (int t = 0; t < kTrials; ++t) {
        const std::uint64_t seed = derive_seed(91, static_cast<std::uint64_t>(t));
        SyntheticSpec spec;
        spec.seed = derive_seed(seed, 1);
        spec.n_windows = kWarm + 1;
        spec.rate = 20000;
        SyntheticGenerator gen(spec);
        const HashFn h(derive_seed(seed, 2), 128);
        CommunityDetector comm(CommunityConfig{0.9999, 0.5}, ArrayKind::dst);
        FrechetDetector fre(FrechetConfig{0.95, 0.5, 1, 6}, ArrayKind::dst);
        std::vector<FlowRecord> recs;
        Databrick brick(128);
        AlertEvent ce, fe;
        std::size_t row = 0;
        while (!gen.done()) {
            const std::int64_t w = gen.window();
            gen.next(recs);
            brick.clear();
            brick.set_window(w);
            for (const auto& r : recs) brick.update(r, h, ValueKind::bytes);
            if (w == kWarm) {
                Engine g(derive_seed(seed, 3));
                row = uniform_below(g, 128);
                redistribute_row(brick, row, 60, derive_seed(seed, 4));
            }
            ce = comm.step(w, build_topn(brick, 3000));
            fe = fre.step(w, brick.row_sums());
        }
        const bool c_hit = std::find(ce.bins.begin(), ce.bins.end(), row) != ce.bins.end();
        const bool f_hit = std::find(fe.bins.begin(), fe.bins.end(), row) != fe.bins.end();
        comm_hits += c_hit;
        frechet_misses += !f_hit;
        frechet_any += fe.flagged;
        caught += c_hit && !f_hit;
    }
    return {caught >= 45, fmt("%d/%d trials: community flags the row in %d, Frechet misses it in %d "
                              "(Frechet raised any alert in %d)",
                              caught, kTrials, comm_hits, frechet_misses, frechet_any)};
}

Outcome conservation() {
    constexpr std::size_t kRecords = 1'000'000, m = 128;
    Engine g(101);
    const HashFn h(7, m);
    std::vector<FlowRecord> log(kRecords);
    for (auto& r : log) {
        r.src = static_cast<std::uint32_t>(g() >> 32);
        r.dst = static_cast<std::uint32_t>(g() >> 32);
        r.bytes = 1 + uniform_below(g, 1'000'000);
        r.packets = 1 + uniform_below(g, 100);
    }
    Databrick brick(m);
    std::vector<std::uint64_t> src(m, 0), dst(m, 0);
    std::uint64_t total = 0;
    for (const auto& r : log) {
        brick.update(r, h, ValueKind::bytes);
        dst[h(r.dst)] += r.bytes;
        src[h(r.src)] += r.bytes;
        total += r.bytes;
    }
    const auto rows = brick.row_sums(), cols = brick.col_sums();
    std::uint64_t cell_sum = 0;
    for (auto c : brick.cells()) cell_sum += c;
    const bool identities = rows == dst && cols == src && brick.total() == total && cell_sum == total &&
                            std::accumulate(rows.begin(), rows.end(), std::uint64_t{0}) == total &&
                            std::accumulate(cols.begin(), cols.end(), std::uint64_t{0}) == total;

    Databrick replay(m);
    for (const auto& r : log) replay.update(r, h, ValueKind::bytes);
    const bool same = std::equal(replay.cells().begin(), replay.cells().end(), brick.cells().begin()) &&
                      databrick_json(replay).dump() == databrick_json(brick).dump();
    const bool round_trip = databrick_from_json(databrick_json(brick)).cells().size() == brick.cells().size() &&
                            std::equal(brick.cells().begin(), brick.cells().end(),
                                       databrick_from_json(databrick_json(brick)).cells().begin());
    return {identities && same && round_trip,
            fmt("row/column/total identities %s, replay %s, JSON round trip %s over %zu records",
                identities ? "exact" : "BROKEN", same ? "bit-identical" : "DIFFERS",
                round_trip ? "exact" : "DIFFERS", kRecords)};
}

Outcome determinism() {
    PipelineConfig cfg;
    cfg.synthetic_windows = 60;
    cfg.synthetic_rate = 4000;
    cfg.seed = 1234;
    EvalOptions o;
    o.trials = 3;
    o.n_attacks = 2;
    o.warmup = 5;
    o.variants = {{"frechet", "frechet", std::nullopt, 0.95, 0.5},
                  {"relvol", "relvol", std::nullopt, 0.95, 0.5},
                  {"relvol_chart", "relvol_chart", std::nullopt, 0.95, 0.5},
                  {"community", "community", std::nullopt, 0.9999, 0.5}};
    std::ostringstream a, b;
    evaluate(cfg, o, &a);
    evaluate(cfg, o, &b);
    const bool same = a.str() == b.str() && !a.str().empty();
    return {same, fmt("alert logs %s (%zu bytes each run)", same ? "byte-identical" : "DIFFER", a.str().size())};
}

Outcome linear_algebra() {
    Engine g(121);
    int diag_ok = 0, product_ok = 0, clique_ok = 0, clique_runs = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t m = 128;
        std::vector<std::uint8_t> adj(m * m, 0);
        for (auto c : detail::distinct_indices(g, m * m, 3000)) adj[c] = 1;
        const auto graph = TopNGraph::from_adjacency(m, adj);
        const auto co = co_connectivity(graph);
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i) ok = ok && co.d(i, i) == graph.in_degrees[i] && co.s(i, i) == graph.out_degrees[i];
        diag_ok += ok;
        if (rep < 10) {
            const auto at = oracle::transpose(adj, m);
            product_ok += co.D == oracle::matmul(adj, at, m) && co.S == oracle::matmul(at, adj, m);
        }
    }
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t m = 20;
        const double density = 0.05 + 0.25 * uniform01(g);
        std::vector<std::uint8_t> adj(m * m, 0);
        for (auto& a : adj) a = uniform01(g) < density;
        const auto co = co_connectivity(TopNGraph::from_adjacency(m, adj));
        for (auto which : {CoGraph::dst, CoGraph::src}) {
            const auto& mat = which == CoGraph::dst ? co.D : co.S;
            std::vector<std::size_t> active;
            for (std::size_t i = 0; i < m; ++i)
                if (mat[i * m + i] > 0) active.push_back(i);
            std::vector<std::vector<bool>> sub(active.size(), std::vector<bool>(active.size(), false));
            for (std::size_t a = 0; a < active.size(); ++a)
                for (std::size_t b = 0; b < active.size(); ++b)
                    sub[a][b] = a != b && mat[active[a] * m + active[b]] >= 1;
            const auto res = max_clique_size(co, which);
            ++clique_runs;
            clique_ok += res.exact && res.size == oracle::max_clique_exhaustive(sub);
        }
    }
    return {diag_ok == 100 && product_ok == 10 && clique_ok == clique_runs,
            fmt("diagonal identities %d/100, full products vs triple loop %d/10, max clique vs exhaustive %d/%d",
                diag_ok, product_ok, clique_ok, clique_runs)};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"Boyer-Moore exactness", bm_exactness},
        {"heavy-hitter recall", heavy_hitter_recall},
        {"maxima converge to Frechet", frechet_limit},
        {"relative volume converges to W", relvol_limit},
        {"Frechet null calibration", frechet_calibration},
        {"relative-volume exactness under Pareto", relvol_calibration},
        {"control-chart variance", chart_variance},
        {"injection protocol", injection_protocol},
        {"community structural catch", community_catch},
        {"databrick conservation", conservation},
        {"determinism", determinism},
        {"linear-algebra identities", linear_algebra},
    };
    int failed = 0, idx = 0;
    for (const auto& c : criteria) {
        ++idx;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", idx, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %d criteria passed\n", idx - failed, idx);
    return failed ? 1 : 0;
}
