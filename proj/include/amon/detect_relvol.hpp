#pragma once

// Relative-volume detection.
//
// V(k) is the share of the window's volume carried by its k largest bins.
// For i.i.d. Pareto(alpha) bins its law is exactly that of
//
//   W_alpha(k, m) = sum_{j<=k} G_j^(-1/alpha) / sum_{j<=m} G_j^(-1/alpha),
//
// G_j the arrival times of a unit-rate Poisson process. The level-p0 quantile
// of W is found by Monte Carlo and V(k) above it raises a flag. The control
// chart variant smooths z-scores of the exceedance p-value instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "amon/alert.hpp"
#include "amon/error.hpp"
#include "amon/random.hpp"
#include "amon/tail.hpp"

namespace amon {

/// Indices of the k largest entries, largest first; equal values go to the lower index.
template <typename T>
std::vector<std::size_t> top_k_bins(std::span<const T> x, std::size_t k) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, x.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return x[a] != x[b] ? x[a] > x[b] : a < b; });
    idx.resize(k);
    return idx;
}

template <typename T>
double relative_volume(std::span<const T> x, std::size_t k) {
    if (k < 1 || k > x.size()) throw ParameterError("relative_volume: k must be in [1, m]");
    double total = 0.0;
    for (auto v : x) total += static_cast<double>(v);
    if (!(total > 0.0)) throw UndefinedRatioError("relative volume of an all-zero array");
    if (k == x.size()) return 1.0;
    double top = 0.0;
    for (auto i : top_k_bins(x, k)) top += static_cast<double>(x[i]);
    return top / total;
}

template <typename T>
double relative_volume(const std::vector<T>& x, std::size_t k) {
    return relative_volume(std::span<const T>(x), k);
}

/// Replicates of W_alpha(k, m); each block of `kChunk` replicates draws from
/// its own engine seeded by (seed, block), so the sample does not depend on
/// how the work is scheduled.
inline std::vector<double> sample_W(double alpha, std::size_t k, std::size_t m, std::size_t reps, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw ParameterError("sample_W: alpha must be > 0");
    if (k < 1 || k > m) throw ParameterError("sample_W: k must be in [1, m]");
    constexpr std::size_t kChunk = 256;
    const double inv = -1.0 / alpha;
    std::vector<double> out(reps);
    for (std::size_t start = 0; start < reps; start += kChunk) {
        Engine g(derive_seed(seed, start / kChunk));
        const std::size_t end = std::min(reps, start + kChunk);
        for (std::size_t r = start; r < end; ++r) {
            double gamma = 0.0, head = 0.0, tail = 0.0;
            for (std::size_t j = 1; j <= m; ++j) {
                gamma += exponential(g);
                const double term = std::pow(gamma, inv);
                (j <= k ? head : tail) += term;
            }
            out[r] = head / (head + tail);
        }
    }
    return out;
}

/// Inverse empirical CDF: the smallest sample value with ECDF >= p.
inline double empirical_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ParameterError("empirical_quantile of an empty sample");
    auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    idx = std::clamp<std::size_t>(idx, 1, sorted.size());
    return sorted[idx - 1];
}

/// Fraction of the sample strictly above v.
inline double exceedance_fraction(std::span<const double> sorted, double v) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), v);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

/// Sorted W samples keyed by (alpha rounded to 0.01, k, m, reps). The Monte
/// Carlo seed is derived from the master seed and the key, so a threshold is a
/// pure function of its key no matter which window first asked for it.
class WQuantileCache {
public:
    explicit WQuantileCache(std::uint64_t master_seed = 1) : seed_(master_seed) {}

    const std::vector<double>& sorted_sample(double alpha, std::size_t k, std::size_t m, std::size_t reps) {
        const auto a100 = static_cast<std::int64_t>(std::llround(alpha * 100.0));
        if (a100 <= 0) throw ParameterError("W cache: alpha rounds to zero");
        const Key key{a100, k, m, reps};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const std::uint64_t s = derive_seed(derive_seed(derive_seed(seed_, static_cast<std::uint64_t>(a100)), k),
                                            (static_cast<std::uint64_t>(m) << 32) ^ reps);
        auto sample = sample_W(static_cast<double>(a100) / 100.0, k, m, reps, s);
        std::sort(sample.begin(), sample.end());
        return cache_.emplace(key, std::move(sample)).first->second;
    }

    std::size_t size() const noexcept { return cache_.size(); }

private:
    using Key = std::tuple<std::int64_t, std::size_t, std::size_t, std::size_t>;
    std::uint64_t seed_;
    std::map<Key, std::vector<double>> cache_;
};

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// EWMA control chart on z-scores of p-values:
///   z_t = lambda_p * Phi^-1(1 - p_t) + (1 - lambda_p) * z_{t-1},
/// alarm when z_t / sigma_z > L with sigma_z^2 = lambda_p / (2 - lambda_p).
class ZChart {
public:
    ZChart(double lambda_p = 0.6, double L = 1.64) : lambda_p_(lambda_p), L_(L) {
        if (!(lambda_p > 0.0 && lambda_p < 1.0)) throw ParameterError("chart lambda_p must be in (0, 1)");
        if (!(L > 0.0)) throw ParameterError("chart L must be > 0");
    }

    double sigma_z() const noexcept { return std::sqrt(lambda_p_ / (2.0 - lambda_p_)); }

    /// Advance with a p-value; returns (z_t, alarm).
    std::pair<double, bool> update(double p_value) {
        z_ = lambda_p_ * normal_quantile(1.0 - p_value) + (1.0 - lambda_p_) * z_;
        return {z_, z_ / sigma_z() > L_};
    }

    double z() const noexcept { return z_; }
    double lambda_p() const noexcept { return lambda_p_; }
    double L() const noexcept { return L_; }

private:
    double lambda_p_;
    double L_;
    double z_ = 0.0;
};

struct ChartConfig {
    double lambda_p = 0.6;
    double L = 1.64;
};

struct RelVolConfig {
    std::size_t k = 3;
    double p0 = 0.95;
    double lambda_alpha = 0.5;
    std::size_t mc_reps = 4000;
    std::uint64_t seed = 1;
    int j1 = 1;
    int j2 = 6;
    /// Use this alpha every window instead of estimating it.
    std::optional<double> fixed_alpha;
    std::optional<ChartConfig> chart = ChartConfig{};

    void validate() const {
        if (k < 1) throw ParameterError("relvol k must be >= 1");
        if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterError("relvol p0 must be in (0, 1)");
        if (!(lambda_alpha > 0.0 && lambda_alpha < 1.0)) throw ParameterError("relvol lambda must be in (0, 1)");
        if (mc_reps < 1) throw ParameterError("relvol mc_reps must be >= 1");
        if (fixed_alpha && !(*fixed_alpha > 0.0)) throw ParameterError("relvol fixed alpha must be > 0");
    }
};

struct RelVolResult {
    AlertEvent relvol;
    std::optional<AlertEvent> chart;
};

class RelVolDetector {
public:
    explicit RelVolDetector(RelVolConfig cfg = {}, ArrayKind array = ArrayKind::dst)
        : cfg_(cfg), array_(array), tail_(TailConfig{cfg.lambda_alpha, cfg.j1, cfg.j2}), cache_(cfg.seed) {
        cfg_.validate();
        if (cfg_.chart) chart_.emplace(cfg_.chart->lambda_p, cfg_.chart->L);
    }

    template <typename T>
    RelVolResult step(std::int64_t window, std::span<const T> x) {
        if (cfg_.k > x.size()) throw ParameterError("relvol k exceeds array length");
        RelVolResult res;
        AlertEvent& ev = res.relvol;
        ev.window = window;
        ev.detector = "relvol";
        ev.array = array_;

        double total = 0.0;
        for (auto v : x) total += static_cast<double>(v);
        if (!(total > 0.0)) {
            ev.skipped = true;
            ev.note = "all-zero array";
            if (chart_) {
                AlertEvent c = ev;
                c.detector = "relvol_chart";
                res.chart = std::move(c);
            }
            return res;
        }

        double alpha_t;
        if (cfg_.fixed_alpha) {
            alpha_t = *cfg_.fixed_alpha;
        } else {
            auto est = tail_.step(x);
            alpha_t = tail_.alpha();
            if (est.fallback) ev.note = "tail fallback: " + est.note;
            ev.diagnostics["alpha_hat"] = est.alpha_hat;
        }
        const double v = relative_volume(x, cfg_.k);
        const auto& sorted = cache_.sorted_sample(alpha_t, cfg_.k, x.size(), cfg_.mc_reps);
        const double q = empirical_quantile(sorted, cfg_.p0);
        const double reps = static_cast<double>(sorted.size());
        const double p_t = std::clamp(exceedance_fraction(sorted, v), 1.0 / (reps + 1.0), 1.0 - 1.0 / (reps + 1.0));

        ev.threshold = q;
        ev.flagged = v > q;
        const auto top = top_k_bins(x, cfg_.k);
        if (ev.flagged) {
            ev.bins = top;
            ev.values.assign(top.size(), v);
        }
        ev.diagnostics["V"] = v;
        ev.diagnostics["q_t"] = q;
        ev.diagnostics["p_t"] = p_t;
        ev.diagnostics["alpha_t"] = alpha_t;
        ev.diagnostics["flag"] = ev.flagged ? 1.0 : 0.0;

        if (chart_) {
            auto [z, alarm] = chart_->update(p_t);
            AlertEvent c;
            c.window = window;
            c.detector = "relvol_chart";
            c.array = array_;
            c.threshold = cfg_.chart->L;
            c.flagged = alarm;
            if (alarm) {
                c.bins = top;
                c.values.assign(top.size(), z / chart_->sigma_z());
            }
            c.diagnostics = {{"V", v}, {"p_t", p_t}, {"z_t", z}, {"alpha_t", alpha_t}, {"flag", alarm ? 1.0 : 0.0}};
            res.chart = std::move(c);
        }
        return res;
    }

    template <typename T>
    RelVolResult step(std::int64_t window, const std::vector<T>& x) {
        return step(window, std::span<const T>(x));
    }

    /// Chart recursion driven by an observed relative volume at a given alpha.
    std::pair<double, bool> chart_step(double v, double alpha, std::size_t m) {
        if (!chart_) throw ParameterError("control chart not configured");
        const auto& sorted = cache_.sorted_sample(alpha, cfg_.k, m, cfg_.mc_reps);
        const double reps = static_cast<double>(sorted.size());
        const double p_t = std::clamp(exceedance_fraction(sorted, v), 1.0 / (reps + 1.0), 1.0 - 1.0 / (reps + 1.0));
        return chart_->update(p_t);
    }

    const RelVolConfig& config() const noexcept { return cfg_; }
    const TailTracker& tail() const noexcept { return tail_; }
    WQuantileCache& cache() noexcept { return cache_; }

private:
    RelVolConfig cfg_;
    ArrayKind array_;
    TailTracker tail_;
    WQuantileCache cache_;
    std::optional<ZChart> chart_;
};

} // namespace amon
