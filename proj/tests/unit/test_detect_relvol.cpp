#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "amon/detect_relvol.hpp"
#include "oracles/oracles.hpp"

using namespace amon;

namespace {

std::vector<double> pareto_array(Engine& g, std::size_t m, double alpha) {
    std::vector<double> x(m);
    for (auto& v : x) v = pareto(g, alpha);
    return x;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

TEST(RelativeVolume, Examples) {
    EXPECT_DOUBLE_EQ(relative_volume(std::vector<int>{5, 0, 0, 0}, 1), 1.0);
    EXPECT_DOUBLE_EQ(relative_volume(std::vector<int>{3, 1, 1, 1}, 1), 0.5);
    EXPECT_DOUBLE_EQ(relative_volume(std::vector<int>{3, 1, 1, 1}, 4), 1.0);
    EXPECT_DOUBLE_EQ(relative_volume(std::vector<int>{1, 3, 2, 4}, 2), 0.7);
}

TEST(RelativeVolume, Errors) {
    EXPECT_THROW(relative_volume(std::vector<int>{0, 0, 0}, 1), UndefinedRatioError);
    EXPECT_THROW(relative_volume(std::vector<int>{1, 2}, 0), ParameterError);
    EXPECT_THROW(relative_volume(std::vector<int>{1, 2}, 3), ParameterError);
}

TEST(RelativeVolume, TopBinsBreakTiesLow) {
    std::vector<int> x{2, 5, 5, 1, 2};
    auto top = top_k_bins(std::span<const int>(x), 3);
    EXPECT_EQ(top, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(SampleW, KEqualsMIsOne) {
    for (double v : sample_W(1.6, 16, 16, 100, 3)) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(SampleW, InUnitInterval) {
    for (double v : sample_W(1.2, 3, 128, 2000, 9)) {
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(SampleW, Deterministic) {
    EXPECT_EQ(sample_W(1.6, 3, 128, 700, 42), sample_W(1.6, 3, 128, 700, 42));
    EXPECT_NE(sample_W(1.6, 3, 128, 700, 42), sample_W(1.6, 3, 128, 700, 43));
}

TEST(SampleW, MeanIncreasesWithK) {
    double prev = 0;
    for (std::size_t k : {1, 2, 4, 8, 32}) {
        const double mu = mean(sample_W(1.6, k, 128, 4000, 5));
        EXPECT_GT(mu, prev);
        prev = mu;
    }
}

TEST(SampleW, MeanMatchesBruteForce) {
    std::mt19937_64 g(2024);
    double acc = 0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) acc += oracle::w_draw(g, 1.6, 1, 128);
    const double want = acc / n;
    EXPECT_NEAR(mean(sample_W(1.6, 1, 128, 20000, 7)), want, 0.02);
}

TEST(SampleW, MatchesParetoRelativeVolume) {
    // V(k) of i.i.d. Pareto bins has exactly the law of W.
    Engine g(77);
    std::vector<double> direct;
    for (int i = 0; i < 3000; ++i) direct.push_back(relative_volume(pareto_array(g, 64, 1.4), 2));
    auto w = sample_W(1.4, 2, 64, 3000, 8);
    EXPECT_LT(oracle::ks_two_sample(direct, w), 0.05);
}

TEST(Quantile, EmpiricalInverse) {
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(empirical_quantile(s, 0.95), 10);
    EXPECT_EQ(empirical_quantile(s, 0.9), 9);
    EXPECT_EQ(empirical_quantile(s, 0.01), 1);
    EXPECT_DOUBLE_EQ(exceedance_fraction(s, 7), 0.3);
    EXPECT_DOUBLE_EQ(exceedance_fraction(s, 10), 0.0);
    EXPECT_DOUBLE_EQ(exceedance_fraction(s, 0), 1.0);
    EXPECT_THROW(empirical_quantile(std::vector<double>{}, 0.5), ParameterError);
}

TEST(Quantile, Monotone) {
    WQuantileCache cache(1);
    const auto& s = cache.sorted_sample(1.6, 3, 128, 4000);
    EXPECT_LT(empirical_quantile(s, 0.9), empirical_quantile(s, 0.95));
    EXPECT_LT(empirical_quantile(s, 0.95), empirical_quantile(s, 0.99));
    double prev = 0;
    for (std::size_t k : {1, 3, 8}) {
        const double q = empirical_quantile(cache.sorted_sample(1.6, k, 128, 4000), 0.95);
        EXPECT_GT(q, prev);
        prev = q;
    }
    // Lighter tails spread volume more evenly.
    prev = 2;
    for (double a : {0.8, 1.2, 1.6, 2.4}) {
        const double q = empirical_quantile(cache.sorted_sample(a, 1, 128, 4000), 0.95);
        EXPECT_LE(q, prev);
        prev = q;
    }
}

TEST(Quantile, CacheReusesAndRounds) {
    WQuantileCache cache(1);
    const auto* a = &cache.sorted_sample(1.601, 3, 128, 500);
    const auto* b = &cache.sorted_sample(1.599, 3, 128, 500);
    EXPECT_EQ(a, b);
    EXPECT_EQ(cache.size(), 1u);
    cache.sorted_sample(1.61, 3, 128, 500);
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_TRUE(std::is_sorted(a->begin(), a->end()));
    WQuantileCache other(1);
    other.sorted_sample(2.0, 1, 128, 500);
    EXPECT_EQ(other.sorted_sample(1.6, 3, 128, 500), *a);
}

TEST(ZChart, SigmaZ) {
    EXPECT_NEAR(ZChart(0.6, 1.64).sigma_z(), 0.6547, 1e-4);
    EXPECT_THROW(ZChart(0.0, 1.64), ParameterError);
    EXPECT_THROW(ZChart(1.0, 1.64), ParameterError);
    EXPECT_THROW(ZChart(0.6, 0.0), ParameterError);
}

TEST(ZChart, NeutralPValueNeverAlarms) {
    ZChart c(0.6, 1.64);
    for (int i = 0; i < 200; ++i) {
        auto [z, alarm] = c.update(0.5);
        EXPECT_NEAR(z, 0.0, 1e-12);
        EXPECT_FALSE(alarm);
    }
}

TEST(ZChart, PersistentSmallPValueAlarmsQuickly) {
    ZChart c(0.6, 1.64);
    int first = -1;
    for (int i = 0; i < 5; ++i)
        if (c.update(0.001).second && first < 0) first = i;
    EXPECT_GE(first, 0);
    EXPECT_LT(first, 5);
}

TEST(ZChart, NullVarianceMatchesSigma) {
    Engine g(3);
    ZChart c(0.6, 1.64);
    std::vector<double> zs;
    for (int i = 0; i < 60000; ++i) {
        auto [z, alarm] = c.update(uniform01_open_low(g));
        if (i >= 100) zs.push_back(z);
    }
    const double mu = mean(zs);
    double var = 0;
    for (double z : zs) var += (z - mu) * (z - mu);
    var /= static_cast<double>(zs.size());
    EXPECT_NEAR(std::sqrt(var), c.sigma_z(), 0.02);
    EXPECT_NEAR(mu, 0.0, 0.02);
}

TEST(RelVolDetector, NullCalibrationFixedAlpha) {
    RelVolConfig cfg;
    cfg.fixed_alpha = 1.6;
    cfg.k = 3;
    cfg.p0 = 0.95;
    RelVolDetector d(cfg);
    Engine g(11);
    int flags = 0;
    const int n = 1000;
    for (int w = 0; w < n; ++w) flags += d.step(w, pareto_array(g, 128, 1.6)).relvol.flagged;
    EXPECT_NEAR(flags / double(n), 0.05, 0.02);
}

TEST(RelVolDetector, LargeShareFlagged) {
    RelVolConfig cfg;
    cfg.k = 1;
    RelVolDetector d(cfg);
    Engine g(12);
    for (int w = 0; w < 20; ++w) d.step(w, pareto_array(g, 128, 1.6));
    auto x = pareto_array(g, 128, 1.6);
    double rest = 0;
    for (std::size_t i = 1; i < x.size(); ++i) rest += x[i];
    x[0] = 1.5 * rest;  // 60% of the total
    auto r = d.step(20, x);
    EXPECT_TRUE(r.relvol.flagged);
    EXPECT_EQ(r.relvol.bins, std::vector<std::size_t>{0});
    EXPECT_NEAR(r.relvol.diagnostics.at("V"), 0.6, 1e-12);
}

TEST(RelVolDetector, AllMassInTopKFlagged) {
    RelVolConfig cfg;
    cfg.k = 3;
    cfg.fixed_alpha = 1.6;
    RelVolDetector d(cfg);
    std::vector<std::uint64_t> x(128, 0);
    x[5] = 10;
    x[70] = 30;
    x[100] = 20;
    auto r = d.step(0, x);
    EXPECT_TRUE(r.relvol.flagged);
    EXPECT_DOUBLE_EQ(r.relvol.diagnostics.at("V"), 1.0);
    EXPECT_EQ(r.relvol.bins, (std::vector<std::size_t>{70, 100, 5}));
}

TEST(RelVolDetector, Diagnostics) {
    RelVolConfig cfg;
    RelVolDetector d(cfg);
    Engine g(13);
    auto x = pareto_array(g, 128, 1.6);
    auto r = d.step(4, x);
    const auto& ev = r.relvol;
    EXPECT_EQ(ev.detector, "relvol");
    EXPECT_EQ(ev.window, 4);
    for (const char* key : {"V", "q_t", "p_t", "alpha_t", "flag"}) EXPECT_TRUE(ev.diagnostics.count(key)) << key;
    EXPECT_DOUBLE_EQ(ev.threshold, ev.diagnostics.at("q_t"));
    EXPECT_EQ(ev.flagged, ev.diagnostics.at("V") > ev.diagnostics.at("q_t"));
    EXPECT_GT(ev.diagnostics.at("p_t"), 0.0);
    EXPECT_LT(ev.diagnostics.at("p_t"), 1.0);
    ASSERT_TRUE(r.chart);
    EXPECT_EQ(r.chart->detector, "relvol_chart");
    EXPECT_TRUE(r.chart->diagnostics.count("z_t"));
}

TEST(RelVolDetector, AllZeroSkipped) {
    RelVolDetector d;
    std::vector<std::uint64_t> zeros(128, 0);
    auto r = d.step(0, zeros);
    EXPECT_TRUE(r.relvol.skipped);
    EXPECT_FALSE(r.relvol.flagged);
    ASSERT_TRUE(r.chart);
    EXPECT_TRUE(r.chart->skipped);
}

TEST(RelVolDetector, ChartFiresOnPersistentConcentration) {
    RelVolConfig cfg;
    cfg.k = 1;
    cfg.fixed_alpha = 1.6;
    RelVolDetector d(cfg);
    Engine g(14);
    int alarms = 0;
    for (int w = 0; w < 50; ++w) alarms += d.step(w, pareto_array(g, 128, 1.6)).chart->flagged;
    EXPECT_LT(alarms, 15);
    bool fired = false;
    for (int w = 50; w < 55; ++w) {
        auto x = pareto_array(g, 128, 1.6);
        double total = 0;
        for (double v : x) total += v;
        x[9] += 2 * total;
        fired = fired || d.step(w, x).chart->flagged;
    }
    EXPECT_TRUE(fired);
}

TEST(RelVolDetector, ChartDisabled) {
    RelVolConfig cfg;
    cfg.chart.reset();
    RelVolDetector d(cfg);
    Engine g(1);
    EXPECT_FALSE(d.step(0, pareto_array(g, 64, 1.6)).chart);
    EXPECT_THROW(d.chart_step(0.5, 1.6, 64), ParameterError);
}

TEST(RelVolDetector, BadConfig) {
    RelVolConfig cfg;
    cfg.k = 0;
    EXPECT_THROW(RelVolDetector{cfg}, ParameterError);
    cfg = {};
    cfg.p0 = 1.0;
    EXPECT_THROW(RelVolDetector{cfg}, ParameterError);
    cfg = {};
    cfg.k = 200;
    RelVolDetector d(cfg);
    EXPECT_THROW(d.step(0, std::vector<double>(128, 1.0)), ParameterError);
}
