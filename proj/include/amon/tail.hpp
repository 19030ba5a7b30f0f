#pragma once

// Heavy-tail estimation, P(X > x) ~ c / x^alpha, via the max-spectrum.
//
// For dyadic block sizes 2^j the mean log2 block maximum grows like j/alpha.
// Block maxima of size n are approximately (c n)^(1/alpha) Z with Z standard
// alpha-Frechet and E log2 Z = gamma / (alpha ln 2), so the fitted line
// Y(j) = s j + b gives alpha = 1/s and c = 2^(alpha b) e^(-gamma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amon/error.hpp"

namespace amon {

struct MaxSpectrumFit {
    double alpha = 0.0;
    double c = 0.0;
    double scale = 0.0;  ///< c^(1/alpha), computed without overflow
    double slope = 0.0;
    double intercept = 0.0;
    int j1 = 0;
    int j2 = 0;                  ///< largest scale actually used
    std::vector<double> spectrum;  ///< Y(j) for j in [j1, j2]
};

namespace detail {

template <typename T>
std::vector<double> positive_entries(std::span<const T> x) {
    std::vector<double> out;
    out.reserve(x.size());
    for (auto v : x)
        if (v > 0) out.push_back(static_cast<double>(v));
    return out;
}

inline int floor_log2(std::size_t n) {
    int r = -1;
    while (n) {
        n >>= 1;
        ++r;
    }
    return r;
}

/// Weighted least squares y = slope * x + intercept (unit weights when `ws` is empty).
inline std::pair<double, double> least_squares(std::span<const double> xs, std::span<const double> ys,
                                               std::span<const double> ws = {}) {
    auto w = [&](std::size_t i) { return ws.empty() ? 1.0 : ws[i]; };
    double sw = 0, mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += w(i);
        mx += w(i) * xs[i];
        my += w(i) * ys[i];
    }
    mx /= sw;
    my /= sw;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += w(i) * (xs[i] - mx) * (ys[i] - my);
        sxx += w(i) * (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

} // namespace detail

/// Max-spectrum fit over scales [j1, j2]. Zeros are dropped; the remaining
/// entries are blocked in their given order. j2 is lowered so every scale has
/// at least four blocks, and at least two scales must remain. Scale j is
/// weighted by sqrt(number of blocks): a single-block-pair top scale is mostly
/// the window maximum itself, which would otherwise pull the fit towards the
/// very outlier a detector is about to test.
template <typename T>
MaxSpectrumFit max_spectrum(std::span<const T> x, int j1 = 1, int j2 = 6) {
    if (j1 < 1 || j2 < j1) throw ParameterError("max-spectrum needs 1 <= j1 <= j2");
    const auto pos = detail::positive_entries(x);
    const int j_cap = detail::floor_log2(pos.size()) - 2;
    const int j_hi = std::min(j2, j_cap);
    if (pos.size() < (std::size_t{1} << (j1 + 1)) || j_hi < j1 + 1)
        throw SparsityError("max-spectrum: " + std::to_string(pos.size()) + " positive entries are too few");

    MaxSpectrumFit fit;
    fit.j1 = j1;
    fit.j2 = j_hi;
    std::vector<double> js, ws;
    for (int j = j1; j <= j_hi; ++j) {
        const std::size_t block = std::size_t{1} << j;
        const std::size_t n_blocks = pos.size() / block;
        double acc = 0.0;
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const auto first = pos.begin() + static_cast<std::ptrdiff_t>(b * block);
            acc += std::log2(*std::max_element(first, first + static_cast<std::ptrdiff_t>(block)));
        }
        js.push_back(j);
        ws.push_back(std::sqrt(static_cast<double>(n_blocks)));
        fit.spectrum.push_back(acc / static_cast<double>(n_blocks));
    }
    auto [slope, intercept] = detail::least_squares(js, fit.spectrum, ws);
    fit.slope = slope;
    fit.intercept = intercept;
    // A flat spectrum leaves only rounding noise in the slope.
    if (!(slope > 1e-9) || !std::isfinite(slope))
        throw EstimationError("max-spectrum slope is not positive");
    fit.alpha = 1.0 / slope;
    fit.c = std::exp2(fit.alpha * intercept) * std::exp(-std::numbers::egamma);
    fit.scale = std::exp2(intercept) * std::exp(-std::numbers::egamma * slope);
    return fit;
}

template <typename T>
MaxSpectrumFit max_spectrum(const std::vector<T>& x, int j1 = 1, int j2 = 6) {
    return max_spectrum(std::span<const T>(x), j1, j2);
}

/// lambda * fresh + (1 - lambda) * prev.
inline double ewma(double prev, double fresh, double lambda) noexcept {
    return lambda * fresh + (1.0 - lambda) * prev;
}

/// Hill estimator of alpha from the k largest positive entries. Offline
/// comparison only.
template <typename T>
double hill_estimator(std::span<const T> x, std::size_t k) {
    auto pos = detail::positive_entries(x);
    if (k < 1 || k >= pos.size()) throw ParameterError("hill: need 1 <= k < number of positive entries");
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const double ref = std::log(pos[k]);
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::log(pos[i]) - ref;
    return static_cast<double>(k) / acc;
}

/// Slope of log empirical CCDF against log value over the upper `tail_fraction`
/// of the positive entries; returns the implied alpha (= -slope).
template <typename T>
double ccdf_alpha(std::span<const T> x, double tail_fraction = 0.5) {
    auto pos = detail::positive_entries(x);
    if (pos.size() < 4) throw SparsityError("ccdf: too few positive entries");
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const auto n = pos.size();
    const auto k = std::max<std::size_t>(3, static_cast<std::size_t>(tail_fraction * static_cast<double>(n)));
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(k, n); ++i) {
        lx.push_back(std::log(pos[i]));
        ly.push_back(std::log((static_cast<double>(i) + 1.0) / static_cast<double>(n)));
    }
    auto [slope, intercept] = detail::least_squares(lx, ly);
    (void)intercept;
    if (!(slope < 0.0)) throw EstimationError("ccdf slope is not negative");
    return -slope;
}

struct TailEstimate {
    double alpha_hat = 0.0;
    double c_hat = 0.0;
    double alpha_smooth = 0.0;
    double c_smooth = 0.0;
    int j1 = 0;
    int j2 = 0;
    bool fallback = false;  ///< raw estimate failed; previous or default state used
    bool clamped = false;   ///< smoothed alpha left [0.2, 10] and was clamped
    std::string note;
};

struct TailConfig {
    double lambda = 0.5;
    int j1 = 1;
    int j2 = 6;
    double alpha_min = 0.2;
    double alpha_max = 10.0;
    double default_alpha = 1.5;

    void validate() const {
        if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("lambda must be in (0, 1)");
        if (j1 < 1 || j2 < j1) throw ParameterError("need 1 <= j1 <= j2");
    }
};

/// Per-window max-spectrum estimate with EWMA smoothing across windows. The
/// scale is smoothed as c^(1/alpha), which has the units of x; averaging c
/// itself mixes numbers like 1e21 and 1e3 whenever alpha moves. The first
/// successful estimate is adopted directly. A failed estimate reuses the
/// previous smoothed state, or on the first window falls back to
/// alpha = 1.5, c = median(x)^alpha.
class TailTracker {
public:
    explicit TailTracker(TailConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    template <typename T>
    TailEstimate step(std::span<const T> x) {
        TailEstimate est;
        est.j1 = cfg_.j1;
        try {
            auto fit = max_spectrum(x, cfg_.j1, cfg_.j2);
            est.alpha_hat = fit.alpha;
            est.c_hat = fit.c;
            est.j2 = fit.j2;
            const double scale = fit.scale;
            if (!adopted_) {
                alpha_ = fit.alpha;
                scale_ = scale;
                initialized_ = adopted_ = true;
            } else {
                alpha_ = ewma(alpha_, fit.alpha, cfg_.lambda);
                scale_ = ewma(scale_, scale, cfg_.lambda);
            }
        } catch (const SparsityError& e) {
            fall_back(x, est, e.what());
        } catch (const EstimationError& e) {
            fall_back(x, est, e.what());
        }
        if (alpha_ < cfg_.alpha_min || alpha_ > cfg_.alpha_max) {
            alpha_ = std::clamp(alpha_, cfg_.alpha_min, cfg_.alpha_max);
            est.clamped = true;
        }
        c_ = std::pow(scale_, alpha_);
        est.alpha_smooth = alpha_;
        est.c_smooth = c_;
        return est;
    }

    template <typename T>
    TailEstimate step(const std::vector<T>& x) {
        return step(std::span<const T>(x));
    }

    bool initialized() const noexcept { return initialized_; }
    double alpha() const noexcept { return alpha_; }
    double c() const noexcept { return c_; }
    const TailConfig& config() const noexcept { return cfg_; }

private:
    template <typename T>
    void fall_back(std::span<const T> x, TailEstimate& est, const char* why) {
        est.fallback = true;
        est.note = why;
        if (initialized_) return;
        alpha_ = cfg_.default_alpha;
        auto pos = detail::positive_entries(x);
        double med = 0.0;
        if (!pos.empty()) {
            auto mid = pos.begin() + static_cast<std::ptrdiff_t>(pos.size() / 2);
            std::nth_element(pos.begin(), mid, pos.end());
            med = *mid;
        }
        scale_ = med > 0.0 ? med : 1.0;
        initialized_ = true;
    }

    TailConfig cfg_;
    bool initialized_ = false;
    bool adopted_ = false;  // a real estimate has been taken on
    double alpha_ = 0.0;
    double scale_ = 0.0;
    double c_ = 0.0;
};

} // namespace amon
