#pragma once

// Frechet method: flag bins of a hash-binned array that exceed the level-p0
// quantile of the Frechet approximation to the maximum of m heavy-tailed bins,
//
//   T = m^(1/alpha) c^(1/alpha) (log(1/p0))^(-1/alpha) = (m c / log(1/p0))^(1/alpha),
//
// with (alpha, c) from the max-spectrum, EWMA-smoothed across windows.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "amon/alert.hpp"
#include "amon/error.hpp"
#include "amon/tail.hpp"

namespace amon {

inline double frechet_threshold(double m, double alpha, double c, double p0) {
    if (!(m > 0) || !(alpha > 0) || !(c > 0) || !(p0 > 0 && p0 < 1))
        throw ParameterError("frechet_threshold: arguments out of range");
    return std::pow(m * c / std::log(1.0 / p0), 1.0 / alpha);
}

struct FrechetConfig {
    double p0 = 0.95;
    double lambda = 0.5;
    int j1 = 1;
    int j2 = 6;

    void validate() const {
        if (!(p0 > 0.0 && p0 < 1.0)) throw ParameterError("frechet p0 must be in (0, 1)");
        if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("frechet lambda must be in (0, 1)");
    }
};

class FrechetDetector {
public:
    explicit FrechetDetector(FrechetConfig cfg = {}, ArrayKind array = ArrayKind::dst)
        : cfg_(cfg), array_(array), tail_(TailConfig{cfg.lambda, cfg.j1, cfg.j2}) {
        cfg_.validate();
    }

    template <typename T>
    AlertEvent step(std::int64_t window, std::span<const T> x) {
        last_tail_ = tail_.step(x);
        AlertEvent ev;
        ev.window = window;
        ev.detector = "frechet";
        ev.array = array_;
        ev.threshold = frechet_threshold(static_cast<double>(x.size()), tail_.alpha(), tail_.c(), cfg_.p0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = static_cast<double>(x[i]);
            if (v >= ev.threshold) {
                ev.bins.push_back(i);
                ev.values.push_back(v);
            }
        }
        ev.flagged = !ev.bins.empty();
        ev.diagnostics = {{"alpha_t", tail_.alpha()},    {"c_t", tail_.c()},
                          {"alpha_hat", last_tail_.alpha_hat}, {"c_hat", last_tail_.c_hat},
                          {"k_t", static_cast<double>(ev.bins.size())}};
        if (last_tail_.fallback) ev.note = "tail fallback: " + last_tail_.note;
        if (last_tail_.clamped) ev.note += (ev.note.empty() ? "" : "; ") + std::string("alpha clamped");
        return ev;
    }

    template <typename T>
    AlertEvent step(std::int64_t window, const std::vector<T>& x) {
        return step(window, std::span<const T>(x));
    }

    const FrechetConfig& config() const noexcept { return cfg_; }
    const TailTracker& tail() const noexcept { return tail_; }
    const TailEstimate& last_tail() const noexcept { return last_tail_; }

private:
    FrechetConfig cfg_;
    ArrayKind array_;
    TailTracker tail_;
    TailEstimate last_tail_;
};

} // namespace amon
