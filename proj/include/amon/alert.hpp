#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace amon {

/// Which hash-binned array a detector ran on.
enum class ArrayKind { src, dst };

inline std::string to_string(ArrayKind a) { return a == ArrayKind::src ? "src" : "dst"; }

/// A detector's verdict for one window. `bins` are the flagged bin indices
/// with their statistic in `values`; every value is at or above `threshold`
/// (strictly above for detectors that flag on '>').
struct AlertEvent {
    std::int64_t window = 0;
    std::string detector;
    ArrayKind array = ArrayKind::dst;
    std::vector<std::size_t> bins;
    std::vector<double> values;
    double threshold = 0.0;
    bool flagged = false;
    bool skipped = false;  ///< no verdict possible for this window
    std::map<std::string, double> diagnostics;
    std::string note;

    std::size_t severity() const noexcept { return bins.size(); }
};

} // namespace amon
