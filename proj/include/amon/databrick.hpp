#pragma once

// Per-window m x m traffic matrix ("databrick") and its hash-binned arrays.
//
// Cell (i, j) accumulates volume with i = h(dst) and j = h(src): a row is one
// destination bin, so many sources hitting one victim show up as a
// horizontal stripe. Row sums give the destination array, column sums the
// source array.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "amon/error.hpp"
#include "amon/hashing.hpp"
#include "amon/ingest.hpp"
#include "amon/random.hpp"

namespace amon {

struct HashArrays {
    std::int64_t window = 0;
    std::vector<std::uint64_t> src;  ///< column sums
    std::vector<std::uint64_t> dst;  ///< row sums

    friend bool operator==(const HashArrays&, const HashArrays&) = default;
};

class Databrick {
public:
    static constexpr std::size_t kMaxBins = 4096;

    explicit Databrick(std::size_t m = 128, std::int64_t window = 0) : m_(m), window_(window), cells_(m * m, 0) {
        if (m < 2 || m > kMaxBins) throw ParameterError("databrick m must be in [2, 4096]");
    }

    std::size_t m() const noexcept { return m_; }
    std::int64_t window() const noexcept { return window_; }
    void set_window(std::int64_t w) noexcept { window_ = w; }
    std::uint64_t total() const noexcept { return total_; }

    std::uint64_t operator()(std::size_t row, std::size_t col) const noexcept { return cells_[row * m_ + col]; }
    std::span<const std::uint64_t> cells() const noexcept { return cells_; }
    std::span<const std::uint64_t> row(std::size_t i) const noexcept { return {cells_.data() + i * m_, m_}; }

    void add(std::size_t row, std::size_t col, std::uint64_t v) noexcept {
        cells_[row * m_ + col] += v;
        total_ += v;
    }

    /// X(h(dst), h(src)) += v.
    void update(const FlowRecord& rec, const HashFn& h, ValueKind kind) noexcept {
        add(h(rec.dst), h(rec.src), value_of(rec, kind));
    }

    std::vector<std::uint64_t> row_sums() const {
        std::vector<std::uint64_t> out(m_, 0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < m_; ++j) out[i] += cells_[i * m_ + j];
        return out;
    }

    std::vector<std::uint64_t> col_sums() const {
        std::vector<std::uint64_t> out(m_, 0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < m_; ++j) out[j] += cells_[i * m_ + j];
        return out;
    }

    HashArrays arrays() const { return HashArrays{window_, col_sums(), row_sums()}; }

    void clear() noexcept {
        std::fill(cells_.begin(), cells_.end(), 0);
        total_ = 0;
    }

    /// Number of nonzero cells.
    std::size_t nonzero() const noexcept {
        return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](auto v) { return v != 0; }));
    }

    friend bool operator==(const Databrick&, const Databrick&) = default;

private:
    std::size_t m_;
    std::int64_t window_;
    std::vector<std::uint64_t> cells_;
    std::uint64_t total_ = 0;
};

struct DatabrickSnapshot {
    Databrick brick;
    HashArrays arrays;
};

/// Hand off the finished window and start the next one on a zeroed matrix.
inline DatabrickSnapshot emit(Databrick& brick) {
    DatabrickSnapshot snap{brick, brick.arrays()};
    brick.clear();
    brick.set_window(brick.window() + 1);
    return snap;
}

namespace detail {

/// `count` distinct indices from [0, m), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> distinct_indices(Engine& g, std::size_t m, std::size_t count) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    count = std::min(count, m);
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_below(g, m - i)]);
    idx.resize(count);
    return idx;
}

} // namespace detail

/// Add an attack's per-window volume straight onto the matrix.
///
/// many_to_one puts `magnitude` on the row h(target), spread evenly over
/// `spread` random columns; one_to_many is the transpose (column h(target),
/// random rows). many_to_many spreads over `spread` cells drawn from
/// (h(key), h(key')) pairs of the target keys, or uniformly random cells when
/// no keys are given. The same `seed` gives the same draws for every kind.
inline void inject_matrix(Databrick& brick, const AttackSpec& attack, const HashFn& h, std::uint64_t seed) {
    attack.validate();
    if (!attack.active(brick.window())) return;
    Engine g(seed);
    const std::size_t m = brick.m();
    const auto shares = detail::split_volume(attack.magnitude, static_cast<std::uint32_t>(std::min<std::size_t>(attack.spread, m)));
    switch (attack.kind) {
    case AttackKind::many_to_one: {
        const std::size_t row = h(attack.target_keys.front());
        auto cols = detail::distinct_indices(g, m, shares.size());
        for (std::size_t i = 0; i < shares.size(); ++i) brick.add(row, cols[i], shares[i]);
        break;
    }
    case AttackKind::one_to_many: {
        const std::size_t col = h(attack.target_keys.front());
        auto rows = detail::distinct_indices(g, m, shares.size());
        for (std::size_t i = 0; i < shares.size(); ++i) brick.add(rows[i], col, shares[i]);
        break;
    }
    case AttackKind::many_to_many: {
        const auto cell_shares = detail::split_volume(attack.magnitude, attack.spread);
        const auto& keys = attack.target_keys;
        for (auto share : cell_shares) {
            std::size_t row, col;
            if (keys.empty()) {
                row = uniform_below(g, m);
                col = uniform_below(g, m);
            } else {
                row = h(keys[uniform_below(g, keys.size())]);
                col = h(keys[uniform_below(g, keys.size())]);
            }
            brick.add(row, col, share);
        }
        break;
    }
    }
}

/// Structural many-to-one injection that adds no volume: the total of `row`
/// is re-spread evenly over `n_cells` random columns (all other cells of the
/// row are emptied). The destination array and the grand total are unchanged;
/// only the row's cell pattern (and hence the source array) moves.
inline void redistribute_row(Databrick& brick, std::size_t row, std::size_t n_cells, std::uint64_t seed) {
    if (row >= brick.m()) throw ParameterError("row out of range");
    if (n_cells == 0) throw ParameterError("n_cells must be >= 1");
    Engine g(seed);
    const std::size_t m = brick.m();
    n_cells = std::min(n_cells, m);
    Databrick rebuilt(m, brick.window());
    std::uint64_t row_total = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == row)
                row_total += brick(i, j);
            else if (brick(i, j))
                rebuilt.add(i, j, brick(i, j));
        }
    auto cols = detail::distinct_indices(g, m, n_cells);
    auto shares = detail::split_volume(row_total, static_cast<std::uint32_t>(n_cells));
    for (std::size_t i = 0; i < n_cells; ++i) rebuilt.add(row, cols[i], shares[i]);
    brick = std::move(rebuilt);
}

} // namespace amon
