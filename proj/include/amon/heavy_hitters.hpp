#pragma once

// Hash-thinned MJRTY Boyer-Moore: the stream is split into m sub-streams by
// h1, each running its own majority vote, while an m x m' sketch P_bm indexed
// by an independent h2 tracks per-sub-stream volume. A query ranks the m
// candidates by P_est[s] = max_j P_bm[s, j].

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amon/error.hpp"
#include "amon/hashing.hpp"
#include "amon/ingest.hpp"

namespace amon {

/// Which part of a flow record forms the heavy-hitter key.
enum class KeyMode { pair, src, dst };

inline std::string to_string(KeyMode k) {
    switch (k) {
    case KeyMode::pair: return "pair";
    case KeyMode::src: return "src";
    case KeyMode::dst: return "dst";
    }
    return "?";
}

inline KeyMode parse_key_mode(std::string_view s) {
    if (s == "pair") return KeyMode::pair;
    if (s == "src") return KeyMode::src;
    if (s == "dst") return KeyMode::dst;
    throw ParameterError("key_mode must be pair, src or dst");
}

inline std::uint64_t pair_key(std::uint32_t src, std::uint32_t dst) noexcept {
    return (static_cast<std::uint64_t>(src) << 32) | dst;
}

inline std::uint64_t key_of(const FlowRecord& r, KeyMode mode) noexcept {
    switch (mode) {
    case KeyMode::pair: return pair_key(r.src, r.dst);
    case KeyMode::src: return r.src;
    case KeyMode::dst: return r.dst;
    }
    return 0;
}

/// Source and destination addresses recoverable from a key, when present.
inline std::optional<std::uint32_t> key_src(std::uint64_t key, KeyMode mode) noexcept {
    if (mode == KeyMode::pair) return static_cast<std::uint32_t>(key >> 32);
    if (mode == KeyMode::src) return static_cast<std::uint32_t>(key);
    return std::nullopt;
}

inline std::optional<std::uint32_t> key_dst(std::uint64_t key, KeyMode mode) noexcept {
    if (mode == KeyMode::pair) return static_cast<std::uint32_t>(key);
    if (mode == KeyMode::dst) return static_cast<std::uint32_t>(key);
    return std::nullopt;
}

struct HitterEntry {
    std::uint64_t key = 0;
    std::uint64_t est_volume = 0;
    bool flag = false;
    std::size_t substream = 0;

    friend bool operator==(const HitterEntry&, const HitterEntry&) = default;
};

struct HitterReport {
    std::int64_t window = 0;
    KeyMode key_mode = KeyMode::pair;
    std::vector<HitterEntry> entries;
};

class BmSketch {
public:
    BmSketch(std::size_t m, std::size_t m_prime, HashFn h1, HashFn h2)
        : m_(m), m_prime_(m_prime), h1_(h1), h2_(h2), cand_(m), count_(m, 0), flag_(m, 1),
          p_bm_(m * m_prime, 0) {
        if (m == 0 || m_prime == 0) throw ParameterError("sketch dimensions must be positive");
        if (h1.range() != m) throw ParameterError("h1 range must equal m");
        if (h2.range() != m_prime) throw ParameterError("h2 range must equal m'");
    }

    /// Sketch with h1, h2 derived from one seed.
    BmSketch(std::size_t m, std::size_t m_prime, std::uint64_t seed)
        : BmSketch(m, m_prime, HashFn(derive_seed(seed, 1), m), HashFn(derive_seed(seed, 2), m_prime)) {}

    std::size_t m() const noexcept { return m_; }
    std::size_t m_prime() const noexcept { return m_prime_; }
    const HashFn& h1() const noexcept { return h1_; }
    const HashFn& h2() const noexcept { return h2_; }

    const std::optional<std::uint64_t>& candidate(std::size_t s) const { return cand_[s]; }
    std::uint64_t count(std::size_t s) const { return count_[s]; }
    bool flag(std::size_t s) const { return flag_[s] != 0; }
    /// The raw flag also survives a counter that has fallen to exactly 0,
    /// i.e. a candidate holding exactly half the weight. Reports therefore
    /// certify a majority only with a positive counter as well.
    bool certified(std::size_t s) const { return flag_[s] != 0 && count_[s] > 0; }
    std::uint64_t p_bm(std::size_t s, std::size_t j) const { return p_bm_[s * m_prime_ + j]; }

    /// One stream item (key, v). Zero-volume items are ignored.
    void update(std::uint64_t key, std::uint64_t v) noexcept {
        if (v == 0) return;
        const std::size_t s = h1_(key);
        const std::size_t j = h2_(key);
        std::uint64_t& cell = p_bm_[s * m_prime_ + j];
        auto& cand = cand_[s];
        auto& count = count_[s];
        if (!cand) {
            cand = key;
            count = v;
        } else if (*cand == key) {
            count += v;
        } else if (count > 0) {
            if (v > count) {
                // count - v < 0: the newcomer takes over with the deficit.
                cand = key;
                count = v - count;
                flag_[s] = 0;
            } else {
                count -= v;
            }
        } else {
            cand = key;
            count = v;
            flag_[s] = 0;
        }
        cell += v;
    }

    /// Up to K candidates ranked by P_est, ties to the lower sub-stream index.
    /// Sub-streams that never received an item are not reported.
    HitterReport query(std::size_t K) const {
        if (K < 1 || K > m_) throw ParameterError("K must be in [1, m]");
        std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
        for (std::size_t s = 0; s < m_; ++s) {
            if (!cand_[s]) continue;
            const auto row = p_bm_.begin() + static_cast<std::ptrdiff_t>(s * m_prime_);
            ranked.emplace_back(*std::max_element(row, row + static_cast<std::ptrdiff_t>(m_prime_)), s);
        }
        const std::size_t n = std::min(K, ranked.size());
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                          [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        HitterReport rep;
        for (std::size_t r = 0; r < n; ++r) {
            auto [est, s] = ranked[r];
            rep.entries.push_back({*cand_[s], est, certified(s), s});
        }
        return rep;
    }

    /// Back to the initial state; hash functions are kept.
    void reset() noexcept {
        std::fill(cand_.begin(), cand_.end(), std::nullopt);
        std::fill(count_.begin(), count_.end(), 0);
        std::fill(flag_.begin(), flag_.end(), 1);
        std::fill(p_bm_.begin(), p_bm_.end(), 0);
    }

    std::uint64_t sketch_total() const noexcept {
        std::uint64_t t = 0;
        for (auto v : p_bm_) t += v;
        return t;
    }

    std::uint64_t substream_total(std::size_t s) const noexcept {
        std::uint64_t t = 0;
        for (std::size_t j = 0; j < m_prime_; ++j) t += p_bm_[s * m_prime_ + j];
        return t;
    }

    /// Bytes of state; independent of stream length.
    std::size_t memory_bytes() const noexcept {
        return p_bm_.size() * sizeof(std::uint64_t) + m_ * (sizeof(std::optional<std::uint64_t>) + sizeof(std::uint64_t) + 1);
    }

    friend bool operator==(const BmSketch&, const BmSketch&) = default;

private:
    std::size_t m_;
    std::size_t m_prime_;
    HashFn h1_;
    HashFn h2_;
    std::vector<std::optional<std::uint64_t>> cand_;
    std::vector<std::uint64_t> count_;
    std::vector<std::uint8_t> flag_;
    std::vector<std::uint64_t> p_bm_;
};

inline void bm_update(BmSketch& sk, std::uint64_t key, std::uint64_t v) { sk.update(key, v); }
inline HitterReport bm_query(const BmSketch& sk, std::size_t K) { return sk.query(K); }
inline void bm_reset(BmSketch& sk) { sk.reset(); }

} // namespace amon
