#pragma once

// Flow-record input: CSV parsing, window assignment, and synthetic traffic
// with injected attacks.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>
#include <utility>

#include "amon/error.hpp"
#include "amon/random.hpp"

namespace amon {

struct FlowRecord {
    double timestamp = 0.0;
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint64_t bytes = 0;
    std::uint64_t packets = 0;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

enum class ValueKind { bytes, packets };

inline std::uint64_t value_of(const FlowRecord& r, ValueKind kind) noexcept {
    return kind == ValueKind::bytes ? r.bytes : r.packets;
}

inline std::string to_string(ValueKind k) { return k == ValueKind::bytes ? "bytes" : "packets"; }

inline ValueKind parse_value_kind(std::string_view s) {
    if (s == "bytes") return ValueKind::bytes;
    if (s == "packets") return ValueKind::packets;
    throw ParameterError("value_kind must be 'bytes' or 'packets', got '" + std::string(s) + "'");
}

/// How records are sliced into windows. Time windows by default; when
/// `records_per_window` is set, every that-many records form one window.
struct WindowSpec {
    double duration = 10.0;
    ValueKind value_kind = ValueKind::bytes;
    std::optional<std::uint64_t> records_per_window;

    void validate() const {
        if (!(duration > 0.0) || !std::isfinite(duration))
            throw ParameterError("window duration must be > 0");
        if (records_per_window && *records_per_window == 0)
            throw ParameterError("records per window must be >= 1");
    }
};

struct WindowedRecord {
    std::int64_t window = 0;
    FlowRecord record;

    friend bool operator==(const WindowedRecord&, const WindowedRecord&) = default;
};

inline std::int64_t window_of(double t, double t0, double duration) noexcept {
    return static_cast<std::int64_t>(std::floor((t - t0) / duration));
}

// ---------------------------------------------------------------------------
// Keys

inline std::string dotted_quad(std::uint32_t key) {
    return std::to_string(key >> 24) + '.' + std::to_string((key >> 16) & 0xFF) + '.' +
           std::to_string((key >> 8) & 0xFF) + '.' + std::to_string(key & 0xFF);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

} // namespace detail

/// Unsigned decimal or dotted-quad IPv4.
inline std::optional<std::uint32_t> parse_key(std::string_view s) {
    s = detail::trim(s);
    if (s.find('.') == std::string_view::npos) return detail::parse_uint<std::uint32_t>(s);
    std::uint32_t key = 0;
    int octets = 0;
    while (true) {
        auto dot = s.find('.');
        auto part = s.substr(0, dot);
        auto v = detail::parse_uint<std::uint32_t>(part);
        if (!v || *v > 255 || part.size() > 3) return std::nullopt;
        key = (key << 8) | *v;
        ++octets;
        if (dot == std::string_view::npos) break;
        s.remove_prefix(dot + 1);
    }
    if (octets != 4) return std::nullopt;
    return key;
}

// ---------------------------------------------------------------------------
// CSV parsing

/// Parse one `timestamp,src,dst,bytes,packets` line.
inline FlowRecord parse_flow_line(std::string_view line, std::size_t line_no) {
    std::string_view fields[5];
    std::size_t n = 0;
    while (true) {
        auto comma = line.find(',');
        if (n == 5) throw ParseError(line_no, "expected 5 fields, found more");
        fields[n++] = detail::trim(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line.remove_prefix(comma + 1);
    }
    if (n != 5) throw ParseError(line_no, "expected 5 fields, found " + std::to_string(n));

    FlowRecord r;
    auto ts = detail::parse_double(fields[0]);
    if (!ts) throw ParseError(line_no, "bad timestamp '" + std::string(fields[0]) + "'");
    auto src = parse_key(fields[1]);
    if (!src) throw ParseError(line_no, "bad source key '" + std::string(fields[1]) + "'");
    auto dst = parse_key(fields[2]);
    if (!dst) throw ParseError(line_no, "bad destination key '" + std::string(fields[2]) + "'");
    auto bytes = detail::parse_uint<std::uint64_t>(fields[3]);
    if (!bytes) throw ParseError(line_no, "bad byte count '" + std::string(fields[3]) + "'");
    auto packets = detail::parse_uint<std::uint64_t>(fields[4]);
    if (!packets) throw ParseError(line_no, "bad packet count '" + std::string(fields[4]) + "'");
    if (*packets == 0 && *bytes != 0) throw ParseError(line_no, "zero packets with nonzero bytes");

    r.timestamp = *ts;
    r.src = *src;
    r.dst = *dst;
    r.bytes = *bytes;
    r.packets = *packets;
    return r;
}

/// Incremental reader over a CSV stream. The first record's timestamp anchors
/// window 0; a header line is recognised by a non-numeric first field.
class FlowReader {
public:
    FlowReader(std::istream& in, WindowSpec spec) : in_(in), spec_(spec) { spec_.validate(); }

    std::optional<WindowedRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            auto view = detail::trim(line);
            if (view.empty() || view.front() == '#') continue;
            if (!seen_content_) {
                seen_content_ = true;
                auto first = detail::trim(view.substr(0, view.find(',')));
                if (!detail::parse_double(first)) continue;
            }
            FlowRecord r = parse_flow_line(view, line_no_);
            if (anchored_ && r.timestamp < last_t_)
                throw OrderingError(line_no_, "timestamp decreased");
            if (!anchored_) {
                t0_ = r.timestamp;
                anchored_ = true;
            }
            last_t_ = r.timestamp;
            std::int64_t w = spec_.records_per_window
                                 ? static_cast<std::int64_t>(count_ / *spec_.records_per_window)
                                 : window_of(r.timestamp, t0_, spec_.duration);
            ++count_;
            return WindowedRecord{w, r};
        }
        return std::nullopt;
    }

    std::size_t line_number() const noexcept { return line_no_; }

private:
    std::istream& in_;
    WindowSpec spec_;
    std::size_t line_no_ = 0;
    std::uint64_t count_ = 0;
    bool seen_content_ = false;
    bool anchored_ = false;
    double t0_ = 0.0;
    double last_t_ = 0.0;
};

inline std::vector<WindowedRecord> parse_flow_stream(std::istream& in, const WindowSpec& spec) {
    FlowReader reader(in, spec);
    std::vector<WindowedRecord> out;
    while (auto r = reader.next()) out.push_back(*r);
    return out;
}

inline std::vector<WindowedRecord> parse_flow_file(const std::string& path, const WindowSpec& spec) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_flow_stream(in, spec);
}

/// Inverse of parse_flow_line. Timestamps use the shortest round-trip form.
inline std::string format_flow_line(const FlowRecord& r) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r.timestamp);
    std::string s(buf, end);
    s += ',' + std::to_string(r.src) + ',' + std::to_string(r.dst) + ',' + std::to_string(r.bytes) + ',' +
         std::to_string(r.packets);
    return s;
}

inline void write_flow_csv(std::ostream& out, const std::vector<WindowedRecord>& records) {
    out << "timestamp,src,dst,bytes,packets\n";
    for (const auto& wr : records) out << format_flow_line(wr.record) << '\n';
}

// ---------------------------------------------------------------------------
// Attacks and synthetic traffic

enum class AttackKind { many_to_one, one_to_many, many_to_many };

inline std::string to_string(AttackKind k) {
    switch (k) {
    case AttackKind::many_to_one: return "many_to_one";
    case AttackKind::one_to_many: return "one_to_many";
    case AttackKind::many_to_many: return "many_to_many";
    }
    return "?";
}

inline AttackKind parse_attack_kind(std::string_view s) {
    if (s == "many_to_one") return AttackKind::many_to_one;
    if (s == "one_to_many") return AttackKind::one_to_many;
    if (s == "many_to_many") return AttackKind::many_to_many;
    throw ParameterError("unknown attack kind '" + std::string(s) + "'");
}

struct AttackSpec {
    AttackKind kind = AttackKind::many_to_one;
    std::uint64_t magnitude = 0;          ///< volume added per window
    std::int64_t start_window = 0;
    std::int64_t end_window = 0;          ///< inclusive
    std::vector<std::uint32_t> target_keys;
    std::uint32_t spread = 20;            ///< flows (or cells) the magnitude is split over

    bool active(std::int64_t w) const noexcept { return w >= start_window && w <= end_window; }

    void validate() const {
        if (start_window > end_window) throw ParameterError("attack start_window > end_window");
        if (spread == 0) throw ParameterError("attack spread must be >= 1");
        if (target_keys.empty() && kind != AttackKind::many_to_many)
            throw ParameterError("attack " + to_string(kind) + " needs a target key");
    }

    friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

/// Text form `kind:magnitude:start:end:key1;key2[:spread]`, used by config files.
inline std::string to_string(const AttackSpec& a) {
    std::string s = to_string(a.kind) + ':' + std::to_string(a.magnitude) + ':' +
                    std::to_string(a.start_window) + ':' + std::to_string(a.end_window) + ':';
    for (std::size_t i = 0; i < a.target_keys.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(a.target_keys[i]);
    }
    s += ':' + std::to_string(a.spread);
    return s;
}

inline AttackSpec parse_attack(std::string_view text) {
    std::vector<std::string_view> parts;
    while (true) {
        auto c = text.find(':');
        parts.push_back(text.substr(0, c));
        if (c == std::string_view::npos) break;
        text.remove_prefix(c + 1);
    }
    if (parts.size() < 5 || parts.size() > 6)
        throw ParameterError("attack must be kind:magnitude:start:end:keys[:spread]");
    AttackSpec a;
    a.kind = parse_attack_kind(parts[0]);
    auto mag = detail::parse_uint<std::uint64_t>(parts[1]);
    auto start = detail::parse_uint<std::int64_t>(parts[2]);
    auto end = detail::parse_uint<std::int64_t>(parts[3]);
    if (!mag || !start || !end) throw ParameterError("bad attack numbers");
    a.magnitude = *mag;
    a.start_window = *start;
    a.end_window = *end;
    auto keys = parts[4];
    while (!keys.empty()) {
        auto sc = keys.find(';');
        auto k = parse_key(keys.substr(0, sc));
        if (!k) throw ParameterError("bad attack key");
        a.target_keys.push_back(*k);
        if (sc == std::string_view::npos) break;
        keys.remove_prefix(sc + 1);
    }
    if (parts.size() == 6) {
        auto sp = detail::parse_uint<std::uint32_t>(parts[5]);
        if (!sp) throw ParameterError("bad attack spread");
        a.spread = *sp;
    }
    a.validate();
    return a;
}

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::int64_t n_windows = 60;
    std::uint64_t rate = 10000;      ///< baseline records per window
    double tail_alpha = 1.6;
    double window_seconds = 10.0;
    double byte_scale = 100.0;       ///< bytes = ceil(byte_scale * Pareto(alpha, 1))
    std::vector<AttackSpec> attacks;

    void validate() const {
        if (rate == 0) throw ParameterError("synthetic rate must be > 0");
        if (!(tail_alpha > 0.0)) throw ParameterError("synthetic tail_alpha must be > 0");
        if (n_windows < 0) throw ParameterError("synthetic n_windows must be >= 0");
        if (!(window_seconds > 0.0)) throw ParameterError("synthetic window_seconds must be > 0");
        if (!(byte_scale >= 1.0)) throw ParameterError("synthetic byte_scale must be >= 1");
        for (const auto& a : attacks) a.validate();
    }
};

struct SyntheticTraffic {
    std::vector<WindowedRecord> records;
    /// Attack bytes injected per window (index = window).
    std::vector<std::uint64_t> attack_bytes;
    /// Parallel to `records`: true for injected attack records.
    std::vector<bool> injected;
};

namespace detail {

inline std::uint64_t packets_for(std::uint64_t bytes) { return bytes == 0 ? 0 : (bytes + 1499) / 1500; }

/// Split `total` into `parts` near-equal shares summing exactly to `total`.
inline std::vector<std::uint64_t> split_volume(std::uint64_t total, std::uint32_t parts) {
    std::vector<std::uint64_t> out(parts, total / parts);
    for (std::uint64_t i = 0; i < total % parts; ++i) ++out[i];
    return out;
}

} // namespace detail

/// Streams synthetic traffic one window at a time. Baseline flows are
/// Pareto-sized between uniformly random key pairs; each attack contributes
/// exactly `magnitude` bytes to every window it covers.
class SyntheticGenerator {
public:
    explicit SyntheticGenerator(SyntheticSpec spec) : spec_(std::move(spec)), g_(spec_.seed) { spec_.validate(); }

    bool done() const noexcept { return w_ >= spec_.n_windows; }
    std::int64_t window() const noexcept { return w_; }
    const SyntheticSpec& spec() const noexcept { return spec_; }

    /// Fills `recs` (time-ordered) for the next window and returns the attack
    /// bytes it contains. `injected`, when given, marks attack records.
    std::uint64_t next(std::vector<FlowRecord>& recs, std::vector<bool>* injected = nullptr) {
        if (done()) throw ParameterError("synthetic generator exhausted");
        const std::int64_t w = w_++;
        pending_.clear();
        std::uint64_t attack_total = 0;
        const double base_t = static_cast<double>(w) * spec_.window_seconds;
        auto stamp = [&] {
            double t = base_t + uniform01(g_) * spec_.window_seconds;
            while (t > base_t && window_of(t, 0.0, spec_.window_seconds) != w) t = std::nextafter(t, base_t);
            return t;
        };
        auto key = [&] { return static_cast<std::uint32_t>(g_() >> 32); };
        for (std::uint64_t i = 0; i < spec_.rate; ++i) {
            FlowRecord r;
            r.timestamp = stamp();
            r.src = key();
            r.dst = key();
            r.bytes = static_cast<std::uint64_t>(std::ceil(spec_.byte_scale * pareto(g_, spec_.tail_alpha)));
            r.packets = detail::packets_for(r.bytes);
            pending_.push_back({r, false});
        }
        for (const auto& a : spec_.attacks) {
            if (!a.active(w)) continue;
            for (std::uint64_t share : detail::split_volume(a.magnitude, a.spread)) {
                if (share == 0) continue;
                FlowRecord r;
                r.timestamp = stamp();
                switch (a.kind) {
                case AttackKind::many_to_one:
                    r.src = key();
                    r.dst = a.target_keys.front();
                    break;
                case AttackKind::one_to_many:
                    r.src = a.target_keys.front();
                    r.dst = key();
                    break;
                case AttackKind::many_to_many:
                    if (a.target_keys.empty()) {
                        r.src = key();
                        r.dst = key();
                    } else {
                        r.src = a.target_keys[uniform_below(g_, a.target_keys.size())];
                        r.dst = a.target_keys[uniform_below(g_, a.target_keys.size())];
                    }
                    break;
                }
                r.bytes = share;
                r.packets = detail::packets_for(share);
                pending_.push_back({r, true});
                attack_total += share;
            }
        }
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const Pending& a, const Pending& b) { return a.rec.timestamp < b.rec.timestamp; });
        // Anchor t0 at zero so a re-parsed CSV reproduces the same windows.
        if (w == 0 && !pending_.empty()) pending_.front().rec.timestamp = 0.0;
        recs.clear();
        if (injected) injected->clear();
        for (const auto& p : pending_) {
            recs.push_back(p.rec);
            if (injected) injected->push_back(p.injected);
        }
        return attack_total;
    }

private:
    struct Pending {
        FlowRecord rec;
        bool injected;
    };
    SyntheticSpec spec_;
    Engine g_;
    std::int64_t w_ = 0;
    std::vector<Pending> pending_;
};

inline SyntheticTraffic generate_synthetic(const SyntheticSpec& spec) {
    SyntheticGenerator gen(spec);
    SyntheticTraffic out;
    out.records.reserve(static_cast<std::size_t>(spec.n_windows) * spec.rate);
    std::vector<FlowRecord> recs;
    std::vector<bool> inj;
    while (!gen.done()) {
        const std::int64_t w = gen.window();
        out.attack_bytes.push_back(gen.next(recs, &inj));
        for (std::size_t i = 0; i < recs.size(); ++i) {
            out.records.push_back({w, recs[i]});
            out.injected.push_back(inj[i]);
        }
    }
    return out;
}

} // namespace amon
