#pragma once

// Seeded multiply-shift hashing onto power-of-two ranges.
//
//   h(x) = ((a * x + b) mod 2^64) >> (64 - log2(range)),  a odd.
//
// The top output bits depend on every input bit, so a 64-bit composite key
// (src << 32) | dst is hashed without truncating either half.

#include <bit>
#include <cstdint>
#include <string>

#include "amon/error.hpp"
#include "amon/random.hpp"

namespace amon {

class HashFn {
public:
    HashFn() = default;

    HashFn(std::uint64_t seed, std::uint64_t range) : seed_(seed), range_(range) {
        if (range < 2 || range > (std::uint64_t{1} << 32) || !std::has_single_bit(range)) {
            throw ParameterError("hash range must be a power of two in [2, 2^32], got " +
                                 std::to_string(range));
        }
        multiplier_ = splitmix64(seed) | 1ULL;
        offset_ = splitmix64(seed ^ 0xD1B54A32D192ED03ULL);
        shift_ = 64U - static_cast<unsigned>(std::countr_zero(range));
    }

    std::uint32_t operator()(std::uint64_t key) const noexcept {
        return static_cast<std::uint32_t>((multiplier_ * key + offset_) >> shift_);
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t range() const noexcept { return range_; }

    friend bool operator==(const HashFn&, const HashFn&) = default;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t range_ = 0;
    std::uint64_t multiplier_ = 1;
    std::uint64_t offset_ = 0;
    unsigned shift_ = 63;
};

inline HashFn make_hash(std::uint64_t seed, std::uint64_t range) {
    return HashFn(seed, range);
}

inline std::uint32_t hash(const HashFn& f, std::uint64_t key) noexcept {
    return f(key);
}

/// The three independent hash functions a pipeline needs, all derived from one
/// master seed: the databrick hash h and the Boyer-Moore hashes h1 (sub-stream)
/// and h2 (sketch column).
struct HashSuite {
    HashFn brick;
    HashFn substream;
    HashFn sketch;

    static HashSuite from_master(std::uint64_t master, std::uint64_t m, std::uint64_t m_prime,
                                 std::uint64_t m_substreams) {
        return HashSuite{HashFn(derive_seed(master, 0), m),
                         HashFn(derive_seed(master, 1), m_substreams),
                         HashFn(derive_seed(master, 2), m_prime)};
    }
};

} // namespace amon
