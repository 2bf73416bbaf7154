#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace manipsim {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kW0;
                key[1] += kW1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

    /// `Lanes` consecutive counters {c0 + l, c1, c2, c3}, interleaved so the
    /// multiply latency of one lane hides behind the others.
    template <int Lanes>
    static void generate_lanes(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3, Key key,
                               std::array<Counter, Lanes>& out) noexcept {
        std::uint32_t x0[Lanes], x1[Lanes], x2[Lanes], x3[Lanes];
        for (int l = 0; l < Lanes; ++l) {
            x0[l] = c0 + static_cast<std::uint32_t>(l);
            x1[l] = c1;
            x2[l] = c2;
            x3[l] = c3;
        }
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int r = 0; r < 10; ++r) {
            for (int l = 0; l < Lanes; ++l) {
                const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * x0[l];
                const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * x2[l];
                const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ x1[l] ^ k0;
                const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ x3[l] ^ k1;
                x1[l] = static_cast<std::uint32_t>(p1);
                x3[l] = static_cast<std::uint32_t>(p0);
                x0[l] = n0;
                x2[l] = n2;
            }
            k0 += kW0;
            k1 += kW1;
        }
        for (int l = 0; l < Lanes; ++l) out[l] = {x0[l], x1[l], x2[l], x3[l]};
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Random stream of one Monte-Carlo path: a pure function of (seed, path, stream id),
/// so results do not depend on scheduling. Block b uses counter {b, 0, path, stream}
/// and key {seed_lo, seed_hi}; each block yields two 64-bit words (r0:r1, r2:r3).
/// Satisfies UniformRandomBitGenerator.
class PathStream {
public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    PathStream(std::uint64_t seed, std::uint32_t path, std::uint32_t stream_id = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_(path),
          stream_(stream_id) {}

    result_type operator()() noexcept {
        if (pos_ == kWords) refill();
        return words_[pos_++];
    }

    /// Uniform on (0, 1], 53 bits.
    double uniform() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal (ziggurat).
    double normal() noexcept { return normal_(*this); }

private:
    static constexpr int kLanes = 8;
    static constexpr int kWords = 2 * kLanes;

    void refill() noexcept {
        std::array<Philox4x32::Counter, kLanes> out;
        Philox4x32::generate_lanes<kLanes>(block_, 0, path_, stream_, key_, out);
        for (int l = 0; l < kLanes; ++l) {
            words_[2 * l] = static_cast<std::uint64_t>(out[l][0]) << 32 | out[l][1];
            words_[2 * l + 1] = static_cast<std::uint64_t>(out[l][2]) << 32 | out[l][3];
        }
        block_ += kLanes;
        pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint32_t path_;
    std::uint32_t stream_;
    std::uint32_t block_ = 0;
    int pos_ = kWords;
    std::array<std::uint64_t, kWords> words_{};
    boost::random::normal_distribution<double> normal_;
};

}  // namespace manipsim
