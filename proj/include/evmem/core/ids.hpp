#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "evmem/core/random.hpp"

namespace evmem {

/// Generates 26-character ULID-style ids: 48 bits of milliseconds followed by
/// 80 bits of randomness, Crockford base32. Ids from one generator are strictly
/// increasing. A non-zero seed replaces the wall clock with a logical clock so
/// that repeated runs assign identical ids.
class IdGenerator {
 public:
  static constexpr std::uint64_t kLogicalEpochMs = 1'700'000'000'000ull;

  explicit IdGenerator(std::uint64_t seed = 0) : seed_(seed), rng_(seed ? seed : entropy()) {}

  std::string next() {
    std::uint64_t ms = seed_ ? kLogicalEpochMs + logical_ticks_++ : wall_ms();
    if (ms <= last_ms_) {
      ms = last_ms_;
      increment_random();
    } else {
      rand_hi_ = static_cast<std::uint16_t>(rng_.next());
      rand_lo_ = rng_.next();
    }
    last_ms_ = ms;
    return encode(ms, rand_hi_, rand_lo_);
  }

  /// Makes sure future ids sort after `id` (used after loading a snapshot).
  void observe(std::string_view id) {
    auto decoded = decode(id);
    if (!decoded) return;
    const auto [ms, hi, lo] = *decoded;
    if (ms > last_ms_ || (ms == last_ms_ && (hi > rand_hi_ || (hi == rand_hi_ && lo > rand_lo_)))) {
      last_ms_ = ms;
      rand_hi_ = hi;
      rand_lo_ = lo;
    }
  }

  static bool is_valid(std::string_view id) { return decode(id).has_value(); }

 private:
  static constexpr std::string_view kAlphabet = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

  struct Parts {
    std::uint64_t ms;
    std::uint16_t hi;
    std::uint64_t lo;
  };

  static std::uint64_t entropy() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
           static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  }

  static std::uint64_t wall_ms() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
  }

  void increment_random() {
    if (++rand_lo_ == 0) ++rand_hi_;
  }

  static std::string encode(std::uint64_t ms, std::uint16_t hi, std::uint64_t lo) {
    std::string out(26, '0');
    // time: 10 chars, 50 bits (top 2 always zero for 48-bit values)
    for (int i = 9; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = kAlphabet[ms & 31];
      ms >>= 5;
    }
    // randomness: 16 chars, 80 bits
    for (int i = 25; i >= 10; --i) {
      out[static_cast<std::size_t>(i)] = kAlphabet[lo & 31];
      lo = (lo >> 5) | (static_cast<std::uint64_t>(hi & 31) << 59);
      hi = static_cast<std::uint16_t>(hi >> 5);
    }
    return out;
  }

  static std::optional<Parts> decode(std::string_view id) {
    if (id.size() != 26) return std::nullopt;
    auto value = [](char c) -> int {
      const auto pos = kAlphabet.find(c);
      return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
    };
    std::uint64_t ms = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      const int v = value(id[i]);
      if (v < 0) return std::nullopt;
      ms = (ms << 5) | static_cast<std::uint64_t>(v);
    }
    std::uint16_t hi = 0;
    std::uint64_t lo = 0;
    for (std::size_t i = 10; i < 26; ++i) {
      const int v = value(id[i]);
      if (v < 0) return std::nullopt;
      hi = static_cast<std::uint16_t>((hi << 5) | (lo >> 59));
      lo = (lo << 5) | static_cast<std::uint64_t>(v);
    }
    return Parts{ms, hi, lo};
  }

  std::uint64_t seed_;
  SplitMix64 rng_;
  std::uint64_t logical_ticks_ = 0;
  std::uint64_t last_ms_ = 0;
  std::uint16_t rand_hi_ = 0;
  std::uint64_t rand_lo_ = 0;
};

}  // namespace evmem
