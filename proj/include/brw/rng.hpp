// SPDX-License-Identifier: Apache-2.0
//
// Counter-based randomness keyed by tree position.
//
// Every vertex of a simulated tree owns a stream whose outputs are a pure
// function of (run seed, vertex key). Streams are random access: output i is
// mix(state0 + (i + 1) * gamma), so any traversal order reproduces the same
// tree and the same increments.
#pragma once

#include <cstdint>
#include <string_view>

namespace brw {

/// SplitMix64 output function (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

struct Digest128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend constexpr bool operator==(const Digest128&, const Digest128&) = default;
};

/// Position of a vertex: its depth and a digest accumulated along the path
/// from the root. Distinct paths collide with probability about 2^-64 per
/// pair within a run; collisions are tolerated.
struct VertexKey {
  std::uint32_t depth = 0;
  Digest128 digest;

  static constexpr VertexKey root(std::uint64_t seed) noexcept {
    return {0, {mix64(seed ^ 0x6a09e667f3bcc909ULL),
                mix64(seed + 0xbb67ae8584caa73bULL)}};
  }

  /// Key of the child with generation index `index` (0-based). One
  /// finalizer per edge; `lo` doubles as the vertex's stream state.
  constexpr VertexKey child(std::uint64_t index) const noexcept {
    const std::uint64_t hi = mix64(digest.hi ^ (digest.lo + (index + 1) * kGoldenGamma));
    const std::uint64_t lo = ((digest.lo << 23) | (digest.lo >> 41)) ^ hi;
    return {depth + 1, {hi, lo}};
  }

  friend constexpr bool operator==(const VertexKey&, const VertexKey&) = default;
};

/// Generic key from two integers (used for pool slots, skeleton arrays).
constexpr Digest128 make_digest(std::uint64_t a, std::uint64_t b) noexcept {
  const std::uint64_t hi = mix64(a ^ mix64(b + kGoldenGamma));
  return {hi, mix64(b ^ mix64(a + 0x3c6ef372fe94f82bULL) ^ hi)};
}

/// Random-access stream. Slot 0 is reserved for offspring counts and slots
/// 1, 2, ... for increments, so laws can be swapped under a fixed key.
class KeyedStream {
 public:
  constexpr KeyedStream(std::uint64_t seed, const Digest128& digest) noexcept
      : state_(mix64(digest.lo ^ mix64(seed ^ digest.hi))) {}

  /// Stream of a tree vertex. The run seed already entered through the
  /// root key, so the digest is used directly.
  static constexpr KeyedStream at(const VertexKey& key) noexcept { return KeyedStream(key.digest.lo); }

  constexpr std::uint64_t bits(std::uint64_t slot) const noexcept {
    return mix64(state_ + (slot + 1) * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t slot) const noexcept {
    return static_cast<double>(bits(slot) >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1].
  constexpr double uniform_pos(std::uint64_t slot) const noexcept {
    return static_cast<double>((bits(slot) >> 11) + 1) * 0x1.0p-53;
  }

 private:
  explicit constexpr KeyedStream(std::uint64_t state) noexcept : state_(state) {}
  std::uint64_t state_;
};

/// Sequential generator over a keyed stream, for code that consumes an
/// unknown number of draws (resampling, Monte Carlo sign vectors).
class StreamCursor {
 public:
  constexpr StreamCursor(std::uint64_t seed, const Digest128& digest) noexcept
      : stream_(seed, digest) {}

  constexpr std::uint64_t next_bits() noexcept { return stream_.bits(slot_++); }
  constexpr double next_uniform() noexcept { return stream_.uniform(slot_++); }
  constexpr double next_uniform_pos() noexcept { return stream_.uniform_pos(slot_++); }

  /// Uniform integer in [0, n) by Lemire's multiply-shift (bias < n / 2^64).
  std::uint64_t next_below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_bits()) * n) >> 64);
  }

 private:
  KeyedStream stream_;
  std::uint64_t slot_ = 0;
};

/// Seed for replica `replica` of experiment `experiment_id`.
constexpr std::uint64_t split_seed(std::uint64_t base_seed, std::uint64_t experiment_id,
                                   std::uint64_t replica) noexcept {
  return mix64(mix64(base_seed ^ mix64(experiment_id + kGoldenGamma)) + replica * kGoldenGamma);
}

/// FNV-1a, for turning experiment names into ids.
constexpr std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace brw
