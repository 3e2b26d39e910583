#pragma once

// Counter-based random streams.
//
// Every stream is a pure function of a master seed and a label tuple
// (purpose, level, element, replicate). Draws are produced by Philox4x32-10
// (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3") with the
// master seed as key and the labels placed in the counter, so two streams with
// different labels never overlap and the visit order of elements is irrelevant.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>

namespace randproj {

/// Philox4x32 with 10 rounds.
class Philox4x32 {
public:
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static counter_type apply(counter_type ctr, key_type key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }

private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static counter_type single_round(const counter_type& c, const key_type& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Purpose tags keep the point sets of different operators independent.
enum class Purpose : std::uint8_t {
  cell_average = 1,   // X points of the Monte Carlo cell average
  least_squares = 2,  // Y points of the discrete least-squares fit
  correction = 3,     // X points of the mean correction, independent of Y
  reference = 4,      // reference solutions in convergence studies
  gram_tail = 5,
  generic = 6,        // replicate-level draws not tied to an element
};

struct StreamLabels {
  Purpose purpose = Purpose::generic;
  std::uint32_t level = 0;
  std::uint32_t element = 0;
  std::uint32_t replicate = 0;
};

/// Master seed for a run. The labels are supplied per stream.
struct SeedSpec {
  std::uint64_t master_seed = 20240601u;

  /// Seed taken from `RANDPROJ_SEED` when set, else `fallback`.
  static SeedSpec from_environment(std::uint64_t fallback) {
    if (const char* env = std::getenv("RANDPROJ_SEED"); env != nullptr && *env != '\0') {
      return SeedSpec{std::stoull(env, nullptr, 0)};
    }
    return SeedSpec{fallback};
  }
};

/// Sequential view on one labeled Philox stream. Cheap to copy.
class RandomStream {
public:
  RandomStream(SeedSpec seed, StreamLabels labels)
    : key_{static_cast<std::uint32_t>(seed.master_seed),
           static_cast<std::uint32_t>(seed.master_seed >> 32)},
      element_(labels.element),
      replicate_(labels.replicate),
      tag_((labels.level << 8) | static_cast<std::uint32_t>(labels.purpose)) {}

  std::uint32_t next_u32() {
    if (lane_ == 4) {
      refill();
    }
    return buffer_[lane_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = (hi << 21) ^ (lo >> 11);
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  std::uint64_t blocks_consumed() const { return block_; }

private:
  void refill() {
    buffer_ = Philox4x32::apply({block_, element_, replicate_, tag_}, key_);
    ++block_;
    lane_ = 0;
  }

  Philox4x32::key_type key_;
  std::uint32_t element_;
  std::uint32_t replicate_;
  std::uint32_t tag_;
  std::uint32_t block_ = 0;
  std::uint32_t lane_ = 4;
  Philox4x32::counter_type buffer_{};
};

/// Factory binding a seed to labels; what the operators receive as `seeds`.
struct StreamFactory {
  SeedSpec seed;
  std::uint32_t level = 0;
  std::uint32_t replicate = 0;

  RandomStream stream(Purpose purpose, std::uint32_t element) const {
    return RandomStream(seed, StreamLabels{purpose, level, element, replicate});
  }

  StreamFactory with_replicate(std::uint32_t r) const {
    StreamFactory copy = *this;
    copy.replicate = r;
    return copy;
  }

  StreamFactory with_level(std::uint32_t l) const {
    StreamFactory copy = *this;
    copy.level = l;
    return copy;
  }
};

}  // namespace randproj
