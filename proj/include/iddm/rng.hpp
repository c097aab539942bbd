#pragma once

// Seeded, keyed random streams.
//
// A stream is identified by a 64-bit seed, a purpose tag and a
// (run, cycle, step) key. Identical identifiers always give identical
// sequences, so any step of any run can be regenerated independently of
// the order in which work was scheduled.

#include <cstdint>
#include <random>

namespace iddm {

struct StreamKey {
  std::uint64_t run = 0;
  std::uint64_t cycle = 0;
  std::uint64_t step = 0;
  bool operator==(const StreamKey&) const = default;
};

/// Separates streams that share a key but serve different roles.
enum class StreamPurpose : std::uint64_t {
  General = 0,
  InitialPoint = 1,
  Diffusion = 2,
  ProblemData = 3,
  Verification = 4,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, StreamKey key = {},
                     StreamPurpose purpose = StreamPurpose::General);

  std::uint64_t seed() const noexcept { return seed_; }
  const StreamKey& key() const noexcept { return key_; }
  StreamPurpose purpose() const noexcept { return purpose_; }

  /// Fresh stream with the same seed and a different key/purpose.
  RngStream derive(StreamKey key, StreamPurpose purpose) const;
  RngStream derive(StreamKey key) const { return derive(key, purpose_); }
  RngStream with_step(std::uint64_t step) const;
  RngStream with_cycle(std::uint64_t cycle) const;

  /// Standard normal (std::normal_distribution, exact distribution).
  double gaussian();
  /// Uniform on [0, 1).
  double uniform();

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  StreamKey key_;
  StreamPurpose purpose_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace iddm
