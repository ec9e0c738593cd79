#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fastpt {

/// Deterministic random stream identified by (seed, label).
///
/// Streams with different labels are decorrelated by hashing the label into
/// the engine seed, so a child stream never depends on how many draws were
/// taken from its parent.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view label);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  /// Independent stream keyed on (seed, parent label, label).
  Rng child(std::string_view label) const;

  float normal(float mean = 0.0F, float stddev = 1.0F);
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

 private:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

inline Rng seeded_rng(std::uint64_t seed, std::string_view label) { return Rng(seed, label); }

}  // namespace fastpt
