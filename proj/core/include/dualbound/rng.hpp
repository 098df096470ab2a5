#pragma once

#include <cstdint>
#include <random>

namespace dualbound {

std::uint64_t splitmix64(std::uint64_t x);

// Seeded random stream keyed by (master seed, stream index). Streams derived
// from the same key produce the same draws regardless of execution order.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed, std::uint64_t stream = 0);

  SeedStream child(std::uint64_t index) const;

  double uniform();                 // [0, 1)
  double uniform(double lo, double hi);
  double normal();                  // standard normal
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)

  std::mt19937_64& engine() { return engine_; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace dualbound
