#include "dualbound/rng.hpp"

namespace dualbound {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeedStream::SeedStream(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1))), engine_(key_) {}

SeedStream SeedStream::child(std::uint64_t index) const { return SeedStream(key_, index); }

double SeedStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double SeedStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double SeedStream::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

std::uint64_t SeedStream::below(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

}  // namespace dualbound
