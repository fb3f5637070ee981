#pragma once

#include <array>
#include <boost/random/normal_distribution.hpp>
#include <cstdint>
#include <random>
#include <span>

namespace mzd {

// mt19937_64 is fully specified by the standard and boost's ziggurat normal
// is fixed source, so a seed reproduces the same variates on every platform.
using RandomEngine = std::mt19937_64;

/// Mixes a base seed with stream indices (sweep point, replicate, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }

  void fill(std::span<double> out, double sigma) {
    for (double& v : out) v = sigma * normal_(engine_);
  }

  RandomEngine& engine() { return engine_; }

 private:
  RandomEngine engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace mzd
