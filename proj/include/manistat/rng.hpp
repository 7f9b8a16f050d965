#pragma once

#include <cstdint>
#include <random>

namespace manistat {

// Seeded random stream. Every sampler in the library takes one of these
// explicitly; there is no hidden global state. Concurrent sampling requires
// one stream per thread, constructed from distinct seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return unif_(engine_); }
  double uniform(double a, double b) { return a + (b - a) * unif_(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }
  std::uint64_t integer(std::uint64_t upper_exclusive) {
    return std::uniform_int_distribution<std::uint64_t>(0, upper_exclusive - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace manistat
