#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace ncgl {

// Seeded generator with named, counter-indexed sub-streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t derive(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
    return Rng(derive(seed, name, index));
  }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t below(std::size_t n);

  template <class It>
  void shuffle(It first, It last) {
    const auto count = static_cast<std::size_t>(last - first);
    for (std::size_t i = count; i > 1; --i) {
      using std::swap;
      swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ncgl
