#pragma once

#include <cstdint>
#include <vector>

namespace segmod {

// splitmix64 generator with hand-rolled distributions. The standard library
// engines are portable but its distributions are not; every seeded run in the
// pipeline has to reproduce byte-identically across platforms, so the whole
// chain is pinned here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Unbiased draw from [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t min = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= min) return x % n;
    }
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Index draw from an unnormalized cumulative weight vector.
  std::size_t discrete_cdf(const std::vector<double>& cdf) {
    const double x = next_double() * cdf.back();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf[mid] <= x)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

 private:
  std::uint64_t state_;
};

}  // namespace segmod
