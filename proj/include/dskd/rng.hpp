#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dskd/error.hpp"
#include "dskd/matrix.hpp"

namespace dskd {

// Deterministic 64-bit generator (splitmix64) with Box-Muller Gaussians.
// The stream is a pure function of the seed, independent of platform
// except for libm rounding in log/cos/sin.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never 0 so it is safe inside log().
  double next_uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                              double mean = 0.0, double std_dev = 1.0) {
  if (std_dev < 0.0) throw ParameterError("gaussian_matrix: std must be >= 0");
  Matrix m(rows, cols);
  double* p = m.data();
  for (std::size_t k = 0; k < rows * cols; ++k)
    p[k] = mean + std_dev * rng.next_gaussian();
  return m;
}

}  // namespace dskd
