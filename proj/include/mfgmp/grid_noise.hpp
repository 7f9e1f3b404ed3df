#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mfgmp {

struct TimeGrid {
  double horizon = 0.0;
  std::size_t steps = 0;

  double dt() const { return steps ? horizon / double(steps) : 0.0; }
  double node(std::size_t k) const { return steps ? horizon * double(k) / double(steps) : 0.0; }
  std::vector<double> nodes() const;
};

// throws ConfigError on T <= 0 or N_t == 0
TimeGrid build_grid(double horizon, std::size_t steps);

// Counter-based generator: the value depends only on the key, never on call order.
std::uint64_t hash_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                       std::uint64_t b, std::uint64_t c, std::uint64_t d);
double uniform_from_key(std::uint64_t h);  // in (0,1)
double gaussian_from_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                         std::uint64_t b, std::uint64_t c, std::uint64_t d);

// stream tags
inline constexpr std::uint64_t kStreamMinor = 1;
inline constexpr std::uint64_t kStreamCommon = 2;
inline constexpr std::uint64_t kStreamInitial = 3;
inline constexpr std::uint64_t kStreamProbe = 4;

struct NoiseBundle {
  std::size_t scenarios = 0, particles = 0, steps = 0, d = 1, d0 = 1;
  std::uint64_t seed = 0;
  double dt = 0.0;
  bool antithetic = false;
  // time-major: [k][s][p][j] and [k][s][j]
  std::vector<double> dB;
  std::vector<double> dW0;

  double db(std::size_t k, std::size_t s, std::size_t p, std::size_t j) const {
    return dB[((k * scenarios + s) * particles + p) * d + j];
  }
  double dw0(std::size_t k, std::size_t s, std::size_t j) const {
    return dW0[(k * scenarios + s) * d0 + j];
  }
  const double* db_slice(std::size_t k) const { return dB.data() + k * scenarios * particles * d; }
  const double* dw0_slice(std::size_t k) const { return dW0.data() + k * scenarios * d0; }
};

NoiseBundle sample_noise(const TimeGrid& grid, std::size_t scenarios, std::size_t particles,
                         std::size_t d, std::size_t d0, std::uint64_t seed,
                         bool antithetic = false);

}  // namespace mfgmp
