#include "mfgmp/grid_noise.hpp"

#include <cmath>
#include <numbers>

#include "mfgmp/errors.hpp"

namespace mfgmp {

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = node(k);
  return t;
}

TimeGrid build_grid(double horizon, std::size_t steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ConfigError("grid.horizon must be a positive finite number");
  if (steps == 0) throw ConfigError("grid.steps must be at least 1");
  return TimeGrid{horizon, steps};
}

namespace {

std::uint64_t mix(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                       std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ stream);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  h = mix(h ^ d);
  return h;
}

double uniform_from_key(std::uint64_t h) {
  return (double(h >> 11) + 0.5) * 0x1.0p-53;
}

double gaussian_from_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                         std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const std::uint64_t h = hash_key(seed, stream, a, b, c, d);
  const double u1 = uniform_from_key(h);
  const double u2 = uniform_from_key(mix(h ^ 0xd1b54a32d192ed03ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseBundle sample_noise(const TimeGrid& grid, std::size_t scenarios, std::size_t particles,
                         std::size_t d, std::size_t d0, std::uint64_t seed, bool antithetic) {
  if (scenarios == 0 || particles == 0)
    throw ConfigError("ensemble sizes must be at least 1");
  NoiseBundle nb;
  nb.scenarios = scenarios;
  nb.particles = particles;
  nb.steps = grid.steps;
  nb.d = d;
  nb.d0 = d0;
  nb.seed = seed;
  nb.dt = grid.dt();
  nb.antithetic = antithetic;
  const double sq = std::sqrt(nb.dt);
  nb.dB.assign(grid.steps * scenarios * particles * d, 0.0);
  nb.dW0.assign(grid.steps * scenarios * d0, 0.0);
  if (sq == 0.0) return nb;

  // antithetic pairs: odd index mirrors its even partner
  for (std::size_t k = 0; k < grid.steps; ++k)
    for (std::size_t s = 0; s < scenarios; ++s) {
      for (std::size_t p = 0; p < particles; ++p)
        for (std::size_t j = 0; j < d; ++j) {
          double z;
          if (antithetic && (p & 1))
            z = -gaussian_from_key(seed, kStreamMinor, s, p - 1, k, j);
          else
            z = gaussian_from_key(seed, kStreamMinor, s, p, k, j);
          nb.dB[((k * scenarios + s) * particles + p) * d + j] = sq * z;
        }
      for (std::size_t j = 0; j < d0; ++j) {
        double z;
        if (antithetic && (s & 1))
          z = -gaussian_from_key(seed, kStreamCommon, s - 1, 0, k, j);
        else
          z = gaussian_from_key(seed, kStreamCommon, s, 0, k, j);
        nb.dW0[(k * scenarios + s) * d0 + j] = sq * z;
      }
    }
  return nb;
}

}  // namespace mfgmp
