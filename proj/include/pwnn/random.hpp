#ifndef PWNN_RANDOM_HPP
#define PWNN_RANDOM_HPP

#include <cstdint>
#include <random>

namespace pwnn {

using Rng = std::mt19937_64;

/// Independent draw streams within one run. Each (seed, stream, iteration)
/// triple seeds its own generator, so e.g. boundary draws never shift when the
/// particle count changes.
enum class Stream : std::uint32_t {
  Init = 1,
  Particles = 2,
  Boundary = 3,
  Times = 4,
  Initial = 5,
  Interior = 6,
  Evaluation = 7,
  Problem = 8,
  Noise = 9,
  Periodic = 10,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t iteration = 0) {
  const auto s = static_cast<std::uint32_t>(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), s,
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
  return Rng(seq);
}

}  // namespace pwnn

#endif  // PWNN_RANDOM_HPP
