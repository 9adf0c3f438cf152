#pragma once

#include <cstdint>
#include <random>

namespace tecrl {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent random streams derived from one master seed. Each consumer
/// owns its stream so enabling or disabling one component never shifts the
/// numbers another one sees.
enum class Stream : std::uint64_t {
  kEnv = 1,
  kEvalEnv = 2,
  kInit = 3,
  kBuffer = 4,
  kNoise = 5,
  kExplore = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream * 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, Stream stream) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(stream)));
}

}  // namespace tecrl
