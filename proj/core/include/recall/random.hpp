#pragma once

#include <cstdint>
#include <random>

namespace recall {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream, substream). Streams never
/// depend on execution order, so replicate r always sees the same draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0,
                    std::uint64_t substream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return Rng(seq);
}

/// Derives a child seed, e.g. for the blocking step inside replicate r.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
  auto rng = make_rng(seed, stream, substream ^ 0x9e3779b97f4a7c15ULL);
  return rng();
}

}  // namespace recall
