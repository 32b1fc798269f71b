#ifndef NMC_RNG_HPP
#define NMC_RNG_HPP

#include <cmath>
#include <cstdint>

#include "nmc/types.hpp"

namespace nmc {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).  Each
// (seed, path, step, block) tuple maps to an independent 128-bit block, so
// any path increment can be regenerated in isolation and results do not
// depend on how paths are scheduled across workers.
struct PhiloxBlock {
  std::uint32_t x[4];
};

inline PhiloxBlock philox4x32(std::uint64_t seed, std::uint64_t path,
                              std::uint32_t step, std::uint32_t block) {
  constexpr std::uint32_t kWeylA = 0x9E3779B9u, kWeylB = 0xBB67AE85u;
  constexpr std::uint32_t kMulA = 0xD2511F53u, kMulB = 0xCD9E8D57u;

  std::uint32_t c0 = step;
  std::uint32_t c1 = block;
  std::uint32_t c2 = static_cast<std::uint32_t>(path);
  std::uint32_t c3 = static_cast<std::uint32_t>(path >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);

  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kWeylA;
    k1 += kWeylB;
  }
  return PhiloxBlock{{c0, c1, c2, c3}};
}

inline double uniform_from_bits(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t u = (static_cast<std::uint64_t>(hi) << 32) | lo;
  // 53-bit mantissa, strictly inside (0, 1)
  return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

// Two standard normals per counter block via Box-Muller.
inline void normal_pair(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                        std::uint32_t block, double& z0, double& z1) {
  const PhiloxBlock b = philox4x32(seed, path, step, block);
  const double u1 = uniform_from_bits(b.x[0], b.x[1]);
  const double u2 = uniform_from_bits(b.x[2], b.x[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 6.283185307179586476925286766559 * u2;
  z0 = rad * std::cos(ang);
  z1 = rad * std::sin(ang);
}

// Fills out with independent N(0,1) draws for one (path, step).
inline void fill_normals(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                         Eigen::Ref<Vector> out) {
  const Index n = out.size();
  double z0, z1;
  for (Index i = 0; i + 1 < n; i += 2) {
    normal_pair(seed, path, step, static_cast<std::uint32_t>(i / 2), z0, z1);
    out[i] = z0;
    out[i + 1] = z1;
  }
  if (n % 2 == 1) {
    normal_pair(seed, path, step, static_cast<std::uint32_t>(n / 2), z0, z1);
    out[n - 1] = z0;
  }
}

// Uniform in (0, 1) for auxiliary sampling (test point clouds etc.).
inline double uniform01(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                        std::uint32_t block) {
  const PhiloxBlock b = philox4x32(seed, path, step, block);
  return uniform_from_bits(b.x[0], b.x[1]);
}

}  // namespace nmc

#endif  // NMC_RNG_HPP
