#pragma once

#include <array>
#include <cstdint>

namespace pwasvar {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based stream of uniforms and standard normals.
///
/// The stream is fully determined by (seed, stream): the seed is the Philox key
/// and the stream index occupies the upper half of the counter, so replicate r of
/// a Monte Carlo run can use CounterRng(seed, r) and obtain the same draws no
/// matter which thread evaluates it or in which order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double normal();
  std::uint64_t next_u64();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pwasvar
