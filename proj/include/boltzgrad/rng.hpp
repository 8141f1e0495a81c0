#pragma once

#include <array>
#include <cstdint>

namespace boltzgrad {

// Every random draw in the solver is addressed by (seed, step, slot, tag).
// Draws for one pair slot are independent of all other slots, so per-pair
// work can run in any order (or concurrently) with bitwise-identical results,
// and perturbed reruns under the same seed consume identical streams.
enum class StreamTag : std::uint32_t {
  PairShuffle = 1,  // sequential stream for pair selection, slot 0
  Accept = 2,       // acceptance-rejection variate per pair slot
  Theta = 3,        // scattering-angle variate per pair slot
  Phi = 4,          // azimuthal variate per pair slot
  SigmaSphere = 5,  // uniform-sphere direction per pair slot (general path)
  InitNormal = 6,   // initial-condition normals, slot = particle index
};

// Philox4x32-10 counter-based generator: one block of 128 random bits per
// (counter, key) pair, no sequential state.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMulA = 0xD2511F53u;
  constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  constexpr std::uint32_t kWeylB = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

// Inverse CDF of the standard normal; accurate to ~1e-15 on (0,1).
double normal_icdf(double p);

// A keyed view into the Philox stream. Cheap to construct; draws advance an
// internal block counter only.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t step, std::uint32_t slot, StreamTag tag)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        base_{0u, slot, step, static_cast<std::uint32_t>(tag)} {}

  std::uint64_t next_u64() {
    if (!have_spare_) {
      auto ctr = base_;
      ctr[0] = block_++;
      block_out_ = philox4x32(ctr, key_);
      have_spare_ = true;
      return (static_cast<std::uint64_t>(block_out_[0]) << 32) | block_out_[1];
    }
    have_spare_ = false;
    return (static_cast<std::uint64_t>(block_out_[2]) << 32) | block_out_[3];
  }

  // Uniform on the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_icdf(uniform()); }

  // Unbiased integer in [0, n) via Lemire's multiply-with-rejection.
  std::uint64_t bounded(std::uint64_t n) {
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> base_;
  std::array<std::uint32_t, 4> block_out_{};
  std::uint32_t block_ = 0;
  bool have_spare_ = false;
};

}  // namespace boltzgrad
