#pragma once

// Counter-based random number generation (Philox4x32-10). Each (seed, stream)
// pair is an independent, reproducible sequence addressed purely by counter
// state, so parallel workers can draw without coordination:
//
//   key     = (seed lo32, seed hi32)
//   counter = (block lo32, block hi32, stream lo32, stream hi32)
//
// Every block yields four 32-bit words; uniforms map a word to (0, 1] and
// gaussians come from the Box-Muller transform on word pairs. The sweep layer
// assigns stream ids as (cell_index << 32) | run_index for measurement draws
// and (1 << 63) | n_sensors for per-cell parameter draws, so no two runs
// ever share a stream.

#include <array>
#include <cmath>
#include <cstdint>

namespace offsetcal {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::uint32_t k0, std::uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * ctr[2];
    ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ k0, std::uint32_t(p1),
           std::uint32_t(p0 >> 32) ^ ctr[3] ^ k1, std::uint32_t(p0)};
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

} // namespace detail

class GaussianStream {
public:
  explicit GaussianStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key0_(std::uint32_t(seed)), key1_(std::uint32_t(seed >> 32)),
        stream_lo_(std::uint32_t(stream)), stream_hi_(std::uint32_t(stream >> 32)) {}

  // Uniform on (0, 1]; never returns 0 so log() stays finite.
  double next_uniform() { return (double(next_word()) + 1.0) * 0x1p-32; }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

private:
  std::uint32_t next_word() {
    if (buffer_pos_ == 4) {
      buffer_ = detail::philox4x32_10(
          {std::uint32_t(block_), std::uint32_t(block_ >> 32), stream_lo_, stream_hi_},
          key0_, key1_);
      ++block_;
      buffer_pos_ = 0;
    }
    return buffer_[buffer_pos_++];
  }

  std::uint32_t key0_, key1_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace offsetcal
