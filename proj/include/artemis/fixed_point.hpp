#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace artemis {

// Binary fixed-point scalar with a compile-time number of fraction bits.
template <int FracBits>
struct Fixed {
  static constexpr int kFracBits = FracBits;
  static constexpr std::int64_t kOne = std::int64_t{1} << FracBits;

  std::int64_t raw = 0;

  static constexpr Fixed from_raw(std::int64_t r) { return Fixed{r}; }
  // Round half away from zero.
  static Fixed from_real(double x) {
    return Fixed{static_cast<std::int64_t>(std::llround(x * static_cast<double>(kOne)))};
  }
  double to_real() const { return static_cast<double>(raw) / static_cast<double>(kOne); }

  template <int Other>
  constexpr Fixed<Other> rescale() const {
    if constexpr (Other >= FracBits) {
      return Fixed<Other>{raw * (std::int64_t{1} << (Other - FracBits))};
    } else {
      constexpr std::int64_t div = std::int64_t{1} << (FracBits - Other);
      const std::int64_t half = div / 2;
      return Fixed<Other>{raw >= 0 ? (raw + half) / div : -((-raw + half) / div)};
    }
  }

  friend constexpr auto operator<=>(const Fixed&, const Fixed&) = default;
};

// Partial sums and softmax inputs share the 1/128 grid of the 8-bit operands.
using Partial = Fixed<7>;
// Log-domain registers.
using LogValue = Fixed<12>;
// Probabilities and exp() outputs.
using Prob = Fixed<15>;

}  // namespace artemis
