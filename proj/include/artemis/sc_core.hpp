#pragma once

// Bit-exact stochastic arithmetic on 128-bit unary words.
//
// Operands are signed 8-bit values: a sign plus a magnitude in [0, 127]
// representing magnitude/128. The multiplier pairs a correlation-spread word
// (first operand) with a contiguous transition-coded unary word (second
// operand); their bitwise AND has popcount floor(a*b/128) for every pair.

#include <bitset>
#include <cstdint>

namespace artemis::sc {

inline constexpr int kStreamBits = 128;
inline constexpr int kMaxMagnitude = kStreamBits - 1;

enum class Sign : std::int8_t { Positive = 1, Negative = -1 };

constexpr Sign operator*(Sign a, Sign b) {
  return a == b ? Sign::Positive : Sign::Negative;
}

class Fixed8 {
 public:
  constexpr Fixed8() = default;
  // Throws Error(Range) if magnitude is outside [0, 127].
  Fixed8(Sign sign, int magnitude);

  constexpr Sign sign() const { return sign_; }
  constexpr int magnitude() const { return magnitude_; }
  constexpr int signed_magnitude() const {
    return sign_ == Sign::Negative ? -magnitude_ : magnitude_;
  }
  double to_real() const;

  friend constexpr bool operator==(const Fixed8&, const Fixed8&) = default;

 private:
  Sign sign_ = Sign::Positive;
  int magnitude_ = 0;
};

enum class Encoding : std::uint8_t { TcuContiguous, CorrelationSpread, Product };

using StreamBits = std::bitset<kStreamBits>;

struct StochWord {
  StreamBits bits;
  Sign sign = Sign::Positive;
  Encoding encoding = Encoding::TcuContiguous;

  int popcount() const { return static_cast<int>(bits.count()); }
};

// Contiguous run of `magnitude` ones anchored at bit 0.
StochWord encode_tcu(Fixed8 v);

// Bit i is set iff floor((i+1)m/128) > floor(im/128).
StochWord encode_spread(Fixed8 v);

// Magnitude is the popcount. Throws Error(Range) for a 128-ones word.
Fixed8 decode(const StochWord& w);

// Throws Error(EncodingContract) unless a is CorrelationSpread and b is
// TcuContiguous.
StochWord stoch_mul(const StochWord& a, const StochWord& b);

// Round half away from zero, clamp to 127. Throws Error(Range) for |x| >= 1
// or non-finite x.
Fixed8 quantize_real(double x);

}  // namespace artemis::sc
