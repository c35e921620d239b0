#include "artemis/sc_core.hpp"

#include <cmath>
#include <string>

#include "artemis/error.hpp"

namespace artemis::sc {

Fixed8::Fixed8(Sign sign, int magnitude) : sign_(sign), magnitude_(magnitude) {
  if (magnitude < 0 || magnitude > kMaxMagnitude) {
    throw Error(ErrorCode::Range,
                "Fixed8 magnitude " + std::to_string(magnitude) + " outside [0, 127]");
  }
}

double Fixed8::to_real() const {
  return static_cast<double>(signed_magnitude()) / kStreamBits;
}

StochWord encode_tcu(Fixed8 v) {
  StochWord w;
  w.sign = v.sign();
  w.encoding = Encoding::TcuContiguous;
  for (int i = 0; i < v.magnitude(); ++i) w.bits.set(static_cast<std::size_t>(i));
  return w;
}

StochWord encode_spread(Fixed8 v) {
  StochWord w;
  w.sign = v.sign();
  w.encoding = Encoding::CorrelationSpread;
  const int m = v.magnitude();
  for (int i = 0; i < kStreamBits; ++i) {
    if ((i + 1) * m / kStreamBits > i * m / kStreamBits) {
      w.bits.set(static_cast<std::size_t>(i));
    }
  }
  return w;
}

Fixed8 decode(const StochWord& w) {
  return Fixed8(w.sign, w.popcount());
}

StochWord stoch_mul(const StochWord& a, const StochWord& b) {
  if (a.encoding != Encoding::CorrelationSpread || b.encoding != Encoding::TcuContiguous) {
    throw Error(ErrorCode::EncodingContract,
                "stoch_mul expects (CorrelationSpread, TcuContiguous) operands");
  }
  StochWord p;
  p.bits = a.bits & b.bits;
  p.sign = a.sign * b.sign;
  p.encoding = Encoding::Product;
  return p;
}

Fixed8 quantize_real(double x) {
  if (!std::isfinite(x) || std::fabs(x) >= 1.0) {
    throw Error(ErrorCode::Range, "quantize_real expects |x| < 1, got " + std::to_string(x));
  }
  const Sign sign = std::signbit(x) ? Sign::Negative : Sign::Positive;
  // std::round rounds half away from zero.
  long m = std::lround(std::fabs(x) * kStreamBits);
  if (m > kMaxMagnitude) m = kMaxMagnitude;
  // -0.0 and values that round to zero keep a positive sign.
  return Fixed8(m == 0 ? Sign::Positive : sign, static_cast<int>(m));
}

}  // namespace artemis::sc
