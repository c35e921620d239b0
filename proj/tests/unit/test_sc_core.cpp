#include <random>

#include "artemis/error.hpp"
#include "artemis/sc_core.hpp"
#include "doctest.h"

using namespace artemis;
using namespace artemis::sc;

namespace {

// Independent reference: popcount of the AND of the two bit patterns built
// straight from their definitions, bit by bit.
int reference_product(int a, int b) {
  int count = 0;
  for (int i = 0; i < 128; ++i) {
    const bool spread = (i + 1) * a / 128 > i * a / 128;
    const bool tcu = i < b;
    count += spread && tcu;
  }
  return count;
}

}  // namespace

TEST_CASE("fixed8 rejects magnitudes outside 0..127") {
  CHECK_NOTHROW(Fixed8(Sign::Positive, 0));
  CHECK_NOTHROW(Fixed8(Sign::Negative, 127));
  CHECK_THROWS_AS(Fixed8(Sign::Positive, 128), Error);
  CHECK_THROWS_AS(Fixed8(Sign::Positive, -1), Error);
  CHECK(Fixed8(Sign::Negative, 64).to_real() == doctest::Approx(-0.5));
}

TEST_CASE("tcu word is a contiguous run anchored at bit 0") {
  for (int m : {0, 1, 37, 64, 127}) {
    const auto w = encode_tcu(Fixed8(Sign::Positive, m));
    CHECK(w.popcount() == m);
    for (int i = 0; i < 128; ++i) CHECK(w.bits.test(i) == (i < m));
  }
}

TEST_CASE("spread word keeps the magnitude as its popcount") {
  for (int m = 0; m < 128; ++m) {
    const auto w = encode_spread(Fixed8(Sign::Negative, m));
    CHECK(w.popcount() == m);
    CHECK(w.sign == Sign::Negative);
    CHECK(w.encoding == Encoding::CorrelationSpread);
  }
}

TEST_CASE("decode inverts either encoding") {
  for (int m = 0; m < 128; m += 7) {
    const Fixed8 v(Sign::Negative, m);
    CHECK(decode(encode_tcu(v)).magnitude() == m);
    CHECK(decode(encode_spread(v)).magnitude() == m);
  }
  StochWord full;
  full.bits.set();
  CHECK_THROWS_AS(decode(full), Error);
}

TEST_CASE("product popcount equals floor(ab/128) for every operand pair") {
  for (int a = 0; a < 128; ++a) {
    for (int b = 0; b < 128; ++b) {
      const auto p = stoch_mul(encode_spread(Fixed8(Sign::Positive, a)),
                               encode_tcu(Fixed8(Sign::Positive, b)));
      REQUIRE(p.popcount() == a * b / 128);
      REQUIRE(p.popcount() == reference_product(a, b));
    }
  }
}

TEST_CASE("product sign is the xor of operand signs") {
  const Fixed8 p(Sign::Positive, 90), n(Sign::Negative, 90);
  CHECK(stoch_mul(encode_spread(p), encode_tcu(n)).sign == Sign::Negative);
  CHECK(stoch_mul(encode_spread(n), encode_tcu(n)).sign == Sign::Positive);
  CHECK(stoch_mul(encode_spread(n), encode_tcu(p)).encoding == Encoding::Product);
}

TEST_CASE("multiplier rejects swapped or mismatched encodings") {
  const Fixed8 v(Sign::Positive, 50);
  try {
    stoch_mul(encode_tcu(v), encode_spread(v));
    FAIL("expected an encoding contract error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EncodingContract);
  }
  CHECK_THROWS_AS(stoch_mul(encode_spread(v), encode_spread(v)), Error);
  CHECK_THROWS_AS(stoch_mul(encode_tcu(v), encode_tcu(v)), Error);
}

TEST_CASE("half times half is one quarter") {
  const Fixed8 h(Sign::Positive, 64);
  const auto p = stoch_mul(encode_spread(h), encode_tcu(h));
  CHECK(p.popcount() == 32);
  CHECK(p.popcount() / 128.0 == 0.25);
}

TEST_CASE("product is commutative in value and bounded by the smaller operand") {
  std::mt19937 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const int a = static_cast<int>(rng() % 128), b = static_cast<int>(rng() % 128);
    const int ab = stoch_mul(encode_spread(Fixed8(Sign::Positive, a)),
                             encode_tcu(Fixed8(Sign::Positive, b))).popcount();
    const int ba = stoch_mul(encode_spread(Fixed8(Sign::Positive, b)),
                             encode_tcu(Fixed8(Sign::Positive, a))).popcount();
    CHECK(ab == ba);
    CHECK(ab <= std::min(a, b));
  }
}

TEST_CASE("quantize_real rounds half away from zero and rejects |x| >= 1") {
  CHECK(quantize_real(0.5).magnitude() == 64);
  CHECK(quantize_real(-0.5).sign() == Sign::Negative);
  CHECK(quantize_real(1.5 / 128).magnitude() == 2);
  CHECK(quantize_real(-1.5 / 128).magnitude() == 2);
  CHECK(quantize_real(0.999).magnitude() == 127);
  CHECK(quantize_real(-0.0).sign() == Sign::Positive);
  CHECK_THROWS_AS(quantize_real(1.0), Error);
  CHECK_THROWS_AS(quantize_real(-1.0), Error);
  CHECK_THROWS_AS(quantize_real(std::nan("")), Error);
}
