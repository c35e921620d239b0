#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "artemis/error.hpp"
#include "artemis/nsc_compute.hpp"
#include "doctest.h"

using namespace artemis;
using namespace artemis::nsc;

namespace {

std::vector<double> float_softmax(const std::vector<double>& y) {
  double mx = y[0];
  for (double v : y) mx = std::max(mx, v);
  std::vector<double> out(y.size());
  double z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) z += (out[i] = std::exp(y[i] - mx));
  for (double& v : out) v /= z;
  return out;
}

}  // namespace

TEST_CASE("reduce saturates at the adder width and counts it") {
  NscUnit u(16);
  CHECK(u.max_value().raw == 32767);
  CHECK(u.min_value().raw == -32768);
  CHECK(u.reduce(Partial::from_raw(100), Partial::from_raw(28), ReduceMode::Add).raw == 128);
  CHECK(u.reduce(Partial::from_raw(100), Partial::from_raw(28), ReduceMode::Subtract).raw == 72);
  CHECK(u.saturation_count() == 0);
  CHECK(u.reduce(u.max_value(), Partial::from_raw(1), ReduceMode::Add) == u.max_value());
  CHECK(u.reduce(u.min_value(), Partial::from_raw(1), ReduceMode::Subtract) == u.min_value());
  CHECK(u.saturation_count() == 2);
}

TEST_CASE("exp lookup tracks exp over its domain") {
  const auto& lut = LutBank::defaults()->exp;
  double worst = 0.0;
  for (int raw = -8 * 4096; raw <= 0; ++raw) {
    const double x = raw / 4096.0;
    worst = std::max(worst, std::abs(exp_lookup(lut, LogValue::from_raw(raw)).to_real() - std::exp(x)));
  }
  CHECK(worst < 2.5e-3);
  CHECK(exp_lookup(lut, LogValue::from_raw(0)).raw == Prob::kOne);
  CHECK(exp_lookup(lut, LogValue::from_raw(-8 * 4096 - 1)).raw == 0);
}

TEST_CASE("ln lookup tracks ln for sums of probabilities") {
  const auto& lut = LutBank::defaults()->ln;
  double worst = 0.0;
  for (std::int64_t s = 1; s < 64 * Prob::kOne; s += 97) {
    const double ref = std::log(static_cast<double>(s) / Prob::kOne);
    worst = std::max(worst, std::abs(ln_lookup(lut, s).to_real() - ref));
  }
  CHECK(worst < 4e-3);
  CHECK(ln_lookup(lut, Prob::kOne).raw == 0);
  CHECK_THROWS_AS(ln_lookup(lut, 0), Error);
}

TEST_CASE("softmax matches a float softmax on random 8-bit vectors") {
  std::mt19937_64 rng(5);
  NscUnit u;
  double sum_err = 0.0, worst = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < 2000; ++v) {
    const int d = 1 + static_cast<int>(rng() % 64);
    std::vector<Partial> y(d);
    std::vector<double> yr(d);
    for (int i = 0; i < d; ++i) {
      const int k = static_cast<int>(rng() % 256) - 128;
      y[i] = Partial::from_raw(k * 8);
      yr[i] = k / 16.0;
    }
    std::vector<Prob> out(d);
    softmax(u, y, out);
    const auto ref = float_softmax(yr);
    double total = 0.0;
    for (int i = 0; i < d; ++i) {
      const double e = std::abs(out[i].to_real() - ref[i]);
      sum_err += e;
      worst = std::max(worst, e);
      total += out[i].to_real();
      ++n;
    }
    CHECK(std::abs(total - 1.0) <= d * 0.002);
  }
  CHECK(sum_err / n <= 0.002);
  CHECK(worst <= 0.0078);
}

TEST_CASE("softmax is exactly shift invariant on the input grid") {
  std::mt19937_64 rng(9);
  NscUnit u;
  for (int v = 0; v < 500; ++v) {
    const int d = 2 + static_cast<int>(rng() % 32);
    std::vector<Partial> a(d), b(d);
    const int shift = static_cast<int>(rng() % 512) - 256;
    for (int i = 0; i < d; ++i) {
      const int k = static_cast<int>(rng() % 512) - 256;
      a[i] = Partial::from_raw(k);
      b[i] = Partial::from_raw(k + shift);
    }
    std::vector<Prob> pa(d), pb(d);
    softmax(u, a, pa);
    softmax(u, b, pb);
    REQUIRE(pa == pb);
  }
}

TEST_CASE("softmax of an empty vector is a domain error") {
  NscUnit u;
  std::vector<Partial> y;
  CHECK_THROWS_AS(u.softmax_lse(y), Error);
}

TEST_CASE("softmax registers follow the streaming steps") {
  NscUnit u;
  const std::vector<Partial> y{Partial::from_real(0.5), Partial::from_real(-1.0), Partial::from_real(2.0)};
  u.reset_softmax();
  for (auto v : y) u.softmax_stream_max(v);
  CHECK(u.ymax_register() == Partial::from_real(2.0));
  const auto lse = u.softmax_lse(y);
  CHECK(lse.to_real() == doctest::Approx(std::log(1 + std::exp(-1.5) + std::exp(-3.0))).epsilon(0.01));
  CHECK(u.softmax_finalize(y[2]).to_real() == doctest::Approx(float_softmax({0.5, -1.0, 2.0})[2]).epsilon(0.01));
}

TEST_CASE("relu is exact and gelu follows the lookup table") {
  NscUnit u;
  CHECK(u.activation(Partial::from_raw(-5), ActivationKind::Relu).raw == 0);
  CHECK(u.activation(Partial::from_raw(77), ActivationKind::Relu).raw == 77);
  auto gelu = [](double x) { return 0.5 * x * (1 + std::erf(x / std::sqrt(2.0))); };
  for (double x = -6.0; x < 6.0; x += 0.0625) {
    const double got = u.activation(Partial::from_real(x), ActivationKind::Gelu).to_real();
    CHECK(std::abs(got - gelu(x)) < 0.03);
  }
}

TEST_CASE("lut tables survive a csv round trip") {
  const auto& exp = LutBank::defaults()->exp;
  std::stringstream ss;
  exp.dump_csv(ss);
  const auto back = LutTable::load_csv(ss, "exp", exp.out_frac_bits);
  CHECK(back.outputs == exp.outputs);
  std::stringstream bad("index,input,output\n0,1,2\n");
  CHECK_THROWS_AS(LutTable::load_csv(bad, "x", 15), Error);
}

TEST_CASE("b_to_tcu picks the encoding from the operand role") {
  NscUnit u;
  const sc::Fixed8 v(sc::Sign::Negative, 40);
  CHECK(u.b_to_tcu(v, OperandRole::FirstOperand).encoding == sc::Encoding::CorrelationSpread);
  CHECK(u.b_to_tcu(v, OperandRole::SecondOperand).encoding == sc::Encoding::TcuContiguous);
  CHECK(u.b_to_tcu(v, OperandRole::SecondOperand).sign == sc::Sign::Negative);
}
