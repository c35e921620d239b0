#include "artemis/nsc_compute.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "artemis/error.hpp"

namespace artemis::nsc {
namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr std::int64_t kInvLn2Q16 = 94548;            // round(2^16 / ln 2)
constexpr std::int64_t kLn2Q24 = 11629080;            // round(2^24 * ln 2)
constexpr std::int64_t kExpDomainRaw = -8 * LogValue::kOne;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

std::int64_t round_shift(std::int64_t v, int k) {
  if (k <= 0) return v;
  if (k >= 62) return 0;
  return (v + (std::int64_t{1} << (k - 1))) >> k;
}

LutTable make_exp() {
  LutTable t;
  t.name = "exp";
  t.out_frac_bits = Prob::kFracBits;
  for (int i = 0; i < kLutEntries; ++i) {
    const double r = i / 256.0;
    t.inputs[i] = -r * kLn2;
    t.outputs[i] = std::llround(std::exp2(-r) * static_cast<double>(Prob::kOne));
  }
  return t;
}

LutTable make_ln() {
  LutTable t;
  t.name = "ln";
  t.out_frac_bits = LogValue::kFracBits;
  for (int i = 0; i < kLutEntries; ++i) {
    const double m = 1.0 + i / 256.0;
    t.inputs[i] = m;
    t.outputs[i] = std::llround(std::log(m) * static_cast<double>(LogValue::kOne));
  }
  return t;
}

LutTable make_gelu() {
  LutTable t;
  t.name = "gelu";
  t.out_frac_bits = Partial::kFracBits;
  for (int i = 0; i < kLutEntries; ++i) {
    const double x = -4.0 + i / 32.0;
    t.inputs[i] = x;
    t.outputs[i] = std::llround(gelu(x) * static_cast<double>(Partial::kOne));
  }
  return t;
}

}  // namespace

double LutTable::output_real(int index) const {
  return std::ldexp(static_cast<double>(outputs.at(static_cast<std::size_t>(index))), -out_frac_bits);
}

void LutTable::dump_csv(std::ostream& os) const {
  os << "index,input,output\n";
  char buf[96];
  for (int i = 0; i < kLutEntries; ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", i, inputs[i], output_real(i));
    os << buf;
  }
}

LutTable LutTable::load_csv(std::istream& is, std::string name, int out_frac_bits) {
  LutTable t;
  t.name = std::move(name);
  t.out_frac_bits = out_frac_bits;
  std::string line;
  if (!std::getline(is, line) || line != "index,input,output") {
    throw Error(ErrorCode::Parse, "LUT csv: missing header 'index,input,output'");
  }
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
      throw Error(ErrorCode::Parse, "LUT csv: malformed row at line " + std::to_string(row + 2));
    }
    if (row >= kLutEntries || std::stoi(a) != row) {
      throw Error(ErrorCode::Parse, "LUT csv: unexpected index at line " + std::to_string(row + 2));
    }
    t.inputs[row] = std::stod(b);
    t.outputs[row] = std::llround(std::ldexp(std::stod(c), out_frac_bits));
    ++row;
  }
  if (row != kLutEntries) {
    throw Error(ErrorCode::Parse, "LUT csv: expected 256 rows, got " + std::to_string(row));
  }
  return t;
}

std::shared_ptr<const LutBank> LutBank::defaults() {
  static const auto bank = std::make_shared<const LutBank>(LutBank{make_exp(), make_ln(), make_gelu()});
  return bank;
}

Prob exp_lookup(const LutTable& exp_lut, LogValue x) {
  if (x.raw >= 0) return Prob::from_raw(exp_lut.outputs[0]);
  if (x.raw < kExpDomainRaw) return Prob::from_raw(0);
  // t = -x / ln 2 in Q.20
  const std::int64_t t = (-x.raw * kInvLn2Q16) >> 8;
  std::int64_t k = t >> 20;
  std::int64_t index = ((t & ((std::int64_t{1} << 20) - 1)) + (std::int64_t{1} << 11)) >> 12;
  if (index == kLutEntries) {
    index = 0;
    ++k;
  }
  return Prob::from_raw(round_shift(exp_lut.outputs[static_cast<std::size_t>(index)], static_cast<int>(k)));
}

LogValue ln_lookup(const LutTable& ln_lut, std::int64_t prob_raw_sum) {
  if (prob_raw_sum <= 0) throw Error(ErrorCode::Domain, "ln of a non-positive sum");
  int e = 63 - __builtin_clzll(static_cast<unsigned long long>(prob_raw_sum));
  const std::int64_t lead = std::int64_t{1} << e;
  std::int64_t index = (2 * (prob_raw_sum - lead) * kLutEntries + lead) / (2 * lead);
  if (index == kLutEntries) {
    index = 0;
    ++e;
  }
  const std::int64_t exponent = e - Prob::kFracBits;
  const std::int64_t octaves = exponent * kLn2Q24;
  const std::int64_t octaves_q12 = octaves >= 0 ? round_shift(octaves, 12) : -round_shift(-octaves, 12);
  return LogValue::from_raw(octaves_q12 + ln_lut.outputs[static_cast<std::size_t>(index)]);
}

NscUnit::NscUnit(int adder_width, std::shared_ptr<const LutBank> luts, int position_in_chain)
    : adder_width_(adder_width), position_(position_in_chain), luts_(std::move(luts)) {
  if (adder_width_ < 2 || adder_width_ > 48) {
    throw Error(ErrorCode::Config, "NSC adder width must be in [2, 48]");
  }
  if (!luts_) throw Error(ErrorCode::Config, "NSC unit needs a LUT bank");
  reset_softmax();
}

Partial NscUnit::min_value() const {
  return Partial::from_raw(-(std::int64_t{1} << (adder_width_ - 1)));
}

Partial NscUnit::max_value() const {
  return Partial::from_raw((std::int64_t{1} << (adder_width_ - 1)) - 1);
}

Partial NscUnit::reduce(Partial acc, Partial incoming, ReduceMode mode) {
  std::int64_t r = mode == ReduceMode::Add ? acc.raw + incoming.raw : acc.raw - incoming.raw;
  const std::int64_t lo = min_value().raw;
  const std::int64_t hi = max_value().raw;
  if (r < lo || r > hi) {
    ++saturations_;
    r = std::clamp(r, lo, hi);
  }
  return Partial::from_raw(r);
}

void NscUnit::softmax_stream_max(Partial y) { ymax_ = std::max(ymax_, y); }

LogValue NscUnit::softmax_lse(std::span<const Partial> y) {
  if (y.empty()) throw Error(ErrorCode::Domain, "softmax over an empty vector");
  std::int64_t sum = 0;
  for (Partial v : y) {
    const LogValue arg = Partial::from_raw(v.raw - ymax_.raw).rescale<LogValue::kFracBits>();
    sum += exp_lookup(luts_->exp, arg).raw;
  }
  lse_ = ln_lookup(luts_->ln, sum);
  return lse_;
}

Prob NscUnit::softmax_finalize(Partial y) const {
  const LogValue shifted = Partial::from_raw(y.raw - ymax_.raw).rescale<LogValue::kFracBits>();
  return exp_lookup(luts_->exp, LogValue::from_raw(shifted.raw - lse_.raw));
}

void NscUnit::reset_softmax() {
  ymax_ = min_value();
  lse_ = LogValue{};
}

Partial NscUnit::activation(Partial x, ActivationKind kind) const {
  if (kind == ActivationKind::Relu) return x.raw > 0 ? x : Partial{};
  // gelu(x) differs from x by < 2e-4 above 4 and from 0 by < 2e-4 below -4.
  if (x.raw >= 4 * Partial::kOne) return x;
  if (x.raw < -4 * Partial::kOne) return Partial{};
  const std::int64_t index = std::clamp<std::int64_t>(
      round_shift(x.raw + 4 * Partial::kOne, Partial::kFracBits - 5), 0, kLutEntries - 1);
  return Partial::from_raw(luts_->gelu.outputs[static_cast<std::size_t>(index)]);
}

sc::StochWord NscUnit::b_to_tcu(sc::Fixed8 v, OperandRole role) const {
  return role == OperandRole::FirstOperand ? sc::encode_spread(v) : sc::encode_tcu(v);
}

void softmax(NscUnit& unit, std::span<const Partial> y, std::span<Prob> out) {
  if (out.size() != y.size()) throw Error(ErrorCode::Contract, "softmax output size mismatch");
  unit.reset_softmax();
  for (Partial v : y) unit.softmax_stream_max(v);
  unit.softmax_lse(y);
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = unit.softmax_finalize(y[i]);
}

}  // namespace artemis::nsc
