#pragma once

// Near-subarray compute unit: saturating partial-sum reduction, streaming
// log-sum-exp softmax, LUT activations and binary -> stochastic operand
// preparation.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>

#include "artemis/fixed_point.hpp"
#include "artemis/sc_core.hpp"

namespace artemis::nsc {

inline constexpr int kLutEntries = 256;

// 256-entry table. `inputs` holds the real input each entry represents and
// `outputs` the raw fixed-point output at `out_frac_bits`.
struct LutTable {
  std::string name;
  int out_frac_bits = 0;
  std::array<double, kLutEntries> inputs{};
  std::array<std::int64_t, kLutEntries> outputs{};

  double output_real(int index) const;
  void dump_csv(std::ostream& os) const;
  // Throws Error(Parse) on malformed rows or a wrong entry count.
  static LutTable load_csv(std::istream& is, std::string name, int out_frac_bits);
};

// exp: entry i holds 2^(-i/256) in Q.15. Arguments in [-8, 0] are range
// reduced to x = -(k + i/256) ln 2 and the entry is shifted right by k.
// ln: entry i holds ln(1 + i/256) in Q.12, indexed by the 8 bits after the
// leading one of the operand.
// gelu: entry i holds gelu(-4 + i/32) in Q.7.
struct LutBank {
  LutTable exp;
  LutTable ln;
  LutTable gelu;

  static std::shared_ptr<const LutBank> defaults();
};

enum class ReduceMode { Add, Subtract };
enum class ActivationKind { Relu, Gelu };
enum class OperandRole { FirstOperand, SecondOperand };

// LUT evaluation shared by the unit and by tests.
Prob exp_lookup(const LutTable& exp_lut, LogValue x);
LogValue ln_lookup(const LutTable& ln_lut, std::int64_t prob_raw_sum);

class NscUnit {
 public:
  explicit NscUnit(int adder_width = 16,
                   std::shared_ptr<const LutBank> luts = LutBank::defaults(),
                   int position_in_chain = 0);

  int adder_width() const { return adder_width_; }
  int position_in_chain() const { return position_; }
  std::uint64_t saturation_count() const { return saturations_; }

  Partial min_value() const;
  Partial max_value() const;

  // Saturating add/subtract at adder_width bits on the partial-sum grid.
  Partial reduce(Partial acc, Partial incoming, ReduceMode mode);

  // Softmax step 1: running max.
  void softmax_stream_max(Partial y);
  // Softmax step 2: ln(sum_j exp(y_j - ymax)). Latches and returns the lse
  // register. Throws Error(Domain) for an empty vector.
  LogValue softmax_lse(std::span<const Partial> y);
  // Softmax steps 3-4: exp(y_i - ymax - lse).
  Prob softmax_finalize(Partial y) const;
  void reset_softmax();

  Partial ymax_register() const { return ymax_; }
  LogValue lse_register() const { return lse_; }

  Partial activation(Partial x, ActivationKind kind) const;

  sc::StochWord b_to_tcu(sc::Fixed8 v, OperandRole role) const;

  const LutBank& luts() const { return *luts_; }

 private:
  int adder_width_;
  int position_;
  std::shared_ptr<const LutBank> luts_;
  Partial ymax_;
  LogValue lse_;
  std::uint64_t saturations_ = 0;
};

// Full softmax of one vector through a fresh unit.
void softmax(NscUnit& unit, std::span<const Partial> y, std::span<Prob> out);

}  // namespace artemis::nsc
