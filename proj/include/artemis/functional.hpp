#pragma once

// Numeric evaluation of a planned timeline through the stochastic multiply,
// analog accumulation and NSC reduction path.

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "artemis/analog_accumulator.hpp"
#include "artemis/dataflow_engine.hpp"
#include "artemis/nsc_compute.hpp"
#include "artemis/sc_core.hpp"
#include "artemis/workload_models.hpp"

namespace artemis::functional {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Per-tensor symmetric scaling onto the 8-bit stochastic grid:
// real = magnitude / 128 * scale.
struct QuantizedTensor {
  int rows = 0;
  int cols = 0;
  double scale = 1.0;
  std::vector<sc::Fixed8> data;

  sc::Fixed8 at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

QuantizedTensor quantize_tensor(const Tensor& t, double factor = 1.0);
// Column-major copy, so weight columns are contiguous.
QuantizedTensor transpose(const QuantizedTensor& q);

struct OperandStore {
  std::map<std::string, Tensor> tensors;
};

// Inputs uniform in (-1, 1); each weight uniform in +-1/sqrt(fan_in).
OperandStore make_operands(const workload::OpGraph& g, std::uint64_t seed);

struct DotStats {
  std::uint64_t dot_products = 0;
  std::uint64_t readouts = 0;
  std::uint64_t momcap_saturations = 0;
};

// One signed dot product on the stochastic -> analog -> NSC path: positive
// products accumulate first, then negative ones, each in MOMCAP groups of
// `capacity`; the NSC subtracts the negative total from the positive one.
class DotEngine {
 public:
  DotEngine(const analog::MomcapConfig& momcap, int adder_width = 16);

  Partial dot(std::span<const sc::Fixed8> a, std::span<const sc::Fixed8> b,
              std::uint64_t noise_key = 0);

  nsc::NscUnit& nsc() { return nsc_; }
  const DotStats& stats() const { return stats_; }
  const analog::MomcapConfig& momcap() const { return momcap_; }

 private:
  Partial pass(std::span<const sc::Fixed8> a, std::span<const sc::Fixed8> b, sc::Sign sign,
               std::uint64_t key);

  analog::MomcapConfig momcap_;
  nsc::NscUnit nsc_;
  DotStats stats_;
};

struct FunctionalOptions {
  analog::MomcapConfig momcap;
  int adder_width = 16;
};

struct FunctionalResult {
  std::map<std::string, Tensor> tensors;
  std::uint64_t nsc_saturations = 0;
  std::uint64_t momcap_saturations = 0;
  std::uint64_t dot_products = 0;

  std::uint64_t saturation_count() const { return nsc_saturations + momcap_saturations; }
};

// Evaluates every finalizing event of `tl` in order. Throws Error(Contract)
// if an operand tensor is consumed before all of it has been produced.
FunctionalResult functional_execute(const dataflow::EventTimeline& tl,
                                    const workload::OpGraph& g, const OperandStore& store,
                                    const FunctionalOptions& opt);

}  // namespace artemis::functional
