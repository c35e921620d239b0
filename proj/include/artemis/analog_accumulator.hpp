#pragma once

// Capacity-limited temporal charge accumulator with a quantizing readout.
//
// Charge is tracked in integer units, one unit per set bit-line, so a fully
// charged accumulator after `capacity` products of 128 set bits holds
// capacity * 128 units. The readout maps the level onto `readout_levels`
// comparator codes spanning that full scale.

#include <cstdint>
#include <map>

#include "artemis/fixed_point.hpp"

namespace artemis::analog {

struct MomcapConfig {
  double capacitance_pf = 8.0;
  int capacity = 20;
  int readout_levels = 128;
  double noise_mae = 0.0;  // mean |noise| as a fraction of full scale; 0 disables
  double charge_step_ns = 1.0;
  std::uint64_t seed = 0;

  int full_scale_level() const { return capacity * 128; }
  // Throws Error(Config) when an invariant does not hold.
  void validate() const;
};

struct MomcapState {
  int level = 0;
  int count = 0;
  bool saturated = false;

  friend bool operator==(const MomcapState&, const MomcapState&) = default;
};

struct Readout {
  int code = 0;         // comparator code in [0, readout_levels - 1]
  double fraction = 0;  // code / (readout_levels - 1), fraction of full scale
  Partial value;        // accumulated dot-product value on the NSC grid
};

// Adds one product popcount. Past capacity the state saturates and the level
// is left unchanged. Throws Error(Range) for popcount outside [0, 128].
MomcapState accumulate(MomcapState state, int popcount, const MomcapConfig& cfg);

// Quantizing analog-to-binary conversion. `noise_key` selects the noise
// sample when cfg.noise_mae > 0; the same (seed, key) always yields the same
// sample.
Readout read_a_to_b(const MomcapState& state, const MomcapConfig& cfg,
                    std::uint64_t noise_key = 0);

constexpr MomcapState reset(const MomcapState&) { return MomcapState{}; }

// Capacitance -> accumulation capacity lookup. The default table only holds
// the measured 8 pF point; other points must be supplied.
class CapacityTable {
 public:
  CapacityTable();

  void set(double capacitance_pf, int capacity);
  // Throws Error(Config) outside [4, 40] pF or when no entry exists.
  int capacity_for(double capacitance_pf) const;
  const std::map<double, int>& entries() const { return entries_; }

 private:
  std::map<double, int> entries_;
};

}  // namespace artemis::analog
