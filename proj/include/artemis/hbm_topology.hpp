#pragma once

// Stack -> channel -> bank -> subarray -> tile -> row hierarchy, the
// open-bitline subarray pairing, and the in-DRAM primitives the cost model
// charges for.

#include <cstdint>
#include <span>
#include <vector>

#include "artemis/sc_core.hpp"

namespace artemis::hbm {

inline constexpr int kComputationalRows = 2;

struct HbmConfig {
  int stacks = 1;
  int channels_per_stack = 8;
  int banks_per_channel = 4;
  int subarrays_per_bank = 128;
  int tiles_per_subarray = 32;
  int rows_per_tile = 256;
  int bits_per_row = 256;
  int interbank_link_bits = 256;

  // Throws Error(Config) naming the offending field.
  void validate() const;
  int total_banks() const { return stacks * channels_per_stack * banks_per_channel; }
  // Open bitline: paired subarrays share sense amplifiers, so half run at once.
  int active_subarrays_per_bank() const { return subarrays_per_bank / 2; }
  // Two multiplications per operational tile per batch step.
  int macs_per_subarray_step() const { return 2 * tiles_per_subarray; }
  int macs_per_bank_step() const { return active_subarrays_per_bank() * macs_per_subarray_step(); }

  friend bool operator==(const HbmConfig&, const HbmConfig&) = default;
};

struct Placement {
  int bank = 0;
  int subarray = 0;
  int tile = 0;
  int row = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

// The operational tile and the same-index tile of its paired (inactive)
// subarray whose MOMCAP it borrows.
struct TilePairing {
  Placement operational;
  Placement partner;
};

struct PrimitiveEvent {
  int mocs = 0;
  int row_activations = 0;
  int sense_operations = 0;
  int multiply_slots = 0;
  int charge_steps = 0;
};

class Topology {
 public:
  explicit Topology(const HbmConfig& cfg);

  const HbmConfig& config() const { return cfg_; }
  int total_banks() const { return cfg_.total_banks(); }
  int stack_of(int bank) const;

  int paired_subarray(int subarray) const { return subarray ^ 1; }
  // Subarrays allowed to compute in the given open-bitline phase (0 or 1).
  std::vector<int> active_subarrays(int phase) const;
  TilePairing pairing(int bank, int subarray, int tile) const;

  // Throws Error(Contract) when any index is out of bounds.
  void validate(const Placement& p) const;
  // Additionally rejects the reserved computational rows.
  void validate_operand_placement(const Placement& p) const;

 private:
  HbmConfig cfg_;
};

Topology build(const HbmConfig& cfg);

// One operational-tile step: two row copies into the computational rows,
// one sense of the AND row and one MOMCAP charge step; two products.
PrimitiveEvent tile_multiply_event(const TilePairing& pair);

// Two MOMCAPs per operational tile.
int mac_capacity(const TilePairing& pair, int momcap_capacity);

// Intra-bank AAP row copy. Throws Error(Contract) for a cross-bank copy.
PrimitiveEvent row_copy_event(const Placement& src, const Placement& dst);

// Every stored operand row carries one sign column. Throws Error(Contract)
// for a row mixing signs.
void validate_operand_row(std::span<const sc::Fixed8> row);

}  // namespace artemis::hbm
