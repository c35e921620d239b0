#include "artemis/hbm_topology.hpp"

#include <string>

#include "artemis/error.hpp"

namespace artemis::hbm {
namespace {

void require_positive(int v, const char* field) {
  if (v < 1) throw Error(ErrorCode::Config, std::string("hbm.") + field + " must be >= 1");
}

}  // namespace

void HbmConfig::validate() const {
  require_positive(stacks, "stacks");
  require_positive(channels_per_stack, "channels_per_stack");
  require_positive(banks_per_channel, "banks_per_channel");
  require_positive(subarrays_per_bank, "subarrays_per_bank");
  require_positive(tiles_per_subarray, "tiles_per_subarray");
  require_positive(rows_per_tile, "rows_per_tile");
  require_positive(bits_per_row, "bits_per_row");
  require_positive(interbank_link_bits, "interbank_link_bits");
  if (subarrays_per_bank % 2 != 0) {
    throw Error(ErrorCode::Config, "hbm.subarrays_per_bank must be even (open-bitline pairs)");
  }
  if (rows_per_tile <= kComputationalRows) {
    throw Error(ErrorCode::Config, "hbm.rows_per_tile must exceed the two computational rows");
  }
}

Topology::Topology(const HbmConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

Topology build(const HbmConfig& cfg) { return Topology(cfg); }

int Topology::stack_of(int bank) const {
  return bank / (cfg_.channels_per_stack * cfg_.banks_per_channel);
}

std::vector<int> Topology::active_subarrays(int phase) const {
  std::vector<int> out;
  for (int s = phase & 1; s < cfg_.subarrays_per_bank; s += 2) out.push_back(s);
  return out;
}

TilePairing Topology::pairing(int bank, int subarray, int tile) const {
  TilePairing p{{bank, subarray, tile, 0}, {bank, paired_subarray(subarray), tile, 0}};
  validate(p.operational);
  validate(p.partner);
  return p;
}

void Topology::validate(const Placement& p) const {
  if (p.bank < 0 || p.bank >= total_banks() || p.subarray < 0 ||
      p.subarray >= cfg_.subarrays_per_bank || p.tile < 0 || p.tile >= cfg_.tiles_per_subarray ||
      p.row < 0 || p.row >= cfg_.rows_per_tile) {
    throw Error(ErrorCode::Contract, "placement out of bounds: bank " + std::to_string(p.bank) +
                                         " subarray " + std::to_string(p.subarray) + " tile " +
                                         std::to_string(p.tile) + " row " + std::to_string(p.row));
  }
}

void Topology::validate_operand_placement(const Placement& p) const {
  validate(p);
  if (p.row < kComputationalRows) {
    throw Error(ErrorCode::Contract, "rows 0-1 are reserved computational rows");
  }
}

PrimitiveEvent tile_multiply_event(const TilePairing&) {
  PrimitiveEvent e;
  e.mocs = 2;
  e.row_activations = 3;  // two copies plus the sense of computational row 1
  e.sense_operations = 1;
  e.multiply_slots = 2;
  e.charge_steps = 1;
  return e;
}

int mac_capacity(const TilePairing&, int momcap_capacity) { return 2 * momcap_capacity; }

PrimitiveEvent row_copy_event(const Placement& src, const Placement& dst) {
  if (src.bank != dst.bank) {
    throw Error(ErrorCode::Contract, "row copy across banks must use the inter-bank path");
  }
  PrimitiveEvent e;
  e.mocs = 1;
  e.row_activations = 1;
  return e;
}

void validate_operand_row(std::span<const sc::Fixed8> row) {
  if (row.empty()) return;
  const sc::Sign s = row.front().sign();
  for (const auto& v : row) {
    if (v.sign() != s) throw Error(ErrorCode::Contract, "operand row mixes signs");
  }
}

}  // namespace artemis::hbm
