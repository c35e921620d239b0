#pragma once

// Latency assignment by list scheduling, per-class energy accounting, power
// budget check and efficiency metrics.

#include <cstdint>
#include <map>
#include <string>

#include "artemis/dataflow_engine.hpp"
#include "artemis/hbm_topology.hpp"

namespace artemis::cost {

// All latencies in ns.
struct LatencyParams {
  double t_moc = 17.0;
  double t_mac_batch = 48.0;
  double t_mul = 34.0;
  double t_s2b = 31.0;           // end-to-end analog -> binary conversion
  double t_s2b_circuit = 20.0;   // per-tile circuit alone
  double t_comparator = 0.6237;
  double t_adder = 0.71995;
  double t_lut = 0.2225;
  double t_b_to_tcu = 0.5302;
  double t_latch = 0.0777;
  double t_charge = 1.0;
  double link_cycle = 17.0;      // per beat on a ring link or the shared bus
  int link_beat_bits = 256;

  // Throws Error(Config) for a non-positive entry.
  void validate() const;
};

// Energies in pJ, powers in mW, budget in W.
struct EnergyParams {
  double e_act = 909.0;
  double e_pre_gsa = 1.51;
  double e_post_gsa = 1.17;
  double e_io = 0.80;
  double p_s2b = 0.053;
  double p_comparator = 0.055;
  double p_adder = 0.0028;
  double p_lut = 4.21;
  double p_b_to_tcu = 0.021;
  double p_latch = 0.028;
  // Row activations charged per MacBatch step of a bank: two operand row
  // copies and the sense of the AND result.
  int activations_per_mac_step = 3;
  bool include_standby = true;
  double power_budget_w_per_stack = 60.0;

  // Per-subarray standby power of the NSC and conversion circuits (mW).
  double standby_mw_per_subarray() const {
    return p_s2b + p_comparator + p_adder + p_lut + p_b_to_tcu + p_latch;
  }
  void validate() const;
};

// Duration of one invocation of the event's primitive.
double unit_latency(const dataflow::Event& e, const LatencyParams& p);

// List scheduling in event order. Every dependency must point to an earlier
// event; anything else is a cycle and throws Error(Schedule). Pipelined
// timelines take bypassable writes at zero duration.
void assign_latencies(dataflow::EventTimeline& tl, const LatencyParams& p);

double makespan(const dataflow::EventTimeline& tl);

struct CostReport {
  double latency_ns = 0.0;
  std::map<std::string, double> energy_pj_by_class;
  double total_energy_pj = 0.0;
  double avg_power_w = 0.0;
  double gops = 0.0;
  double gops_per_w = 0.0;
  double eliminated_write_pj = 0.0;
  std::uint64_t saturation_count = 0;
  std::int64_t mac_count = 0;
  std::uint64_t event_count = 0;
  std::uint64_t row_activations = 0;
};

// Energy of one event at full (non-eliminated) cost, and its class name.
double event_energy_pj(const dataflow::Event& e, const EnergyParams& p,
                       const LatencyParams& lat, const hbm::HbmConfig& hbm);
std::string_view energy_class(const dataflow::Event& e);

CostReport assign_energies(const dataflow::EventTimeline& tl, const EnergyParams& p,
                           const LatencyParams& lat, const hbm::HbmConfig& hbm);

struct PowerCheck {
  bool ok = true;
  double budget_w = 0.0;
  double margin_w = 0.0;  // budget - average power; negative on violation
};

PowerCheck power_check(const CostReport& r, double budget_w);
PowerCheck power_check(const CostReport& r, const EnergyParams& p, const hbm::HbmConfig& hbm);

struct Efficiency {
  double gops = 0.0;
  double gops_per_w = 0.0;
};

// Throws Error(Domain) for zero latency.
Efficiency efficiency(const CostReport& r, std::int64_t macs);

// Fills gops/gops_per_w/mac_count in place.
void apply_efficiency(CostReport& r, std::int64_t macs);

}  // namespace artemis::cost
