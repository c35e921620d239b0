#include "artemis/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "artemis/error.hpp"

namespace artemis::cost {

using dataflow::Event;
using dataflow::EventKind;
using dataflow::EventTimeline;

void LatencyParams::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"t_moc", t_moc},         {"t_mac_batch", t_mac_batch},
      {"t_mul", t_mul},         {"t_s2b", t_s2b},
      {"t_s2b_circuit", t_s2b_circuit}, {"t_comparator", t_comparator},
      {"t_adder", t_adder},     {"t_lut", t_lut},
      {"t_b_to_tcu", t_b_to_tcu}, {"t_latch", t_latch},
      {"t_charge", t_charge},   {"link_cycle", link_cycle}};
  for (const auto& [name, v] : fields) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::Config, std::string("latency.") + name + " must be positive");
    }
  }
  if (link_beat_bits < 1) throw Error(ErrorCode::Config, "latency.link_beat_bits must be >= 1");
}

void EnergyParams::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"e_act", e_act},       {"e_pre_gsa", e_pre_gsa},   {"e_post_gsa", e_post_gsa},
      {"e_io", e_io},         {"p_s2b", p_s2b},           {"p_comparator", p_comparator},
      {"p_adder", p_adder},   {"p_lut", p_lut},           {"p_b_to_tcu", p_b_to_tcu},
      {"p_latch", p_latch},   {"power_budget_w_per_stack", power_budget_w_per_stack}};
  for (const auto& [name, v] : fields) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::Config, std::string("energy.") + name + " must be non-negative");
    }
  }
  if (activations_per_mac_step < 0) {
    throw Error(ErrorCode::Config, "energy.activations_per_mac_step must be non-negative");
  }
}

namespace {

double beats(std::uint64_t bits, int beat_bits) {
  return static_cast<double>((bits + beat_bits - 1) / beat_bits);
}

}  // namespace

double unit_latency(const Event& e, const LatencyParams& p) {
  switch (e.kind) {
    case EventKind::MacBatch: return p.t_mac_batch;
    case EventKind::AtoB: return p.t_s2b;
    case EventKind::NscReduce: return p.t_adder;
    case EventKind::Softmax:
      switch (static_cast<dataflow::SoftmaxPhase>(e.detail)) {
        case dataflow::SoftmaxPhase::Max: return p.t_comparator;
        case dataflow::SoftmaxPhase::Lse: return p.t_lut + p.t_adder;
        case dataflow::SoftmaxPhase::Ln: return p.t_lut;
        case dataflow::SoftmaxPhase::Finalize: return p.t_adder + p.t_lut;
      }
      return 0.0;
    case EventKind::BtoTcu: return p.t_b_to_tcu;
    case EventKind::IntraBankLatchMove: return p.t_latch;
    case EventKind::InterBankTransfer:
    case EventKind::RingBroadcastStep:
      return beats(e.bits, p.link_beat_bits) * p.link_cycle / static_cast<double>(e.count);
    case EventKind::RowWrite: return p.t_moc;
    case EventKind::Activation: return p.t_lut;
    case EventKind::Norm: return p.t_adder + p.t_lut;
  }
  return 0.0;
}

void assign_latencies(EventTimeline& tl, const LatencyParams& p) {
  p.validate();
  std::vector<double> free_at(static_cast<std::size_t>(tl.resource_count()), 0.0);
  auto& ev = tl.events;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    Event& e = ev[i];
    const double count = static_cast<double>(e.count);
    double dur = (tl.pipelined && e.bypassable) ? 0.0 : count * unit_latency(e, p);
    const double unit = e.count > 0 ? dur / count : 0.0;
    double start = 0.0;
    double min_finish = 0.0;
    for (int d = 0; d < e.dep_count; ++d) {
      const auto& dep = e.deps[d];
      if (dep.index < 0 || static_cast<std::size_t>(dep.index) >= i) {
        throw Error(ErrorCode::Schedule, "event " + std::to_string(i) +
                                             " depends on a later or itself (cycle)");
      }
      const Event& pred = ev[static_cast<std::size_t>(dep.index)];
      if (dep.kind == dataflow::DepKind::Full) {
        start = std::max(start, pred.finish_ns());
      } else {
        const double pred_unit =
            pred.count > 0 ? pred.duration_ns / static_cast<double>(pred.count) : 0.0;
        start = std::max(start, pred.start_ns + pred_unit);
        min_finish = std::max(min_finish, pred.finish_ns() + unit);
      }
    }
    const int slot = dataflow::resource_slot(dataflow::resource_of(e), tl.banks);
    if (slot < 0 || slot >= static_cast<int>(free_at.size())) {
      throw Error(ErrorCode::Schedule, "event " + std::to_string(i) + " names an unknown resource");
    }
    start = std::max(start, free_at[static_cast<std::size_t>(slot)]);
    dur = std::max(dur, min_finish - start);
    e.start_ns = start;
    e.duration_ns = dur;
    free_at[static_cast<std::size_t>(slot)] = start + dur;
  }
}

double makespan(const EventTimeline& tl) {
  double end = 0.0;
  for (const auto& e : tl.events) end = std::max(end, e.finish_ns());
  return end;
}

std::string_view energy_class(const Event& e) {
  switch (e.kind) {
    case EventKind::MacBatch: return "mac_batch";
    case EventKind::AtoB: return "a_to_b";
    case EventKind::NscReduce: return "nsc_reduce";
    case EventKind::Softmax: return "softmax";
    case EventKind::BtoTcu: return "b_to_tcu";
    case EventKind::IntraBankLatchMove: return "latch_move";
    case EventKind::InterBankTransfer:
      return static_cast<dataflow::TransferKind>(e.detail) == dataflow::TransferKind::HostIo
                 ? "host_io"
                 : "interbank_transfer";
    case EventKind::RingBroadcastStep: return "ring_transfer";
    case EventKind::RowWrite: return "row_write";
    case EventKind::Activation: return "activation";
    case EventKind::Norm: return "norm";
  }
  return "?";
}

double event_energy_pj(const Event& e, const EnergyParams& p, const LatencyParams& lat,
                       const hbm::HbmConfig&) {
  const double n = static_cast<double>(e.count) * static_cast<double>(e.lanes);
  // mW * ns = pJ
  switch (e.kind) {
    case EventKind::MacBatch:
      return static_cast<double>(e.count) * p.activations_per_mac_step * p.e_act;
    case EventKind::AtoB: return n * p.p_s2b * lat.t_s2b_circuit;
    case EventKind::NscReduce: return n * p.p_adder * lat.t_adder;
    case EventKind::Softmax:
      switch (static_cast<dataflow::SoftmaxPhase>(e.detail)) {
        case dataflow::SoftmaxPhase::Max: return n * p.p_comparator * lat.t_comparator;
        case dataflow::SoftmaxPhase::Ln: return n * p.p_lut * lat.t_lut;
        case dataflow::SoftmaxPhase::Lse:
        case dataflow::SoftmaxPhase::Finalize:
          return n * (p.p_lut * lat.t_lut + p.p_adder * lat.t_adder);
      }
      return 0.0;
    case EventKind::BtoTcu: return n * p.p_b_to_tcu * lat.t_b_to_tcu;
    case EventKind::IntraBankLatchMove: return n * p.p_latch * lat.t_latch;
    case EventKind::InterBankTransfer: {
      double per_bit = p.e_pre_gsa + p.e_post_gsa;
      if (static_cast<dataflow::TransferKind>(e.detail) == dataflow::TransferKind::HostIo) {
        per_bit += p.e_io;
      }
      return static_cast<double>(e.bits) * per_bit;
    }
    case EventKind::RingBroadcastStep:
      return static_cast<double>(e.bits) * (p.e_pre_gsa + p.e_post_gsa);
    case EventKind::RowWrite:
      return static_cast<double>(e.count) * p.e_act + static_cast<double>(e.bits) * p.e_pre_gsa;
    case EventKind::Activation: return n * p.p_lut * lat.t_lut;
    case EventKind::Norm: return n * (p.p_lut * lat.t_lut + p.p_adder * lat.t_adder);
  }
  return 0.0;
}

CostReport assign_energies(const EventTimeline& tl, const EnergyParams& p,
                           const LatencyParams& lat, const hbm::HbmConfig& hbm) {
  p.validate();
  CostReport r;
  r.latency_ns = makespan(tl);
  r.event_count = tl.events.size();
  for (const auto& e : tl.events) {
    const double pj = event_energy_pj(e, p, lat, hbm);
    if (tl.pipelined && e.bypassable) {
      r.eliminated_write_pj += pj;
      continue;
    }
    r.energy_pj_by_class[std::string(energy_class(e))] += pj;
    if (e.kind == EventKind::MacBatch) {
      r.row_activations += e.count * static_cast<std::uint64_t>(p.activations_per_mac_step);
    } else if (e.kind == EventKind::RowWrite) {
      r.row_activations += e.count;
    }
  }
  if (p.include_standby && r.latency_ns > 0.0) {
    const double subarrays =
        static_cast<double>(hbm.total_banks()) * static_cast<double>(hbm.subarrays_per_bank);
    r.energy_pj_by_class["standby"] = p.standby_mw_per_subarray() * subarrays * r.latency_ns;
  }
  for (const auto& [k, v] : r.energy_pj_by_class) r.total_energy_pj += v;
  // pJ / ns = mW
  r.avg_power_w = r.latency_ns > 0.0 ? r.total_energy_pj / r.latency_ns * 1e-3 : 0.0;
  return r;
}

PowerCheck power_check(const CostReport& r, double budget_w) {
  PowerCheck c;
  c.budget_w = budget_w;
  if (r.latency_ns <= 0.0) {
    c.margin_w = budget_w;
    return c;
  }
  c.margin_w = budget_w - r.avg_power_w;
  c.ok = r.avg_power_w <= budget_w;
  return c;
}

PowerCheck power_check(const CostReport& r, const EnergyParams& p, const hbm::HbmConfig& hbm) {
  return power_check(r, p.power_budget_w_per_stack * hbm.stacks);
}

Efficiency efficiency(const CostReport& r, std::int64_t macs) {
  if (!(r.latency_ns > 0.0)) throw Error(ErrorCode::Domain, "efficiency needs latency > 0");
  Efficiency e;
  e.gops = 2.0 * static_cast<double>(macs) / r.latency_ns;
  e.gops_per_w = r.avg_power_w > 0.0 ? e.gops / r.avg_power_w : 0.0;
  return e;
}

void apply_efficiency(CostReport& r, std::int64_t macs) {
  r.mac_count = macs;
  if (r.latency_ns <= 0.0) return;
  const Efficiency e = efficiency(r, macs);
  r.gops = e.gops;
  r.gops_per_w = e.gops_per_w;
}

}  // namespace artemis::cost
