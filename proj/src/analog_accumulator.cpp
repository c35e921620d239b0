#include "artemis/analog_accumulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "artemis/error.hpp"

namespace artemis::analog {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform on [-2m, 2m] so that E|n| = m.
double noise_sample(std::uint64_t seed, std::uint64_t key, double mae) {
  const std::uint64_t bits = splitmix64(seed ^ splitmix64(key));
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * 2.0 * mae;
}

// round(num / den) for num >= 0, den > 0, half away from zero.
std::int64_t round_div(std::int64_t num, std::int64_t den) {
  return (2 * num + den) / (2 * den);
}

}  // namespace

void MomcapConfig::validate() const {
  if (capacity < 1) throw Error(ErrorCode::Config, "momcap.capacity must be >= 1");
  if (readout_levels < 2) throw Error(ErrorCode::Config, "momcap.readout_levels must be >= 2");
  if (!(noise_mae >= 0.0)) throw Error(ErrorCode::Config, "momcap.noise_mae must be >= 0");
  if (!(capacitance_pf > 0.0)) throw Error(ErrorCode::Config, "momcap.capacitance_pf must be > 0");
  if (!(charge_step_ns > 0.0)) throw Error(ErrorCode::Config, "momcap.charge_step_ns must be > 0");
}

MomcapState accumulate(MomcapState state, int popcount, const MomcapConfig& cfg) {
  if (popcount < 0 || popcount > 128) {
    throw Error(ErrorCode::Range, "popcount " + std::to_string(popcount) + " outside [0, 128]");
  }
  if (state.saturated || state.count >= cfg.capacity) {
    state.saturated = true;
    return state;
  }
  state.level += popcount;
  state.count += 1;
  return state;
}

Readout read_a_to_b(const MomcapState& state, const MomcapConfig& cfg, std::uint64_t noise_key) {
  const std::int64_t full = cfg.full_scale_level();
  const std::int64_t steps = cfg.readout_levels - 1;

  std::int64_t code = 0;
  if (cfg.noise_mae > 0.0) {
    const double noisy = static_cast<double>(state.level) +
                         noise_sample(cfg.seed, noise_key, cfg.noise_mae) * static_cast<double>(full);
    code = std::llround(std::max(0.0, noisy) * static_cast<double>(steps) / static_cast<double>(full));
  } else {
    code = round_div(std::int64_t{state.level} * steps, full);
  }
  code = std::clamp<std::int64_t>(code, 0, steps);

  Readout r;
  r.code = static_cast<int>(code);
  r.fraction = static_cast<double>(code) / static_cast<double>(steps);
  // One charge unit is one product bit, i.e. 1/128 of a unit product: the
  // same LSB as the partial-sum grid.
  r.value = Partial::from_raw(round_div(code * full, steps));
  return r;
}

CapacityTable::CapacityTable() { entries_[8.0] = 20; }

void CapacityTable::set(double capacitance_pf, int capacity) {
  if (capacity < 1) throw Error(ErrorCode::Config, "capacity table entry must be >= 1");
  entries_[capacitance_pf] = capacity;
}

int CapacityTable::capacity_for(double capacitance_pf) const {
  if (!(capacitance_pf >= 4.0 && capacitance_pf <= 40.0)) {
    throw Error(ErrorCode::Config, "capacitance " + std::to_string(capacitance_pf) +
                                       " pF outside the characterized 4-40 pF range");
  }
  auto it = entries_.find(capacitance_pf);
  if (it == entries_.end()) {
    throw Error(ErrorCode::Config, "no capacity entry for " + std::to_string(capacitance_pf) + " pF");
  }
  return it->second;
}

}  // namespace artemis::analog
