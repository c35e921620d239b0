#pragma once

// Run configuration, simulation, sweeps and functional verification.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "artemis/analog_accumulator.hpp"
#include "artemis/cost_model.hpp"
#include "artemis/dataflow_engine.hpp"
#include "artemis/hbm_topology.hpp"
#include "artemis/workload_models.hpp"

namespace artemis::sim {

struct RunConfig {
  workload::ModelConfig model;
  hbm::HbmConfig hbm;
  dataflow::ShardMode mode = dataflow::ShardMode::TokenBased;
  bool pipelined = true;
  analog::MomcapConfig momcap;
  analog::CapacityTable capacity_table;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  cost::LatencyParams latency;
  cost::EnergyParams energy;
  int tokens_per_bank_wave = 32;
  bool functional = false;  // also evaluate numerics (small models only)

  // Throws Error(Config) naming the offending field.
  void validate() const;
};

// Parses JSON text. Syntax errors throw Error(Parse) with line and column;
// unknown or ill-typed fields throw Error(Config) naming the field path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

RunConfig default_config(const std::string& model_name);

struct SimResult {
  cost::CostReport report;
  dataflow::EventTimeline timeline;
  cost::PowerCheck power;
};

SimResult simulate(const RunConfig& cfg);

std::string report_json(const RunConfig& cfg, const SimResult& r);
// Writes report.json and timeline.csv into cfg.output_dir.
void write_outputs(const RunConfig& cfg, const SimResult& r);

enum class SweepAxis { Dataflow, Stacks, SeqLen };

SweepAxis parse_axis(const std::string& name);

struct SweepRow {
  std::string point;
  double latency_ns = 0.0;
  double energy_pj = 0.0;
  double avg_power_w = 0.0;
  double gops_per_w = 0.0;
  double speedup = 1.0;
  double energy_ratio = 1.0;
};

// Dataflow axis: layer_NP, layer_PP, token_NP, token_PP with layer_NP as the
// baseline. Other axes use `values` with the first point as the baseline.
// Throws Error(Config) for an empty axis.
std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<int>& values, const RunConfig& base);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os);

struct VerifyRow {
  std::string component;
  double mae = 0.0;
  double max_error = 0.0;
  double calibration_bits = 0.0;  // NaN when not applicable
  std::uint64_t samples = 0;
  double reference_mae = 0.0;     // reference per-component MAE, 0 if none
};

struct VerifyReport {
  std::vector<VerifyRow> rows;
  bool multiplier_exact = false;
  bool readout_monotone = false;
  bool zero_head_exact = false;

  const VerifyRow& row(const std::string& component) const;
};

struct VerifyOptions {
  int softmax_vectors = 10000;
  int accumulator_sequences = 100000;
};

VerifyReport verify(const RunConfig& cfg, const VerifyOptions& opt = {});
void write_verify_csv(const VerifyReport& r, std::ostream& os);

}  // namespace artemis::sim
