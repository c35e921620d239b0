#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "artemis/error.hpp"
#include "artemis/sim.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace artemis;
using namespace artemis::sim;

namespace {

const char* kSmall = R"({
  "model": {"name": "tiny", "layers": 2, "seq_len": 16, "heads": 2, "d_model": 32, "d_ff": 64},
  "hbm": {"channels_per_stack": 2, "banks_per_channel": 2},
  "seed": 4
})";

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Contract;
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a bare model name takes every default") {
  const auto cfg = parse_config(R"({"model": "BERT-base"})");
  CHECK(cfg.model.d_model == 768);
  CHECK(cfg.hbm.total_banks() == 32);
  CHECK(cfg.hbm.subarrays_per_bank == 128);
  CHECK(cfg.hbm.tiles_per_subarray == 32);
  CHECK(cfg.mode == dataflow::ShardMode::TokenBased);
  CHECK(cfg.pipelined);
  CHECK(cfg.momcap.capacity == 20);
  CHECK(cfg.latency.t_mac_batch == 48.0);
  CHECK(cfg.energy.e_act == 909.0);
}

TEST_CASE("inline models and overrides") {
  const auto cfg = parse_config(kSmall);
  CHECK(cfg.model.name == "tiny");
  CHECK(cfg.model.heads == 2);
  CHECK(cfg.hbm.total_banks() == 4);
  CHECK(cfg.seed == 4);
  const auto based = parse_config(R"({"model": {"base": "OPT-350", "seq_len": 4096}})");
  CHECK(based.model.seq_len == 4096);
  CHECK(based.model.d_model == 768);
}

TEST_CASE("config errors") {
  CHECK(code_of(R"({"hbm": {}})") == ErrorCode::Config);
  CHECK(code_of(R"({"model": "nope"})") == ErrorCode::Config);
  CHECK(code_of(R"({"model": "BERT-base", "dataflow": "diagonal"})") == ErrorCode::Config);
  CHECK(code_of(R"({"model": {"layers": 1}})") == ErrorCode::Config);
  CHECK(code_of(R"({"model": "BERT-base", "hbm": {"stacks": 0}})") == ErrorCode::Config);
  const std::string unknown = "{\n  \"model\": \"BERT-base\",\n  \"colour\": 3\n}";
  CHECK(code_of(unknown) == ErrorCode::Config);
  const auto msg = message_of(unknown);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("colour") != std::string::npos);
}

TEST_CASE("syntax errors report line and column") {
  const std::string bad = "{\n  \"model\": \"BERT-base\",,\n}";
  CHECK(code_of(bad) == ErrorCode::Parse);
  CHECK(message_of(bad).find("line 2") != std::string::npos);
  CHECK(message_of(bad).find("column") != std::string::npos);
}

TEST_CASE("simulation report is complete and within budget") {
  const auto cfg = parse_config(kSmall);
  const auto r = simulate(cfg);
  CHECK(r.report.latency_ns > 0.0);
  CHECK(r.report.mac_count == workload::mac_count(cfg.model));
  CHECK(r.power.ok);
  const auto j = nlohmann::json::parse(report_json(cfg, r));
  for (const char* k : {"latency_ns", "total_energy_pj", "avg_power_w", "gops_per_w", "saturation_count"}) {
    CAPTURE(k);
    CHECK(j.contains(k));
  }
}

TEST_CASE("report and timeline are byte-identical across runs") {
  auto cfg = parse_config(kSmall);
  const auto dir = std::filesystem::temp_directory_path() / "artemis_sim_test";
  std::filesystem::remove_all(dir);
  cfg.output_dir = (dir / "a").string();
  write_outputs(cfg, simulate(cfg));
  cfg.output_dir = (dir / "b").string();
  write_outputs(cfg, simulate(cfg));
  for (const char* f : {"report.json", "timeline.csv"}) {
    const auto a = slurp(dir / "a" / f);
    CAPTURE(f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b" / f));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataflow sweep has four points against the layer baseline") {
  const auto cfg = parse_config(kSmall);
  const auto rows = sweep(SweepAxis::Dataflow, {}, cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].point == "layer_NP");
  CHECK(rows[0].speedup == 1.0);
  for (const auto& r : rows) CHECK(r.latency_ns > 0.0);
  std::ostringstream os;
  write_sweep_csv(rows, os);
  CHECK(os.str().rfind("point,latency_ns,energy_pj,avg_power_w,gops_per_w,speedup,energy_reduction\n", 0) == 0);
  CHECK_THROWS_AS(sweep(SweepAxis::Stacks, {}, cfg), Error);
  CHECK_THROWS_AS(parse_axis("colour"), Error);
}

TEST_CASE("verify rows") {
  auto cfg = default_config("BERT-base");
  VerifyOptions opt;
  opt.softmax_vectors = 200;
  opt.accumulator_sequences = 2000;
  const auto rep = verify(cfg, opt);
  CHECK(rep.multiplier_exact);
  CHECK(rep.readout_monotone);
  CHECK(rep.zero_head_exact);
  CHECK(rep.row("stochastic_mul").mae <= 0.039);
  CHECK(rep.row("toy_attention").max_error <= 0.05);
  CHECK(std::isnan(rep.row("softmax").calibration_bits));
  CHECK_THROWS_AS(rep.row("nope"), Error);
}
