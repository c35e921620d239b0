#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "artemis/error.hpp"
#include "artemis/sim.hpp"

namespace {

using artemis::Error;
using artemis::ErrorCode;
namespace sim = artemis::sim;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string pipeline;
  std::optional<int> stacks;
  std::string model;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "run configuration (JSON)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "seed for noise and operand generation");
  app->add_option("--mode", c.mode, "dataflow")->check(CLI::IsMember({"token", "layer"}));
  app->add_option("--pipeline", c.pipeline, "pipelining")->check(CLI::IsMember({"on", "off"}));
  app->add_option("--stacks", c.stacks, "HBM stacks");
  app->add_option("--model", c.model, "builtin model name");
}

sim::RunConfig resolve(const Common& c) {
  sim::RunConfig cfg;
  if (!c.config.empty()) {
    cfg = sim::load_config(c.config);
    if (!c.model.empty()) cfg.model = artemis::workload::builtin(c.model);
  } else if (!c.model.empty()) {
    cfg = sim::default_config(c.model);
  } else {
    throw Error(ErrorCode::Config, "model is required (--config or --model)");
  }
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.momcap.seed = *c.seed;
  }
  if (!c.mode.empty()) {
    cfg.mode = c.mode == "token" ? artemis::dataflow::ShardMode::TokenBased
                                 : artemis::dataflow::ShardMode::LayerBased;
  }
  if (!c.pipeline.empty()) cfg.pipelined = c.pipeline == "on";
  if (c.stacks) cfg.hbm.stacks = *c.stacks;
  cfg.validate();
  return cfg;
}

void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "'");
  std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + (dir / name).string() + "'");
  out << text;
}

int run_simulate(const Common& c) {
  const sim::RunConfig cfg = resolve(c);
  const auto r = sim::simulate(cfg);
  sim::write_outputs(cfg, r);
  std::printf("latency_ns=%.3f energy_pj=%.3f avg_power_w=%.3f gops_per_w=%.3f power_ok=%s\n",
              r.report.latency_ns, r.report.total_energy_pj, r.report.avg_power_w,
              r.report.gops_per_w, r.power.ok ? "true" : "false");
  return 0;
}

int run_sweep(const Common& c, const std::string& axis, const std::vector<int>& values) {
  const sim::RunConfig cfg = resolve(c);
  const auto rows = sim::sweep(sim::parse_axis(axis), values, cfg);
  std::ostringstream csv;
  sim::write_sweep_csv(rows, csv);
  write_text(cfg.output_dir, "sweep.csv", csv.str());
  std::fputs(csv.str().c_str(), stdout);
  return 0;
}

int run_verify(const Common& c) {
  Common v = c;
  if (v.config.empty() && v.model.empty()) v.model = "BERT-base";
  const sim::RunConfig cfg = resolve(v);
  const auto rep = sim::verify(cfg);
  std::ostringstream csv;
  sim::write_verify_csv(rep, csv);
  write_text(cfg.output_dir, "verify.csv", csv.str());
  std::fputs(csv.str().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARTEMIS functional and cost-model simulator"};
  app.require_subcommand(1);
  Common sim_opts, sweep_opts, verify_opts;
  auto* simulate = app.add_subcommand("simulate", "cost one configuration");
  add_common(simulate, sim_opts);
  auto* sweep = app.add_subcommand("sweep", "sensitivity sweep");
  add_common(sweep, sweep_opts);
  std::string axis = "dataflow";
  std::vector<int> values;
  sweep->add_option("--axis", axis, "dataflow | stacks | seq_len");
  sweep->add_option("--values", values, "axis values")->delimiter(',');
  auto* verify = app.add_subcommand("verify", "component error analysis");
  add_common(verify, verify_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error: USAGE: %s\n", msg.c_str());
    return 2;
  }
  try {
    if (*simulate) return run_simulate(sim_opts);
    if (*sweep) return run_sweep(sweep_opts, axis, values);
    if (*verify) return run_verify(verify_opts);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::fprintf(stderr, "error: %s: %s\n", std::string(artemis::error_code_name(e.code())).c_str(),
                 msg.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: INTERNAL: %s\n", e.what());
    return 1;
  }
  return 0;
}
