#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "artemis/error.hpp"
#include "artemis/functional.hpp"
#include "artemis/sim.hpp"
#include "json.hpp"

namespace artemis::sim {

SimResult simulate(const RunConfig& cfg) {
  cfg.validate();
  const workload::OpGraph g = workload::decompose(cfg.model);
  g.validate_shapes();
  dataflow::PlanOptions opt;
  opt.mode = cfg.mode;
  opt.pipelined = cfg.pipelined;
  opt.momcap_capacity = cfg.momcap.capacity;
  opt.tokens_per_bank_wave = cfg.tokens_per_bank_wave;
  SimResult r;
  r.timeline = dataflow::plan_model(g, cfg.hbm, opt);
  cost::LatencyParams lat = cfg.latency;
  lat.link_beat_bits = cfg.hbm.interbank_link_bits;
  cost::assign_latencies(r.timeline, lat);
  r.report = cost::assign_energies(r.timeline, cfg.energy, lat, cfg.hbm);
  cost::apply_efficiency(r.report, g.total_macs());
  if (cfg.functional) {
    functional::FunctionalOptions fo;
    fo.momcap = cfg.momcap;
    fo.momcap.seed = cfg.seed;
    const auto store = functional::make_operands(g, cfg.seed);
    const auto fr = functional::functional_execute(r.timeline, g, store, fo);
    r.report.saturation_count = fr.saturation_count();
  }
  r.power = cost::power_check(r.report, cfg.energy, cfg.hbm);
  return r;
}

std::string report_json(const RunConfig& cfg, const SimResult& r) {
  nlohmann::ordered_json j;
  const auto& rep = r.report;
  j["model"] = cfg.model.name;
  j["dataflow"] = std::string(dataflow::shard_mode_name(cfg.mode));
  j["pipelined"] = cfg.pipelined;
  j["stacks"] = cfg.hbm.stacks;
  j["seed"] = cfg.seed;
  j["latency_ns"] = rep.latency_ns;
  nlohmann::ordered_json by_class = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rep.energy_pj_by_class) by_class[k] = v;
  j["energy_pj_by_class"] = by_class;
  j["total_energy_pj"] = rep.total_energy_pj;
  j["avg_power_w"] = rep.avg_power_w;
  j["power_budget_w"] = r.power.budget_w;
  j["power_ok"] = r.power.ok;
  j["gops"] = rep.gops;
  j["gops_per_w"] = rep.gops_per_w;
  j["eliminated_write_pj"] = rep.eliminated_write_pj;
  j["saturation_count"] = rep.saturation_count;
  j["mac_count"] = rep.mac_count;
  j["event_count"] = rep.event_count;
  j["row_activations"] = rep.row_activations;
  return j.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  // Write to a sibling temp file, then rename, so readers never see a partial file.
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename '" + tmp + "': " + ec.message());
}

}  // namespace

void write_outputs(const RunConfig& cfg, const SimResult& r) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "report.json", report_json(cfg, r));
  std::ostringstream csv;
  dataflow::write_timeline_csv(r.timeline, csv);
  write_file(dir / "timeline.csv", csv.str());
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "dataflow") return SweepAxis::Dataflow;
  if (name == "stacks") return SweepAxis::Stacks;
  if (name == "seq_len" || name == "sequence_length") return SweepAxis::SeqLen;
  throw Error(ErrorCode::Config, "sweep axis must be dataflow, stacks or seq_len");
}

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<int>& values, const RunConfig& base) {
  std::vector<std::pair<std::string, RunConfig>> points;
  if (axis == SweepAxis::Dataflow) {
    for (auto mode : {dataflow::ShardMode::LayerBased, dataflow::ShardMode::TokenBased}) {
      for (bool pp : {false, true}) {
        RunConfig c = base;
        c.mode = mode;
        c.pipelined = pp;
        points.emplace_back(std::string(dataflow::shard_mode_name(mode)) + (pp ? "_PP" : "_NP"), c);
      }
    }
  } else {
    if (values.empty()) throw Error(ErrorCode::Config, "sweep axis has no values");
    for (int v : values) {
      RunConfig c = base;
      if (axis == SweepAxis::Stacks) {
        c.hbm.stacks = v;
        points.emplace_back("stacks=" + std::to_string(v), c);
      } else {
        c.model.seq_len = v;
        points.emplace_back("seq_len=" + std::to_string(v), c);
      }
    }
  }
  std::vector<std::future<cost::CostReport>> futures;
  futures.reserve(points.size());
  for (const auto& [label, c] : points) {
    futures.push_back(std::async(std::launch::async, [&c] { return simulate(c).report; }));
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const cost::CostReport rep = futures[i].get();
    SweepRow row;
    row.point = points[i].first;
    row.latency_ns = rep.latency_ns;
    row.energy_pj = rep.total_energy_pj;
    row.avg_power_w = rep.avg_power_w;
    row.gops_per_w = rep.gops_per_w;
    rows.push_back(row);
  }
  for (auto& row : rows) {
    row.speedup = row.latency_ns > 0.0 ? rows.front().latency_ns / row.latency_ns : 0.0;
    row.energy_ratio = row.energy_pj > 0.0 ? rows.front().energy_pj / row.energy_pj : 0.0;
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
  os << "point,latency_ns,energy_pj,avg_power_w,gops_per_w,speedup,energy_reduction\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.9f,%.9f,%.9f,%.9f\n", r.point.c_str(),
                  r.latency_ns, r.energy_pj, r.avg_power_w, r.gops_per_w, r.speedup,
                  r.energy_ratio);
    os << buf;
  }
}

}  // namespace artemis::sim
