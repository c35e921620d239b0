#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "artemis/error.hpp"
#include "artemis/sim.hpp"
#include "json.hpp"

namespace artemis::sim {
namespace {

using nlohmann::json;

// 1-based line of the first occurrence of "key" in the text, 0 if absent.
int line_of(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) fail(field(k), "unknown field");
    }
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k);
  }

  const json& raw(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(field(k), "must be a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(field(k), "must be a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) fail(field(k), "must be a non-negative integer");
      out = v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(field(k), "must be an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max()) {
        fail(field(k), "is out of range");
      }
      out = static_cast<T>(x);
    } else {
      if (!v.is_number()) fail(field(k), "must be a number");
      out = v.get<T>();
    }
  }

  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw Error(ErrorCode::Config, field + " " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

workload::ModelConfig parse_model(const json& j) {
  if (j.is_string()) return workload::builtin(j.get<std::string>());
  Section s(j, "model");
  workload::ModelConfig m;
  std::string base;
  s.get("base", base);
  if (!base.empty()) {
    m = workload::builtin(base);
  } else {
    for (const char* k : {"layers", "seq_len", "heads", "d_model", "d_ff"}) {
      if (!s.has(k)) Section::fail(std::string("model.") + k, "is required for an inline model");
    }
    m.name = "custom";
  }
  s.get("name", m.name);
  std::int64_t params = m.params;
  s.get("params", params);
  m.params = params;
  s.get("layers", m.layers);
  s.get("seq_len", m.seq_len);
  s.get("heads", m.heads);
  s.get("d_model", m.d_model);
  s.get("d_ff", m.d_ff);
  std::string arch;
  s.get("architecture", arch);
  if (arch == "encoder_only") {
    m.architecture = workload::Architecture::EncoderOnly;
  } else if (arch == "encoder_decoder") {
    m.architecture = workload::Architecture::EncoderDecoder;
  } else if (!arch.empty()) {
    Section::fail("model.architecture", "must be encoder_only or encoder_decoder");
  }
  std::string act;
  s.get("activation", act);
  if (act == "relu") {
    m.activation = nsc::ActivationKind::Relu;
  } else if (act == "gelu") {
    m.activation = nsc::ActivationKind::Gelu;
  } else if (!act.empty()) {
    Section::fail("model.activation", "must be relu or gelu");
  }
  return m;
}

void parse_hbm(const json& j, hbm::HbmConfig& h) {
  Section s(j, "hbm");
  s.get("stacks", h.stacks);
  s.get("channels_per_stack", h.channels_per_stack);
  s.get("banks_per_channel", h.banks_per_channel);
  s.get("subarrays_per_bank", h.subarrays_per_bank);
  s.get("tiles_per_subarray", h.tiles_per_subarray);
  s.get("rows_per_tile", h.rows_per_tile);
  s.get("bits_per_row", h.bits_per_row);
  s.get("interbank_link_bits", h.interbank_link_bits);
}

void parse_momcap(const json& j, RunConfig& cfg) {
  Section s(j, "momcap");
  auto& m = cfg.momcap;
  if (s.has("capacity_table")) {
    const json& t = s.raw("capacity_table");
    if (!t.is_array()) Section::fail("momcap.capacity_table", "must be an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      Section e(t[i], "momcap.capacity_table[" + std::to_string(i) + "]");
      double pf = 0.0;
      int cap = 0;
      if (!e.has("capacitance_pf") || !e.has("capacity")) {
        Section::fail("momcap.capacity_table", "entries need capacitance_pf and capacity");
      }
      e.get("capacitance_pf", pf);
      e.get("capacity", cap);
      cfg.capacity_table.set(pf, cap);
    }
  }
  const bool explicit_capacity = s.has("capacity");
  s.get("capacitance_pf", m.capacitance_pf);
  s.get("capacity", m.capacity);
  if (!explicit_capacity) m.capacity = cfg.capacity_table.capacity_for(m.capacitance_pf);
  s.get("readout_levels", m.readout_levels);
  s.get("noise_mae", m.noise_mae);
  s.get("charge_step_ns", m.charge_step_ns);
}

void parse_latency(const json& j, cost::LatencyParams& p) {
  Section s(j, "latency");
  s.get("t_moc", p.t_moc);
  s.get("t_mac_batch", p.t_mac_batch);
  s.get("t_mul", p.t_mul);
  s.get("t_s2b", p.t_s2b);
  s.get("t_s2b_circuit", p.t_s2b_circuit);
  s.get("t_comparator", p.t_comparator);
  s.get("t_adder", p.t_adder);
  s.get("t_lut", p.t_lut);
  s.get("t_b_to_tcu", p.t_b_to_tcu);
  s.get("t_latch", p.t_latch);
  s.get("t_charge", p.t_charge);
  s.get("link_cycle", p.link_cycle);
}

void parse_energy(const json& j, cost::EnergyParams& p) {
  Section s(j, "energy");
  s.get("e_act", p.e_act);
  s.get("e_pre_gsa", p.e_pre_gsa);
  s.get("e_post_gsa", p.e_post_gsa);
  s.get("e_io", p.e_io);
  s.get("p_s2b", p.p_s2b);
  s.get("p_comparator", p.p_comparator);
  s.get("p_adder", p.p_adder);
  s.get("p_lut", p.p_lut);
  s.get("p_b_to_tcu", p.p_b_to_tcu);
  s.get("p_latch", p.p_latch);
  s.get("activations_per_mac_step", p.activations_per_mac_step);
  s.get("include_standby", p.include_standby);
  s.get("power_budget_w_per_stack", p.power_budget_w_per_stack);
}

RunConfig parse_root(const json& j) {
  RunConfig cfg;
  Section s(j, "");
  if (!s.has("model")) Section::fail("model", "is required");
  cfg.model = parse_model(s.raw("model"));
  if (s.has("hbm")) parse_hbm(s.raw("hbm"), cfg.hbm);
  std::string mode = "token";
  s.get("dataflow", mode);
  if (mode == "token") {
    cfg.mode = dataflow::ShardMode::TokenBased;
  } else if (mode == "layer") {
    cfg.mode = dataflow::ShardMode::LayerBased;
  } else {
    Section::fail("dataflow", "must be token or layer");
  }
  s.get("pipelined", cfg.pipelined);
  if (s.has("momcap")) parse_momcap(s.raw("momcap"), cfg);
  s.get("seed", cfg.seed);
  s.get("output_dir", cfg.output_dir);
  if (s.has("latency")) parse_latency(s.raw("latency"), cfg.latency);
  if (s.has("energy")) parse_energy(s.raw("energy"), cfg.energy);
  s.get("tokens_per_bank_wave", cfg.tokens_per_bank_wave);
  s.get("functional", cfg.functional);
  return cfg;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  hbm.validate();
  momcap.validate();
  latency.validate();
  energy.validate();
  if (tokens_per_bank_wave < 1) {
    throw Error(ErrorCode::Config, "tokens_per_bank_wave must be >= 1");
  }
  if (output_dir.empty()) throw Error(ErrorCode::Config, "output_dir must not be empty");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n');
    const auto nl = text.rfind('\n', byte == 0 ? 0 : byte - 1);
    const auto col = nl == std::string::npos ? byte : byte - nl - 1;
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ", column " +
                                      std::to_string(col) + ": malformed JSON");
  }
  try {
    RunConfig cfg = parse_root(j);
    cfg.momcap.seed = cfg.seed;
    cfg.validate();
    return cfg;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Config) throw;
    // Messages start with the dotted field path; point at its key.
    std::string msg = e.what();
    std::string path = msg.substr(0, msg.find(' '));
    const auto bracket = path.find('[');
    if (bracket != std::string::npos) path = path.substr(0, bracket);
    const std::string key = path.substr(path.rfind('.') == std::string::npos ? 0 : path.rfind('.') + 1);
    const int line = line_of(text, key);
    if (line > 0) msg = "line " + std::to_string(line) + ": " + msg;
    throw Error(ErrorCode::Config, msg);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunConfig default_config(const std::string& model_name) {
  RunConfig cfg;
  cfg.model = workload::builtin(model_name);
  return cfg;
}

}  // namespace artemis::sim
