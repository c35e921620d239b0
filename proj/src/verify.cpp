#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "artemis/error.hpp"
#include "artemis/functional.hpp"
#include "artemis/sc_core.hpp"
#include "artemis/sim.hpp"

namespace artemis::sim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int popcount_product(int a, int b) {
  const auto x = sc::encode_spread(sc::Fixed8(sc::Sign::Positive, a));
  const auto y = sc::encode_tcu(sc::Fixed8(sc::Sign::Positive, b));
  return sc::stoch_mul(x, y).popcount();
}

VerifyRow multiplier(bool& exact) {
  VerifyRow row{"stochastic_mul", 0, 0, kNaN, 0, 0.039};
  exact = true;
  int table[128][128];
  for (int a = 0; a < 128; ++a) {
    for (int b = 0; b < 128; ++b) {
      const int p = popcount_product(a, b);
      table[a][b] = p;
      if (p != a * b / 128) exact = false;
      const double err = std::abs(p / 128.0 - (a / 128.0) * (b / 128.0));
      row.mae += err;
      row.max_error = std::max(row.max_error, err);
      ++row.samples;
    }
  }
  row.mae /= static_cast<double>(row.samples);
  // Widest operand grid (2^w evenly spaced magnitudes) on which every
  // product is exact.
  for (int w = 7; w >= 0; --w) {
    const int step = 128 >> w;
    bool ok = true;
    for (int a = 0; a < 128 && ok; a += step) {
      for (int b = 0; b < 128 && ok; b += step) {
        ok = table[a][b] * 128 == a * b;
      }
    }
    if (ok) {
      row.calibration_bits = w;
      break;
    }
  }
  return row;
}

VerifyRow accumulator(const analog::MomcapConfig& cfg, int sequences, std::uint64_t seed) {
  VerifyRow row{"analog_acc", 0, 0, kNaN, 0, 0.0085};
  std::mt19937_64 rng(seed);
  const double full = cfg.full_scale_level();
  for (int s = 0; s < sequences; ++s) {
    const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.capacity));
    analog::MomcapState st;
    int level = 0;
    for (int i = 0; i < len; ++i) {
      const int p = static_cast<int>(rng() % 129);
      st = analog::accumulate(st, p, cfg);
      level += p;
    }
    if (st.level != level || st.saturated) {
      throw Error(ErrorCode::Contract, "accumulator additivity violated");
    }
    const auto r = analog::read_a_to_b(st, cfg);
    const double err = std::abs(r.fraction * full - level) / full;
    row.mae += err;
    row.max_error = std::max(row.max_error, err);
    ++row.samples;
  }
  row.mae /= static_cast<double>(std::max<std::uint64_t>(1, row.samples));
  return row;
}

VerifyRow readout(const analog::MomcapConfig& cfg, bool& monotone) {
  VerifyRow row{"a_to_b", 0, 0, kNaN, 0, 0.0};
  analog::MomcapConfig quiet = cfg;
  quiet.noise_mae = 0.0;
  const int full = quiet.full_scale_level();
  monotone = true;
  int prev = -1;
  for (int level = 0; level <= full; ++level) {
    analog::MomcapState st{level, 1, false};
    const auto r = analog::read_a_to_b(st, quiet);
    if (r.code < prev) monotone = false;
    prev = r.code;
    const double err = std::abs(r.fraction - static_cast<double>(level) / full);
    row.mae += err;
    row.max_error = std::max(row.max_error, err);
    ++row.samples;
  }
  row.mae /= static_cast<double>(row.samples);
  return row;
}

VerifyRow softmax_fidelity(int vectors, std::uint64_t seed) {
  VerifyRow row{"softmax", 0, 0, kNaN, 0, 0.0020};
  std::mt19937_64 rng(seed ^ 0x50f7ULL);
  nsc::NscUnit unit;
  std::vector<Partial> y;
  std::vector<Prob> out;
  std::vector<double> ref;
  for (int v = 0; v < vectors; ++v) {
    const int d = 1 + static_cast<int>(rng() % 64);
    y.resize(d);
    out.resize(d);
    ref.resize(d);
    double mx = -1e300;
    for (int i = 0; i < d; ++i) {
      // 8-bit input with 4 fraction bits: range [-8, 8).
      const int k = static_cast<int>(rng() % 256) - 128;
      y[i] = Partial::from_raw(std::int64_t{k} * 8);
      ref[i] = k / 16.0;
      mx = std::max(mx, ref[i]);
    }
    double z = 0.0;
    for (double& r : ref) z += (r = std::exp(r - mx));
    nsc::softmax(unit, y, out);
    for (int i = 0; i < d; ++i) {
      const double err = std::abs(out[i].to_real() - ref[i] / z);
      row.mae += err;
      row.max_error = std::max(row.max_error, err);
      ++row.samples;
    }
  }
  row.mae /= static_cast<double>(std::max<std::uint64_t>(1, row.samples));
  return row;
}

workload::ModelConfig toy_head() {
  workload::ModelConfig m;
  m.name = "toy-head";
  m.layers = 1;
  m.seq_len = 8;
  m.heads = 1;
  m.d_model = 16;
  m.d_ff = 32;
  return m;
}

functional::Tensor matmul(const functional::Tensor& a, const functional::Tensor& b) {
  functional::Tensor c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  }
  return c;
}

functional::Tensor float_head(const functional::OperandStore& st, const std::string& p) {
  const auto& x = st.tensors.at("input");
  const auto q = matmul(x, st.tensors.at(p + ".wq"));
  const auto k = matmul(x, st.tensors.at(p + ".wk"));
  const auto v = matmul(x, st.tensors.at(p + ".wv"));
  const int n = x.rows, d = q.cols;
  functional::Tensor out(n, d);
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += q.at(i, c) * k.at(j, c);
      s[j] = dot / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (double& e : s) z += (e = std::exp(e - mx));
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += s[j] / z * v.at(j, c);
      out.at(i, c) = acc;
    }
  }
  return out;
}

functional::FunctionalResult run_toy(const workload::OpGraph& g, const functional::OperandStore& st,
                                     const RunConfig& cfg) {
  dataflow::PlanOptions opt;
  opt.mode = dataflow::ShardMode::TokenBased;
  opt.momcap_capacity = cfg.momcap.capacity;
  const auto tl = dataflow::plan_model(g, cfg.hbm, opt);
  functional::FunctionalOptions fo;
  fo.momcap = cfg.momcap;
  fo.momcap.seed = cfg.seed;
  return functional::functional_execute(tl, g, st, fo);
}

}  // namespace

const VerifyRow& VerifyReport::row(const std::string& component) const {
  for (const auto& r : rows) {
    if (r.component == component) return r;
  }
  throw Error(ErrorCode::Contract, "no verify row '" + component + "'");
}

VerifyReport verify(const RunConfig& cfg, const VerifyOptions& opt) {
  VerifyReport rep;
  rep.rows.push_back(multiplier(rep.multiplier_exact));
  rep.rows.push_back(accumulator(cfg.momcap, opt.accumulator_sequences, cfg.seed));
  rep.rows.push_back(readout(cfg.momcap, rep.readout_monotone));
  rep.rows.push_back(softmax_fidelity(opt.softmax_vectors, cfg.seed));

  const auto g = workload::decompose(toy_head());
  const auto st = functional::make_operands(g, cfg.seed);
  const auto res = run_toy(g, st, cfg);
  const auto ref = float_head(st, "enc0.mha");
  const auto& got = res.tensors.at("enc0.mha.attn");
  VerifyRow head{"toy_attention", 0, 0, kNaN, 0, 0.0};
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double err = std::abs(got.data[i] - ref.data[i]);
    head.mae += err;
    head.max_error = std::max(head.max_error, err);
    ++head.samples;
  }
  head.mae /= static_cast<double>(head.samples);
  rep.rows.push_back(head);

  auto zero = st;
  for (auto& v : zero.tensors.at("input").data) v = 0.0;
  const auto zres = run_toy(g, zero, cfg);
  rep.zero_head_exact = true;
  for (double v : zres.tensors.at("enc0.mha.attn").data) rep.zero_head_exact &= v == 0.0;
  return rep;
}

void write_verify_csv(const VerifyReport& r, std::ostream& os) {
  os << "component,mae,max_error,calibration_bits,samples,reference_mae\n";
  char buf[256];
  for (const auto& row : r.rows) {
    char cal[32] = "";
    if (!std::isnan(row.calibration_bits)) std::snprintf(cal, sizeof cal, "%.2f", row.calibration_bits);
    std::snprintf(buf, sizeof buf, "%s,%.9f,%.9f,%s,%llu,%.4f\n", row.component.c_str(), row.mae,
                  row.max_error, cal, static_cast<unsigned long long>(row.samples),
                  row.reference_mae);
    os << buf;
  }
}

}  // namespace artemis::sim
