#include "artemis/functional.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "artemis/error.hpp"

namespace artemis::functional {

using dataflow::Event;
using dataflow::EventKind;
using workload::Op;
using workload::OpKind;

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  std::uint64_t x = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Platform-independent uniform in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace

QuantizedTensor quantize_tensor(const Tensor& t, double factor) {
  QuantizedTensor q;
  q.rows = t.rows;
  q.cols = t.cols;
  double max_abs = 0.0;
  for (double v : t.data) max_abs = std::max(max_abs, std::abs(v * factor));
  q.scale = max_abs > 0.0 ? max_abs * sc::kStreamBits / sc::kMaxMagnitude : 1.0;
  q.data.reserve(t.data.size());
  for (double v : t.data) q.data.push_back(sc::quantize_real(v * factor / q.scale));
  return q;
}

QuantizedTensor transpose(const QuantizedTensor& q) {
  QuantizedTensor t;
  t.rows = q.cols;
  t.cols = q.rows;
  t.scale = q.scale;
  t.data.resize(q.data.size());
  for (int r = 0; r < q.rows; ++r) {
    for (int c = 0; c < q.cols; ++c) t.data[static_cast<std::size_t>(c) * q.rows + r] = q.at(r, c);
  }
  return t;
}

OperandStore make_operands(const workload::OpGraph& g, std::uint64_t seed) {
  OperandStore s;
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : g.tensors) {
    const bool input = name == "input" || name == "target";
    const bool weight = name.size() > 3 && name.find(".w") != std::string::npos &&
                        std::none_of(g.ops.begin(), g.ops.end(),
                                     [&](const Op& op) { return op.output == name; });
    if (!input && !weight) continue;
    Tensor t(shape.rows, shape.cols);
    const double bound = input ? 1.0 : 1.0 / std::sqrt(static_cast<double>(shape.rows));
    for (double& v : t.data) v = uniform(rng, -bound, bound);
    s.tensors[name] = std::move(t);
  }
  return s;
}

DotEngine::DotEngine(const analog::MomcapConfig& momcap, int adder_width)
    : momcap_(momcap), nsc_(adder_width) {
  momcap_.validate();
}

Partial DotEngine::pass(std::span<const sc::Fixed8> a, std::span<const sc::Fixed8> b,
                        sc::Sign sign, std::uint64_t key) {
  Partial acc;
  analog::MomcapState st;
  std::uint64_t group = 0;
  auto flush = [&] {
    if (st.count == 0) return;
    const auto r = analog::read_a_to_b(st, momcap_, mix(key, group++));
    ++stats_.readouts;
    acc = nsc_.reduce(acc, r.value, nsc::ReduceMode::Add);
    st = analog::reset(st);
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].sign() * b[i].sign() != sign) continue;
    if (a[i].magnitude() == 0 || b[i].magnitude() == 0) continue;
    const sc::StochWord p = sc::stoch_mul(nsc_.b_to_tcu(a[i], nsc::OperandRole::FirstOperand),
                                          nsc_.b_to_tcu(b[i], nsc::OperandRole::SecondOperand));
    st = analog::accumulate(st, p.popcount(), momcap_);
    if (st.count == momcap_.capacity) flush();
  }
  flush();
  return acc;
}

Partial DotEngine::dot(std::span<const sc::Fixed8> a, std::span<const sc::Fixed8> b,
                       std::uint64_t noise_key) {
  if (a.size() != b.size()) throw Error(ErrorCode::Contract, "dot operands differ in length");
  ++stats_.dot_products;
  const Partial pos = pass(a, b, sc::Sign::Positive, mix(noise_key, 1));
  const Partial neg = pass(a, b, sc::Sign::Negative, mix(noise_key, 2));
  return nsc_.reduce(pos, neg, nsc::ReduceMode::Subtract);
}

namespace {

class Executor {
 public:
  Executor(const workload::OpGraph& g, const OperandStore& store, const FunctionalOptions& opt)
      : g_(g), opt_(opt), engine_(opt.momcap, opt.adder_width) {
    for (const auto& [name, t] : store.tensors) {
      tensors_[name] = t;
      written_[name] = t.data.size();
    }
    for (const auto& [name, shape] : g.tensors) {
      if (!tensors_.count(name)) {
        tensors_[name] = Tensor(shape.rows, shape.cols);
        written_[name] = 0;
      }
    }
  }

  void run(const dataflow::EventTimeline& tl) {
    for (const Event& e : tl.events) {
      if (!e.finalizes || e.op < 0) continue;
      const Op& op = g_.ops[static_cast<std::size_t>(e.op)];
      switch (e.kind) {
        case EventKind::MacBatch:
          if (op.kind == OpKind::Linear) linear(e, op);
          else if (op.kind == OpKind::AttnScore) score(e, op);
          else if (op.kind == OpKind::AttnValue) value(e, op);
          break;
        case EventKind::Softmax: softmax(e, op); break;
        case EventKind::Activation: activation(e, op); break;
        case EventKind::Norm: norm(e, op); break;
        default: break;
      }
    }
  }

  FunctionalResult finish() {
    FunctionalResult r;
    r.tensors = std::move(tensors_);
    r.nsc_saturations = engine_.nsc().saturation_count();
    r.momcap_saturations = engine_.stats().momcap_saturations;
    r.dot_products = engine_.stats().dot_products;
    return r;
  }

 private:
  const Tensor& complete(const std::string& name) {
    const Tensor& t = tensors_.at(name);
    if (written_.at(name) < t.data.size()) {
      throw Error(ErrorCode::Contract, "tensor '" + name + "' consumed before it is complete");
    }
    return t;
  }

  // Quantized copy, cached per (tensor, factor); `columns` stores it transposed.
  const QuantizedTensor& quantized(const std::string& name, double factor, bool columns) {
    const std::string key = name + (columns ? "^T" : "") + "*" + std::to_string(factor);
    auto it = quant_.find(key);
    if (it != quant_.end()) return it->second;
    QuantizedTensor q = quantize_tensor(complete(name), factor);
    if (columns) q = transpose(q);
    return quant_.emplace(key, std::move(q)).first->second;
  }

  void produced(const std::string& name, std::size_t n) { written_[name] += n; }

  std::uint64_t key(const Event& e, int a, int b, int c) const {
    return mix(mix(mix(mix(opt_.momcap.seed, static_cast<std::uint64_t>(e.op)),
                       static_cast<std::uint64_t>(a)),
                   static_cast<std::uint64_t>(b)),
               static_cast<std::uint64_t>(c));
  }

  std::span<const sc::Fixed8> row(const QuantizedTensor& q, int r, int c0, int len) const {
    return {q.data.data() + static_cast<std::size_t>(r) * q.cols + c0,
            static_cast<std::size_t>(len)};
  }

  void linear(const Event& e, const Op& op) {
    const auto& x = quantized(op.input, 1.0, false);
    const auto& w = quantized(op.second_input, 1.0, true);
    Tensor& out = tensors_.at(op.output);
    const double s = x.scale * w.scale;
    for (int r = e.row_begin; r < e.row_end; ++r) {
      for (int c = e.col_begin; c < e.col_end; ++c) {
        const Partial p = engine_.dot(row(x, r, 0, op.inner), row(w, c, 0, op.inner), key(e, r, c, 0));
        out.at(r, c) = p.to_real() * s;
      }
    }
    produced(op.output, static_cast<std::size_t>(e.row_end - e.row_begin) * (e.col_end - e.col_begin));
  }

  void score(const Event& e, const Op& op) {
    const int dh = op.inner;
    const auto& q = quantized(op.input, 1.0 / std::sqrt(static_cast<double>(dh)), false);
    const auto& k = quantized(op.second_input, 1.0, false);
    Tensor& out = tensors_.at(op.output);
    const double s = q.scale * k.scale;
    const int n = op.rows;
    for (int h = e.head_begin; h < e.head_end; ++h) {
      for (int i = e.row_begin; i < e.row_end; ++i) {
        for (int j = e.col_begin; j < e.col_end; ++j) {
          const Partial p = engine_.dot(row(q, i, h * dh, dh), row(k, j, h * dh, dh), key(e, i, j, h));
          out.at(h * n + i, j) = p.to_real() * s;
        }
      }
    }
    produced(op.output, static_cast<std::size_t>(e.head_end - e.head_begin) *
                            (e.row_end - e.row_begin) * (e.col_end - e.col_begin));
  }

  void softmax(const Event& e, const Op& op) {
    const Tensor& y = complete(op.input);
    Tensor& out = tensors_.at(op.output);
    const int n = op.cols;
    nsc::NscUnit& unit = engine_.nsc();
    std::vector<Partial> v(static_cast<std::size_t>(n));
    std::vector<Prob> p(static_cast<std::size_t>(n));
    for (int h = e.head_begin; h < e.head_end; ++h) {
      for (int i = e.row_begin; i < e.row_end; ++i) {
        const int r = h * op.rows + i;
        for (int j = 0; j < n; ++j) {
          const bool masked = op.masked && j > i;
          const double raw = std::clamp(std::round(y.at(r, j) * Partial::kOne),
                                        static_cast<double>(unit.min_value().raw),
                                        static_cast<double>(unit.max_value().raw));
          v[static_cast<std::size_t>(j)] =
              masked ? unit.min_value() : Partial::from_raw(static_cast<std::int64_t>(raw));
        }
        nsc::softmax(unit, v, p);
        for (int j = 0; j < n; ++j) out.at(r, j) = p[static_cast<std::size_t>(j)].to_real();
      }
    }
    produced(op.output, static_cast<std::size_t>(e.head_end - e.head_begin) * (e.row_end - e.row_begin) * n);
  }

  void value(const Event& e, const Op& op) {
    const auto& p = quantized(op.input, 1.0, false);
    const auto& v = quantized(op.second_input, 1.0, true);
    Tensor& out = tensors_.at(op.output);
    const double s = p.scale * v.scale;
    const int dh = op.cols, n = op.rows, keys = op.inner;
    for (int h = e.head_begin; h < e.head_end; ++h) {
      for (int i = e.row_begin; i < e.row_end; ++i) {
        for (int d = 0; d < dh; ++d) {
          const int col = h * dh + d;
          const Partial r = engine_.dot(row(p, h * n + i, 0, keys), row(v, col, 0, keys), key(e, i, col, h));
          out.at(i, col) = r.to_real() * s;
        }
      }
    }
    produced(op.output, static_cast<std::size_t>(e.head_end - e.head_begin) * (e.row_end - e.row_begin) * dh);
  }

  void activation(const Event& e, const Op& op) {
    const Tensor& x = tensors_.at(op.input);
    Tensor& out = tensors_.at(op.output);
    const auto kind = g_.model.activation;
    for (int r = e.row_begin; r < e.row_end; ++r) {
      for (int c = e.col_begin; c < e.col_end; ++c) {
        const Partial in = Partial::from_real(x.at(r, c));
        out.at(r, c) = engine_.nsc().activation(in, kind).to_real();
      }
    }
    produced(op.output, static_cast<std::size_t>(e.row_end - e.row_begin) * (e.col_end - e.col_begin));
  }

  void norm(const Event& e, const Op& op) {
    const Tensor& x = complete(op.input);
    const Tensor& res = complete(op.second_input);
    Tensor& out = tensors_.at(op.output);
    const int d = op.cols;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int r = e.row_begin; r < e.row_end; ++r) {
      double mean = 0.0;
      for (int c = 0; c < d; ++c) mean += (v[c] = x.at(r, c) + res.at(r, c));
      mean /= d;
      double var = 0.0;
      for (int c = 0; c < d; ++c) var += (v[c] - mean) * (v[c] - mean);
      var /= d;
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      for (int c = 0; c < d; ++c) out.at(r, c) = (v[c] - mean) * inv;
    }
    produced(op.output, static_cast<std::size_t>(e.row_end - e.row_begin) * d);
  }

  const workload::OpGraph& g_;
  FunctionalOptions opt_;
  DotEngine engine_;
  std::map<std::string, Tensor> tensors_;
  std::map<std::string, std::size_t> written_;
  std::map<std::string, QuantizedTensor> quant_;
};

}  // namespace

FunctionalResult functional_execute(const dataflow::EventTimeline& tl, const workload::OpGraph& g,
                                    const OperandStore& store, const FunctionalOptions& opt) {
  Executor ex(g, store, opt);
  ex.run(tl);
  return ex.finish();
}

}  // namespace artemis::functional
