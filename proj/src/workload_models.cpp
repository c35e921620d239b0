#include "artemis/workload_models.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "artemis/error.hpp"

namespace artemis::workload {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct Row {
  const char* name;
  std::int64_t params;
  int layers, n, heads, d, d_ff;
  Architecture arch;
  nsc::ActivationKind act;
};

constexpr Row kTable[] = {
    {"Transformer-base", 52'000'000, 2, 128, 8, 512, 2048, Architecture::EncoderDecoder,
     nsc::ActivationKind::Relu},
    {"BERT-base", 108'000'000, 12, 128, 12, 768, 3072, Architecture::EncoderOnly,
     nsc::ActivationKind::Gelu},
    {"ALBERT-base", 12'000'000, 12, 128, 12, 768, 3072, Architecture::EncoderOnly,
     nsc::ActivationKind::Gelu},
    {"ViT-base", 86'000'000, 12, 256, 12, 768, 3072, Architecture::EncoderOnly,
     nsc::ActivationKind::Gelu},
    {"OPT-350", 350'000'000, 12, 2048, 12, 768, 3072, Architecture::EncoderOnly,
     nsc::ActivationKind::Relu},
};

class GraphBuilder {
 public:
  explicit GraphBuilder(const ModelConfig& cfg) { g_.model = cfg; }

  void tensor(const std::string& name, int rows, int cols) { g_.tensors[name] = {rows, cols}; }

  Op& add(Op op) {
    g_.ops.push_back(std::move(op));
    return g_.ops.back();
  }

  void linear(const Op& base, const std::string& out, const std::string& in, const std::string& w,
              int rows, int in_dim, int out_dim) {
    tensor(w, in_dim, out_dim);
    tensor(out, rows, out_dim);
    Op op = base;
    op.kind = OpKind::Linear;
    op.output = out;
    op.input = in;
    op.second_input = w;
    op.rows = rows;
    op.inner = in_dim;
    op.cols = out_dim;
    add(op);
  }

  // Returns the attention block's output tensor.
  std::string attention(const Op& base, const std::string& prefix, const std::string& in,
                        const std::string& kv_in) {
    const auto& m = g_.model;
    const int n = m.seq_len, d = m.d_model, h = m.heads;
    linear(base, prefix + ".q", in, prefix + ".wq", n, d, d);
    linear(base, prefix + ".k", kv_in, prefix + ".wk", n, d, d);
    linear(base, prefix + ".v", kv_in, prefix + ".wv", n, d, d);

    tensor(prefix + ".scores", h * n, n);
    Op s = base;
    s.kind = OpKind::AttnScore;
    s.output = prefix + ".scores";
    s.input = prefix + ".q";
    s.second_input = prefix + ".k";
    s.rows = n;
    s.inner = m.head_dim();
    s.cols = n;
    s.heads = h;
    add(s);

    tensor(prefix + ".probs", h * n, n);
    Op sm = base;
    sm.kind = OpKind::Softmax;
    sm.output = prefix + ".probs";
    sm.input = prefix + ".scores";
    sm.rows = n;
    sm.cols = n;
    sm.heads = h;
    add(sm);

    tensor(prefix + ".attn", n, d);
    Op av = base;
    av.kind = OpKind::AttnValue;
    av.output = prefix + ".attn";
    av.input = prefix + ".probs";
    av.second_input = prefix + ".v";
    av.rows = n;
    av.inner = n;
    av.cols = m.head_dim();
    av.heads = h;
    add(av);

    linear(base, prefix + ".out", prefix + ".attn", prefix + ".wo", n, d, d);
    return norm(base, prefix + ".norm", prefix + ".out", in);
  }

  std::string norm(const Op& base, const std::string& out, const std::string& in,
                   const std::string& residual) {
    tensor(out, g_.model.seq_len, g_.model.d_model);
    Op op = base;
    op.kind = OpKind::Norm;
    op.output = out;
    op.input = in;
    op.second_input = residual;
    op.rows = g_.model.seq_len;
    op.cols = g_.model.d_model;
    add(op);
    return out;
  }

  std::string feed_forward(const Op& base, const std::string& prefix, const std::string& in) {
    const auto& m = g_.model;
    Op ff = base;
    ff.block = Block::FeedForward;
    linear(ff, prefix + ".h1", in, prefix + ".w1", m.seq_len, m.d_model, m.d_ff);
    tensor(prefix + ".act", m.seq_len, m.d_ff);
    Op act = ff;
    act.kind = OpKind::Activation;
    act.output = prefix + ".act";
    act.input = prefix + ".h1";
    act.rows = m.seq_len;
    act.cols = m.d_ff;
    add(act);
    linear(ff, prefix + ".h2", prefix + ".act", prefix + ".w2", m.seq_len, m.d_ff, m.d_model);
    return norm(ff, prefix + ".norm", prefix + ".h2", in);
  }

  OpGraph finish() { return std::move(g_); }

 private:
  OpGraph g_;
};

}  // namespace

void ModelConfig::validate() const {
  auto req = [](bool ok, const char* field, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, std::string("model.") + field + " " + what);
  };
  req(layers >= 1, "layers", "must be >= 1");
  req(seq_len >= 1, "seq_len", "must be >= 1");
  req(heads >= 1, "heads", "must be >= 1");
  req(d_model >= 1, "d_model", "must be >= 1");
  req(d_ff >= 1, "d_ff", "must be >= 1");
  req(d_model % heads == 0, "heads", "must divide d_model");
}

ModelConfig builtin(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& r : kTable) {
    if (lower(r.name) == key) {
      ModelConfig m;
      m.name = r.name;
      m.params = r.params;
      m.layers = r.layers;
      m.seq_len = r.n;
      m.heads = r.heads;
      m.d_model = r.d;
      m.d_ff = r.d_ff;
      m.architecture = r.arch;
      m.activation = r.act;
      return m;
    }
  }
  throw Error(ErrorCode::Config, "unknown builtin model '" + std::string(name) + "'");
}

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (const auto& r : kTable) out.emplace_back(r.name);
  return out;
}

std::string_view op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Linear: return "linear";
    case OpKind::AttnScore: return "attn_score";
    case OpKind::Softmax: return "softmax";
    case OpKind::AttnValue: return "attn_value";
    case OpKind::Activation: return "activation";
    case OpKind::Norm: return "norm";
  }
  return "?";
}

std::int64_t Op::macs() const {
  switch (kind) {
    case OpKind::Linear: return std::int64_t{rows} * inner * cols;
    case OpKind::AttnScore:
    case OpKind::AttnValue: return std::int64_t{heads} * rows * inner * cols;
    default: return 0;
  }
}

std::int64_t OpGraph::total_macs() const {
  std::int64_t total = 0;
  for (const auto& op : ops) total += op.macs();
  return total;
}

void OpGraph::validate_shapes() const {
  auto shape = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorCode::Contract, "unknown tensor '" + name + "'");
    return it->second;
  };
  auto expect = [](bool ok, const Op& op, const char* what) {
    if (!ok) throw Error(ErrorCode::Contract, "shape mismatch in " + op.output + ": " + what);
  };
  for (const auto& op : ops) {
    const TensorShape out = shape(op.output);
    switch (op.kind) {
      case OpKind::Linear: {
        const TensorShape in = shape(op.input), w = shape(op.second_input);
        expect(in.cols == w.rows, op, "input cols != weight rows");
        expect(out == TensorShape{in.rows, w.cols}, op, "output != input x weight");
        expect(op.rows == in.rows && op.inner == in.cols && op.cols == w.cols, op, "op dims");
        break;
      }
      case OpKind::AttnScore: {
        const TensorShape q = shape(op.input), k = shape(op.second_input);
        expect(q.cols == k.cols && q.cols == op.heads * op.inner, op, "head split");
        expect(out == TensorShape{op.heads * q.rows, k.rows}, op, "scores must be H*N x N");
        break;
      }
      case OpKind::Softmax:
        expect(shape(op.input) == out, op, "softmax preserves shape");
        break;
      case OpKind::AttnValue: {
        const TensorShape p = shape(op.input), v = shape(op.second_input);
        expect(p.cols == v.rows, op, "probs cols != value rows");
        expect(out == TensorShape{p.rows / op.heads, v.cols}, op, "attn must be N x D");
        break;
      }
      case OpKind::Activation:
        expect(shape(op.input) == out, op, "activation preserves shape");
        break;
      case OpKind::Norm:
        expect(shape(op.input) == out && shape(op.second_input) == out, op, "residual shape");
        break;
    }
  }
}

OpGraph decompose(const ModelConfig& cfg) {
  cfg.validate();
  GraphBuilder b(cfg);
  b.tensor("input", cfg.seq_len, cfg.d_model);
  std::string x = "input";
  for (int l = 0; l < cfg.layers; ++l) {
    Op base;
    base.layer = l;
    base.block = Block::EncoderSelf;
    const std::string p = "enc" + std::to_string(l);
    x = b.attention(base, p + ".mha", x, x);
    x = b.feed_forward(base, p + ".ffn", x);
  }
  if (cfg.architecture == Architecture::EncoderDecoder) {
    const std::string memory = x;
    // Teacher-forced single pass over the shifted target, same length as the source.
    b.tensor("target", cfg.seq_len, cfg.d_model);
    std::string y = "target";
    for (int l = 0; l < cfg.layers; ++l) {
      Op base;
      base.layer = cfg.layers + l;
      base.decoder = true;
      const std::string p = "dec" + std::to_string(l);
      base.block = Block::DecoderSelf;
      base.masked = true;
      y = b.attention(base, p + ".self", y, y);
      base.block = Block::DecoderCross;
      base.masked = false;
      y = b.attention(base, p + ".cross", y, memory);
      y = b.feed_forward(base, p + ".ffn", y);
    }
  }
  return b.finish();
}

std::int64_t mac_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t n = cfg.seq_len, d = cfg.d_model, ff = cfg.d_ff;
  const std::int64_t attention = 4 * n * d * d + 2 * n * n * d;
  const std::int64_t ffn = 2 * n * d * ff;
  std::int64_t per_encoder = attention + ffn;
  std::int64_t total = per_encoder * cfg.layers;
  if (cfg.architecture == Architecture::EncoderDecoder) {
    total += (2 * attention + ffn) * cfg.layers;
  }
  return total;
}

}  // namespace artemis::workload
