#include "artemis/dataflow_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

#include "artemis/error.hpp"

namespace artemis::dataflow {

using workload::Op;
using workload::OpGraph;
using workload::OpKind;

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

int slice_begin(int total, int parts, int i) {
  return static_cast<int>(std::int64_t{total} * i / parts);
}

}  // namespace

std::string_view shard_mode_name(ShardMode m) {
  return m == ShardMode::TokenBased ? "token" : "layer";
}

int ShardPlan::active_banks() const {
  return static_cast<int>(
      std::count_if(ranges.begin(), ranges.end(), [](const TokenRange& r) { return !r.empty(); }));
}

ShardPlan shard_tokens(int n, int k, ShardMode mode) {
  if (n < 1 || k < 1) throw Error(ErrorCode::Contract, "shard_tokens needs N >= 1 and K >= 1");
  ShardPlan p;
  p.mode = mode;
  p.tokens = n;
  p.banks = k;
  p.ranges.resize(k);
  if (mode == ShardMode::TokenBased) {
    p.tokens_per_bank = (n + k - 1) / k;
    for (int b = 0; b < k; ++b) {
      const int begin = std::min(n, b * p.tokens_per_bank);
      p.ranges[b] = {begin, std::min(n, begin + p.tokens_per_bank)};
    }
  } else {
    p.tokens_per_bank = n;
    for (auto& r : p.ranges) r = {0, n};
  }
  return p;
}

TokenRange layer_banks(int layer, int total_layers, int banks) {
  if (banks >= total_layers) {
    return {slice_begin(banks, total_layers, layer), slice_begin(banks, total_layers, layer + 1)};
  }
  const int b = layer % banks;
  return {b, b + 1};
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::MacBatch: return "mac_batch";
    case EventKind::AtoB: return "a_to_b";
    case EventKind::NscReduce: return "nsc_reduce";
    case EventKind::Softmax: return "softmax";
    case EventKind::BtoTcu: return "b_to_tcu";
    case EventKind::IntraBankLatchMove: return "latch_move";
    case EventKind::InterBankTransfer: return "interbank_transfer";
    case EventKind::RingBroadcastStep: return "ring_step";
    case EventKind::RowWrite: return "row_write";
    case EventKind::Activation: return "activation";
    case EventKind::Norm: return "norm";
  }
  return "?";
}

void Event::add_dep(std::int32_t index, DepKind kind) {
  if (index < 0) return;
  for (int i = 0; i < dep_count; ++i) {
    if (deps[i].index == index) {
      if (kind == DepKind::Full) deps[i].kind = DepKind::Full;
      return;
    }
  }
  if (dep_count == deps.size()) throw Error(ErrorCode::Contract, "event dependency list full");
  deps[dep_count++] = {index, kind};
}

std::int32_t EventTimeline::push(const Event& e) {
  events.push_back(e);
  return static_cast<std::int32_t>(events.size() - 1);
}

Resource resource_of(const Event& e) {
  switch (e.kind) {
    case EventKind::MacBatch:
    case EventKind::AtoB:
    case EventKind::RowWrite: return {ResourceClass::Array, e.bank};
    case EventKind::IntraBankLatchMove: return {ResourceClass::Latch, e.bank};
    case EventKind::RingBroadcastStep: return {ResourceClass::Link, e.link};
    case EventKind::InterBankTransfer: return {ResourceClass::Bus, 0};
    default: return {ResourceClass::Nsc, e.bank};
  }
}

int resource_slot(const Resource& r, int banks) {
  switch (r.cls) {
    case ResourceClass::Array: return 3 * r.index;
    case ResourceClass::Latch: return 3 * r.index + 1;
    case ResourceClass::Nsc: return 3 * r.index + 2;
    case ResourceClass::Link: return 3 * banks + r.index;
    case ResourceClass::Bus: break;
  }
  // The bus slot sits after all ring links (one link per bank).
  return 4 * banks;
}

std::string resource_label(const Resource& r) {
  switch (r.cls) {
    case ResourceClass::Array: return "bank" + std::to_string(r.index) + ".array";
    case ResourceClass::Latch: return "bank" + std::to_string(r.index) + ".latch";
    case ResourceClass::Nsc: return "bank" + std::to_string(r.index) + ".nsc";
    case ResourceClass::Link: return "link" + std::to_string(r.index);
    case ResourceClass::Bus: return "bus";
  }
  return "?";
}

void write_timeline_csv(const EventTimeline& tl, std::ostream& os) {
  os << "kind,detail,resource,bank,op,chunk,count,bits,start_ns,duration_ns\n";
  char buf[96];
  for (const auto& e : tl.events) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", e.start_ns, e.duration_ns);
    os << event_kind_name(e.kind) << ',' << int{e.detail} << ',' << resource_label(resource_of(e))
       << ',' << e.bank << ',' << e.op << ',' << e.chunk << ',' << e.count << ',' << e.bits << ','
       << buf << '\n';
  }
}

std::vector<RingStep> ring_broadcast(int k, std::uint64_t payload_bits) {
  if (k < 1) throw Error(ErrorCode::Contract, "ring_broadcast needs K >= 1");
  std::vector<RingStep> steps;
  for (int t = 0; t + 1 < k; ++t) {
    for (int i = 0; i < k; ++i) {
      steps.push_back({t, i, (i + 1) % k, ((i - t) % k + k) % k, payload_bits});
    }
  }
  return steps;
}

namespace {

// Everything needed to cost (and functionally evaluate) one bank's share of a
// MatMul.
struct MatmulShare {
  int op = -1;
  int bank = 0;
  int chunk = 0;
  int row_begin = 0, row_end = 0;
  int col_begin = 0, col_end = 0;
  int head_begin = 0, head_end = 0;
  std::int64_t macs = 0;
  std::int64_t inner = 0;         // dot-product length
  std::int64_t input_values = 0;  // operand values prepared by B_to_TCU
  std::int64_t extra_adds = 0;    // merges into a running accumulator
  bool finalizes = true;
  bool prepare = true;            // emit the B_to_TCU stage
  int staged_rows = 2;            // operand rows written per MacBatch step
  std::int32_t stream_from = -1;  // operand arriving progressively
};

class Planner {
 public:
  Planner(const OpGraph& g, const hbm::HbmConfig& hbm, const PlanOptions& opt)
      : g_(g), hbm_(hbm), opt_(opt) {
    hbm_.validate();
    if (opt_.momcap_capacity < 1) throw Error(ErrorCode::Config, "momcap capacity must be >= 1");
    if (opt_.tokens_per_bank_wave < 1) {
      throw Error(ErrorCode::Config, "tokens_per_bank_wave must be >= 1");
    }
    k_ = hbm_.total_banks();
    tl_.banks = k_;
    tl_.links = k_;
    tl_.pipelined = opt_.pipelined;
    last_.assign(k_, -1);
    lanes_ = hbm_.subarrays_per_bank;
  }

  EventTimeline take() { return std::move(tl_); }

  std::int32_t add(Event e) {
    if (!opt_.pipelined && e.bank >= 0 && last_[e.bank] >= 0) e.add_dep(last_[e.bank]);
    const std::int32_t idx = tl_.push(e);
    if (e.bank >= 0) last_[e.bank] = idx;
    return idx;
  }

  DepKind stream() const { return opt_.pipelined ? DepKind::Stream : DepKind::Full; }

  std::uint64_t nsc_count(std::int64_t elements) const {
    return ceil_div(static_cast<std::uint64_t>(elements), static_cast<std::uint64_t>(lanes_));
  }

  std::uint64_t beats(std::uint64_t bits) const {
    return std::max<std::uint64_t>(1, ceil_div(bits, static_cast<std::uint64_t>(hbm_.interbank_link_bits)));
  }

  std::uint64_t rows_for_bits(std::uint64_t bits) const {
    return ceil_div(bits, static_cast<std::uint64_t>(hbm_.bits_per_row) * hbm_.tiles_per_subarray);
  }

  static Event tagged(EventKind kind, const MatmulShare& s) {
    Event e;
    e.kind = kind;
    e.bank = s.bank;
    e.op = s.op;
    e.chunk = s.chunk;
    e.row_begin = s.row_begin;
    e.row_end = s.row_end;
    e.col_begin = s.col_begin;
    e.col_end = s.col_end;
    e.head_begin = s.head_begin;
    e.head_end = s.head_end;
    return e;
  }

  // B_to_TCU -> MacBatch -> A_to_B -> latch hops -> NSC reduce. Returns the
  // reduce event, which marks the share's result as available.
  std::int32_t matmul(const MatmulShare& s, std::initializer_list<std::int32_t> deps) {
    const int active = hbm_.active_subarrays_per_bank();
    const int tiles = hbm_.tiles_per_subarray;
    const int cap = opt_.momcap_capacity;
    const auto steps = ceil_div(static_cast<std::uint64_t>(s.macs),
                                static_cast<std::uint64_t>(hbm_.macs_per_bank_step()));
    const auto groups = ceil_div(steps, static_cast<std::uint64_t>(cap));
    const auto tiles_needed =
        ceil_div(static_cast<std::uint64_t>(s.inner), 2 * static_cast<std::uint64_t>(cap));
    const auto spanned = std::min<std::uint64_t>(
        2 * static_cast<std::uint64_t>(active),
        2 * ceil_div(tiles_needed, static_cast<std::uint64_t>(tiles)));
    const std::uint64_t chain = spanned > 0 ? spanned - 1 : 0;

    std::int32_t prev = -1;
    DepKind link_kind = DepKind::Full;
    if (s.prepare) {
      Event b2t = tagged(EventKind::BtoTcu, s);
      b2t.count = nsc_count(s.input_values);
      b2t.lanes = lanes_;
      for (auto d : deps) b2t.add_dep(d);
      b2t.add_dep(s.stream_from, stream());
      prev = add(b2t);
      link_kind = stream();
    }

    if (s.prepare && s.staged_rows > 0) {
      Event w = tagged(EventKind::RowWrite, s);
      w.detail = static_cast<std::uint8_t>(WriteKind::Operand);
      w.bypassable = true;
      w.count = steps * static_cast<std::uint64_t>(s.staged_rows);
      w.add_dep(prev, link_kind);
      prev = add(w);
    }

    Event mac = tagged(EventKind::MacBatch, s);
    mac.count = steps;
    mac.lanes = active;
    mac.finalizes = s.finalizes;
    if (prev >= 0) {
      mac.add_dep(prev, link_kind);
    } else {
      for (auto d : deps) mac.add_dep(d);
      mac.add_dep(s.stream_from, stream());
    }
    prev = add(mac);

    Event atob = tagged(EventKind::AtoB, s);
    atob.count = groups;
    atob.lanes = active;
    atob.add_dep(prev, stream());
    prev = add(atob);

    Event latch = tagged(EventKind::IntraBankLatchMove, s);
    latch.count = groups * (static_cast<std::uint64_t>(tiles) + chain);
    latch.lanes = active;
    latch.add_dep(prev, stream());
    prev = add(latch);

    Event red = tagged(EventKind::NscReduce, s);
    red.count = groups * (static_cast<std::uint64_t>(tiles - 1) + chain) + 1 +
                static_cast<std::uint64_t>(s.extra_adds);
    red.lanes = lanes_;
    red.add_dep(prev, stream());
    return add(red);
  }

  // Weight rows rewritten for every extra mapping wave of a linear layer.
  void remap(const Op& op, int bank, int opi, int tokens, int cols) {
    const int waves = (tokens + opt_.tokens_per_bank_wave - 1) / opt_.tokens_per_bank_wave;
    if (waves <= 1 || cols <= 0) return;
    const std::uint64_t bits = static_cast<std::uint64_t>(op.inner) * cols * 8;
    Event w;
    w.kind = EventKind::RowWrite;
    w.detail = static_cast<std::uint8_t>(WriteKind::Remap);
    w.bank = bank;
    w.op = opi;
    w.chunk = waves - 1;
    w.bits = bits * static_cast<std::uint64_t>(waves - 1);
    w.count = rows_for_bits(bits) * static_cast<std::uint64_t>(waves - 1);
    add(w);
  }

  std::int32_t arrival_write(int bank, int opi, int chunk, std::uint64_t bits, std::int32_t dep) {
    Event w;
    w.kind = EventKind::RowWrite;
    w.detail = static_cast<std::uint8_t>(WriteKind::Arrival);
    w.bypassable = true;
    w.bank = bank;
    w.op = opi;
    w.chunk = chunk;
    w.bits = bits;
    w.count = std::max<std::uint64_t>(1, rows_for_bits(bits));
    w.add_dep(dep, stream());
    return add(w);
  }

  std::int32_t nsc_event(EventKind kind, std::uint8_t detail, int bank, int opi, std::int64_t elems,
                         std::int32_t dep, DepKind dk) {
    Event e;
    e.kind = kind;
    e.detail = detail;
    e.bank = bank;
    e.op = opi;
    e.count = std::max<std::uint64_t>(1, nsc_count(elems));
    e.lanes = lanes_;
    e.add_dep(dep, dk);
    return add(e);
  }

  std::int32_t host_transfer(int bank, std::uint64_t bits, std::int32_t dep, int opi) {
    Event e;
    e.kind = EventKind::InterBankTransfer;
    e.detail = static_cast<std::uint8_t>(TransferKind::HostIo);
    e.bank = bank;
    e.op = opi;
    e.bits = bits;
    e.count = beats(bits);
    e.add_dep(dep, stream());
    return add(e);
  }

  // ---- token-based ------------------------------------------------------

  void token_model(int first_op, int last_op) {
    plan_ = shard_tokens(g_.model.seq_len, k_, ShardMode::TokenBased);
    for (int b = 0; b < k_; ++b) {
      if (!plan_.ranges[b].empty()) active_.push_back(b);
    }
    const auto& m = g_.model;
    std::vector<std::int32_t> x(k_, -1), memory(k_, -1);
    if (opt_.host_io) {
      for (int b : active_) {
        x[b] = host_transfer(b, static_cast<std::uint64_t>(plan_.ranges[b].size()) * m.d_model * 8,
                             -1, -1);
      }
    }
    std::vector<std::int32_t> target = x;
    bool in_decoder = false;
    int i = first_op;
    while (i < last_op) {
      const Op& op = g_.ops[i];
      if (op.decoder && !in_decoder) {
        in_decoder = true;
        memory = x;
        if (opt_.host_io) {
          for (int b : active_) {
            target[b] = host_transfer(
                b, static_cast<std::uint64_t>(plan_.ranges[b].size()) * m.d_model * 8, -1, -1);
          }
        }
        x = target;
      }
      if (op.kind == OpKind::Linear && op.block != workload::Block::FeedForward) {
        const bool cross = op.block == workload::Block::DecoderCross;
        x = token_attention(i, x, cross ? memory : x);
        i += 8;
      } else {
        x = token_ffn(i, x);
        i += 4;
      }
    }
    if (opt_.host_io) {
      for (int b : active_) {
        host_transfer(b, static_cast<std::uint64_t>(plan_.ranges[b].size()) * m.d_model * 8, x[b],
                      last_op - 1);
      }
    }
  }

  MatmulShare token_linear_share(int opi, int b) const {
    const Op& op = g_.ops[opi];
    const TokenRange r = plan_.ranges[b];
    MatmulShare s;
    s.op = opi;
    s.bank = b;
    s.row_begin = r.begin;
    s.row_end = r.end;
    s.col_begin = 0;
    s.col_end = op.cols;
    s.macs = std::int64_t{r.size()} * op.inner * op.cols;
    s.inner = op.inner;
    s.input_values = std::int64_t{r.size()} * op.inner;
    return s;
  }

  std::int32_t token_linear(int opi, int b, std::int32_t dep) {
    remap(g_.ops[opi], b, opi, plan_.ranges[b].size(), g_.ops[opi].cols);
    return matmul(token_linear_share(opi, b), {dep});
  }

  // Ring circulation of a per-bank operand (K or V shards). `on_arrival`
  // consumes shard j at receiver p after `ready` (ring step or write).
  template <class F>
  void ring(int opi, const std::vector<std::int32_t>& source, F&& on_arrival) {
    const int ka = static_cast<int>(active_.size());
    const int d = g_.model.d_model;
    std::vector<std::int32_t> prev(ka, -1), cur(ka, -1);
    for (const RingStep& st : ring_broadcast(ka, 0)) {
      const int sender = active_[st.sender], receiver = active_[st.receiver];
      const int shard = active_[st.shard];
      Event e;
      e.kind = EventKind::RingBroadcastStep;
      e.bank = receiver;
      e.link = sender;
      e.op = opi;
      e.chunk = st.step + 1;
      e.row_begin = plan_.ranges[shard].begin;
      e.row_end = plan_.ranges[shard].end;
      e.bits = static_cast<std::uint64_t>(plan_.ranges[shard].size()) * d * 8;
      e.count = beats(e.bits);
      e.add_dep(st.step == 0 ? source[sender] : prev[st.sender], stream());
      const std::int32_t idx = add(e);
      cur[st.receiver] = idx;
      const std::int32_t ready = arrival_write(receiver, opi, st.step + 1, e.bits, idx);
      on_arrival(receiver, shard, st.step + 1, ready);
      if (st.sender == ka - 1) std::swap(prev, cur);
    }
  }

  std::vector<std::int32_t> token_attention(int base, const std::vector<std::int32_t>& x,
                                            const std::vector<std::int32_t>& kv) {
    const auto& m = g_.model;
    const int h = m.heads, dh = m.head_dim(), n = m.seq_len;
    const int oq = base, ok = base + 1, ov = base + 2, os = base + 3, osm = base + 4,
              oav = base + 5, oo = base + 6, on = base + 7;
    std::vector<std::int32_t> q(k_, -1), k(k_, -1), v(k_, -1), mx(k_, -1), fin(k_, -1),
        sv(k_, -1), out(k_, -1);
    for (int b : active_) {
      q[b] = token_linear(oq, b, x[b]);
      k[b] = token_linear(ok, b, kv[b]);
      v[b] = token_linear(ov, b, kv[b]);
    }
    auto score = [&](int p, int j, int chunk, std::int32_t ready) {
      const TokenRange rp = plan_.ranges[p], rj = plan_.ranges[j];
      MatmulShare s;
      s.op = os;
      s.bank = p;
      s.chunk = chunk;
      s.row_begin = rp.begin;
      s.row_end = rp.end;
      s.col_begin = rj.begin;
      s.col_end = rj.end;
      s.head_begin = 0;
      s.head_end = h;
      s.macs = std::int64_t{h} * rp.size() * rj.size() * dh;
      s.inner = dh;
      s.input_values = std::int64_t{rj.size()} * m.d_model + (chunk == 0 ? rp.size() * m.d_model : 0);
      s.stream_from = ready;
      const std::int32_t sc = matmul(s, {q[p]});
      Event e;
      e.kind = EventKind::Softmax;
      e.detail = static_cast<std::uint8_t>(SoftmaxPhase::Max);
      e.bank = p;
      e.op = osm;
      e.chunk = chunk;
      e.count = std::max<std::uint64_t>(1, nsc_count(std::int64_t{h} * rp.size() * rj.size()));
      e.lanes = lanes_;
      e.add_dep(sc, stream());
      e.add_dep(mx[p]);
      mx[p] = add(e);
    };
    for (int b : active_) score(b, b, 0, k[b]);
    ring(ok, k, score);

    for (int b : active_) {
      const TokenRange r = plan_.ranges[b];
      const std::int64_t entries = std::int64_t{h} * r.size() * n;
      const auto lse = nsc_event(EventKind::Softmax, static_cast<std::uint8_t>(SoftmaxPhase::Lse), b,
                                 osm, entries, mx[b], DepKind::Full);
      const auto ln = nsc_event(EventKind::Softmax, static_cast<std::uint8_t>(SoftmaxPhase::Ln), b,
                                osm, std::int64_t{h} * r.size(), lse, DepKind::Full);
      Event f;
      f.kind = EventKind::Softmax;
      f.detail = static_cast<std::uint8_t>(SoftmaxPhase::Finalize);
      f.bank = b;
      f.op = osm;
      f.finalizes = true;
      f.row_begin = r.begin;
      f.row_end = r.end;
      f.head_begin = 0;
      f.head_end = h;
      f.count = std::max<std::uint64_t>(1, nsc_count(entries));
      f.lanes = lanes_;
      f.add_dep(ln);
      fin[b] = add(f);
    }

    const int ka = static_cast<int>(active_.size());
    auto value = [&](int p, int j, int chunk, std::int32_t ready) {
      const TokenRange rp = plan_.ranges[p], rj = plan_.ranges[j];
      MatmulShare s;
      s.op = oav;
      s.bank = p;
      s.chunk = chunk;
      s.row_begin = rp.begin;
      s.row_end = rp.end;
      s.col_begin = rj.begin;
      s.col_end = rj.end;
      s.head_begin = 0;
      s.head_end = h;
      s.macs = std::int64_t{h} * rp.size() * rj.size() * dh;
      s.inner = rj.size();
      s.input_values = std::int64_t{rj.size()} * m.d_model + std::int64_t{h} * rp.size() * rj.size();
      s.extra_adds = chunk == 0 ? 0 : std::int64_t{rp.size()} * m.d_model / lanes_ + 1;
      s.finalizes = chunk == ka - 1;
      s.stream_from = ready;
      sv[p] = matmul(s, {chunk == 0 ? fin[p] : sv[p]});
    };
    for (int b : active_) value(b, b, 0, v[b]);
    ring(ov, v, value);

    for (int b : active_) out[b] = token_linear(oo, b, sv[b]);
    for (int b : active_) out[b] = token_norm(on, b, out[b]);
    return out;
  }

  std::int32_t token_norm(int opi, int b, std::int32_t dep) {
    const TokenRange r = plan_.ranges[b];
    Event e;
    e.kind = EventKind::Norm;
    e.bank = b;
    e.op = opi;
    e.finalizes = true;
    e.row_begin = r.begin;
    e.row_end = r.end;
    e.col_begin = 0;
    e.col_end = g_.model.d_model;
    e.count = std::max<std::uint64_t>(1, nsc_count(std::int64_t{r.size()} * g_.model.d_model));
    e.lanes = lanes_;
    e.add_dep(dep);
    return add(e);
  }

  std::vector<std::int32_t> token_ffn(int base, const std::vector<std::int32_t>& x) {
    std::vector<std::int32_t> h1(k_, -1), act(k_, -1), h2(k_, -1), out(k_, -1);
    const int dff = g_.model.d_ff;
    for (int b : active_) h1[b] = token_linear(base, b, x[b]);
    for (int b : active_) {
      const TokenRange r = plan_.ranges[b];
      Event a;
      a.kind = EventKind::Activation;
      a.bank = b;
      a.op = base + 1;
      a.finalizes = true;
      a.row_begin = r.begin;
      a.row_end = r.end;
      a.col_begin = 0;
      a.col_end = dff;
      a.count = std::max<std::uint64_t>(1, nsc_count(std::int64_t{r.size()} * dff));
      a.lanes = lanes_;
      a.add_dep(h1[b], stream());
      act[b] = add(a);
    }
    for (int b : active_) h2[b] = token_linear(base + 2, b, act[b]);
    for (int b : active_) out[b] = token_norm(base + 3, b, h2[b]);
    return out;
  }

  // ---- layer-based ------------------------------------------------------

  struct Set {
    std::vector<int> banks;
  };

  Set bank_set(int layer) const {
    const TokenRange r = layer_banks(layer, total_layers_, k_);
    Set s;
    for (int b = r.begin; b < r.end; ++b) s.banks.push_back(b);
    return s;
  }

  // Bus all-gather of per-bank column slices; returns per-bank readiness.
  std::vector<std::int32_t> gather(const Set& set, int opi, const std::vector<std::int32_t>& done,
                                   const std::vector<std::uint64_t>& slice_bits) {
    const int m = static_cast<int>(set.banks.size());
    std::vector<std::int32_t> ready(k_, -1);
    if (m == 1) {
      ready[set.banks[0]] = done[0];
      return ready;
    }
    std::int32_t last = -1;
    std::uint64_t total = 0;
    for (int s = 0; s < m; ++s) {
      if (done[s] < 0) continue;
      Event e;
      e.kind = EventKind::InterBankTransfer;
      e.detail = static_cast<std::uint8_t>(TransferKind::BankToBank);
      e.bank = set.banks[s];
      e.op = opi;
      e.bits = slice_bits[s];
      e.count = beats(e.bits);
      e.add_dep(done[s], stream());
      e.add_dep(last);
      last = add(e);
      total += slice_bits[s];
    }
    for (int s = 0; s < m; ++s) {
      const std::uint64_t incoming = total - (done[s] >= 0 ? slice_bits[s] : 0);
      const std::int32_t w = arrival_write(set.banks[s], opi, 0, incoming, last);
      ready[set.banks[s]] = w;
    }
    return ready;
  }

  std::vector<std::int32_t> layer_linear(const Set& set, int opi,
                                         const std::vector<std::int32_t>& in, bool activation) {
    const Op& op = g_.ops[opi];
    const int m = static_cast<int>(set.banks.size());
    const int n = g_.model.seq_len;
    std::vector<std::int32_t> done(m, -1);
    std::vector<std::uint64_t> bits(m, 0);
    for (int s = 0; s < m; ++s) {
      const int b = set.banks[s];
      const int c0 = slice_begin(op.cols, m, s), c1 = slice_begin(op.cols, m, s + 1);
      if (c1 <= c0) continue;
      remap(op, b, opi, n, c1 - c0);
      MatmulShare sh;
      sh.op = opi;
      sh.bank = b;
      sh.row_begin = 0;
      sh.row_end = n;
      sh.col_begin = c0;
      sh.col_end = c1;
      sh.macs = std::int64_t{n} * op.inner * (c1 - c0);
      sh.inner = op.inner;
      sh.input_values = std::int64_t{n} * op.inner;
      sh.stream_from = in[b];
      done[s] = matmul(sh, {});
      if (activation) {
        Event a;
        a.kind = EventKind::Activation;
        a.bank = b;
        a.op = opi + 1;
        a.finalizes = true;
        a.row_begin = 0;
        a.row_end = n;
        a.col_begin = c0;
        a.col_end = c1;
        a.count = std::max<std::uint64_t>(1, nsc_count(std::int64_t{n} * (c1 - c0)));
        a.lanes = lanes_;
        a.add_dep(done[s], stream());
        done[s] = add(a);
      }
      bits[s] = static_cast<std::uint64_t>(n) * (c1 - c0) * 8;
    }
    return gather(set, activation ? opi + 1 : opi, done, bits);
  }

  std::vector<std::int32_t> layer_norm(const Set& set, int opi,
                                       const std::vector<std::int32_t>& in) {
    std::vector<std::int32_t> out(k_, -1);
    const int n = g_.model.seq_len;
    for (std::size_t s = 0; s < set.banks.size(); ++s) {
      const int b = set.banks[s];
      Event e;
      e.kind = EventKind::Norm;
      e.bank = b;
      e.op = opi;
      e.finalizes = s == 0;
      e.row_begin = 0;
      e.row_end = n;
      e.col_begin = 0;
      e.col_end = g_.model.d_model;
      e.count = std::max<std::uint64_t>(1, nsc_count(std::int64_t{n} * g_.model.d_model));
      e.lanes = lanes_;
      e.add_dep(in[b]);
      out[b] = add(e);
    }
    return out;
  }

  // Moves a full N x D activation from `from` (ready on its first bank) to
  // every bank of `to`.
  std::vector<std::int32_t> handoff(const Set& from, const std::vector<std::int32_t>& ready,
                                    const Set& to, int opi) {
    std::vector<std::int32_t> out(k_, -1);
    if (from.banks == to.banks) {
      for (int b : to.banks) out[b] = ready[b];
      return out;
    }
    const std::uint64_t bits =
        static_cast<std::uint64_t>(g_.model.seq_len) * g_.model.d_model * 8;
    Event e;
    e.kind = EventKind::InterBankTransfer;
    e.detail = static_cast<std::uint8_t>(TransferKind::BankToBank);
    e.bank = from.banks[0];
    e.op = opi;
    e.bits = bits;
    e.count = beats(bits);
    e.add_dep(ready[from.banks[0]], stream());
    const std::int32_t t = add(e);
    for (int b : to.banks) out[b] = arrival_write(b, opi, 0, bits, t);
    return out;
  }

  std::vector<std::int32_t> layer_attention(const Set& set, int base,
                                            const std::vector<std::int32_t>& x,
                                            const std::vector<std::int32_t>& kv) {
    const auto& m = g_.model;
    const int h = m.heads, dh = m.head_dim(), n = m.seq_len;
    const int ms = static_cast<int>(set.banks.size());
    const auto q = layer_linear(set, base, x, false);
    const auto k = layer_linear(set, base + 1, kv, false);
    const auto v = layer_linear(set, base + 2, kv, false);
    std::vector<std::int32_t> done(ms, -1);
    std::vector<std::uint64_t> bits(ms, 0);
    for (int s = 0; s < ms; ++s) {
      const int b = set.banks[s];
      const int h0 = slice_begin(h, ms, s), h1 = slice_begin(h, ms, s + 1);
      if (h1 <= h0) continue;
      const int hs = h1 - h0;
      MatmulShare sc;
      sc.op = base + 3;
      sc.bank = b;
      sc.row_begin = 0;
      sc.row_end = n;
      sc.col_begin = 0;
      sc.col_end = n;
      sc.head_begin = h0;
      sc.head_end = h1;
      sc.macs = std::int64_t{hs} * n * n * dh;
      sc.inner = dh;
      sc.input_values = 2 * std::int64_t{n} * hs * dh;
      sc.stream_from = k[b];
      const auto s_ev = matmul(sc, {q[b]});
      const std::int64_t entries = std::int64_t{hs} * n * n;
      const auto mx = nsc_event(EventKind::Softmax, static_cast<std::uint8_t>(SoftmaxPhase::Max), b,
                                base + 4, entries, s_ev, stream());
      const auto lse = nsc_event(EventKind::Softmax, static_cast<std::uint8_t>(SoftmaxPhase::Lse), b,
                                 base + 4, entries, mx, DepKind::Full);
      const auto ln = nsc_event(EventKind::Softmax, static_cast<std::uint8_t>(SoftmaxPhase::Ln), b,
                                base + 4, std::int64_t{hs} * n, lse, DepKind::Full);
      Event f;
      f.kind = EventKind::Softmax;
      f.detail = static_cast<std::uint8_t>(SoftmaxPhase::Finalize);
      f.bank = b;
      f.op = base + 4;
      f.finalizes = true;
      f.row_begin = 0;
      f.row_end = n;
      f.head_begin = h0;
      f.head_end = h1;
      f.count = std::max<std::uint64_t>(1, nsc_count(entries));
      f.lanes = lanes_;
      f.add_dep(ln);
      const auto fin = add(f);
      MatmulShare av = sc;
      av.op = base + 5;
      av.col_begin = 0;
      av.col_end = n;
      av.inner = n;
      av.input_values = std::int64_t{n} * hs * dh + entries;
      av.stream_from = v[b];
      done[s] = matmul(av, {fin});
      bits[s] = static_cast<std::uint64_t>(n) * hs * dh * 8;
    }
    const auto attn = gather(set, base + 5, done, bits);
    const auto o = layer_linear(set, base + 6, attn, false);
    return layer_norm(set, base + 7, o);
  }

  void layer_model(int first_op, int last_op) {
    const auto& m = g_.model;
    total_layers_ = layers_override_ > 0 ? layers_override_
                    : m.architecture == workload::Architecture::EncoderDecoder ? 2 * m.layers
                                                                               : m.layers;
    const std::uint64_t act_bits = static_cast<std::uint64_t>(m.seq_len) * m.d_model * 8;
    Set cur = bank_set(g_.ops[first_op].layer);
    std::vector<std::int32_t> x(k_, -1);
    std::int32_t load = -1;
    if (opt_.host_io) load = host_transfer(cur.banks[0], act_bits, -1, -1);
    for (int b : cur.banks) x[b] = load;
    Set memory_set = cur;
    std::vector<std::int32_t> memory = x;
    bool in_decoder = false;
    int i = first_op;
    while (i < last_op) {
      const Op& op = g_.ops[i];
      const Set set = bank_set(op.layer);
      if (op.decoder && !in_decoder) {
        in_decoder = true;
        memory_set = cur;
        memory = x;
        std::int32_t t = -1;
        if (opt_.host_io) t = host_transfer(set.banks[0], act_bits, -1, -1);
        x.assign(k_, -1);
        for (int b : set.banks) x[b] = t;
        cur = set;
      }
      if (set.banks != cur.banks) {
        x = handoff(cur, x, set, i);
        cur = set;
      }
      if (op.kind == OpKind::Linear && op.block != workload::Block::FeedForward) {
        std::vector<std::int32_t> kv = x;
        if (op.block == workload::Block::DecoderCross) kv = handoff(memory_set, memory, set, i);
        x = layer_attention(set, i, x, kv);
        i += 8;
      } else {
        const auto h1 = layer_linear(set, i, x, true);
        const auto h2 = layer_linear(set, i + 2, h1, false);
        x = layer_norm(set, i + 3, h2);
        i += 4;
      }
    }
    if (opt_.host_io) host_transfer(cur.banks[0], act_bits, x[cur.banks[0]], last_op - 1);
  }

  void run(int first_op, int last_op) {
    if (opt_.mode == ShardMode::TokenBased) {
      token_model(first_op, last_op);
    } else {
      layer_model(first_op, last_op);
    }
  }

  void set_total_layers(int l) { layers_override_ = l; }

 private:
  const OpGraph& g_;
  hbm::HbmConfig hbm_;
  PlanOptions opt_;
  int k_ = 0;
  int lanes_ = 1;
  int total_layers_ = 1;
  int layers_override_ = 0;
  ShardPlan plan_;
  std::vector<int> active_;
  EventTimeline tl_;
  std::vector<std::int32_t> last_;
};

// [first, last) op range of the first block of the requested kind.
std::pair<int, int> first_block(const OpGraph& g, bool ffn) {
  for (int i = 0; i < static_cast<int>(g.ops.size()); ++i) {
    const Op& op = g.ops[i];
    if (op.kind != OpKind::Linear) continue;
    const bool is_ffn = op.block == workload::Block::FeedForward;
    if (is_ffn == ffn) return {i, i + (ffn ? 4 : 8)};
  }
  throw Error(ErrorCode::Contract, "graph has no such block");
}

}  // namespace

EventTimeline plan_model(const OpGraph& g, const hbm::HbmConfig& hbm, const PlanOptions& opt) {
  g.model.validate();
  Planner p(g, hbm, opt);
  p.run(0, static_cast<int>(g.ops.size()));
  return p.take();
}

EventTimeline plan_mha(const OpGraph& g, const hbm::HbmConfig& hbm, const PlanOptions& opt) {
  g.model.validate();
  PlanOptions o = opt;
  o.host_io = false;
  Planner p(g, hbm, o);
  p.set_total_layers(1);
  const auto [a, b] = first_block(g, false);
  p.run(a, b);
  return p.take();
}

EventTimeline plan_ffn(const OpGraph& g, const hbm::HbmConfig& hbm, const PlanOptions& opt) {
  g.model.validate();
  PlanOptions o = opt;
  o.host_io = false;
  Planner p(g, hbm, o);
  p.set_total_layers(1);
  const auto [a, b] = first_block(g, true);
  p.run(a, b);
  return p.take();
}

EventTimeline intra_bank_reduce(const VectorProduct& vp, const hbm::HbmConfig& hbm) {
  if (vp.length < 1) throw Error(ErrorCode::Contract, "vector product needs length >= 1");
  hbm::HbmConfig one = hbm;
  one.stacks = 1;
  one.channels_per_stack = 1;
  one.banks_per_channel = 1;
  workload::OpGraph g;
  PlanOptions opt;
  opt.pipelined = vp.pipelined;
  opt.momcap_capacity = vp.momcap_capacity;
  opt.host_io = false;
  Planner p(g, one, opt);
  MatmulShare s;
  s.op = -1;
  s.bank = 0;
  s.row_end = 1;
  s.col_end = 1;
  s.macs = vp.length;
  s.inner = vp.length;
  s.prepare = false;
  p.matmul(s, {});
  return p.take();
}

}  // namespace artemis::dataflow
