#pragma once

// Maps a decomposed transformer onto the bank topology under token-based or
// layer-based sharding and emits the event timeline the cost model times and
// the functional executor evaluates.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "artemis/hbm_topology.hpp"
#include "artemis/workload_models.hpp"

namespace artemis::dataflow {

enum class ShardMode { TokenBased, LayerBased };

std::string_view shard_mode_name(ShardMode m);

struct TokenRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
};

struct ShardPlan {
  ShardMode mode = ShardMode::TokenBased;
  int tokens = 0;           // N
  int banks = 0;            // K
  int tokens_per_bank = 0;  // N_b
  std::vector<TokenRange> ranges;  // one per bank

  int active_banks() const;
};

ShardPlan shard_tokens(int n, int k, ShardMode mode);

// Banks [first, last) serving layer `layer` of `total_layers` under layer-based
// sharding. With fewer banks than layers, layers share banks round robin.
TokenRange layer_banks(int layer, int total_layers, int banks);

enum class EventKind : std::uint8_t {
  MacBatch,
  AtoB,
  NscReduce,
  Softmax,
  BtoTcu,
  IntraBankLatchMove,
  InterBankTransfer,
  RingBroadcastStep,
  RowWrite,
  Activation,
  Norm,
};
inline constexpr int kEventKindCount = 11;

std::string_view event_kind_name(EventKind k);

enum class SoftmaxPhase : std::uint8_t { Max, Lse, Ln, Finalize };
enum class WriteKind : std::uint8_t { Arrival, Remap, Operand };
enum class TransferKind : std::uint8_t { BankToBank, HostIo };

enum class DepKind : std::uint8_t { Full, Stream };

struct Dep {
  std::int32_t index = -1;
  DepKind kind = DepKind::Full;
};

enum class ResourceClass : std::uint8_t { Array, Latch, Nsc, Link, Bus };

struct Resource {
  ResourceClass cls = ResourceClass::Array;
  int index = 0;
};

// One aggregated event: `count` back-to-back invocations of the same
// primitive on one resource. Transfers carry `bits`.
struct Event {
  EventKind kind = EventKind::MacBatch;
  std::uint8_t detail = 0;  // SoftmaxPhase / WriteKind / TransferKind
  bool bypassable = false;  // write eliminated when pipelined
  bool finalizes = false;   // last event producing this op's block
  std::int32_t bank = -1;   // owning bank (receiver for transfers)
  std::int32_t link = -1;   // ring link (sender bank) for ring steps
  std::int32_t op = -1;     // OpGraph index
  std::int32_t chunk = 0;   // ring step, wave or group index
  std::int32_t row_begin = 0, row_end = 0;
  std::int32_t col_begin = 0, col_end = 0;
  std::int32_t head_begin = 0, head_end = 0;
  std::int32_t lanes = 1;
  std::uint64_t count = 1;
  std::uint64_t bits = 0;
  std::array<Dep, 4> deps{};
  std::uint8_t dep_count = 0;
  double start_ns = 0.0;
  double duration_ns = 0.0;

  double finish_ns() const { return start_ns + duration_ns; }
  void add_dep(std::int32_t index, DepKind kind = DepKind::Full);
};

struct EventTimeline {
  std::vector<Event> events;
  int banks = 0;
  int links = 0;
  bool pipelined = false;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  std::int32_t push(const Event& e);
  int resource_count() const { return 3 * banks + links + 1; }
};

Resource resource_of(const Event& e);
int resource_slot(const Resource& r, int banks);
std::string resource_label(const Resource& r);

// CSV: kind,detail,resource,bank,op,chunk,count,bits,start_ns,duration_ns
void write_timeline_csv(const EventTimeline& tl, std::ostream& os);

struct PlanOptions {
  ShardMode mode = ShardMode::TokenBased;
  bool pipelined = true;
  int momcap_capacity = 20;
  int tokens_per_bank_wave = 32;
  bool host_io = true;
};

// Whole-model plan: every layer of the graph plus host input/output.
EventTimeline plan_model(const workload::OpGraph& graph, const hbm::HbmConfig& hbm,
                         const PlanOptions& opt);

// Attention block of encoder layer 0 only.
EventTimeline plan_mha(const workload::OpGraph& graph, const hbm::HbmConfig& hbm,
                       const PlanOptions& opt);

// Feed-forward block of encoder layer 0 only.
EventTimeline plan_ffn(const workload::OpGraph& graph, const hbm::HbmConfig& hbm,
                       const PlanOptions& opt);

struct RingStep {
  int step = 0;      // 0-based; K-1 steps in total
  int sender = 0;
  int receiver = 0;  // sender + 1 mod K
  int shard = 0;     // origin bank of the forwarded shard
  std::uint64_t bits = 0;
};

// At step t bank i forwards to i+1 the shard it received at step t-1 (its own
// shard at step 0).
std::vector<RingStep> ring_broadcast(int k, std::uint64_t payload_bits);

struct VectorProduct {
  std::int64_t length = 0;   // products
  int momcap_capacity = 20;
  bool pipelined = false;
};

// One bank's multiply/convert/reduce chain for `length` products spread over
// the active subarrays and tiles of `hbm`'s bank.
EventTimeline intra_bank_reduce(const VectorProduct& vp, const hbm::HbmConfig& hbm);

}  // namespace artemis::dataflow
