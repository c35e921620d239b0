#pragma once

// Built-in transformer configurations and their decomposition into the
// per-layer operation graph consumed by the dataflow engine.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "artemis/nsc_compute.hpp"

namespace artemis::workload {

enum class Architecture { EncoderOnly, EncoderDecoder };

struct ModelConfig {
  std::string name;
  std::int64_t params = 0;
  int layers = 1;
  int seq_len = 1;  // N
  int heads = 1;    // H
  int d_model = 1;  // D
  int d_ff = 1;
  Architecture architecture = Architecture::EncoderOnly;
  nsc::ActivationKind activation = nsc::ActivationKind::Gelu;

  int head_dim() const { return d_model / heads; }
  // Throws Error(Config) naming the offending field.
  void validate() const;
};

// Names are matched case-insensitively. Throws Error(Config) for unknown names.
ModelConfig builtin(std::string_view name);
std::vector<std::string> builtin_names();

enum class OpKind { Linear, AttnScore, Softmax, AttnValue, Activation, Norm };
enum class Block { EncoderSelf, DecoderSelf, DecoderCross, FeedForward };

std::string_view op_kind_name(OpKind k);

struct TensorShape {
  int rows = 0;
  int cols = 0;
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

// Attention tensors (scores, probs) are stored head-major: rows = H * N.
struct Op {
  OpKind kind = OpKind::Linear;
  Block block = Block::EncoderSelf;
  int layer = 0;
  bool decoder = false;
  bool masked = false;
  std::string output;
  std::string input;         // Linear/Activation/Norm input; AttnScore query; AttnValue probs
  std::string second_input;  // Linear weight; AttnScore keys; AttnValue values; Norm residual
  int rows = 0;              // tokens (Linear) or query tokens (attention)
  int inner = 0;             // reduction length
  int cols = 0;              // output columns (Linear) or key tokens (attention)
  int heads = 1;

  std::int64_t macs() const;
  bool is_matmul() const {
    return kind == OpKind::Linear || kind == OpKind::AttnScore || kind == OpKind::AttnValue;
  }
};

struct OpGraph {
  ModelConfig model;
  std::vector<Op> ops;
  std::map<std::string, TensorShape> tensors;  // activations and weights

  std::int64_t total_macs() const;
  // Throws Error(Contract) if any op's operand shapes do not chain.
  void validate_shapes() const;
};

OpGraph decompose(const ModelConfig& cfg);

std::int64_t mac_count(const ModelConfig& cfg);

}  // namespace artemis::workload
