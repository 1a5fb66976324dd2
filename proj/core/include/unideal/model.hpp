#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "unideal/nn.hpp"

namespace unideal {

// Layer widths [in_dim, hidden..., class_count] plus how many trailing layers
// form the task head. head_depth defaults to 1: the head is the final linear
// layer, which keeps head signatures equal across heterogeneous extractors as
// long as the final hidden width is shared.
struct Architecture {
  std::vector<int> layer_dims;
  int head_depth = 1;

  int num_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int in_dim() const { return layer_dims.front(); }
  int class_count() const { return layer_dims.back(); }
  int extractor_layer_count() const { return num_layers() - head_depth; }

  // Dimension chain of the head layers, e.g. [16, 3] for a one-layer head.
  std::vector<int> head_dims() const;
  std::vector<int> extractor_dims() const;

  void validate() const;  // throws ConfigError

  bool operator==(const Architecture&) const = default;
};

// Flat copy of a contiguous layer chain's parameters.
//
// Canonical flattening order: layer-major; within a layer, weights row-major
// then biases. The signature is the chain's dimension sequence.
//
// Wire format (little-endian): u32 signature length, u32 per dimension, then
// one f32 per value in canonical order. Values live in f64 in memory; the
// 32-bit payload exists for byte-exact communication accounting and export.
// payload_bytes() is the per-round transmitted size: the signature is
// exchanged once at session setup, not per round.
struct ParamSnapshot {
  std::vector<int> signature;
  std::vector<double> values;

  std::size_t param_count() const { return values.size(); }
  std::size_t payload_bytes() const { return 4 * values.size(); }

  std::vector<std::uint8_t> serialize() const;
  static ParamSnapshot deserialize(std::span<const std::uint8_t> bytes);

  bool operator==(const ParamSnapshot&) const = default;
};

using HeadSnapshot = ParamSnapshot;

// Snapshot of a layer chain whose first input width is `in_dim`.
ParamSnapshot snapshot_layers(const std::vector<DenseLayer>& layers, int in_dim);

// Writes snapshot values back into a shape-identical chain.
void install_layers(std::vector<DenseLayer>& layers, int in_dim,
                    const ParamSnapshot& snapshot);

// Reconstructs a layer chain from a snapshot. When `ends_with_logits` the last
// layer gets identity activation (it produces logits); every other layer is
// ReLU, matching model construction.
std::vector<DenseLayer> layers_from_snapshot(const ParamSnapshot& snapshot,
                                             bool ends_with_logits);

// An MLP split into extractor parameters and head parameters. Every layer
// belongs to exactly one of the two chains.
struct DecoupledModel {
  Architecture arch;
  std::vector<DenseLayer> extractor;
  std::vector<DenseLayer> head;

  static DecoupledModel init(const Architecture& arch, Rng& rng);

  std::vector<int> head_signature() const { return arch.head_dims(); }

  HeadSnapshot head_snapshot() const;
  void install_head(const HeadSnapshot& snapshot);

  ParamSnapshot full_snapshot() const;
  void install_full(const ParamSnapshot& snapshot);

  ParamSnapshot extractor_snapshot() const;
  void install_extractor(const ParamSnapshot& snapshot);

  // Student path: extractor then local head.
  Matrix logits(const Matrix& inputs) const;
};

struct DualForward {
  std::vector<Matrix> extractor_acts;   // cached for backward
  std::vector<Matrix> student_head_acts;
  Matrix teacher_logits;                // shared features through the global head
  Matrix student_logits;                // shared features through the local head

  const Matrix& features() const { return extractor_acts.back(); }
};

// Both logit sets come from the same extractor features; the teacher uses the
// global head snapshot, the student the model's own head.
DualForward forward_dual(const DecoupledModel& model, const HeadSnapshot& global_head,
                         const Matrix& inputs);

// Random MLP architecture: hidden depth and widths drawn uniformly from the
// given inclusive ranges, head_depth 1. If shared_last_hidden > 0 the final
// hidden width is pinned to it so heterogeneous clients keep identical head
// signatures.
Architecture generate_hetero_arch(std::uint64_t seed, int in_dim, int class_count,
                                  std::pair<int, int> depth_range,
                                  std::pair<int, int> width_range,
                                  int shared_last_hidden = 0);

struct HeadFraction {
  std::size_t head_params = 0;
  std::size_t total_params = 0;
  double fraction = 0.0;
};

HeadFraction head_fraction(const Architecture& arch);

}  // namespace unideal
