#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simo/autodiff.hpp"
#include "simo/tensor.hpp"

namespace simo {

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {256, 64};
  std::size_t embedding_dim = 16;

  /// All layer widths in order: input, hidden..., embedding.
  std::vector<std::size_t> widths() const;
  bool operator==(const Architecture&) const = default;
};

struct DenseLayer {
  Tensor w;  // in x out
  Tensor b;  // out
};

struct LayerNormParams {
  Tensor gamma;  // out, init 1
  Tensor beta;   // out, init 0
};

/// Encoder parameters: dense -> layer_norm -> relu per hidden layer, then a
/// dense projection squashed elementwise by the logistic into [0,1]^dim.
struct ModelParams {
  Architecture arch;
  std::vector<DenseLayer> dense;      // hidden.size() + 1 layers
  std::vector<LayerNormParams> norms; // hidden.size()

  /// Parameter tensors in declaration order (w0, b0, gamma0, beta0, w1, ...);
  /// this is also the checkpoint serialization order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  bool all_finite() const;
};

/// He-style uniform fan-in init for dense weights, zero biases, (1, 0)
/// layer-norm scale/shift. Deterministic per seed.
ModelParams init_model(const Architecture& arch, std::uint64_t seed);

/// Encoder graph on a tape. `param_leaves` (optional) receives the leaf
/// handles in ModelParams::parameters() order for gradient extraction.
Value encode_on_tape(Tape& tape, const ModelParams& params, Value inputs,
                     std::vector<Value>* param_leaves = nullptr);

/// Plain forward pass: batch (n x input_dim) -> embeddings (n x dim) in
/// [0,1]. Errors on width mismatch or non-finite input.
Tensor encode(const ModelParams& params, const Tensor& inputs);

/// Linear-probe head: one hidden relu layer then class logits.
struct ProbeParams {
  Tensor w1;  // embedding_dim x hidden
  Tensor b1;  // hidden
  Tensor w2;  // hidden x num_classes
  Tensor b2;  // num_classes

  std::vector<Tensor*> parameters();
};

ProbeParams init_probe(std::size_t embedding_dim, std::size_t hidden, std::size_t num_classes,
                       std::uint64_t seed);

Value probe_on_tape(Tape& tape, const ProbeParams& probe, Value embeddings,
                    std::vector<Value>* param_leaves = nullptr);

/// Class logits, one row per embedding.
Tensor probe_forward(const ProbeParams& probe, const Tensor& embeddings);

/// Checkpoint format: "SIMO" magic, u32 version, u32 width count, u32 widths,
/// then the parameter arrays as row-major little-endian f64 in declaration
/// order.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace simo
