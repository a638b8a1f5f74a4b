#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simo/dataset.hpp"
#include "simo/loss.hpp"
#include "simo/model.hpp"
#include "simo/rng.hpp"

namespace simo {

/// Class-structured batch geometry: batch_size rows laid out class-major as
/// num_classes_per_batch blocks of k samples.
struct BatchSpec {
  std::size_t batch_size = 96;
  std::size_t k = 32;
  std::size_t num_classes_per_batch = 3;  // batch_size / k
  std::size_t total_dataset_classes = 0;
  std::uint64_t seed = 0;

  static BatchSpec make(std::size_t batch_size, std::size_t k,
                        std::size_t total_dataset_classes, std::uint64_t seed);
};

struct Batch {
  Tensor inputs;               // (num_classes * k) x feature, class-major
  std::vector<int> class_ids;  // one per class block
};

struct LossBreakdown {
  double l_similar = 0.0;
  double l_mean_dissimilar = 0.0;
  double l_dissimilar = 0.0;
  double total = 0.0;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  BatchSpec batch;
  SimoConfig loss;
  Architecture arch;  // input_dim filled from the dataset if 0
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::size_t iterations = 1;
  std::size_t log_period = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adam (beta1 .9, beta2 .999, eps 1e-8) or plain SGD over a fixed list of
/// parameter tensors. State is kept per slot, lazily shaped.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Uniformly samples num_classes_per_batch distinct classes, then k examples
/// per class without replacement, class-major. Errors (naming the class) if
/// a sampled class holds fewer than k examples.
Batch sample_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng);

/// Row indices of the k cross-class groups: group g holds row c*k+g for each
/// class block c (the transpose of the class-major layout).
std::vector<std::vector<std::size_t>> cross_class_groups(std::size_t num_classes, std::size_t k);

/// The three loss terms on an already-encoded batch. Exposed for the oracle
/// and ablation tests; afcl_step uses it verbatim.
struct BatchLossNodes {
  Value l_similar;
  Value l_mean_dissimilar;
  Value l_dissimilar;
  Value total;
};
BatchLossNodes batch_loss_on_tape(Tape& tape, Value embeddings, const BatchSpec& spec,
                                  const SimoConfig& config);

/// One optimization step: encode, three-term loss, backward, update.
/// Throws NumericError (with pair-term extrema) if the loss is non-finite.
LossBreakdown afcl_step(ModelParams& params, Optimizer& optimizer, const Batch& batch,
                        const BatchSpec& spec, const SimoConfig& config);

struct MetricsRow {
  std::size_t iteration = 0;
  LossBreakdown losses;
};

struct TrainResult {
  ModelParams params;
  std::vector<MetricsRow> history;  // one row per log period
};

TrainResult train(const Dataset& dataset, const TrainConfig& config);

/// Writes "iteration,l_similar,l_mean_dissimilar,l_dissimilar,total" rows
/// with 17-significant-digit doubles (byte-reproducible).
void write_metrics_csv(const std::vector<MetricsRow>& history, const std::string& path);

struct ProbeTrainConfig {
  std::size_t hidden = 128;
  std::size_t epochs = 1;
  double learning_rate = 0.02;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  ProbeParams probe;
};

/// Trains a probe head on fixed embeddings (cross-entropy, minibatched).
ProbeResult train_probe(const Tensor& train_embeddings, const std::vector<int>& train_labels,
                        const Tensor& test_embeddings, const std::vector<int>& test_labels,
                        std::size_t num_classes, const ProbeTrainConfig& config);

/// Encodes both splits with the frozen encoder and trains only the probe.
ProbeResult linear_probe(const ModelParams& frozen, const Dataset& train_split,
                         const Dataset& test_split, const ProbeTrainConfig& config);

}  // namespace simo
