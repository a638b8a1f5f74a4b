#include "simo/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "simo/errors.hpp"
#include "simo/log.hpp"

namespace simo {

BatchSpec BatchSpec::make(std::size_t batch_size, std::size_t k,
                          std::size_t total_dataset_classes, std::uint64_t seed) {
  if (k < 2) throw ConfigError("batch: k must be >= 2");
  if (batch_size == 0 || batch_size % k != 0) {
    throw ConfigError("batch: batch_size (" + std::to_string(batch_size) +
                      ") must be a positive multiple of k (" + std::to_string(k) + ")");
  }
  BatchSpec spec;
  spec.batch_size = batch_size;
  spec.k = k;
  spec.num_classes_per_batch = batch_size / k;
  spec.total_dataset_classes = total_dataset_classes;
  spec.seed = seed;

  const std::size_t c = spec.num_classes_per_batch;
  if (c < 2) {
    throw ConfigError("batch: need at least 2 classes per batch, got " + std::to_string(c));
  }
  if (c > total_dataset_classes) {
    throw ConfigError("batch: " + std::to_string(c) + " classes per batch exceeds the " +
                      std::to_string(total_dataset_classes) + " dataset classes");
  }
  // Class-sampling rule: strictly under half the dataset's classes per batch.
  // The algorithmic minimum of 2 is always admitted (otherwise datasets with
  // fewer than 5 classes could not be trained at all).
  const std::size_t half = (total_dataset_classes + 1) / 2;
  if (c != 2 && c >= half) {
    throw ConfigError("batch: " + std::to_string(c) +
                      " classes per batch violates the <50% class-sampling rule for " +
                      std::to_string(total_dataset_classes) + " dataset classes");
  }
  return spec;
}

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate > 0.0) && learning_rate != 0.0) {
    throw ConfigError("train: learning_rate must be >= 0");
  }
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (log_period < 1) throw ConfigError("train: log_period must be >= 1");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), lr_(learning_rate) {}

void Optimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: parameter/gradient count mismatch");
  }
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      for (std::size_t j = 0; j < p.numel(); ++j) p[j] -= lr_ * g[j];
    }
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g[j];
      v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

Batch sample_batch(const Dataset& dataset, const BatchSpec& spec, Rng& rng) {
  if (dataset.num_classes != spec.total_dataset_classes) {
    throw DataError("batch: spec expects " + std::to_string(spec.total_dataset_classes) +
                    " dataset classes, dataset has " + std::to_string(dataset.num_classes));
  }
  const std::size_t c = spec.num_classes_per_batch;
  const std::size_t k = spec.k;

  // Partial Fisher-Yates over the class ids, then over each class's rows.
  std::vector<std::size_t> classes(dataset.num_classes);
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = i;
  for (std::size_t i = 0; i < c; ++i) {
    const std::size_t j = i + rng.below(classes.size() - i);
    std::swap(classes[i], classes[j]);
  }

  const std::size_t d = dataset.feature_dim();
  Batch batch;
  batch.inputs = Tensor({c * k, d});
  batch.class_ids.resize(c);
  std::vector<std::size_t> rows;
  for (std::size_t ci = 0; ci < c; ++ci) {
    const std::size_t cls = classes[ci];
    batch.class_ids[ci] = static_cast<int>(cls);
    const std::vector<std::size_t>& pool = dataset.class_index[cls];
    if (pool.size() < k) {
      throw DataError("batch: class " + std::to_string(cls) + " holds only " +
                      std::to_string(pool.size()) + " examples, need k=" + std::to_string(k));
    }
    rows = pool;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.below(rows.size() - i);
      std::swap(rows[i], rows[j]);
      const std::size_t src = rows[i];
      for (std::size_t col = 0; col < d; ++col) {
        batch.inputs.at(ci * k + i, col) = dataset.features.at(src, col);
      }
    }
  }
  return batch;
}

std::vector<std::vector<std::size_t>> cross_class_groups(std::size_t num_classes,
                                                         std::size_t k) {
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t g = 0; g < k; ++g) {
    groups[g].resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) groups[g][c] = c * k + g;
  }
  return groups;
}

BatchLossNodes batch_loss_on_tape(Tape& tape, Value embeddings, const BatchSpec& spec,
                                  const SimoConfig& config) {
  const std::size_t c = spec.num_classes_per_batch;
  const std::size_t k = spec.k;
  const Tensor& e = tape.value(embeddings);
  if (!e.is_matrix() || e.shape()[0] != c * k) {
    throw ShapeError("batch loss: embeddings shape " + e.shape_str() + " does not match " +
                     std::to_string(c) + " classes x k=" + std::to_string(k));
  }
  if (k < 2 || c < 2) {
    throw ConfigError("batch loss: every similar group needs k >= 2 and every dissimilar "
                      "group needs >= 2 classes");
  }

  BatchLossNodes nodes;
  // Similar: one group per class block, label 1 (no orthogonality leaning).
  std::vector<Value> class_groups;
  class_groups.reserve(c);
  for (std::size_t ci = 0; ci < c; ++ci) {
    std::vector<std::size_t> rows(k);
    for (std::size_t i = 0; i < k; ++i) rows[i] = ci * k + i;
    class_groups.push_back(tape.gather_rows(embeddings, std::move(rows)));
  }
  nodes.l_similar = grouped_loss(tape, class_groups, 1.0, config);

  // Mean-dissimilar: per-class mean embeddings, label olean.
  std::vector<Value> means;
  means.reserve(c);
  for (std::size_t ci = 0; ci < c; ++ci) means.push_back(tape.mean(class_groups[ci]));
  nodes.l_mean_dissimilar = simo_loss(tape, tape.stack_rows(means), config.olean, config);

  // Dissimilar: k transposed groups holding one embedding per class,
  // label olean.
  std::vector<Value> diss_groups;
  diss_groups.reserve(k);
  for (std::vector<std::size_t>& rows : cross_class_groups(c, k)) {
    diss_groups.push_back(tape.gather_rows(embeddings, std::move(rows)));
  }
#ifndef NDEBUG
  for (std::size_t g = 0; g < k; ++g) {
    const Tensor& grp = tape.value(diss_groups[g]);
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t col = 0; col < grp.shape()[1]; ++col) {
        if (grp.at(ci, col) != e.at(ci * k + g, col)) {
          throw Error("batch loss: dissimilar group layout mismatch");
        }
      }
    }
  }
#endif
  nodes.l_dissimilar = grouped_loss(tape, diss_groups, config.olean, config);

  nodes.total = tape.add(tape.add(nodes.l_similar, nodes.l_mean_dissimilar), nodes.l_dissimilar);
  return nodes;
}

namespace {

std::string pair_term_extrema(const Tensor& embeddings) {
  const std::size_t m = embeddings.rows();
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  double omin = std::numeric_limits<double>::infinity(), omax = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const PairTerms t = pair_terms(embeddings.row(i), embeddings.row(j));
      dmin = std::min(dmin, t.d);
      dmax = std::max(dmax, t.d);
      omin = std::min(omin, t.o);
      omax = std::max(omax, t.o);
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "d in [%.6g, %.6g], o in [%.6g, %.6g]", dmin, dmax, omin,
                omax);
  return buf;
}

}  // namespace

LossBreakdown afcl_step(ModelParams& params, Optimizer& optimizer, const Batch& batch,
                        const BatchSpec& spec, const SimoConfig& config) {
  Tape tape;
  const Value inputs = tape.constant(batch.inputs);
  std::vector<Value> param_leaves;
  const Value embeddings = encode_on_tape(tape, params, inputs, &param_leaves);
  const BatchLossNodes nodes = batch_loss_on_tape(tape, embeddings, spec, config);

  LossBreakdown breakdown;
  breakdown.l_similar = tape.value(nodes.l_similar).scalar_value();
  breakdown.l_mean_dissimilar = tape.value(nodes.l_mean_dissimilar).scalar_value();
  breakdown.l_dissimilar = tape.value(nodes.l_dissimilar).scalar_value();
  breakdown.total = tape.value(nodes.total).scalar_value();
  if (!std::isfinite(breakdown.total)) {
    throw NumericError("afcl step: non-finite loss; batch pair terms: " +
                       pair_term_extrema(tape.value(embeddings)));
  }

  const Gradients grads = tape.backward(nodes.total);
  std::vector<Tensor> param_grads;
  param_grads.reserve(param_leaves.size());
  for (Value leaf : param_leaves) param_grads.push_back(grads.at(leaf));
  optimizer.step(params.parameters(), param_grads);
  return breakdown;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.size() == 0) throw DataError("train: empty dataset");

  Architecture arch = config.arch;
  if (arch.input_dim == 0) arch.input_dim = dataset.feature_dim();
  if (arch.input_dim != dataset.feature_dim()) {
    throw ConfigError("train: architecture input_dim " + std::to_string(arch.input_dim) +
                      " does not match dataset feature dim " +
                      std::to_string(dataset.feature_dim()));
  }

  TrainResult result;
  result.params = init_model(arch, config.seed);
  Optimizer optimizer(config.optimizer, config.learning_rate);
  Rng batch_rng(Rng::derive_seed(config.batch.seed, 0x6261746368ULL));

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const Batch batch = sample_batch(dataset, config.batch, batch_rng);
    LossBreakdown losses;
    try {
      losses = afcl_step(result.params, optimizer, batch, config.batch, config.loss);
    } catch (const NumericError& err) {
      throw NumericError("train: step " + std::to_string(it) + ": " + err.what());
    }
    if (it % config.log_period == 0) {
      result.history.push_back({it, losses});
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "iter %zu: total=%.6g similar=%.6g mean_dissimilar=%.6g dissimilar=%.6g",
                    it, losses.total, losses.l_similar, losses.l_mean_dissimilar,
                    losses.l_dissimilar);
      log::debug(buf);
    }
  }
  log::info("training finished after " + std::to_string(config.iterations) + " iterations");
  return result;
}

void write_metrics_csv(const std::vector<MetricsRow>& history, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("metrics: cannot open " + path + " for writing");
  os << "iteration,l_similar,l_mean_dissimilar,l_dissimilar,total\n";
  char buf[360];
  for (const MetricsRow& row : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", row.iteration,
                  row.losses.l_similar, row.losses.l_mean_dissimilar, row.losses.l_dissimilar,
                  row.losses.total);
    os << buf;
  }
  if (!os) throw DataError("metrics: write failed for " + path);
}

namespace {

Tensor one_hot(const std::vector<int>& labels, std::size_t begin, std::size_t count,
               const std::vector<std::size_t>& order, std::size_t num_classes) {
  Tensor t({count, num_classes});
  for (std::size_t i = 0; i < count; ++i) {
    t.at(i, static_cast<std::size_t>(labels[order[begin + i]])) = 1.0;
  }
  return t;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.rows();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (static_cast<int>(best) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

ProbeResult train_probe(const Tensor& train_embeddings, const std::vector<int>& train_labels,
                        const Tensor& test_embeddings, const std::vector<int>& test_labels,
                        std::size_t num_classes, const ProbeTrainConfig& config) {
  const std::size_t n = train_embeddings.rows();
  if (n == 0 || test_embeddings.rows() == 0) throw DataError("probe: empty split");
  if (train_labels.size() != n || test_labels.size() != test_embeddings.rows()) {
    throw DataError("probe: label count does not match embeddings");
  }
  const std::size_t dim = train_embeddings.shape()[1];

  ProbeResult result;
  result.probe = init_probe(dim, config.hidden, num_classes,
                            Rng::derive_seed(config.seed, 0x70726f6265ULL));
  Optimizer optimizer(config.optimizer, config.learning_rate);
  Rng rng(Rng::derive_seed(config.seed, 0x7368756666ULL));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const std::size_t bs = std::max<std::size_t>(1, config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t count = std::min(bs, n - begin);
      Tensor mb({count, dim});
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[begin + i];
        for (std::size_t c = 0; c < dim; ++c) mb.at(i, c) = train_embeddings.at(src, c);
      }
      Tape tape;
      const Value emb = tape.constant(std::move(mb));
      const Value targets = tape.constant(one_hot(train_labels, begin, count, order, num_classes));
      std::vector<Value> leaves;
      const Value logits = probe_on_tape(tape, result.probe, emb, &leaves);
      const Value loss = tape.softmax_cross_entropy(logits, targets);
      if (!std::isfinite(tape.value(loss).scalar_value())) {
        throw NumericError("probe: non-finite loss");
      }
      const Gradients grads = tape.backward(loss);
      std::vector<Tensor> param_grads;
      for (Value leaf : leaves) param_grads.push_back(grads.at(leaf));
      optimizer.step(result.probe.parameters(), param_grads);
    }
  }
  result.train_accuracy = accuracy(probe_forward(result.probe, train_embeddings), train_labels);
  result.test_accuracy = accuracy(probe_forward(result.probe, test_embeddings), test_labels);
  return result;
}

ProbeResult linear_probe(const ModelParams& frozen, const Dataset& train_split,
                         const Dataset& test_split, const ProbeTrainConfig& config) {
  if (train_split.size() == 0 || test_split.size() == 0) {
    throw DataError("probe: empty split");
  }
  const Tensor train_emb = encode(frozen, train_split.features);
  const Tensor test_emb = encode(frozen, test_split.features);
  const std::size_t num_classes = std::max(train_split.num_classes, test_split.num_classes);
  return train_probe(train_emb, train_split.labels, test_emb, test_split.labels, num_classes,
                     config);
}

}  // namespace simo
