#include "simo/loss.hpp"

#include <string>

#include "simo/errors.hpp"

namespace simo {

void SimoConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("simo: epsilon must be > 0");
  if (!(olean >= 0.0 && olean <= 0.5)) throw ConfigError("simo: olean must be in [0, 0.5]");
  if (!(orthogonality_weight >= 0.0)) {
    throw ConfigError("simo: orthogonality_weight must be >= 0");
  }
}

PairTerms pair_terms(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("pair_terms: dimension mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  PairTerms t;
  double dp = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] - b[c];
    t.d += diff * diff;
    dp += a[c] * b[c];
  }
  t.o = dp * dp;
  return t;
}

Value simo_loss(Tape& tape, Value embeddings, double y, const SimoConfig& config) {
  config.validate();
  if (!(y >= 0.0 && y <= 1.0)) throw ConfigError("simo_loss: label must be in [0, 1]");
  const Tensor& e = tape.value(embeddings);
  if (!e.is_matrix()) {
    throw ShapeError(std::string("simo_loss: expected matrix of embeddings, got ") +
                     e.shape_str());
  }
  const std::size_t m = e.shape()[0];
  if (m < 2) {
    throw ShapeError("simo_loss: need at least 2 embeddings, got " + std::to_string(m));
  }
  if (!e.all_finite()) throw NumericError("simo_loss: non-finite embedding");

  const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  const double divisor = config.divisor == LossDivisor::pair_count ? pairs
                                                                   : static_cast<double>(m);

  const Value sum_d = tape.pairwise_sqdist_sum(embeddings);
  const Value sum_o = tape.scale(tape.pairwise_sqdot_sum(embeddings),
                                 config.orthogonality_weight);
  const Value similar_loss = tape.div_by(tape.ratio_eps(sum_d, sum_o, config.epsilon), divisor);
  const Value dissimilar_loss =
      tape.div_by(tape.ratio_eps(sum_o, sum_d, config.epsilon), divisor);
  return tape.add(tape.scale(similar_loss, y), tape.scale(dissimilar_loss, 1.0 - y));
}

Value grouped_loss(Tape& tape, const std::vector<Value>& groups, double y,
                   const SimoConfig& config) {
  if (groups.empty()) throw ShapeError("grouped_loss: no groups given");
  const std::size_t m = tape.value(groups[0]).rows();
  for (Value g : groups) {
    if (tape.value(g).rows() != m) {
      throw ShapeError("grouped_loss: ragged groups (" + std::to_string(m) + " vs " +
                       std::to_string(tape.value(g).rows()) + " rows)");
    }
  }
  Value total = simo_loss(tape, groups[0], y, config);
  for (std::size_t g = 1; g < groups.size(); ++g) {
    total = tape.add(total, simo_loss(tape, groups[g], y, config));
  }
  return total;
}

Value grouped_loss(Tape& tape, Value stacked, std::size_t num_groups, double y,
                   const SimoConfig& config) {
  const Tensor& e = tape.value(stacked);
  if (!e.is_matrix()) {
    throw ShapeError(std::string("grouped_loss: expected matrix, got ") + e.shape_str());
  }
  if (num_groups == 0 || e.shape()[0] % num_groups != 0) {
    throw ShapeError("grouped_loss: ragged groups (" + std::to_string(e.shape()[0]) +
                     " rows into " + std::to_string(num_groups) + " groups)");
  }
  const std::size_t m = e.shape()[0] / num_groups;
  std::vector<Value> groups;
  groups.reserve(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    std::vector<std::size_t> rows(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = g * m + i;
    groups.push_back(tape.gather_rows(stacked, std::move(rows)));
  }
  return grouped_loss(tape, groups, y, config);
}

}  // namespace simo
