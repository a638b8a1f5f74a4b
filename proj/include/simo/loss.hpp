#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "simo/autodiff.hpp"

namespace simo {

/// Divisor applied to the blended pair-term ratio.
enum class LossDivisor {
  pair_count,  // m*(m-1)/2, the number of enumerated pairs
  group_size,  // m, the number of embeddings
};

struct SimoConfig {
  double epsilon = 1e-6;              // guards the ratio denominators
  double olean = 0.1;                 // orthogonality leaning factor
  double orthogonality_weight = 1.0;  // 0 removes the o-terms entirely
  LossDivisor divisor = LossDivisor::pair_count;

  /// Throws ConfigError unless epsilon > 0, 0 <= olean <= 0.5 and
  /// orthogonality_weight >= 0.
  void validate() const;
};

/// Squared Euclidean distance and squared dot product of one embedding pair.
struct PairTerms {
  double d = 0.0;
  double o = 0.0;
};

/// d = ||a - b||^2, o = (a . b)^2. Symmetric in its arguments.
PairTerms pair_terms(std::span<const double> a, std::span<const double> b);

/// Blended ratio loss over all i<j pairs of the rows of `embeddings`
/// (an m x dim matrix node, m >= 2):
///
///   y * [sum_d / (eps + w*sum_o)] / P  +  (1-y) * [w*sum_o / (eps + sum_d)] / P
///
/// with P the configured divisor. Differentiable w.r.t. the embeddings.
Value simo_loss(Tape& tape, Value embeddings, double y, const SimoConfig& config);

/// Sum of simo_loss over equal-size groups, ascending group order.
Value grouped_loss(Tape& tape, const std::vector<Value>& groups, double y,
                   const SimoConfig& config);

/// Convenience overload: `stacked` holds num_groups contiguous groups of
/// equal row count ((G*m) x dim). Errors if rows are not divisible by G.
Value grouped_loss(Tape& tape, Value stacked, std::size_t num_groups, double y,
                   const SimoConfig& config);

}  // namespace simo
