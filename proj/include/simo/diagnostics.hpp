#pragma once

#include <string>
#include <vector>

#include "simo/dataset.hpp"
#include "simo/loss.hpp"
#include "simo/model.hpp"
#include "simo/semimetric.hpp"
#include "simo/tensor.hpp"

namespace simo {

enum class SimilarityKind { pairwise, class_mean };
enum class SimilarityKernel { d_prime, d_double_prime };

/// Symmetric matrix of d'(x_i, x_j) (or d'' behind the kernel flag) over
/// either the given embeddings or their class means. When `normalize` is set
/// the off-diagonal entries are min-max scaled to [0,1] (a constant positive
/// off-diagonal maps to 1); the diagonal, zero for d' before normalization,
/// is left at its raw value.
Tensor similarity_matrix(const Tensor& embeddings, const std::vector<int>& labels,
                         const SimoConfig& config, SimilarityKind kind, bool normalize = true,
                         SimilarityKernel kernel = SimilarityKernel::d_prime);

/// exp(Shannon entropy of the singular values normalized to sum 1) of the
/// row matrix. Scale- and permutation-invariant; errors on an all-zero
/// matrix.
double effective_rank(const Tensor& rows);

struct DiagnosticsReport {
  Tensor pairwise_matrix;    // S x S, normalized
  Tensor class_mean_matrix;  // C x C, normalized
  double effective_rank = 0.0;  // of the class-mean matrix
  double mean_intra_distance = 0.0;
  double mean_inter_distance = 0.0;
  double mean_inter_squared_dot = 0.0;
  SemiMetricReport semimetric;
  std::string kernel = "d_prime";
  std::string normalization = "min-max over off-diagonal entries";
  double epsilon = 0.0;

  std::string to_json() const;
};

struct DiagnosticsOptions {
  std::size_t pairwise_sample = 64;  // rows sampled for the pairwise matrix
  std::size_t semimetric_trials = 200;
  std::uint64_t seed = 0;
  SimilarityKernel kernel = SimilarityKernel::d_prime;
};

/// Full embedding-space analysis on encoded data: similarity matrices,
/// class-mean effective rank, intra/inter statistics and a semi-metric check
/// sampled from the embeddings themselves.
DiagnosticsReport diagnose(const Tensor& embeddings, const std::vector<int>& labels,
                           std::size_t num_classes, const SimoConfig& config,
                           const DiagnosticsOptions& options);

/// Per-class mean embeddings (C x dim), classes ascending.
Tensor class_means(const Tensor& embeddings, const std::vector<int>& labels,
                   std::size_t num_classes);

/// CSV "label,e0,...,e{dim-1}" with 17 significant digits, one row per
/// sample.
void export_embeddings(const Dataset& dataset, const ModelParams& params,
                       const std::string& path);

/// Reads the export back (header + rows). Returns labels and embeddings.
std::pair<std::vector<int>, Tensor> import_embeddings(const std::string& path);

void write_matrix_csv(const Tensor& matrix, const std::string& path);

}  // namespace simo
