#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simo/tensor.hpp"

namespace simo {

/// Immutable labeled dataset. Features live in [0,1]; class_index partitions
/// [0, N) with sorted, disjoint per-class row lists.
struct Dataset {
  Tensor features;  // N x D
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> class_index;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return features.is_matrix() ? features.shape()[1] : 0; }

  /// Rebuilds class_index from labels and validates the invariants.
  void reindex();
};

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 300;
  std::size_t feature_dim = 32;
  double cluster_spread = 0.06;
  std::uint64_t seed = 7;
};

/// Gaussian clusters around per-class centers drawn uniformly from
/// [0.2, 0.8]^D, clamped to [0,1]. Deterministic per seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Reads 1-label-byte + D-pixel-byte records; pixels scaled to [0,1] by /255.
/// Labels above max_label error with the record index; a file length that is
/// not a multiple of D+1 errors with the byte offset of the partial record.
Dataset read_records(const std::string& path, std::size_t feature_dim, int max_label);

/// Standard CIFAR-10 binary batches (3073-byte records, 3x32x32 channel
/// planes). downscale_8x8 block-averages each channel plane to 8x8 (D=192).
Dataset read_cifar10(const std::vector<std::string>& paths, bool downscale_8x8 = false);

/// Writes the record format back out (features quantized to bytes by
/// round(v*255)). Errors if num_classes > 256.
void write_records(const Dataset& dataset, const std::string& path);

/// Deterministic shuffle split; fraction in (0,1) goes to the second part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double test_fraction,
                                          std::uint64_t seed);

}  // namespace simo
