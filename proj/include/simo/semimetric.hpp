#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "simo/tensor.hpp"

namespace simo {

/// d'(a, b) = ||a - b||^2 / (eps + (a.b)^2). Non-negative, symmetric, zero
/// iff a == b; does not satisfy the triangle inequality.
double d_prime(std::span<const double> a, std::span<const double> b, double epsilon);

/// d''(a, b) = (a.b)^2 / (eps + ||a - b||^2). Non-negative and symmetric;
/// note d''(e, e) = |e|^4 / eps > 0 for e != 0, so it is not zero on the
/// diagonal.
double d_double_prime(std::span<const double> a, std::span<const double> b, double epsilon);

struct TriangleWitness {
  long trial = -1;  // -1 marks the fixed witness triple
  std::vector<double> a, b, c;
  double lhs = 0.0;  // the violating pairwise d'
  double rhs = 0.0;  // sum of the other two
};

struct SemiMetricReport {
  std::size_t pairs_checked = 0;
  std::size_t triples_checked = 0;
  std::size_t nonnegativity_violations = 0;
  std::size_t symmetry_violations = 0;
  std::size_t identity_violations = 0;
  std::vector<TriangleWitness> triangle_violations;
  double epsilon = 0.0;
  std::size_t dim = 0;

  std::string to_json() const;
};

using PointSource = std::function<std::vector<double>()>;

/// Samples `trials` point triples from `source`, checking d' non-negativity,
/// symmetry and identity on pairs and hunting for triangle-inequality
/// violations on triples. The fixed witness triple (1,0),(0,1),(1,1) padded
/// with zeros to the sampled dimension is always tested first (trial -1).
/// trials may be 0 for a witness-only run.
SemiMetricReport verify_semimetric(const PointSource& source, std::size_t trials,
                                   double epsilon);

struct OrthogonalityResult {
  std::size_t max_mutually_orthogonal_size = 0;
  bool bound_holds = false;  // size <= dimension
};

/// Largest subset of the rows of `vectors` (k x n) whose pairwise |dot| is
/// <= tolerance. Exhaustive search for k <= 20, greedy beyond. Errors on a
/// zero row.
OrthogonalityResult verify_orthogonality_bound(const Tensor& vectors, double tolerance);

struct JlProjector {
  std::size_t source_dim = 0;
  std::size_t target_dim = 0;
  double distortion = 0.0;
  std::uint64_t seed = 0;
  Tensor matrix;  // target_dim x source_dim, N(0,1) entries scaled by 1/sqrt(m)
};

struct JlProjection {
  Tensor projected;  // k x target_dim
  JlProjector projector;
};

inline constexpr double kJlDefaultConstant = 8.0;

/// Target dimension ceil(C * ln(k) / eps^2) for k points.
std::size_t jl_target_dim(std::size_t num_points, double distortion,
                          double constant = kJlDefaultConstant);

/// Random Gaussian projection of the rows of `vectors` (k x n) into the JL
/// target dimension. Deterministic given (seed, dims). distortion must lie
/// in (0, 1).
JlProjection jl_project(const Tensor& vectors, double distortion, std::uint64_t seed,
                        double constant = kJlDefaultConstant);

}  // namespace simo
