#include "simo/semimetric.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "simo/errors.hpp"
#include "simo/loss.hpp"
#include "simo/rng.hpp"

namespace simo {

double d_prime(std::span<const double> a, std::span<const double> b, double epsilon) {
  const PairTerms t = pair_terms(a, b);
  return t.d / (epsilon + t.o);
}

double d_double_prime(std::span<const double> a, std::span<const double> b, double epsilon) {
  const PairTerms t = pair_terms(a, b);
  return t.o / (epsilon + t.d);
}

std::string SemiMetricReport::to_json() const {
  nlohmann::json j;
  j["pairs_checked"] = pairs_checked;
  j["triples_checked"] = triples_checked;
  j["nonnegativity_violations"] = nonnegativity_violations;
  j["symmetry_violations"] = symmetry_violations;
  j["identity_violations"] = identity_violations;
  j["epsilon"] = epsilon;
  j["dim"] = dim;
  j["triangle_violations"] = nlohmann::json::array();
  for (const TriangleWitness& w : triangle_violations) {
    nlohmann::json jw;
    jw["trial"] = w.trial;
    jw["a"] = w.a;
    jw["b"] = w.b;
    jw["c"] = w.c;
    jw["lhs"] = w.lhs;
    jw["rhs"] = w.rhs;
    j["triangle_violations"].push_back(std::move(jw));
  }
  return j.dump(2);
}

namespace {

/// Checks all three labelings of a triple; records the first violating one.
void check_triangle(long trial, const std::vector<double>& a, const std::vector<double>& b,
                    const std::vector<double>& c, double epsilon, SemiMetricReport& report) {
  const double dab = d_prime(a, b, epsilon);
  const double dac = d_prime(a, c, epsilon);
  const double dbc = d_prime(b, c, epsilon);
  const double sides[3][3] = {{dab, dac, dbc}, {dac, dab, dbc}, {dbc, dab, dac}};
  for (const auto& s : sides) {
    if (s[0] > s[1] + s[2]) {
      TriangleWitness w;
      w.trial = trial;
      w.a = a;
      w.b = b;
      w.c = c;
      w.lhs = s[0];
      w.rhs = s[1] + s[2];
      report.triangle_violations.push_back(std::move(w));
      return;
    }
  }
}

}  // namespace

SemiMetricReport verify_semimetric(const PointSource& source, std::size_t trials,
                                   double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("verify_semimetric: epsilon must be > 0");
  SemiMetricReport report;
  report.epsilon = epsilon;

  // Probe one point to learn the dimension; it is reused as the first sample.
  std::vector<double> first = source();
  const std::size_t n = first.size();
  if (n < 2) throw ConfigError("verify_semimetric: points must have dimension >= 2");
  report.dim = n;

  std::vector<double> wa(n, 0.0), wb(n, 0.0), wc(n, 0.0);
  wa[0] = 1.0;
  wb[1] = 1.0;
  wc[0] = 1.0;
  wc[1] = 1.0;
  check_triangle(-1, wa, wb, wc, epsilon, report);
  report.triples_checked += 1;

  bool have_first = true;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::vector<double> a = have_first ? std::move(first) : source();
    have_first = false;
    const std::vector<double> b = source();
    const std::vector<double> c = source();

    const double dab = d_prime(a, b, epsilon);
    const double dba = d_prime(b, a, epsilon);
    if (dab < 0.0 || dba < 0.0) report.nonnegativity_violations += 1;
    if (dab != dba) report.symmetry_violations += 1;
    if (d_prime(a, a, epsilon) != 0.0) report.identity_violations += 1;
    if (d_double_prime(a, b, epsilon) < 0.0) report.nonnegativity_violations += 1;
    if (d_double_prime(a, b, epsilon) != d_double_prime(b, a, epsilon)) {
      report.symmetry_violations += 1;
    }
    report.pairs_checked += 1;

    check_triangle(static_cast<long>(t), a, b, c, epsilon, report);
    report.triples_checked += 1;
  }
  return report;
}

namespace {

double row_dot(const Tensor& m, std::size_t i, std::size_t j) {
  const auto a = m.row(i);
  const auto b = m.row(j);
  double dp = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) dp += a[c] * b[c];
  return dp;
}

// Max clique over the "mutually orthogonal" compatibility graph, k <= 64.
struct CliqueSearch {
  const std::vector<std::uint64_t>& adj;
  std::size_t best = 0;

  void run(std::uint64_t candidates, std::size_t size) {
    if (size + static_cast<std::size_t>(__builtin_popcountll(candidates)) <= best) return;
    if (candidates == 0) {
      best = std::max(best, size);
      return;
    }
    while (candidates != 0) {
      if (size + static_cast<std::size_t>(__builtin_popcountll(candidates)) <= best) return;
      const int v = __builtin_ctzll(candidates);
      candidates &= candidates - 1;
      run(candidates & adj[static_cast<std::size_t>(v)], size + 1);
      best = std::max(best, size + 1);
    }
  }
};

}  // namespace

OrthogonalityResult verify_orthogonality_bound(const Tensor& vectors, double tolerance) {
  if (!vectors.is_matrix()) {
    throw ShapeError(std::string("verify_orthogonality_bound: expected matrix, got ") +
                     vectors.shape_str());
  }
  if (tolerance < 0.0) throw ConfigError("verify_orthogonality_bound: tolerance must be >= 0");
  const std::size_t k = vectors.shape()[0];
  const std::size_t n = vectors.shape()[1];
  for (std::size_t i = 0; i < k; ++i) {
    if (row_dot(vectors, i, i) == 0.0) {
      throw DataError("verify_orthogonality_bound: zero vector at row " + std::to_string(i));
    }
  }

  OrthogonalityResult result;
  if (k <= 20) {
    std::vector<std::uint64_t> adj(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (i != j && std::fabs(row_dot(vectors, i, j)) <= tolerance) {
          adj[i] |= (1ULL << j);
        }
      }
    }
    CliqueSearch search{adj};
    search.best = k > 0 ? 1 : 0;
    search.run((k == 64) ? ~0ULL : ((1ULL << k) - 1), 0);
    result.max_mutually_orthogonal_size = search.best;
  } else {
    // Greedy from every start vertex.
    std::size_t best = 0;
    std::vector<std::size_t> chosen;
    for (std::size_t start = 0; start < k; ++start) {
      chosen.clear();
      chosen.push_back(start);
      for (std::size_t j = 0; j < k; ++j) {
        if (j == start) continue;
        bool ok = true;
        for (std::size_t c : chosen) {
          if (std::fabs(row_dot(vectors, j, c)) > tolerance) {
            ok = false;
            break;
          }
        }
        if (ok) chosen.push_back(j);
      }
      best = std::max(best, chosen.size());
    }
    result.max_mutually_orthogonal_size = best;
  }
  result.bound_holds = result.max_mutually_orthogonal_size <= n;
  return result;
}

std::size_t jl_target_dim(std::size_t num_points, double distortion, double constant) {
  return static_cast<std::size_t>(
      std::ceil(constant * std::log(static_cast<double>(num_points)) /
                (distortion * distortion)));
}

JlProjection jl_project(const Tensor& vectors, double distortion, std::uint64_t seed,
                        double constant) {
  if (!(distortion > 0.0 && distortion < 1.0)) {
    throw ConfigError("jl_project: distortion must be in (0, 1)");
  }
  if (!vectors.is_matrix() || vectors.shape()[0] < 2) {
    throw ShapeError("jl_project: need a matrix of k >= 2 vectors, got " + vectors.shape_str());
  }
  const std::size_t k = vectors.shape()[0];
  const std::size_t n = vectors.shape()[1];
  const std::size_t m = jl_target_dim(k, distortion, constant);

  JlProjection out;
  out.projector.source_dim = n;
  out.projector.target_dim = m;
  out.projector.distortion = distortion;
  out.projector.seed = seed;
  out.projector.matrix = Tensor({m, n});
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < m * n; ++i) out.projector.matrix[i] = rng.gaussian() * scale;

  // projected[v] = P * vectors[v]
  out.projected = Tensor({k, m});
  for (std::size_t v = 0; v < k; ++v) {
    const auto src = vectors.row(v);
    for (std::size_t r = 0; r < m; ++r) {
      const auto prow = out.projector.matrix.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < n; ++c) acc += prow[c] * src[c];
      out.projected.at(v, r) = acc;
    }
  }
  return out;
}

}  // namespace simo
