#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "simo/dataset.hpp"
#include "simo/diagnostics.hpp"
#include "simo/errors.hpp"
#include "testutil.hpp"

using simo::SimilarityKind;
using simo::SimoConfig;
using simo::Tensor;
using testutil::random_tensor;

namespace {

/// Independent singular values: cyclic Jacobi eigensolver on A^T A.
std::vector<double> jacobi_singular_values(const Tensor& a) {
  const std::size_t n = a.shape()[1];
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) acc += a.at(r, i) * a.at(r, j);
      s[i][j] = acc;
    }
  }
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += s[p][q] * s[p][q];
    }
    if (off < 1e-28) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s[p][q] == 0.0) continue;
        const double theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double sip = s[i][p], siq = s[i][q];
          s[i][p] = c * sip - sn * siq;
          s[i][q] = sn * sip + c * siq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double spi = s[p][i], sqi = s[q][i];
          s[p][i] = c * spi - sn * sqi;
          s[q][i] = sn * spi + c * sqi;
        }
      }
    }
  }
  std::vector<double> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(std::max(0.0, s[i][i]));
  return sigma;
}

double effective_rank_oracle(const Tensor& a) {
  const std::vector<double> sigma = jacobi_singular_values(a);
  double total = 0.0;
  for (double v : sigma) total += v;
  double entropy = 0.0;
  for (double v : sigma) {
    const double p = v / total;
    if (p > 1e-300) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

}  // namespace

TEST_CASE("similarity_matrix") {
  SimoConfig cfg;

  SUBCASE("identical embeddings give a raw zero matrix and normalize to zero") {
    const Tensor e({3, 2}, {0.4, 0.6, 0.4, 0.6, 0.4, 0.6});
    const std::vector<int> labels{0, 0, 0};
    const Tensor raw =
        simo::similarity_matrix(e, labels, cfg, SimilarityKind::pairwise, false);
    for (double v : raw.data()) CHECK(v == 0.0);
    const Tensor norm = simo::similarity_matrix(e, labels, cfg, SimilarityKind::pairwise, true);
    for (double v : norm.data()) CHECK(v == 0.0);
  }
  SUBCASE("orthogonal one-hot class means: raw off-diagonal 2/eps, normalized 1") {
    const Tensor e({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const std::vector<int> labels{0, 1, 2};
    const Tensor raw =
        simo::similarity_matrix(e, labels, cfg, SimilarityKind::class_mean, false);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        if (i == j) {
          CHECK(raw.at(i, j) == 0.0);
        } else {
          CHECK(raw.at(i, j) == 2.0 / (cfg.epsilon + 0.0));
        }
      }
    }
    const Tensor norm = simo::similarity_matrix(e, labels, cfg, SimilarityKind::class_mean, true);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(norm.at(i, j) == (i == j ? 0.0 : 1.0));
      }
    }
  }
  SUBCASE("the matrix equals its transpose exactly and lies in [0,1]") {
    simo::Rng rng(3);
    const Tensor e = random_tensor({9, 5}, rng, 0.0, 1.0);
    std::vector<int> labels(9);
    for (std::size_t i = 0; i < 9; ++i) labels[i] = static_cast<int>(i % 3);
    const Tensor m = simo::similarity_matrix(e, labels, cfg, SimilarityKind::pairwise);
    for (std::size_t i = 0; i < 9; ++i) {
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(m.at(i, j) == m.at(j, i));
        CHECK(m.at(i, j) >= 0.0);
        CHECK(m.at(i, j) <= 1.0);
      }
    }
  }
  SUBCASE("single class rejects the class_mean kind") {
    const Tensor e({2, 2}, {0.1, 0.2, 0.3, 0.4});
    CHECK_THROWS_AS(
        (void)simo::similarity_matrix(e, {0, 0}, cfg, SimilarityKind::class_mean),
        simo::DataError);
  }
  SUBCASE("the d_double_prime kernel is available behind the flag") {
    const Tensor e({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const Tensor raw = simo::similarity_matrix(e, {0, 1}, cfg, SimilarityKind::pairwise, false,
                                               simo::SimilarityKernel::d_double_prime);
    CHECK(raw.at(0, 1) == 0.0);                    // orthogonal: o = 0
    CHECK(raw.at(0, 0) == 1.0 / cfg.epsilon);      // d'' diagonal is |e|^4/eps
  }
}

TEST_CASE("effective_rank") {
  SUBCASE("orthonormal rows give n") {
    Tensor eye({5, 5});
    for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1.0;
    CHECK(simo::effective_rank(eye) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("identical rows give 1") {
    const Tensor rows({4, 3}, {0.2, 0.5, 0.7, 0.2, 0.5, 0.7, 0.2, 0.5, 0.7, 0.2, 0.5, 0.7});
    CHECK(simo::effective_rank(rows) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("random full-rank matrices match the independent Jacobi oracle") {
    for (std::uint64_t rep = 0; rep < 6; ++rep) {
      simo::Rng rng(100 + rep);
      const Tensor a = random_tensor({8, 8}, rng, -1.0, 1.0);
      CHECK(std::fabs(simo::effective_rank(a) - effective_rank_oracle(a)) < 1e-8);
    }
  }
  SUBCASE("scale and permutation invariance") {
    simo::Rng rng(9);
    const Tensor a = random_tensor({6, 4}, rng, -1.0, 1.0);
    Tensor scaled = a;
    for (double& v : scaled.data()) v *= 3.7;
    CHECK(simo::effective_rank(scaled) ==
          doctest::Approx(simo::effective_rank(a)).epsilon(1e-12));

    Tensor permuted({6, 4});
    const std::size_t perm[6] = {4, 2, 0, 5, 1, 3};
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 4; ++c) permuted.at(r, c) = a.at(perm[r], c);
    }
    CHECK(simo::effective_rank(permuted) ==
          doctest::Approx(simo::effective_rank(a)).epsilon(1e-12));
  }
  SUBCASE("bounded by min(rows, dim)") {
    simo::Rng rng(11);
    const Tensor a = random_tensor({4, 8}, rng, 0.0, 1.0);
    const double r = simo::effective_rank(a);
    CHECK(r >= 1.0);
    CHECK(r <= 4.0 + 1e-9);
  }
  SUBCASE("all-zero matrix errors") {
    CHECK_THROWS_AS((void)simo::effective_rank(Tensor::zeros({3, 3})), simo::DataError);
  }
}

TEST_CASE("diagnose assembles a consistent report") {
  simo::SyntheticSpec spec;
  spec.num_classes = 3;
  spec.samples_per_class = 30;
  spec.feature_dim = 6;
  const simo::Dataset ds = simo::generate_synthetic(spec);
  simo::Architecture arch;
  arch.input_dim = 6;
  arch.hidden = {12, 8};
  arch.embedding_dim = 4;
  const simo::ModelParams params = simo::init_model(arch, 21);
  const Tensor emb = simo::encode(params, ds.features);

  SimoConfig cfg;
  simo::DiagnosticsOptions options;
  options.pairwise_sample = 20;
  options.semimetric_trials = 50;
  const simo::DiagnosticsReport report =
      simo::diagnose(emb, ds.labels, ds.num_classes, cfg, options);

  CHECK(report.pairwise_matrix.rows() == 20);
  CHECK(report.class_mean_matrix.rows() == 3);
  CHECK(report.effective_rank >= 1.0);
  CHECK(report.effective_rank <= 4.0 + 1e-9);
  CHECK(report.mean_intra_distance >= 0.0);
  CHECK(report.mean_inter_distance >= 0.0);
  CHECK(report.semimetric.pairs_checked == 50);
  CHECK(report.semimetric.nonnegativity_violations == 0);

  const nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j.at("effective_rank").get<double>() == report.effective_rank);
  CHECK(j.at("kernel").get<std::string>() == "d_prime");
  CHECK(j.at("class_mean_matrix").size() == 3);
}

TEST_CASE("embedding export and re-import") {
  namespace fs = std::filesystem;
  simo::SyntheticSpec spec;
  spec.num_classes = 2;
  spec.samples_per_class = 3;
  spec.feature_dim = 5;
  const simo::Dataset ds = simo::generate_synthetic(spec);
  simo::Architecture arch;
  arch.input_dim = 5;
  arch.hidden = {6};
  arch.embedding_dim = 2;
  const simo::ModelParams params = simo::init_model(arch, 31);

  const std::string path = (fs::temp_directory_path() / "simo_export_test.csv").string();
  simo::export_embeddings(ds, params, path);

  SUBCASE("header plus one row per sample") {
    std::ifstream is(path);
    std::string line;
    std::size_t lines = 0;
    std::string header;
    while (std::getline(is, line)) {
      if (lines == 0) header = line;
      ++lines;
    }
    CHECK(lines == 7);
    CHECK(header == "label,e0,e1");
  }
  SUBCASE("re-import reproduces the embeddings bit-exactly") {
    const auto [labels, imported] = simo::import_embeddings(path);
    const Tensor expected = simo::encode(params, ds.features);
    REQUIRE(imported.numel() == expected.numel());
    CHECK(labels == ds.labels);
    for (std::size_t i = 0; i < imported.numel(); ++i) CHECK(imported[i] == expected[i]);
    // effective rank computed from the file equals the in-memory value
    CHECK(simo::effective_rank(imported) == simo::effective_rank(expected));
  }
  fs::remove(path);
}
