#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "json.hpp"
#include "simo/errors.hpp"
#include "simo/rng.hpp"
#include "simo/semimetric.hpp"
#include "testutil.hpp"

using simo::Tensor;
using testutil::random_tensor;

namespace {

simo::PointSource unit_cube_source(simo::Rng& rng, std::size_t dim) {
  return [&rng, dim]() {
    std::vector<double> p(dim);
    for (double& x : p) x = rng.uniform();
    return p;
  };
}

}  // namespace

TEST_CASE("d_prime worked values") {
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0}, c{1.0, 1.0};
  CHECK(simo::d_prime(a, b, 1e-6) == 2.0 / (1e-6 + 0.0));
  CHECK(simo::d_prime(a, b, 1e-6) == doctest::Approx(2e6).epsilon(1e-9));
  CHECK(simo::d_prime(a, c, 1e-6) == 1.0 / (1.0 + 1e-6));
  CHECK(simo::d_prime(a, c, 1e-6) == doctest::Approx(0.999999).epsilon(1e-6));
}

TEST_CASE("d_prime identity, symmetry, non-negativity on random points") {
  simo::Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(8), b(8);
    for (std::size_t i = 0; i < 8; ++i) {
      a[i] = rng.uniform();
      b[i] = rng.uniform();
    }
    CHECK(simo::d_prime(a, a, 1e-6) == 0.0);
    CHECK(simo::d_prime(a, b, 1e-6) >= 0.0);
    CHECK(simo::d_prime(a, b, 1e-6) == simo::d_prime(b, a, 1e-6));
  }
}

TEST_CASE("d_double_prime worked values and documented identity deviation") {
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  CHECK(simo::d_double_prime(a, b, 1e-6) == 0.0);
  // The diagonal is NOT zero: d''(e, e) = |e|^4 / eps for e != 0.
  CHECK(simo::d_double_prime(a, a, 1e-6) == 1.0 / 1e-6);
  CHECK(simo::d_double_prime(a, a, 1e-6) > 0.0);

  simo::Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(6), y(6);
    for (std::size_t i = 0; i < 6; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    CHECK(simo::d_double_prime(x, y, 1e-6) == simo::d_double_prime(y, x, 1e-6));
    CHECK(simo::d_double_prime(x, y, 1e-6) >= 0.0);
    // e != 0 (coordinates are positive with probability 1 here)
    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    CHECK(simo::d_double_prime(x, x, 1e-3) == doctest::Approx(norm2 * norm2 / 1e-3));
  }
}

TEST_CASE("dimension mismatch errors") {
  const std::vector<double> a{1.0, 0.0, 0.0}, b{0.0, 1.0};
  CHECK_THROWS_AS((void)simo::d_prime(a, b, 1e-6), simo::ShapeError);
  CHECK_THROWS_AS((void)simo::d_double_prime(a, b, 1e-6), simo::ShapeError);
}

TEST_CASE("verify_semimetric finds the witness violation") {
  simo::Rng rng(7);
  const simo::SemiMetricReport report = simo::verify_semimetric(unit_cube_source(rng, 8), 0, 1e-6);
  // Witness-only run: no pairs sampled, one triple (the witness).
  CHECK(report.pairs_checked == 0);
  CHECK(report.triples_checked == 1);
  REQUIRE(report.triangle_violations.size() == 1);
  const simo::TriangleWitness& w = report.triangle_violations[0];
  CHECK(w.trial == -1);
  // d'((1,0),(0,1)) = 2/eps dwarfs d'((1,0),(1,1)) + d'((1,1),(0,1)) ~ 2.
  CHECK(w.lhs == doctest::Approx(2e6).epsilon(1e-9));
  CHECK(w.rhs == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(w.lhs > 1e5 * w.rhs);
}

TEST_CASE("witness triple violates for every epsilon below 0.1") {
  for (double eps : {1e-6, 1e-4, 1e-2, 0.09}) {
    CAPTURE(eps);
    simo::Rng rng(9);
    const simo::SemiMetricReport report =
        simo::verify_semimetric(unit_cube_source(rng, 4), 0, eps);
    REQUIRE(!report.triangle_violations.empty());
    CHECK(report.triangle_violations[0].trial == -1);
  }
}

TEST_CASE("random pairs never violate non-negativity, symmetry or identity") {
  simo::Rng rng(11);
  const simo::SemiMetricReport report =
      simo::verify_semimetric(unit_cube_source(rng, 8), 1000, 1e-6);
  CHECK(report.pairs_checked == 1000);
  CHECK(report.triples_checked == 1001);
  CHECK(report.nonnegativity_violations == 0);
  CHECK(report.symmetry_violations == 0);
  CHECK(report.identity_violations == 0);
  CHECK(!report.triangle_violations.empty());
}

TEST_CASE("report serializes to JSON with counts and witnesses") {
  simo::Rng rng(13);
  const simo::SemiMetricReport report =
      simo::verify_semimetric(unit_cube_source(rng, 4), 20, 1e-6);
  const nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j.at("pairs_checked").get<std::size_t>() == 20);
  CHECK(j.at("nonnegativity_violations").get<std::size_t>() == 0);
  CHECK(j.at("triangle_violations").is_array());
  CHECK(!j.at("triangle_violations").empty());
  CHECK(j.at("triangle_violations")[0].at("trial").get<long>() == -1);
  CHECK(j.at("triangle_violations")[0].at("a").size() == 4);
}

TEST_CASE("orthogonality bound on constructed sets") {
  SUBCASE("standard basis of R^3") {
    const Tensor basis({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const simo::OrthogonalityResult r = simo::verify_orthogonality_bound(basis, 0.0);
    CHECK(r.max_mutually_orthogonal_size == 3);
    CHECK(r.bound_holds);
  }
  SUBCASE("basis of R^3 plus the diagonal still caps at 3") {
    const double s = 1.0 / std::sqrt(3.0);
    const Tensor vecs({4, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1, s, s, s});
    const simo::OrthogonalityResult r = simo::verify_orthogonality_bound(vecs, 1e-12);
    CHECK(r.max_mutually_orthogonal_size == 3);
    CHECK(r.bound_holds);
  }
  SUBCASE("Gram-Schmidt of 5 random vectors in R^8 gives exactly 5") {
    simo::Rng rng(17);
    Tensor vecs({5, 8});
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t p = 0; p < 8; ++p) vecs.at(i, p) = rng.gaussian();
      for (std::size_t p = 0; p < i; ++p) {
        double dp = 0.0;
        for (std::size_t c = 0; c < 8; ++c) dp += vecs.at(i, c) * vecs.at(p, c);
        for (std::size_t c = 0; c < 8; ++c) vecs.at(i, c) -= dp * vecs.at(p, c);
      }
      double norm = 0.0;
      for (std::size_t c = 0; c < 8; ++c) norm += vecs.at(i, c) * vecs.at(i, c);
      norm = std::sqrt(norm);
      REQUIRE(norm > 1e-9);
      for (std::size_t c = 0; c < 8; ++c) vecs.at(i, c) /= norm;
    }
    // construction sanity: pairwise dots are tiny
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = i + 1; j < 5; ++j) {
        double dp = 0.0;
        for (std::size_t c = 0; c < 8; ++c) dp += vecs.at(i, c) * vecs.at(j, c);
        REQUIRE(std::fabs(dp) < 1e-9);
      }
    }
    const simo::OrthogonalityResult r = simo::verify_orthogonality_bound(vecs, 1e-9);
    CHECK(r.max_mutually_orthogonal_size == 5);
    CHECK(r.bound_holds);
  }
  SUBCASE("never larger than the dimension at tolerance 0 on exact integer sets") {
    simo::Rng rng(19);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t n = 4 + rng.below(3);          // R^4..R^6
      const std::size_t k = n + 2 + rng.below(8);      // up to 15 vectors
      Tensor vecs({k, n});
      for (std::size_t i = 0; i < k; ++i) {
        bool nonzero = false;
        for (std::size_t c = 0; c < n; ++c) {
          const double v = static_cast<double>(rng.below(3)) - 1.0;  // {-1, 0, 1}
          vecs.at(i, c) = v;
          nonzero = nonzero || v != 0.0;
        }
        if (!nonzero) vecs.at(i, 0) = 1.0;
      }
      const simo::OrthogonalityResult r = simo::verify_orthogonality_bound(vecs, 0.0);
      CHECK(r.max_mutually_orthogonal_size <= n);
      CHECK(r.bound_holds);
    }
  }
  SUBCASE("zero vector errors") {
    const Tensor vecs({2, 3}, {1, 0, 0, 0, 0, 0});
    CHECK_THROWS_AS((void)simo::verify_orthogonality_bound(vecs, 0.0), simo::DataError);
  }
  SUBCASE("greedy regime above 20 vectors still bounded by n") {
    simo::Rng rng(23);
    Tensor vecs = random_tensor({24, 6}, rng, -1.0, 1.0);
    const simo::OrthogonalityResult r = simo::verify_orthogonality_bound(vecs, 1e-9);
    CHECK(r.max_mutually_orthogonal_size <= 6);
    CHECK(r.bound_holds);
  }
}

TEST_CASE("jl target dimension formula") {
  // ceil(8 * ln(50) / 0.5^2) = 126
  CHECK(simo::jl_target_dim(50, 0.5, 8.0) == 126);
}

TEST_CASE("jl projection of identical vectors keeps distance exactly zero") {
  Tensor vecs({2, 6});
  for (std::size_t c = 0; c < 6; ++c) {
    vecs.at(0, c) = 0.3 + 0.1 * static_cast<double>(c);
    vecs.at(1, c) = vecs.at(0, c);
  }
  const simo::JlProjection proj = simo::jl_project(vecs, 0.5, 99);
  for (std::size_t c = 0; c < proj.projector.target_dim; ++c) {
    CHECK(proj.projected.at(0, c) == proj.projected.at(1, c));
  }
}

TEST_CASE("jl projection distortion bounds hold for >=95% of pairs") {
  simo::Rng rng(29);
  const std::size_t k = 50, n = 10;
  Tensor vecs({k, n});
  for (std::size_t i = 0; i < k; ++i) {
    double norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      vecs.at(i, c) = rng.gaussian();
      norm += vecs.at(i, c) * vecs.at(i, c);
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < n; ++c) vecs.at(i, c) /= norm;
  }
  const double eps = 0.5;
  const simo::JlProjection proj = simo::jl_project(vecs, eps, 12345);
  CHECK(proj.projector.target_dim == 126);

  std::size_t pass = 0, total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double orig = 0.0, mapped = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double t = vecs.at(i, c) - vecs.at(j, c);
        orig += t * t;
      }
      for (std::size_t c = 0; c < proj.projector.target_dim; ++c) {
        const double t = proj.projected.at(i, c) - proj.projected.at(j, c);
        mapped += t * t;
      }
      total += 1;
      if (mapped >= (1.0 - eps) * orig && mapped <= (1.0 + eps) * orig) pass += 1;
    }
  }
  CHECK(static_cast<double>(pass) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("jl projection keeps an orthogonal basis nearly orthogonal") {
  const std::size_t n = 16;
  Tensor basis({n, n});
  for (std::size_t i = 0; i < n; ++i) basis.at(i, i) = 1.0;
  const double eps = 0.5;
  const simo::JlProjection proj = simo::jl_project(basis, eps, 777);

  std::size_t pass = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dp = 0.0;
      for (std::size_t c = 0; c < proj.projector.target_dim; ++c) {
        dp += proj.projected.at(i, c) * proj.projected.at(j, c);
      }
      total += 1;
      if (std::fabs(dp) <= eps * 2.0) pass += 1;
    }
  }
  CHECK(static_cast<double>(pass) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("jl projection is deterministic per seed") {
  simo::Rng rng(31);
  const Tensor vecs = random_tensor({5, 7}, rng, -1.0, 1.0);
  const simo::JlProjection a = simo::jl_project(vecs, 0.4, 42);
  const simo::JlProjection b = simo::jl_project(vecs, 0.4, 42);
  REQUIRE(a.projected.numel() == b.projected.numel());
  for (std::size_t i = 0; i < a.projected.numel(); ++i) {
    CHECK(a.projected[i] == b.projected[i]);
  }
  const simo::JlProjection c = simo::jl_project(vecs, 0.4, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.projected.numel(); ++i) {
    if (a.projected[i] != c.projected[i]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("jl distortion range is validated") {
  simo::Rng rng(37);
  const Tensor vecs = random_tensor({3, 4}, rng, -1.0, 1.0);
  CHECK_THROWS_AS((void)simo::jl_project(vecs, 0.0, 1), simo::ConfigError);
  CHECK_THROWS_AS((void)simo::jl_project(vecs, 1.0, 1), simo::ConfigError);
  CHECK_THROWS_AS((void)simo::jl_project(vecs, -0.5, 1), simo::ConfigError);
}
