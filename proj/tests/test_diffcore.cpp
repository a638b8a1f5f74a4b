#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "simo/autodiff.hpp"
#include "simo/errors.hpp"
#include "simo/loss.hpp"
#include "testutil.hpp"

using simo::Tape;
using simo::Tensor;
using simo::Value;
using testutil::random_tensor;

TEST_CASE("forward op examples") {
  Tape tape;
  const Value a = tape.leaf(Tensor::vector({1.0, 0.0}));
  const Value b = tape.leaf(Tensor::vector({0.0, 1.0}));
  CHECK(tape.value(tape.dot(a, b)).scalar_value() == 0.0);

  const Value x = tape.leaf(Tensor::scalar(3.0));
  CHECK(tape.value(tape.square(x)).scalar_value() == 9.0);
}

TEST_CASE("layer_norm output has zero mean and unit variance") {
  Tape tape;
  const Value x = tape.leaf(Tensor::vector({2.0, 4.0, 6.0}));
  const Value gamma = tape.leaf(Tensor::full({3}, 1.0));
  const Value beta = tape.leaf(Tensor::zeros({3}));
  const Tensor& out = tape.value(tape.layer_norm(x, gamma, beta));

  double mu = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mu += out[i];
  mu /= 3.0;
  double var = 0.0;
  for (std::size_t i = 0; i < 3; ++i) var += (out[i] - mu) * (out[i] - mu);
  var /= 3.0;
  CHECK(std::fabs(mu) < 1e-12);
  CHECK(std::fabs(var - 1.0) < 1e-4);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives all-ones") {
    Tape tape;
    simo::Rng rng(11);
    const Value x = tape.leaf(random_tensor({3, 4}, rng, -1.0, 1.0));
    const simo::Gradients g = tape.backward(tape.sum(x));
    for (double v : g.at(x).data()) CHECK(v == 1.0);
  }
  SUBCASE("dot(x, x) gives 2x") {
    Tape tape;
    const Value x = tape.leaf(Tensor::vector({1.0, 2.0}));
    const simo::Gradients g = tape.backward(tape.dot(x, x));
    CHECK(g.at(x)[0] == 2.0);
    CHECK(g.at(x)[1] == 4.0);
  }
  SUBCASE("unreachable leaf has exactly zero gradient") {
    Tape tape;
    simo::Rng rng(12);
    const Value x = tape.leaf(random_tensor({4}, rng, -1.0, 1.0));
    const Value unused = tape.leaf(random_tensor({4}, rng, -1.0, 1.0));
    const simo::Gradients g = tape.backward(tape.dot(x, x));
    for (double v : g.at(unused).data()) CHECK(v == 0.0);
  }
  SUBCASE("non-scalar root errors") {
    Tape tape;
    simo::Rng rng(13);
    const Value x = tape.leaf(random_tensor({3, 2}, rng, -1.0, 1.0));
    CHECK_THROWS_AS((void)tape.backward(x), simo::ShapeError);
  }
}

TEST_CASE("simo loss gradient matches finite differences on a 3x4 batch") {
  simo::SimoConfig cfg;
  simo::Rng rng(21);
  const Tensor batch = random_tensor({3, 4}, rng, 0.0, 1.0);
  const auto build = [&](Tape& t, const std::vector<Value>& leaves) {
    return simo::simo_loss(t, leaves[0], 0.4, cfg);
  };
  testutil::check_gradients(build, {batch});
}

namespace {

struct OpCase {
  const char* name;
  testutil::GraphBuilder build;
  std::function<std::vector<Tensor>(simo::Rng&)> make_inputs;
};

// Keep relu inputs away from the kink at 0.
Tensor random_away_from_zero(std::vector<std::size_t> shape, simo::Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    double v = rng.uniform(-2.0, 2.0);
    if (std::fabs(v) < 0.05) v += v >= 0.0 ? 0.1 : -0.1;
    t[i] = v;
  }
  return t;
}

Tensor random_one_hot(std::size_t rows, std::size_t cols, simo::Rng& rng) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) t.at(r, rng.below(cols)) = 1.0;
  return t;
}

}  // namespace

TEST_CASE("every op's analytic gradient matches central finite differences") {
  const std::vector<OpCase> cases = {
      {"add",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.add(in[0], in[1])); },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 4}, rng, -1, 1),
                                    random_tensor({3, 4}, rng, -1, 1)};
       }},
      {"add broadcast",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.square(t.add(in[0], in[1])));
       },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 4}, rng, -1, 1),
                                    random_tensor({4}, rng, -1, 1)};
       }},
      {"sub",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.square(t.sub(in[0], in[1]))); },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({2, 5}, rng, -1, 1),
                                    random_tensor({2, 5}, rng, -1, 1)};
       }},
      {"mul",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.mul(in[0], in[1])); },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 3}, rng, -1, 1),
                                    random_tensor({3, 3}, rng, -1, 1)};
       }},
      {"matmul",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.square(t.matmul(in[0], in[1])));
       },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 5}, rng, -1, 1),
                                    random_tensor({5, 2}, rng, -1, 1)};
       }},
      {"sum",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.square(in[0])); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({4, 3}, rng, -1, 1)}; }},
      {"mean matrix",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.square(t.mean(in[0]))); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({5, 3}, rng, -1, 1)}; }},
      {"mean vector",
       [](Tape& t, const std::vector<Value>& in) { return t.square(t.mean(in[0])); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({7}, rng, -1, 1)}; }},
      {"square",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.square(in[0])); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({3, 3}, rng, -2, 2)}; }},
      {"dot",
       [](Tape& t, const std::vector<Value>& in) { return t.dot(in[0], in[1]); },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({6}, rng, -1, 1),
                                    random_tensor({6}, rng, -1, 1)};
       }},
      {"sigmoid",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.sigmoid(in[0])); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({2, 5}, rng, -3, 3)}; }},
      {"relu",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.square(t.relu(in[0]))); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_away_from_zero({2, 5}, rng)}; }},
      {"layer_norm",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.square(t.layer_norm(in[0], in[1], in[2])));
       },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({4, 6}, rng, -2, 2),
                                    random_tensor({6}, rng, 0.5, 1.5),
                                    random_tensor({6}, rng, -0.5, 0.5)};
       }},
      {"reciprocal_eps",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.reciprocal_eps(in[0], 1e-6));
       },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({3, 3}, rng, 0.5, 2.0)}; }},
      {"ratio_eps",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.ratio_eps(in[0], in[1], 1e-6));
       },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({2, 2}, rng, 0.0, 2.0),
                                    random_tensor({2, 2}, rng, 0.5, 2.0)};
       }},
      {"scale",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.scale(in[0], 2.7)); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({3, 4}, rng, -1, 1)}; }},
      {"div_by",
       [](Tape& t, const std::vector<Value>& in) { return t.sum(t.div_by(in[0], 3.1)); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({3, 4}, rng, -1, 1)}; }},
      {"gather_rows",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.square(t.gather_rows(in[0], {4, 0, 2, 2})));
       },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({5, 3}, rng, -1, 1)}; }},
      {"stack_rows",
       [](Tape& t, const std::vector<Value>& in) {
         return t.sum(t.square(t.stack_rows({in[0], in[1], in[2]})));
       },
       [](simo::Rng& rng) {
         return std::vector<Tensor>{random_tensor({4}, rng, -1, 1),
                                    random_tensor({4}, rng, -1, 1),
                                    random_tensor({4}, rng, -1, 1)};
       }},
      {"pairwise_sqdist_sum",
       [](Tape& t, const std::vector<Value>& in) { return t.pairwise_sqdist_sum(in[0]); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({5, 4}, rng, 0, 1)}; }},
      {"pairwise_sqdot_sum",
       [](Tape& t, const std::vector<Value>& in) { return t.pairwise_sqdot_sum(in[0]); },
       [](simo::Rng& rng) { return std::vector<Tensor>{random_tensor({5, 4}, rng, 0, 1)}; }},
      {"softmax_cross_entropy",
       [](Tape& t, const std::vector<Value>& in) {
         return t.softmax_cross_entropy(in[0], in[1]);
       },
       [](simo::Rng& rng) {
         std::vector<Tensor> in{random_tensor({4, 5}, rng, -2, 2), Tensor()};
         in[1] = random_one_hot(4, 5, rng);
         return in;
       }},
  };

  for (const OpCase& c : cases) {
    CAPTURE(c.name);
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      simo::Rng rng(1000 + rep * 97);
      testutil::check_gradients(c.build, c.make_inputs(rng));
    }
  }
}

TEST_CASE("backward is deterministic: identical tapes give bit-identical gradients") {
  const auto run = [](std::vector<double>* out) {
    simo::Rng rng(77);
    Tape tape;
    const Value x = tape.leaf(random_tensor({6, 5}, rng, 0.0, 1.0));
    const Value w = tape.leaf(random_tensor({5, 3}, rng, -1.0, 1.0));
    const Value g = tape.leaf(random_tensor({3}, rng, 0.5, 1.5));
    const Value b = tape.leaf(random_tensor({3}, rng, -0.5, 0.5));
    const Value h = tape.layer_norm(tape.matmul(x, w), g, b);
    simo::SimoConfig cfg;
    const Value loss = simo::simo_loss(tape, tape.sigmoid(h), 0.3, cfg);
    const simo::Gradients grads = tape.backward(loss);
    for (const Value v : {x, w, g, b}) {
      const auto span = grads.at(v).data();
      out->insert(out->end(), span.begin(), span.end());
    }
  };
  std::vector<double> first, second;
  run(&first);
  run(&second);
  REQUIRE(first.size() == second.size());
  CHECK(std::memcmp(first.data(), second.data(), first.size() * sizeof(double)) == 0);
}

TEST_CASE("shape errors name the op and both shapes") {
  Tape tape;
  const Value a = tape.leaf(Tensor::vector({1.0, 2.0}));
  const Value b = tape.leaf(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_WITH_AS((void)tape.dot(a, b), "dot: shape mismatch (2) vs (3)",
                       simo::ShapeError);

  const Value m1 = tape.leaf(Tensor::zeros({2, 3}));
  const Value m2 = tape.leaf(Tensor::zeros({2, 3}));
  CHECK_THROWS_WITH_AS((void)tape.matmul(m1, m2), "matmul: shape mismatch (2x3) vs (2x3)",
                       simo::ShapeError);
}

TEST_CASE("op preconditions") {
  Tape tape;
  const Value x = tape.leaf(Tensor::vector({1.0}));
  CHECK_THROWS_AS((void)tape.reciprocal_eps(x, 0.0), simo::ConfigError);
  CHECK_THROWS_AS((void)tape.reciprocal_eps(x, -1.0), simo::ConfigError);
  CHECK_THROWS_AS((void)tape.div_by(x, 0.0), simo::ConfigError);

  Tensor bad = Tensor::vector({1.0, 2.0});
  bad[1] = std::nan("");
  CHECK_THROWS_AS((void)tape.leaf(std::move(bad)), simo::NumericError);
}

TEST_CASE("reciprocal_eps computes 1/(eps + x)") {
  Tape tape;
  const Value x = tape.leaf(Tensor::vector({0.0, 1.0, 3.0}));
  const Tensor& out = tape.value(tape.reciprocal_eps(x, 0.5));
  CHECK(out[0] == 1.0 / 0.5);
  CHECK(out[1] == 1.0 / 1.5);
  CHECK(out[2] == 1.0 / 3.5);
}
