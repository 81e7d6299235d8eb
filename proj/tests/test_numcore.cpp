#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "periodnet/ops.hpp"
#include "periodnet/optim.hpp"
#include "support.hpp"

using namespace periodnet;
using testing::bit_equal;
using testing::random_tensor;

namespace {

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v, bool rg = false) {
  return Tensor::from({r, c}, std::move(v), rg);
}

// Weighted sum makes every output entry matter with a distinct coefficient.
Tensor probe_loss(const Tensor& out, const Tensor& weights) { return ops::sum(ops::mul(out, weights)); }

}  // namespace

TEST_CASE("tensor construction enforces shape and finiteness") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({0, 2}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({1}, {NAN}), NumericError);
  CHECK_THROWS_AS(Tensor::from({1}, {INFINITY}), NumericError);
  auto t = Tensor::zeros({2, 3}, true);
  CHECK(t.numel() == 6);
  CHECK(t.grad().size() == 6);
}

TEST_CASE("non-finite results trip after the op that produced them") {
  auto big = Tensor::from({1}, {1e308});
  CHECK_THROWS_AS(ops::scale(big, 10.0), NumericError);
  CHECK_THROWS_AS(ops::mul(big, big), NumericError);
}

TEST_CASE("matmul") {
  auto eye = mat(2, 2, {1, 0, 0, 1});
  auto m = mat(2, 2, {1, 2, 3, 4});
  CHECK(bit_equal(ops::matmul(eye, m), m));
  CHECK(ops::matmul(mat(1, 2, {1, 2}), mat(2, 1, {0, 0})).item() == 0.0);
  CHECK_THROWS_AS(ops::matmul(mat(1, 2, {1, 2}), mat(3, 1, {0, 0, 0})), DimensionError);

  std::mt19937_64 rng(7);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  auto c = ops::matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(c.at(i, j) - acc) < 1e-12);
    }
  }
}

TEST_CASE("softmax_rows") {
  auto s = ops::softmax_rows(mat(1, 2, {0, 0}));
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);

  auto big = ops::softmax_rows(mat(1, 2, {1000, 0}));
  CHECK(big[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(big[1] < 1e-300);

  auto r = ops::softmax_rows(mat(1, 3, {1, 2, 3}));
  long double denom = 0.0L;
  for (int k = 1; k <= 3; ++k) denom += std::exp(static_cast<long double>(k));
  for (int k = 1; k <= 3; ++k) {
    const double oracle = static_cast<double>(std::exp(static_cast<long double>(k)) / denom);
    CHECK(std::abs(r[k - 1] - oracle) < 1e-15);
  }
  // 40-digit decimal evaluation of the same quantity.
  CHECK(std::abs(r[0] - 0.09003057317038046) < 1e-15);
  CHECK(std::abs(r[1] - 0.24472847105479764) < 1e-15);
  CHECK(std::abs(r[2] - 0.6652409557748219) < 1e-15);
}

TEST_CASE("softmax rows sum to one for magnitudes up to 1e3") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(5 * 9);
    for (auto& x : v) x = u(rng);
    auto s = ops::softmax_rows(Tensor::from({5, 9}, v));
    for (std::size_t i = 0; i < 5; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        CHECK(s.at(i, j) >= 0.0);
        total += s.at(i, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("layer_norm") {
  auto ones = Tensor::full({4}, 1.0), zeros = Tensor::zeros({4});
  auto flat = ops::layer_norm(mat(1, 4, {3, 3, 3, 3}), ones, zeros);
  for (double v : flat.data()) CHECK(v == 0.0);

  auto shifted = ops::layer_norm(mat(1, 4, {1, 5, -2, 7}), Tensor::zeros({4}), Tensor::full({4}, 2.5));
  for (double v : shifted.data()) CHECK(v == 2.5);

  std::mt19937_64 rng(3);
  auto x = random_tensor({3, 6}, rng, 4.0);
  auto gamma = random_tensor({6}, rng), beta = random_tensor({6}, rng);
  auto y = ops::layer_norm(x, gamma, beta, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 6; ++j) mean += x.at(i, j);
    mean /= 6.0;
    double var = 0.0;
    for (std::size_t j = 0; j < 6; ++j) var += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    var /= 6.0;
    for (std::size_t j = 0; j < 6; ++j) {
      const double expect = (x.at(i, j) - mean) / std::sqrt(var + 1e-5) * gamma[j] + beta[j];
      CHECK(std::abs(y.at(i, j) - expect) < 1e-10);
    }
  }
}

TEST_CASE("backward basics") {
  auto x = Tensor::from({3}, {1.5, -2.0, 0.25}, true);
  backward(ops::sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  auto y = Tensor::from({3}, {1.5, -2.0, 0.25}, true);
  backward(ops::scale(ops::sum(ops::mul(y, y)), 0.5));
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.grad()[i] == y[i]);
}

TEST_CASE("backward rejects misuse") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  auto loss = ops::sum(x);
  backward(loss);
  CHECK_THROWS_AS(backward(loss), GraphError);
  CHECK_THROWS_AS(backward(ops::scale(x, 2.0)), GraphError);
  CHECK_THROWS_AS(backward(ops::sum(x.detach())), GraphError);
}

TEST_CASE("gradients accumulate across backward calls until reset") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  backward(ops::sum(x));
  backward(ops::sum(x));
  CHECK(x.grad()[0] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("every op matches central differences") {
  std::mt19937_64 rng(2024);
  auto param = [&](Shape s, double scale = 1.0) { return random_tensor(std::move(s), rng, scale, true); };
  auto away_from_zero = [&](Shape s) {
    auto t = param(std::move(s));
    for (auto& v : t.mutable_data()) v = v >= 0 ? v + 0.1 : v - 0.1;
    return t;
  };

  struct Case {
    const char* name;
    std::function<Tensor()> loss;
    std::vector<NamedParam> params;
  };
  auto a = param({3, 4}), b = param({4, 2}), c = param({3, 4}), bias = param({4});
  auto r = away_from_zero({3, 4});
  auto sm = param({2, 5}, 2.0), g = param({5}), be = param({5});
  auto w34 = random_tensor({3, 4}, rng), w43 = random_tensor({4, 3}, rng), w32 = random_tensor({3, 2}, rng);
  auto w25 = random_tensor({2, 5}, rng), w62 = random_tensor({6, 4}, rng), w46 = random_tensor({4, 6}, rng);
  auto w6x2 = random_tensor({6, 2}, rng), w44 = random_tensor({4, 4}, rng);
  const std::vector<std::size_t> rows = {2, 0, 2, 1};

  std::vector<Case> cases = {
      {"matmul", [&] { return probe_loss(ops::matmul(a, b), w32); }, {{"a", a}, {"b", b}}},
      {"transpose", [&] { return probe_loss(ops::transpose(a), w43); }, {{"a", a}}},
      {"add", [&] { return probe_loss(ops::add(a, c), w34); }, {{"a", a}, {"c", c}}},
      {"sub", [&] { return probe_loss(ops::sub(a, c), w34); }, {{"a", a}, {"c", c}}},
      {"mul", [&] { return probe_loss(ops::mul(a, c), w34); }, {{"a", a}, {"c", c}}},
      {"scale", [&] { return probe_loss(ops::scale(a, -1.7), w34); }, {{"a", a}}},
      {"add_bias", [&] { return probe_loss(ops::add_bias(a, bias), w34); }, {{"a", a}, {"bias", bias}}},
      {"relu", [&] { return probe_loss(ops::relu(r), w34); }, {{"r", r}}},
      {"gelu", [&] { return probe_loss(ops::gelu(a), w34); }, {{"a", a}}},
      {"softmax", [&] { return probe_loss(ops::softmax_rows(sm), w25); }, {{"x", sm}}},
      {"layer_norm", [&] { return probe_loss(ops::layer_norm(sm, g, be), w25); }, {{"x", sm}, {"g", g}, {"b", be}}},
      {"reshape", [&] { return probe_loss(ops::reshape(a, {6, 2}), w6x2); }, {{"a", a}}},
      {"concat0", [&] { return probe_loss(ops::concat({a, c}, 0), w62); }, {{"a", a}, {"c", c}}},
      {"concat1", [&] { return probe_loss(ops::concat({ops::transpose(a), ops::transpose(c)}, 1), w46); },
       {{"a", a}, {"c", c}}},
      {"slice", [&] { return probe_loss(ops::slice(a, 1, 1, 3), w32); }, {{"a", a}}},
      {"gather_rows", [&] { return probe_loss(ops::gather_rows(a, rows), w44); }, {{"a", a}}},
      {"sum", [&] { return ops::sum(ops::mul(a, a)); }, {{"a", a}}},
      {"mean", [&] { return ops::mean(ops::mul(a, c)); }, {{"a", a}, {"c", c}}},
  };

  for (auto& tc : cases) {
    CAPTURE(tc.name);
    auto report = finite_diff_check(tc.loss, tc.params);
    CHECK(report.passed);
    CHECK(report.worst().max_rel_error < 1e-4);
  }
}

TEST_CASE("ops are bit-deterministic") {
  std::mt19937_64 rng(5);
  auto x = random_tensor({4, 6}, rng), w = random_tensor({6, 6}, rng);
  auto g = random_tensor({6}, rng), b = random_tensor({6}, rng);
  auto run = [&] { return ops::layer_norm(ops::softmax_rows(ops::matmul(ops::gelu(x), w)), g, b); };
  CHECK(bit_equal(run(), run()));
}

TEST_CASE("adam") {
  SUBCASE("first step moves by lr against the gradient sign") {
    auto w = Tensor::from({3}, {0.5, -0.5, 2.0}, true);
    std::vector<Tensor> params = {w};
    auto state = make_adam_state(params, {.lr = 0.01});
    adam_step(params, {{3.0, -0.2, 1e-3}}, state);
    CHECK(w[0] == doctest::Approx(0.49).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-0.49).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(1.99).epsilon(1e-4));
    CHECK(state.t == 1);
  }
  SUBCASE("zero gradients are a fixed point") {
    auto w = Tensor::from({2}, {0.3, -7.0}, true);
    std::vector<Tensor> params = {w};
    auto state = make_adam_state(params, {.lr = 0.1});
    for (int i = 0; i < 5; ++i) adam_step(params, {{0.0, 0.0}}, state);
    CHECK(w[0] == 0.3);
    CHECK(w[1] == -7.0);
    CHECK(state.t == 5);
  }
  SUBCASE("three steps on w^2 follow the scalar trace") {
    auto w = Tensor::from({1}, {1.0}, true);
    std::vector<Tensor> params = {w};
    auto state = make_adam_state(params, {.lr = 0.1});

    double ow = 1.0, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999;
    const double frozen[] = {0.9000000005, 0.8004122286917928, 0.7015862729460303};
    for (int t = 1; t <= 3; ++t) {
      w.zero_grad();
      backward(ops::sum(ops::mul(w, w)));
      adam_step(params, state);

      const double g = 2.0 * ow;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      ow -= 0.1 * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + 1e-8);
      CHECK(std::abs(w[0] - ow) < 1e-12);
      CHECK(std::abs(w[0] - frozen[t - 1]) < 1e-12);
    }
  }
  SUBCASE("shape mismatch") {
    auto w = Tensor::from({2}, {0.0, 0.0}, true);
    std::vector<Tensor> params = {w};
    auto state = make_adam_state(params, {});
    CHECK_THROWS_AS(adam_step(params, {{1.0}}, state), DimensionError);
  }
}

TEST_CASE("finite_diff_check") {
  std::mt19937_64 rng(9);
  auto x = random_tensor({5, 3}, rng);
  auto w = random_tensor({3, 2}, rng, 1.0, true), b = random_tensor({2}, rng, 1.0, true);
  auto target = random_tensor({5, 2}, rng);
  auto linear = [&] { return probe_loss(ops::add_bias(ops::matmul(x, w), b), target); };

  SUBCASE("linear layer is exact") {
    auto report = finite_diff_check(linear, {{"w", w}, {"b", b}});
    REQUIRE(report.entries.size() == 2);
    CHECK(report.passed);
    for (const auto& e : report.entries) CHECK(e.max_rel_error < 1e-8);
  }
  SUBCASE("doubled gradient is caught") {
    GradCheckOptions opt;
    opt.corrupt_param = "w";
    opt.corrupt_factor = 2.0;
    auto report = finite_diff_check(linear, {{"w", w}, {"b", b}}, opt);
    CHECK_FALSE(report.passed);
    CHECK(report.worst().name == "w");
    CHECK(report.entries[1].passed);
  }
  SUBCASE("non-deterministic closure is rejected") {
    int calls = 0;
    auto drifting = [&] { return ops::scale(linear(), 1.0 + 1e-9 * ++calls); };
    CHECK_THROWS(finite_diff_check(drifting, {{"w", w}}));
  }
  SUBCASE("parameters are restored") {
    const std::vector<double> before(w.data().begin(), w.data().end());
    finite_diff_check(linear, {{"w", w}});
    CHECK(std::equal(before.begin(), before.end(), w.data().begin()));
  }
}
