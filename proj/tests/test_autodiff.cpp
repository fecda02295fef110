#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "symmeq/autodiff.hpp"
#include "symmeq/tensor.hpp"

using namespace symmeq;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -2.0,
                     double hi = 2.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> uni(lo, hi);
  for (double& v : t.data()) v = uni(rng);
  return t;
}

// Checks d/dx sum(w . f(x)) against central differences for 100 random draws.
double max_fd_error(const std::function<Var(const Var&)>& op, std::vector<std::size_t> shape,
                    std::size_t trials = 100, double lo = -2.0, double hi = 2.0,
                    double eps = 1e-6) {
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Tensor x = random_tensor(shape, rng, lo, hi);
    Tensor probe = op(Var::leaf(x)).value();
    Tensor w = random_tensor(probe.shape(), rng, -1.0, 1.0);

    auto scalar = [&](const Tensor& in) {
      Tensor y = op(Var::leaf(in)).value();
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
      return s;
    };

    Var leaf = Var::leaf(x, true);
    Var root = ad::sum(ad::mul(op(leaf), Var::leaf(w)));
    ad::backward(root);
    worst = std::max(worst, ad::finite_difference_check(scalar, x, leaf.grad(), eps));
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise primitive gradients match finite differences") {
  CHECK(max_fd_error([](const Var& x) { return ad::neg(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::scale(x, -1.7); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::add_scalar(x, 0.3); }, {12}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::elu(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::vtanh(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::vexp(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::vlog(x); }, {3, 4}, 100, 0.2, 3.0) < 1e-4);
  // Kinked ops sampled away from their kinks.
  CHECK(max_fd_error([](const Var& x) { return ad::relu(x); }, {3, 4}, 100, 0.1, 2.0) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::relu(x); }, {3, 4}, 100, -2.0, -0.1) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::clip(x, -1.0, 1.0); }, {3, 4}, 100, -0.9, 0.9) <
        1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::clip(x, -1.0, 1.0); }, {3, 4}, 100, 1.1, 2.0) <
        1e-4);
}

TEST_CASE("binary and reduction gradients match finite differences") {
  std::mt19937_64 rng(7);
  Tensor other = random_tensor({3, 4}, rng);
  CHECK(max_fd_error([&](const Var& x) { return ad::add(x, Var::leaf(other)); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::sub(Var::leaf(other), x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::mul(x, Var::leaf(other)); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::mul(x, x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::sum(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::mean(x); }, {3, 4}) < 1e-4);
  // min2 away from ties.
  Tensor low = random_tensor({3, 4}, rng, -5.0, -3.0);
  CHECK(max_fd_error([&](const Var& x) { return ad::min2(x, Var::leaf(low)); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::min2(Var::leaf(low), x); }, {3, 4}) < 1e-4);
}

TEST_CASE("matrix primitive gradients match finite differences") {
  std::mt19937_64 rng(9);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({5, 4}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor v4 = random_tensor({4}, rng);
  Tensor s1 = random_tensor({1}, rng);

  Tensor right = random_tensor({4, 2}, rng);
  CHECK(max_fd_error([&](const Var& x) { return ad::matmul(x, Var::leaf(right)); }, {3, 4}, 50) <
        1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::matmul(Var::leaf(a), x); }, {4, 2}, 50) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::linear(x, Var::leaf(w), Var::leaf(b)); },
                     {3, 4}, 50) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::linear(Var::leaf(a), x, Var::leaf(b)); },
                     {5, 4}, 50) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::linear(Var::leaf(a), Var::leaf(w), x); }, {5},
                     50) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::concat_cols(x, Var::leaf(a)); }, {3, 2}, 50) <
        1e-4);
  CHECK(max_fd_error([](const Var& x) { return ad::row_sum(x); }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::add_rowvec(x, Var::leaf(v4)); }, {3, 4}) <
        1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::add_rowvec(Var::leaf(a), x); }, {4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::mul_rowvec(x, Var::leaf(v4)); }, {3, 4}) <
        1e-4);
  CHECK(max_fd_error([&](const Var& x) { return ad::mul_rowvec(Var::leaf(a), x); }, {4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) {
          return ad::add_broadcast_scalar(x, Var::leaf(s1), -2.0);
        }, {3, 4}) < 1e-4);
  CHECK(max_fd_error([&](const Var& x) {
          return ad::add_broadcast_scalar(Var::leaf(a), ad::sum(x), 0.7);
        }, {6}) < 1e-4);
}

TEST_CASE("scatter and signed row permutation gradients") {
  auto plan = std::make_shared<ad::ScatterPlan>();
  plan->out_shape = {3, 2};
  plan->out_index = {0, 1, 2, 3, 4, 5};
  plan->src_index = {0, 1, 1, 0, 2, 2};
  plan->coeff = {1.0, -1.0, 2.0, 0.5, 1.0, -1.0};
  CHECK(max_fd_error([&](const Var& x) { return ad::scatter(x, plan); }, {3}) < 1e-4);

  std::vector<std::size_t> target = {2, 0, 1, 3};
  std::vector<double> sign = {1.0, -1.0, 1.0, -1.0};
  CHECK(max_fd_error([&](const Var& x) { return ad::signed_permute_rows(x, target, sign); },
                     {3, 4}) < 1e-4);
}

TEST_CASE("backward twice produces identical gradients") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({4, 3}, rng);
  Var leaf = Var::leaf(x, true);
  Var root = ad::mean(ad::mul(ad::vtanh(leaf), ad::elu(leaf)));
  ad::backward(root);
  Tensor first = leaf.grad();
  ad::backward(root);
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(leaf.grad()[i] == first[i]);
}

TEST_CASE("clip is pass-through inside and flat outside") {
  Tensor x = Tensor::vec({-2.0, -0.5, 0.5, 2.0});
  Var leaf = Var::leaf(x, true);
  ad::backward(ad::sum(ad::clip(leaf, -1.0, 1.0)));
  CHECK(leaf.grad()[0] == 0.0);
  CHECK(leaf.grad()[1] == 1.0);
  CHECK(leaf.grad()[2] == 1.0);
  CHECK(leaf.grad()[3] == 0.0);
  Tensor y = ad::clip(Var::leaf(x), -1.0, 1.0).value();
  CHECK(y[0] == -1.0);
  CHECK(y[1] == -0.5);
  CHECK(y[3] == 1.0);
}

TEST_CASE("relu subgradient at the kink is zero") {
  Var leaf = Var::leaf(Tensor::vec({0.0, 1.0, -1.0}), true);
  ad::backward(ad::sum(ad::relu(leaf)));
  CHECK(leaf.grad()[0] == 0.0);
  CHECK(leaf.grad()[1] == 1.0);
  CHECK(leaf.grad()[2] == 0.0);
}

TEST_CASE("non-finite op outputs are rejected with the op tag") {
  Var leaf = Var::leaf(Tensor::vec({-1.0}));
  CHECK_THROWS(ad::vlog(leaf));
  CHECK_THROWS(ad::vexp(Var::leaf(Tensor::vec({1e9}))));
}

TEST_CASE("tape binds each parameter tensor to a single leaf") {
  Tensor p = Tensor::vec({1.0, 2.0});
  ad::Tape tape;
  Var a = tape.param(p);
  Var b = tape.param(p);
  CHECK(a.node() == b.node());
  ad::backward(ad::sum(ad::add(a, b)));
  const Tensor* g = tape.grad_of(p);
  REQUIRE(g != nullptr);
  CHECK((*g)[0] == 2.0);
  CHECK((*g)[1] == 2.0);
}
