#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fairscrub/error.hpp"
#include "fairscrub/mlp.hpp"
#include "fairscrub/ops.hpp"
#include "oracles.hpp"

using namespace fairscrub;

TEST_SUITE("forward") {
  TEST_CASE("identity single layer passes input through") {
    const Mlp net = Mlp::identity(2);
    const Matrix x = Matrix::from_rows({{1.0, 2.0}});
    const auto pass = forward(net, x);
    CHECK(pass.output == x);
  }

  TEST_CASE("relu hidden layer with negative pre-activations outputs zeros") {
    Mlp net({2, 3, 1}, Activation::ReLU);
    for (std::size_t j = 0; j < 3; ++j) net.set_bias(0, j, -1.0);
    net.set_weight(1, 0, 0, 1.0);
    const auto pass = forward(net, Matrix::from_rows({{0.1, 0.2}, {-0.5, 0.3}}));
    for (double v : pass.cache.layer_inputs[1].data()) CHECK(v == 0.0);
  }

  TEST_CASE("three-layer net matches the straight-line oracle") {
    Rng rng(7);
    const Mlp net = Mlp::glorot({5, 7, 6, 3}, Activation::ReLU, rng);
    const Matrix x = oracle::random_matrix(9, 5, rng);
    const Matrix got = infer(net, x);
    const Matrix want = oracle::forward(net, x);
    REQUIRE(got.rows() == 9);
    REQUIRE(got.cols() == 3);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
  }

  TEST_CASE("shape mismatch is a dimension error") {
    const Mlp net({3, 2}, Activation::Identity);
    CHECK_THROWS_AS(forward(net, Matrix(2, 4)), DimensionError);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("zero upstream gives an all-zero tape") {
    Rng rng(1);
    const Mlp net = Mlp::glorot({4, 5, 2}, Activation::ReLU, rng);
    const auto pass = forward(net, oracle::random_matrix(3, 4, rng));
    const auto tape = backward(net, pass.cache, Matrix(3, 2));
    for (double g : tape.params) CHECK(g == 0.0);
    for (double g : tape.input.data()) CHECK(g == 0.0);
  }

  TEST_CASE("linear scalar regression has the closed-form gradient") {
    Mlp net({2, 1}, Activation::Identity);
    net.set_weight(0, 0, 0, 0.5);
    net.set_weight(0, 1, 0, -1.0);
    net.set_bias(0, 0, 0.25);
    const Matrix x = Matrix::from_rows({{2.0, 3.0}});
    const double target = 1.0;
    const auto pass = forward(net, x);
    const double pred = pass.output(0, 0);
    Matrix upstream(1, 1, 2.0 * (pred - target));
    const auto tape = backward(net, pass.cache, upstream);
    CHECK(tape.params[0] == doctest::Approx(2.0 * (pred - target) * 2.0));
    CHECK(tape.params[1] == doctest::Approx(2.0 * (pred - target) * 3.0));
    CHECK(tape.params[2] == doctest::Approx(2.0 * (pred - target)));
  }

  TEST_CASE("random nets match central finite differences") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      Mlp net = Mlp::glorot({4, 6, 5, 3}, Activation::ReLU, rng);
      // Non-zero biases keep pre-activations off the ReLU kink.
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (std::size_t j = 0; j < net.layer(l).out; ++j) net.set_bias(l, j, rng.uniform(-0.5, 0.5));
      }
      const Matrix x = oracle::random_matrix(5, 4, rng);
      const std::vector<Label> y{0, 2, 1, 1, 0};
      const auto pass = forward(net, x);
      const auto ce = cross_entropy(pass.output, y);
      const auto tape = backward(net, pass.cache, ce.grad);
      Mlp probe = net;
      auto params = probe.mutable_params();
      auto loss = [&] { return cross_entropy(infer(probe, x), y).loss; };
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = oracle::central_diff(loss, params[i]);
        CHECK(oracle::rel_error(tape.params[i], fd) < 1e-4);
      }
      // Gradient w.r.t. the input.
      Matrix xp = x;
      auto input_loss = [&] { return cross_entropy(infer(net, xp), y).loss; };
      for (std::size_t i = 0; i < xp.size(); ++i) {
        const double fd = oracle::central_diff(input_loss, xp.data()[i]);
        CHECK(oracle::rel_error(tape.input.data()[i], fd) < 1e-4);
      }
    }
  }

  TEST_CASE("stale cache is a usage error") {
    Rng rng(3);
    Mlp net = Mlp::glorot({2, 2}, Activation::Identity, rng);
    const auto pass = forward(net, Matrix(1, 2, 1.0));
    net.set_bias(0, 0, 1.0);
    CHECK_THROWS_AS(backward(net, pass.cache, Matrix(1, 2)), UsageError);
    const Mlp other = net;
    CHECK_THROWS_AS(backward(other, forward(net, Matrix(1, 2)).cache, Matrix(1, 2)), UsageError);
  }

  TEST_CASE("forward and backward are bitwise deterministic") {
    auto run = [] {
      Rng rng(42);
      const Mlp net = Mlp::glorot({6, 8, 4}, Activation::ReLU, rng);
      const Matrix x = oracle::random_matrix(10, 6, rng);
      const auto pass = forward(net, x);
      return backward(net, pass.cache, pass.output).params;
    };
    CHECK(run() == run());
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("symmetric logits give a uniform distribution") {
    const auto p = softmax(std::vector<double>{0.0, 0.0});
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
  }

  TEST_CASE("large logits do not overflow") {
    const auto p = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(p[1]));
    const auto lp = log_softmax(std::vector<double>{-1000.0, 1000.0});
    CHECK(lp[1] == doctest::Approx(0.0));
    CHECK(lp[0] == doctest::Approx(-2000.0));
  }

  TEST_CASE("matches extended-precision exp/sum and sums to one") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> logits(1 + rng.below(8));
      for (double& v : logits) v = rng.uniform(-30.0, 30.0);
      const auto p = softmax(logits);
      const auto want = oracle::softmax_ld(logits);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::abs(p[i] - static_cast<double>(want[i])) < 1e-14);
        sum += p[i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    // Magnitude 1e3 still normalizes.
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> logits(4);
      for (double& v : logits) v = rng.uniform(-1000.0, 1000.0);
      double sum = 0.0;
      for (double v : softmax(logits)) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }

  TEST_CASE("non-finite logits are rejected") {
    CHECK_THROWS_AS(softmax(std::vector<double>{0.0, NAN}), DomainError);
  }
}

TEST_SUITE("entropy") {
  TEST_CASE("degenerate and uniform cases") {
    CHECK(entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
    CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(0.693147).epsilon(1e-6));
    const double third = 1.0 / 3.0;
    CHECK(entropy(std::vector<double>{third, third, third}) == doctest::Approx(1.098612).epsilon(1e-6));
  }

  TEST_CASE("uniform maximizes and one-hot zeroes entropy for K in 2..8") {
    Rng rng(9);
    for (std::size_t k = 2; k <= 8; ++k) {
      const std::vector<double> uniform(k, 1.0 / static_cast<double>(k));
      const double hmax = entropy(uniform);
      CHECK(hmax == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
      for (std::size_t hot = 0; hot < k; ++hot) {
        std::vector<double> onehot(k, 0.0);
        onehot[hot] = 1.0;
        CHECK(entropy(onehot) == 0.0);
      }
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(k);
        for (double& v : logits) v = rng.normal() * 3.0;
        const double h = entropy(softmax(logits));
        CHECK(h >= 0.0);
        CHECK(h <= hmax + 1e-12);
      }
    }
  }

  TEST_CASE("non-distributions are domain errors") {
    CHECK_THROWS_AS(entropy(std::vector<double>{0.7, 0.7}), DomainError);
    CHECK_THROWS_AS(entropy(std::vector<double>{1.5, -0.5}), DomainError);
  }
}

TEST_SUITE("gumbel_softmax") {
  TEST_CASE("deterministic mode at tau = 1 is the identity on distributions") {
    const std::vector<double> half{std::log(0.5), std::log(0.5)};
    const auto q = gumbel_softmax(half, 1.0);
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-15));
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> logits(2 + rng.below(6));
      for (double& v : logits) v = rng.normal() * 2.0;
      const auto p = softmax(logits);
      std::vector<double> lp;
      for (double v : p) lp.push_back(std::log(v));
      const auto out = gumbel_softmax(lp, 1.0);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(out[i] - p[i]) < 1e-15);
    }
  }

  TEST_CASE("argmax frequency follows the Gumbel-max property") {
    Rng rng(123);
    const std::vector<double> lp{std::log(0.7), std::log(0.3)};
    int wins = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const auto q = gumbel_softmax(lp, 0.5, rng);
      wins += q[0] > q[1];
    }
    CHECK(std::abs(wins / static_cast<double>(draws) - 0.7) < 0.01);
  }

  TEST_CASE("non-positive temperature is a domain error") {
    Rng rng(1);
    CHECK_THROWS_AS(gumbel_softmax(std::vector<double>{0.0}, 0.0), DomainError);
    CHECK_THROWS_AS(gumbel_softmax(std::vector<double>{0.0}, -1.0, rng), DomainError);
  }
}

TEST_SUITE("cross_entropy") {
  TEST_CASE("closed-form values") {
    const Matrix uniform = Matrix::from_rows({{0.0, 0.0}});
    CHECK(cross_entropy(uniform, std::vector<Label>{0}).loss == doctest::Approx(std::numbers::ln2));
    CHECK(cross_entropy(uniform, std::vector<Label>{1}).loss == doctest::Approx(std::numbers::ln2));
    const Matrix confident = Matrix::from_rows({{20.0, -20.0}});
    CHECK(cross_entropy(confident, std::vector<Label>{0}).loss < 1e-15);
  }

  TEST_CASE("gradient matches finite differences") {
    Rng rng(4);
    Matrix logits = oracle::random_matrix(6, 4, rng, 2.0);
    const std::vector<Label> y{0, 3, 2, 1, 1, 0};
    const auto ce = cross_entropy(logits, y);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double fd = oracle::central_diff([&] { return cross_entropy(logits, y).loss; },
                                             logits.data()[i]);
      CHECK(oracle::rel_error(ce.grad.data()[i], fd) < 1e-6);
    }
  }

  TEST_CASE("out-of-range labels are domain errors") {
    CHECK_THROWS_AS(cross_entropy(Matrix(1, 2), std::vector<Label>{2}), DomainError);
    CHECK_THROWS_AS(cross_entropy(Matrix(1, 2), std::vector<Label>{-1}), DomainError);
  }
}
