#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bcsc/data.hpp"
#include "bcsc/errors.hpp"
#include "bcsc/models.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bcsc;
using namespace bcsc::test;

namespace {

Dataset two_class_toy() {
  // Two samples in d=2: x0 = (1, 2) labeled 0, x1 = (-1, 0.5) labeled 1.
  Dataset ds;
  ds.sample_count = 2;
  ds.feature_dim = 2;
  ds.num_classes = 2;
  ds.inputs = {1.0, 2.0, -1.0, 0.5};
  ds.labels = {0, 1};
  return ds;
}

FlatVector random_params(const GradOracle& oracle, RngStream& stream, double scale = 0.5) {
  FlatVector w(oracle.param_count());
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = scale * stream.next_gaussian();
  }
  return w;
}

// Smallest |hidden pre-activation| over the batch, used to steer finite
// differences away from the ReLU kink.
double min_abs_preact(const FlatVector& params, std::span<const std::size_t> batch,
                      const Dataset& data, std::size_t hidden) {
  const std::size_t d = data.feature_dim;
  double min_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i : batch) {
    const auto x = data.row(i);
    for (std::size_t h = 0; h < hidden; ++h) {
      double a = params[hidden * d + h];
      for (std::size_t j = 0; j < d; ++j) {
        a += params[h * d + j] * x[j];
      }
      min_abs = std::min(min_abs, std::abs(a));
    }
  }
  return min_abs;
}

}  // namespace

TEST_CASE("logistic loss at w=0 is ln K") {
  const auto ds = two_class_toy();
  const auto oracle = logistic_oracle(2, 2);
  FlatVector w(oracle->param_count());
  FlatVector grad;
  const auto batch = iota_batch(2);
  const double loss = oracle->loss_and_grad(w, batch, ds, grad);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("logistic gradient at w=0 is (softmax - onehot) outer x, by hand") {
  // At w=0 the softmax is uniform (0.5, 0.5). For the single sample x=(1,2)
  // with label 0: dW row 0 = (0.5-1)*x = (-0.5, -1), row 1 = 0.5*x = (0.5, 1),
  // biases (-0.5, 0.5).
  const auto ds = two_class_toy();
  const auto oracle = logistic_oracle(2, 2);
  FlatVector w(oracle->param_count());
  FlatVector grad;
  const std::vector<std::size_t> batch = {0};
  oracle->loss_and_grad(w, batch, ds, grad);
  CHECK(grad[0] == doctest::Approx(-0.5).epsilon(1e-12));  // W[0][0]
  CHECK(grad[1] == doctest::Approx(-1.0).epsilon(1e-12));  // W[0][1]
  CHECK(grad[2] == doctest::Approx(0.5).epsilon(1e-12));   // W[1][0]
  CHECK(grad[3] == doctest::Approx(1.0).epsilon(1e-12));   // W[1][1]
  CHECK(grad[4] == doctest::Approx(-0.5).epsilon(1e-12));  // b[0]
  CHECK(grad[5] == doctest::Approx(0.5).epsilon(1e-12));   // b[1]
}

TEST_CASE("logistic analytic gradient matches finite differences to 1e-6") {
  RngStream data_stream = derive_stream(101, "synth/train");
  const auto ds = synth_blobs(data_stream, 24, 5, 3, 2.0);
  const auto oracle = logistic_oracle(5, 3);
  RngStream ws = derive_stream(101, "w");
  for (int trial = 0; trial < 20; ++trial) {
    const FlatVector w = random_params(*oracle, ws);
    const auto order = shuffle_indices(ws, ds.sample_count);
    const std::vector<std::size_t> batch(order.begin(), order.begin() + 6);
    FlatVector analytic;
    oracle->loss_and_grad(w, batch, ds, analytic);
    const FlatVector numeric = finite_diff_grad(*oracle, w, batch, ds);
    CHECK(relative_grad_error(analytic, numeric) <= 1e-6);
  }
}

TEST_CASE("mlp loss with all-zero weights is ln K for any input") {
  RngStream data_stream = derive_stream(7, "synth/train");
  const auto ds = synth_blobs(data_stream, 12, 4, 3, 5.0);
  const auto oracle = mlp_oracle(4, 6, 3);
  FlatVector w(oracle->param_count());
  FlatVector grad;
  const auto batch = iota_batch(12);
  const double loss = oracle->loss_and_grad(w, batch, ds, grad);
  CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("mlp analytic gradient matches finite differences to 1e-5 off the kink") {
  RngStream data_stream = derive_stream(55, "synth/train");
  const auto ds = synth_blobs(data_stream, 24, 5, 3, 2.0);
  const std::size_t hidden = 4;
  const auto oracle = mlp_oracle(5, hidden, 3);
  RngStream ws = derive_stream(55, "w");
  int accepted = 0;
  while (accepted < 20) {
    const FlatVector w = random_params(*oracle, ws);
    const auto order = shuffle_indices(ws, ds.sample_count);
    const std::vector<std::size_t> batch(order.begin(), order.begin() + 6);
    if (min_abs_preact(w, batch, ds, hidden) < 1e-4) {
      continue;  // reject kink-adjacent points, central differences lie there
    }
    ++accepted;
    FlatVector analytic;
    oracle->loss_and_grad(w, batch, ds, analytic);
    const FlatVector numeric = finite_diff_grad(*oracle, w, batch, ds);
    CHECK(relative_grad_error(analytic, numeric) <= 1e-5);
  }
}

TEST_CASE("permuting hidden units leaves the mlp loss invariant") {
  RngStream data_stream = derive_stream(13, "synth/train");
  const auto ds = synth_blobs(data_stream, 10, 3, 2, 4.0);
  const std::size_t d = 3, hidden = 5, k = 2;
  const auto oracle = mlp_oracle(d, hidden, k);
  RngStream ws = derive_stream(13, "w");
  const FlatVector w = random_params(*oracle, ws);

  // Swap hidden units 1 and 3: rows of W1, entries of b1, columns of W2.
  FlatVector swapped = w;
  const auto swap_units = [&](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < d; ++j) {
      std::swap(swapped[a * d + j], swapped[b * d + j]);
    }
    std::swap(swapped[hidden * d + a], swapped[hidden * d + b]);
    const std::size_t w2 = hidden * d + hidden;
    for (std::size_t c = 0; c < k; ++c) {
      std::swap(swapped[w2 + c * hidden + a], swapped[w2 + c * hidden + b]);
    }
  };
  swap_units(1, 3);

  FlatVector grad;
  const auto batch = iota_batch(10);
  const double base = oracle->loss_and_grad(w, batch, ds, grad);
  const double perm = oracle->loss_and_grad(swapped, batch, ds, grad);
  CHECK(base == doctest::Approx(perm).epsilon(1e-12));
}

TEST_CASE("batch-mean loss and gradient equal the average of single-sample calls") {
  RngStream data_stream = derive_stream(23, "synth/train");
  const auto ds = synth_blobs(data_stream, 8, 4, 3, 2.0);
  RngStream ws = derive_stream(23, "w");
  for (const bool mlp : {false, true}) {
    const auto oracle = mlp ? mlp_oracle(4, 3, 3) : logistic_oracle(4, 3);
    const FlatVector w = random_params(*oracle, ws);
    const auto batch = iota_batch(8);
    FlatVector grad;
    const double loss = oracle->loss_and_grad(w, batch, ds, grad);

    double mean_loss = 0.0;
    FlatVector mean_grad(oracle->param_count());
    for (std::size_t i = 0; i < 8; ++i) {
      const std::vector<std::size_t> single = {i};
      FlatVector g;
      mean_loss += oracle->loss_and_grad(w, single, ds, g);
      for (std::size_t c = 0; c < g.size(); ++c) {
        mean_grad[c] += g[c];
      }
    }
    mean_loss /= 8.0;
    CHECK(std::abs(loss - mean_loss) <= 1e-12);
    for (std::size_t c = 0; c < mean_grad.size(); ++c) {
      CHECK(std::abs(grad[c] - mean_grad[c] / 8.0) <= 1e-12);
    }
  }
}

TEST_CASE("loss_and_grad is bit-deterministic") {
  RngStream data_stream = derive_stream(31, "synth/train");
  const auto ds = synth_blobs(data_stream, 16, 4, 3, 2.0);
  const auto oracle = mlp_oracle(4, 5, 3);
  RngStream ws = derive_stream(31, "w");
  const FlatVector w = random_params(*oracle, ws);
  const auto batch = iota_batch(16);
  FlatVector g1, g2;
  const double l1 = oracle->loss_and_grad(w, batch, ds, g1);
  const double l2 = oracle->loss_and_grad(w, batch, ds, g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("finite differences recover a quadratic gradient almost exactly") {
  const QuadraticOracle oracle(3);
  const auto ds = target_dataset({{1.0, -2.0, 0.5}});
  FlatVector w(std::vector<double>{0.25, 0.5, -1.0});
  const std::vector<std::size_t> batch = {0};
  const FlatVector numeric = finite_diff_grad(oracle, w, batch, ds);
  FlatVector analytic;
  oracle.loss_and_grad(w, batch, ds, analytic);
  // Central differences are exact for polynomials of degree <= 2 up to
  // rounding in the loss evaluations.
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(numeric[c] == doctest::Approx(analytic[c]).epsilon(1e-9));
  }
}

TEST_CASE("init_params is deterministic, bounded by fan-in, and zero-biased") {
  const std::size_t d = 9, hidden = 4, k = 3;
  const auto oracle = mlp_oracle(d, hidden, k);
  RngStream s1 = derive_stream(77, "init");
  RngStream s2 = derive_stream(77, "init");
  const FlatVector a = oracle->init_params(s1);
  const FlatVector b = oracle->init_params(s2);
  CHECK(a == b);

  for (std::size_t c = 0; c < hidden * d; ++c) {
    CHECK(std::abs(a[c]) <= 1.0 / 3.0);  // 1/sqrt(9)
  }
  for (std::size_t c = hidden * d; c < hidden * d + hidden; ++c) {
    CHECK(a[c] == 0.0);  // b1
  }
  const std::size_t w2 = hidden * d + hidden;
  for (std::size_t c = w2; c < w2 + k * hidden; ++c) {
    CHECK(std::abs(a[c]) <= 0.5);  // 1/sqrt(4)
  }
  for (std::size_t c = w2 + k * hidden; c < a.size(); ++c) {
    CHECK(a[c] == 0.0);  // b2
  }
}

TEST_CASE("evaluate reports exact accuracy and w=0 loss ln K") {
  RngStream data_stream = derive_stream(3, "synth/train");
  const auto ds = synth_blobs(data_stream, 50, 2, 2, 100.0);
  const auto oracle = logistic_oracle(2, 2);
  FlatVector w(oracle->param_count());
  const Evaluation at_zero = evaluate(*oracle, w, ds);
  CHECK(at_zero.mean_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Clusters sit at x=0 and x=100: the linear rule w = (1, 0 | -1, 0), b = 0
  // scores class 1 higher iff x > 0... choose the decision boundary at x=50.
  w[0] = -1.0;  // class 0 weight on feature 0
  w[2] = 1.0;   // class 1 weight on feature 0
  w[4] = 50.0;  // class 0 bias
  w[5] = -50.0; // class 1 bias
  const Evaluation separated = evaluate(*oracle, w, ds);
  CHECK(separated.accuracy == 1.0);
}

TEST_CASE("oracles validate batches, shapes, and labels") {
  const auto ds = two_class_toy();
  const auto oracle = logistic_oracle(2, 2);
  FlatVector w(oracle->param_count());
  FlatVector grad;
  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(oracle->loss_and_grad(w, empty, ds, grad), ConfigError);
  const std::vector<std::size_t> oob = {5};
  CHECK_THROWS_AS(oracle->loss_and_grad(w, oob, ds, grad), IndexError);
  FlatVector bad_w(3);
  const auto batch = iota_batch(2);
  CHECK_THROWS_AS(oracle->loss_and_grad(bad_w, batch, ds, grad), ShapeError);

  Dataset bad_labels = ds;
  bad_labels.labels[1] = 7;  // outside [0, K)
  CHECK_THROWS_AS(oracle->loss_and_grad(w, batch, bad_labels, grad), IndexError);

  CHECK_THROWS_AS(logistic_oracle(0, 2), ConfigError);
  CHECK_THROWS_AS(mlp_oracle(2, 0, 2), ConfigError);
  CHECK_THROWS_AS(finite_diff_grad(*oracle, w, batch, ds, 0.0), ConfigError);
}
