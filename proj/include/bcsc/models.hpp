#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bcsc/numerics.hpp"

namespace bcsc {

/// In-memory classification dataset: row-major feature matrix plus integer
/// labels in [0, num_classes).
struct Dataset {
  std::vector<double> inputs;  // sample_count x feature_dim, row-major
  std::vector<std::int32_t> labels;
  std::size_t sample_count = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * feature_dim, feature_dim);
  }
};

/// A differentiable model: mean loss and gradient over a batch of sample
/// indices, prediction, and its own weight initialization rule. Oracles are
/// stateless; all calls are pure functions of (params, batch, data).
class GradOracle {
 public:
  virtual ~GradOracle() = default;

  virtual std::size_t param_count() const = 0;

  /// Mean loss over the batch; writes the mean gradient (length
  /// param_count) into grad_out. grad_out is resized if needed.
  virtual double loss_and_grad(const FlatVector& params, std::span<const std::size_t> batch,
                               const Dataset& data, FlatVector& grad_out) const = 0;

  virtual std::int32_t predict(const FlatVector& params, std::span<const double> input) const = 0;

  /// Fresh parameters: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
  /// per layer, biases zero.
  virtual FlatVector init_params(RngStream& stream) const = 0;
};

/// Multinomial logistic regression with softmax cross-entropy.
/// Parameter layout: W (num_classes x feature_dim, row-major), then biases.
std::unique_ptr<GradOracle> logistic_oracle(std::size_t feature_dim, std::size_t num_classes);

/// One-hidden-layer ReLU network with softmax cross-entropy, manual backprop.
/// Parameter layout: W1 (hidden x feature_dim), b1, W2 (num_classes x hidden), b2.
std::unique_ptr<GradOracle> mlp_oracle(std::size_t feature_dim, std::size_t hidden,
                                       std::size_t num_classes);

/// Central-difference gradient, coordinate by coordinate. Reference oracle
/// for verifying analytic gradients; touches only the loss path.
FlatVector finite_diff_grad(const GradOracle& oracle, const FlatVector& params,
                            std::span<const std::size_t> batch, const Dataset& data,
                            double h = 1e-5);

struct Evaluation {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Mean loss and top-1 accuracy over the whole dataset.
Evaluation evaluate(const GradOracle& oracle, const FlatVector& params, const Dataset& data);

}  // namespace bcsc
