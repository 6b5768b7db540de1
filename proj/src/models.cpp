#include "bcsc/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bcsc/errors.hpp"

namespace bcsc {

namespace {

// Stable softmax cross-entropy on raw logits. Fills probs (same length) and
// returns -log p[label].
double softmax_xent(std::span<double> logits, std::int32_t label, std::span<double> probs) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - zmax);
    sum += probs[k];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] /= sum;
  }
  return std::log(sum) - (logits[label] - zmax);
}

std::int32_t argmax_label(std::span<const double> logits) {
  return static_cast<std::int32_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
}

void check_batch(std::span<const std::size_t> batch, const Dataset& data,
                 std::size_t num_classes) {
  if (batch.empty()) {
    throw ConfigError("loss_and_grad: batch must be non-empty");
  }
  for (std::size_t i : batch) {
    if (i >= data.sample_count) {
      throw IndexError("loss_and_grad: sample index " + std::to_string(i) + " out of range");
    }
    if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= num_classes) {
      throw IndexError("loss_and_grad: label " + std::to_string(data.labels[i]) +
                       " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

class LogisticOracle final : public GradOracle {
 public:
  LogisticOracle(std::size_t d, std::size_t k) : d_(d), k_(k) {
    if (d == 0 || k == 0) {
      throw ConfigError("logistic_oracle: feature_dim and num_classes must be >= 1");
    }
  }

  std::size_t param_count() const override { return k_ * d_ + k_; }

  double loss_and_grad(const FlatVector& params, std::span<const std::size_t> batch,
                       const Dataset& data, FlatVector& grad_out) const override {
    check_dims(params, data);
    check_batch(batch, data, k_);
    if (grad_out.size() != param_count()) {
      grad_out = FlatVector(param_count());
    }
    double* g = grad_out.data();
    std::fill(g, g + param_count(), 0.0);
    const double* w = params.data();
    const double* bias = w + k_ * d_;
    double* gbias = g + k_ * d_;

    std::vector<double> logits(k_), probs(k_);
    double loss_sum = 0.0;
    for (std::size_t i : batch) {
      const std::span<const double> x = data.row(i);
      for (std::size_t k = 0; k < k_; ++k) {
        const double* wk = w + k * d_;
        double z = bias[k];
        for (std::size_t j = 0; j < d_; ++j) {
          z += wk[j] * x[j];
        }
        logits[k] = z;
      }
      loss_sum += softmax_xent(logits, data.labels[i], probs);
      for (std::size_t k = 0; k < k_; ++k) {
        const double dz = probs[k] - (static_cast<std::int32_t>(k) == data.labels[i] ? 1.0 : 0.0);
        double* gk = g + k * d_;
        for (std::size_t j = 0; j < d_; ++j) {
          gk[j] += dz * x[j];
        }
        gbias[k] += dz;
      }
    }
    const double inv = static_cast<double>(batch.size());
    for (std::size_t c = 0; c < param_count(); ++c) {
      g[c] /= inv;
    }
    return loss_sum / inv;
  }

  std::int32_t predict(const FlatVector& params, std::span<const double> input) const override {
    const double* w = params.data();
    const double* bias = w + k_ * d_;
    std::vector<double> logits(k_);
    for (std::size_t k = 0; k < k_; ++k) {
      const double* wk = w + k * d_;
      double z = bias[k];
      for (std::size_t j = 0; j < d_; ++j) {
        z += wk[j] * input[j];
      }
      logits[k] = z;
    }
    return argmax_label(logits);
  }

  FlatVector init_params(RngStream& stream) const override {
    FlatVector params(param_count());
    const double a = 1.0 / std::sqrt(static_cast<double>(d_));
    for (std::size_t c = 0; c < k_ * d_; ++c) {
      params[c] = a * (2.0 * stream.next_double() - 1.0);
    }
    return params;  // biases stay zero
  }

 private:
  void check_dims(const FlatVector& params, const Dataset& data) const {
    if (params.size() != param_count()) {
      throw ShapeError("logistic_oracle: params length " + std::to_string(params.size()) +
                       " != " + std::to_string(param_count()));
    }
    if (data.feature_dim != d_) {
      throw ShapeError("logistic_oracle: dataset feature_dim " +
                       std::to_string(data.feature_dim) + " != " + std::to_string(d_));
    }
  }

  std::size_t d_, k_;
};

class MlpOracle final : public GradOracle {
 public:
  MlpOracle(std::size_t d, std::size_t h, std::size_t k) : d_(d), h_(h), k_(k) {
    if (d == 0 || h == 0 || k == 0) {
      throw ConfigError("mlp_oracle: all dimensions must be >= 1");
    }
  }

  std::size_t param_count() const override { return h_ * d_ + h_ + k_ * h_ + k_; }

  double loss_and_grad(const FlatVector& params, std::span<const std::size_t> batch,
                       const Dataset& data, FlatVector& grad_out) const override {
    check_dims(params, data);
    check_batch(batch, data, k_);
    if (grad_out.size() != param_count()) {
      grad_out = FlatVector(param_count());
    }
    double* g = grad_out.data();
    std::fill(g, g + param_count(), 0.0);

    const double* w1 = params.data();
    const double* b1 = w1 + h_ * d_;
    const double* w2 = b1 + h_;
    const double* b2 = w2 + k_ * h_;
    double* gw1 = g;
    double* gb1 = g + h_ * d_;
    double* gw2 = gb1 + h_;
    double* gb2 = gw2 + k_ * h_;

    std::vector<double> act(h_), relu(h_), logits(k_), probs(k_), dhidden(h_);
    double loss_sum = 0.0;
    for (std::size_t i : batch) {
      const std::span<const double> x = data.row(i);
      for (std::size_t hh = 0; hh < h_; ++hh) {
        const double* row = w1 + hh * d_;
        double a = b1[hh];
        for (std::size_t j = 0; j < d_; ++j) {
          a += row[j] * x[j];
        }
        act[hh] = a;
        relu[hh] = a > 0.0 ? a : 0.0;
      }
      for (std::size_t k = 0; k < k_; ++k) {
        const double* row = w2 + k * h_;
        double z = b2[k];
        for (std::size_t hh = 0; hh < h_; ++hh) {
          z += row[hh] * relu[hh];
        }
        logits[k] = z;
      }
      loss_sum += softmax_xent(logits, data.labels[i], probs);

      std::fill(dhidden.begin(), dhidden.end(), 0.0);
      for (std::size_t k = 0; k < k_; ++k) {
        const double dz = probs[k] - (static_cast<std::int32_t>(k) == data.labels[i] ? 1.0 : 0.0);
        double* grow = gw2 + k * h_;
        const double* row = w2 + k * h_;
        for (std::size_t hh = 0; hh < h_; ++hh) {
          grow[hh] += dz * relu[hh];
          dhidden[hh] += dz * row[hh];
        }
        gb2[k] += dz;
      }
      for (std::size_t hh = 0; hh < h_; ++hh) {
        if (act[hh] <= 0.0) {  // ReLU subgradient at 0 is 0
          continue;
        }
        const double da = dhidden[hh];
        double* grow = gw1 + hh * d_;
        for (std::size_t j = 0; j < d_; ++j) {
          grow[j] += da * x[j];
        }
        gb1[hh] += da;
      }
    }
    const double inv = static_cast<double>(batch.size());
    for (std::size_t c = 0; c < param_count(); ++c) {
      g[c] /= inv;
    }
    return loss_sum / inv;
  }

  std::int32_t predict(const FlatVector& params, std::span<const double> input) const override {
    const double* w1 = params.data();
    const double* b1 = w1 + h_ * d_;
    const double* w2 = b1 + h_;
    const double* b2 = w2 + k_ * h_;
    std::vector<double> relu(h_), logits(k_);
    for (std::size_t hh = 0; hh < h_; ++hh) {
      const double* row = w1 + hh * d_;
      double a = b1[hh];
      for (std::size_t j = 0; j < d_; ++j) {
        a += row[j] * input[j];
      }
      relu[hh] = a > 0.0 ? a : 0.0;
    }
    for (std::size_t k = 0; k < k_; ++k) {
      const double* row = w2 + k * h_;
      double z = b2[k];
      for (std::size_t hh = 0; hh < h_; ++hh) {
        z += row[hh] * relu[hh];
      }
      logits[k] = z;
    }
    return argmax_label(logits);
  }

  FlatVector init_params(RngStream& stream) const override {
    FlatVector params(param_count());
    const double a1 = 1.0 / std::sqrt(static_cast<double>(d_));
    for (std::size_t c = 0; c < h_ * d_; ++c) {
      params[c] = a1 * (2.0 * stream.next_double() - 1.0);
    }
    const double a2 = 1.0 / std::sqrt(static_cast<double>(h_));
    const std::size_t w2_begin = h_ * d_ + h_;
    for (std::size_t c = 0; c < k_ * h_; ++c) {
      params[w2_begin + c] = a2 * (2.0 * stream.next_double() - 1.0);
    }
    return params;  // biases stay zero
  }

 private:
  void check_dims(const FlatVector& params, const Dataset& data) const {
    if (params.size() != param_count()) {
      throw ShapeError("mlp_oracle: params length " + std::to_string(params.size()) +
                       " != " + std::to_string(param_count()));
    }
    if (data.feature_dim != d_) {
      throw ShapeError("mlp_oracle: dataset feature_dim " + std::to_string(data.feature_dim) +
                       " != " + std::to_string(d_));
    }
  }

  std::size_t d_, h_, k_;
};

}  // namespace

std::unique_ptr<GradOracle> logistic_oracle(std::size_t feature_dim, std::size_t num_classes) {
  return std::make_unique<LogisticOracle>(feature_dim, num_classes);
}

std::unique_ptr<GradOracle> mlp_oracle(std::size_t feature_dim, std::size_t hidden,
                                       std::size_t num_classes) {
  return std::make_unique<MlpOracle>(feature_dim, hidden, num_classes);
}

FlatVector finite_diff_grad(const GradOracle& oracle, const FlatVector& params,
                            std::span<const std::size_t> batch, const Dataset& data, double h) {
  if (h <= 0.0) {
    throw ConfigError("finite_diff_grad: h must be positive");
  }
  FlatVector probe = params;
  FlatVector scratch;
  FlatVector grad(params.size());
  for (std::size_t c = 0; c < params.size(); ++c) {
    const double orig = probe[c];
    probe[c] = orig + h;
    const double up = oracle.loss_and_grad(probe, batch, data, scratch);
    probe[c] = orig - h;
    const double down = oracle.loss_and_grad(probe, batch, data, scratch);
    probe[c] = orig;
    grad[c] = (up - down) / (2.0 * h);
  }
  return grad;
}

Evaluation evaluate(const GradOracle& oracle, const FlatVector& params, const Dataset& data) {
  std::vector<std::size_t> all(data.sample_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  FlatVector scratch;
  Evaluation out;
  out.mean_loss = oracle.loss_and_grad(params, all, data, scratch);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.sample_count; ++i) {
    if (oracle.predict(params, data.row(i)) == data.labels[i]) {
      ++hits;
    }
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(data.sample_count);
  return out;
}

}  // namespace bcsc
