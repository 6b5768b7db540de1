#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "bcsc/models.hpp"
#include "bcsc/numerics.hpp"

namespace bcsc::test {

inline std::string data_dir() {
  if (const char* env = std::getenv("BCSC_DATA_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return BCSC_DATA_DIR_DEFAULT;
}

inline std::string cli_path() {
  if (const char* env = std::getenv("BCSC_CLI"); env != nullptr && *env != '\0') {
    return env;
  }
  return BCSC_CLI_PATH_DEFAULT;
}

// Placeholder dataset for oracles that ignore features (n rows, d columns,
// single class).
inline Dataset dummy_dataset(std::size_t n, std::size_t d = 1) {
  Dataset ds;
  ds.sample_count = n;
  ds.feature_dim = d;
  ds.num_classes = 1;
  ds.inputs.assign(n * d, 0.0);
  ds.labels.assign(n, 0);
  return ds;
}

// f_i(w) = 0.5 * ||w - x_i||^2 where x_i is row i of the dataset, so the
// batch-mean gradient is w - mean(x_i). Closed forms for every test.
class QuadraticOracle final : public GradOracle {
 public:
  explicit QuadraticOracle(std::size_t m) : m_(m) {}

  std::size_t param_count() const override { return m_; }

  double loss_and_grad(const FlatVector& params, std::span<const std::size_t> batch,
                       const Dataset& data, FlatVector& grad_out) const override {
    if (grad_out.size() != m_) {
      grad_out = FlatVector(m_);
    }
    double loss = 0.0;
    for (std::size_t c = 0; c < m_; ++c) {
      grad_out[c] = 0.0;
    }
    for (std::size_t i : batch) {
      const auto x = data.row(i);
      for (std::size_t c = 0; c < m_; ++c) {
        const double diff = params[c] - x[c];
        loss += 0.5 * diff * diff;
        grad_out[c] += diff;
      }
    }
    const double inv = static_cast<double>(batch.size());
    for (std::size_t c = 0; c < m_; ++c) {
      grad_out[c] /= inv;
    }
    return loss / inv;
  }

  std::int32_t predict(const FlatVector&, std::span<const double>) const override { return 0; }

  FlatVector init_params(RngStream&) const override { return FlatVector(m_); }

 private:
  std::size_t m_;
};

// Dataset whose rows are the quadratic targets.
inline Dataset target_dataset(const std::vector<std::vector<double>>& targets) {
  Dataset ds;
  ds.sample_count = targets.size();
  ds.feature_dim = targets.front().size();
  ds.num_classes = 1;
  ds.labels.assign(ds.sample_count, 0);
  ds.inputs.reserve(ds.sample_count * ds.feature_dim);
  for (const auto& row : targets) {
    ds.inputs.insert(ds.inputs.end(), row.begin(), row.end());
  }
  return ds;
}

// Gradient identically one on every coordinate and loss zero: with lr=1 and
// momentum/decay off, every update subtracts exactly 1.0, so -w[c] counts the
// updates coordinate c received.
class ConstantGradOracle final : public GradOracle {
 public:
  explicit ConstantGradOracle(std::size_t m) : m_(m) {}

  std::size_t param_count() const override { return m_; }

  double loss_and_grad(const FlatVector&, std::span<const std::size_t>, const Dataset&,
                       FlatVector& grad_out) const override {
    if (grad_out.size() != m_) {
      grad_out = FlatVector(m_);
    }
    for (std::size_t c = 0; c < m_; ++c) {
      grad_out[c] = 1.0;
    }
    return 0.0;
  }

  std::int32_t predict(const FlatVector&, std::span<const double>) const override { return 0; }

  FlatVector init_params(RngStream&) const override { return FlatVector(m_); }

 private:
  std::size_t m_;
};

// Forwards to an inner oracle, counting loss_and_grad calls.
class CountingOracle final : public GradOracle {
 public:
  explicit CountingOracle(const GradOracle& inner) : inner_(inner) {}

  std::size_t param_count() const override { return inner_.param_count(); }

  double loss_and_grad(const FlatVector& params, std::span<const std::size_t> batch,
                       const Dataset& data, FlatVector& grad_out) const override {
    ++calls_;
    return inner_.loss_and_grad(params, batch, data, grad_out);
  }

  std::int32_t predict(const FlatVector& params, std::span<const double> input) const override {
    return inner_.predict(params, input);
  }

  FlatVector init_params(RngStream& stream) const override { return inner_.init_params(stream); }

  std::size_t calls() const { return calls_; }
  void reset() { calls_ = 0; }

 private:
  const GradOracle& inner_;
  mutable std::size_t calls_ = 0;
};

inline double l2_norm(const FlatVector& v) {
  double sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sq += v[i] * v[i];
  }
  return std::sqrt(sq);
}

inline double relative_grad_error(const FlatVector& analytic, const FlatVector& numeric) {
  double diff_sq = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff_sq += d * d;
  }
  const double denom = std::max({l2_norm(analytic), l2_norm(numeric), 1e-12});
  return std::sqrt(diff_sq) / denom;
}

inline std::vector<std::size_t> iota_batch(std::size_t n) {
  std::vector<std::size_t> batch(n);
  std::iota(batch.begin(), batch.end(), std::size_t{0});
  return batch;
}

}  // namespace bcsc::test
