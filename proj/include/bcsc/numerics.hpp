#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bcsc/errors.hpp"

namespace bcsc {

/// Deterministic random stream identified by (master_seed, label).
///
/// The generator is SplitMix64: state advances by a fixed odd constant and
/// each output is a finalizing mix of the state. A stream's origin is
/// mix(mix(master_seed) + fnv1a(label)), so equal (seed, label) pairs
/// reproduce the same sequence on every platform and distinct labels give
/// unrelated points in the underlying Weyl sequence.
///
/// Bounded and floating-point draws are built on the raw 64-bit output with
/// explicit, libc-independent arithmetic so sequences are portable.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view label);

  std::uint64_t next_u64();

  /// Uniform in [0,1) with 53 random bits.
  double next_double();

  /// Uniform in [0, bound) without modulo bias; bound must be >= 1.
  std::uint64_t next_below(std::uint64_t bound);

  /// Standard normal via the Marsaglia polar method (one spare cached).
  double next_gaussian();

  const std::string& label() const noexcept { return label_; }

 private:
  std::uint64_t state_;
  std::string label_;
  double spare_gaussian_ = 0.0;
  bool has_spare_gaussian_ = false;
};

/// Spawn the substream identified by (master_seed, label). Labels are
/// free-form tags such as "perm/epoch=3"; empty labels are rejected.
RngStream derive_stream(std::uint64_t master_seed, std::string_view label);

/// Fisher-Yates permutation of {0,...,n-1} drawn from `stream`. n >= 1.
std::vector<std::size_t> shuffle_indices(RngStream& stream, std::size_t n);

/// Flat parameter vector (weights or gradients), 64-bit floats, fixed length.
class FlatVector {
 public:
  FlatVector() = default;
  explicit FlatVector(std::size_t n, double value = 0.0) : v_(n, value) {}
  explicit FlatVector(std::vector<double> values) : v_(std::move(values)) {}

  std::size_t size() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const noexcept { return v_[i]; }
  double& operator[](std::size_t i) noexcept { return v_[i]; }

  std::span<const double> values() const noexcept { return v_; }
  std::span<double> values() noexcept { return v_; }
  const double* data() const noexcept { return v_.data(); }
  double* data() noexcept { return v_.data(); }

  bool all_finite() const noexcept;

  friend bool operator==(const FlatVector&, const FlatVector&) = default;

 private:
  std::vector<double> v_;
};

}  // namespace bcsc
