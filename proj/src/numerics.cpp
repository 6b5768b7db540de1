#include "bcsc/numerics.hpp"

#include <cmath>
#include <numeric>

namespace bcsc {

namespace {

constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::string_view label)
    : state_(mix64(mix64(master_seed) + fnv1a64(label))), label_(label) {
  if (label.empty()) {
    throw ConfigError("RngStream: label must be non-empty");
  }
}

std::uint64_t RngStream::next_u64() {
  state_ += kSplitMixGamma;
  return mix64(state_);
}

double RngStream::next_double() {
  // 53 high bits scaled by 2^-53.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw ConfigError("RngStream::next_below: bound must be >= 1");
  }
  // Rejection sampling: discard draws below 2^64 mod bound.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) {
      return r % bound;
    }
  }
}

double RngStream::next_gaussian() {
  if (has_spare_gaussian_) {
    has_spare_gaussian_ = false;
    return spare_gaussian_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_gaussian_ = v * f;
  has_spare_gaussian_ = true;
  return u * f;
}

RngStream derive_stream(std::uint64_t master_seed, std::string_view label) {
  return RngStream(master_seed, label);
}

std::vector<std::size_t> shuffle_indices(RngStream& stream, std::size_t n) {
  if (n == 0) {
    throw ConfigError("shuffle_indices: n must be >= 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = stream.next_below(i + 1);
    std::swap(order[i], order[j]);
  }
  return order;
}

bool FlatVector::all_finite() const noexcept {
  for (double x : v_) {
    if (!std::isfinite(x)) {
      return false;
    }
  }
  return true;
}

}  // namespace bcsc
