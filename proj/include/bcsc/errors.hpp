#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcsc {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition violation (bad block counts,
/// batch sizes, schedules, config files, ...). CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range block, batch, or coordinate index.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or iterate. CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t iteration, const std::string& what)
      : Error("divergence at epoch " + std::to_string(epoch) + ", iteration " +
              std::to_string(iteration) + ": " + what),
        epoch_(epoch),
        iteration_(iteration) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t epoch_;
  std::size_t iteration_;
};

}  // namespace bcsc
