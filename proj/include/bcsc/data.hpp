#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bcsc/models.hpp"
#include "bcsc/numerics.hpp"

namespace bcsc {

// A tensor of unsigned bytes in row-major order, as stored in IDX files.
struct RawIdxTensor {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) {
      n *= d;
    }
    return dims.empty() ? 0 : n;
  }
};

// Reads an IDX file (unsigned-byte element type only). Gzip-compressed files
// are detected by their 0x1f 0x8b prefix and decompressed transparently.
RawIdxTensor load_idx(const std::string& path);

// Writes a tensor as a plain (uncompressed) IDX file.
void save_idx(const std::string& path, const RawIdxTensor& tensor);

// Converts an image tensor (rank 3: n x h x w) plus a label tensor (rank 1: n)
// into a Dataset with features scaled to [0, 1] by dividing by 255.
Dataset to_dataset(const RawIdxTensor& images, const RawIdxTensor& labels);

// Generates k Gaussian clusters (unit variance) whose means lie `separation`
// apart along the first feature axis. Labels cycle 0..k-1, so the class
// histogram is balanced within one sample.
Dataset synth_blobs(RngStream& stream, std::size_t n, std::size_t d, std::size_t k,
                    double separation);

struct CorruptionResult {
  Dataset data;
  std::vector<std::size_t> corrupted;  // sorted indices whose labels were changed
};

// Replaces the labels of exactly floor(rate * n) uniformly chosen samples with
// a label drawn uniformly from the k-1 wrong classes.
CorruptionResult corrupt_labels(RngStream& stream, const Dataset& ds, double rate);

// Uniform sample of n_sub rows without replacement.
Dataset subset(const Dataset& ds, RngStream& stream, std::size_t n_sub);

}  // namespace bcsc
