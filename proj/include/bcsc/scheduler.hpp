#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bcsc/numerics.hpp"

namespace bcsc {

/// One epoch's mini-batch plan: one independently shuffled index stream per
/// block, all advancing in lockstep. Batch (t, j) is the t-th contiguous
/// slice of stream j, so for fixed j the batches are pairwise disjoint and
/// jointly cover {0,...,n-1} exactly once per epoch.
struct EpochPlan {
  std::vector<std::vector<std::size_t>> streams;  // one permutation of 0..n-1 per block
  std::size_t batch_size = 0;
  std::size_t sample_count = 0;
  std::size_t batches_per_epoch = 0;  // ceil(n / batch_size)

  std::size_t block_count() const noexcept { return streams.size(); }
};

/// Shuffle one index stream per entry of block_streams (fresh streams each
/// epoch are the caller's duty). Requires n >= 1, 1 <= batch_size <= n and
/// at least one stream.
EpochPlan make_epoch_plan(std::span<RngStream> block_streams, std::size_t n,
                          std::size_t batch_size);

/// Batch (t, j): stream j sliced at [t*B, min((t+1)*B, n)). The final batch
/// is short when batch_size does not divide n.
std::span<const std::size_t> next_batch(const EpochPlan& plan, std::size_t t, std::size_t j);

}  // namespace bcsc
