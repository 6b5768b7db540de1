#include "bcsc/scheduler.hpp"

#include <algorithm>
#include <string>

#include "bcsc/errors.hpp"

namespace bcsc {

EpochPlan make_epoch_plan(std::span<RngStream> block_streams, std::size_t n,
                          std::size_t batch_size) {
  if (block_streams.empty()) {
    throw ConfigError("make_epoch_plan: need at least one block stream");
  }
  if (n == 0) {
    throw ConfigError("make_epoch_plan: n must be >= 1");
  }
  if (batch_size == 0 || batch_size > n) {
    throw ConfigError("make_epoch_plan: need 1 <= batch_size <= n, got batch_size=" +
                      std::to_string(batch_size) + ", n=" + std::to_string(n));
  }
  EpochPlan plan;
  plan.batch_size = batch_size;
  plan.sample_count = n;
  plan.batches_per_epoch = (n + batch_size - 1) / batch_size;
  plan.streams.reserve(block_streams.size());
  for (RngStream& stream : block_streams) {
    plan.streams.push_back(shuffle_indices(stream, n));
  }
  return plan;
}

std::span<const std::size_t> next_batch(const EpochPlan& plan, std::size_t t, std::size_t j) {
  if (j >= plan.block_count()) {
    throw IndexError("next_batch: block " + std::to_string(j) + " out of range (M=" +
                     std::to_string(plan.block_count()) + ")");
  }
  if (t >= plan.batches_per_epoch) {
    throw IndexError("next_batch: iteration " + std::to_string(t) + " out of range (t_max=" +
                     std::to_string(plan.batches_per_epoch) + ")");
  }
  const std::size_t begin = t * plan.batch_size;
  const std::size_t end = std::min(begin + plan.batch_size, plan.sample_count);
  return std::span<const std::size_t>(plan.streams[j]).subspan(begin, end - begin);
}

}  // namespace bcsc
