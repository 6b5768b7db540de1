#include "bcsc/partition.hpp"

#include <string>

#include "bcsc/errors.hpp"

namespace bcsc {

BlockPartition make_partition(RngStream& stream, std::size_t m, std::size_t num_blocks) {
  if (num_blocks == 0 || num_blocks > m) {
    throw ConfigError("make_partition: need 1 <= num_blocks <= m, got num_blocks=" +
                      std::to_string(num_blocks) + ", m=" + std::to_string(m));
  }
  BlockPartition p;
  p.perm = shuffle_indices(stream, m);
  p.sizes.resize(num_blocks, m / num_blocks);
  // The first m % num_blocks blocks take the extra coordinate.
  for (std::size_t j = 0; j < m % num_blocks; ++j) {
    ++p.sizes[j];
  }
  p.offsets.resize(num_blocks);
  std::size_t off = 0;
  for (std::size_t j = 0; j < num_blocks; ++j) {
    p.offsets[j] = off;
    off += p.sizes[j];
  }
  return p;
}

std::span<const std::size_t> block_coords(const BlockPartition& p, std::size_t j) {
  if (j >= p.block_count()) {
    throw IndexError("block_coords: block " + std::to_string(j) + " out of range (M=" +
                     std::to_string(p.block_count()) + ")");
  }
  return std::span<const std::size_t>(p.perm).subspan(p.offsets[j], p.sizes[j]);
}

void apply_block_update(FlatVector& params, const BlockPartition& p, std::size_t j,
                        const FlatVector& step) {
  if (params.size() != step.size() || params.size() != p.coord_count()) {
    throw ShapeError("apply_block_update: params(" + std::to_string(params.size()) +
                     "), step(" + std::to_string(step.size()) + ") and partition(" +
                     std::to_string(p.coord_count()) + ") must agree");
  }
  for (std::size_t c : block_coords(p, j)) {
    params[c] -= step[c];
  }
}

}  // namespace bcsc
