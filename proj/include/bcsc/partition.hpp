#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bcsc/numerics.hpp"

namespace bcsc {

/// A random partition of the m coordinates into num_blocks disjoint blocks:
/// one permutation of {0,...,m-1} plus per-block sizes and prefix offsets.
/// Block j owns the coordinates perm[offsets[j] ... offsets[j] + sizes[j]).
/// Selection matrices are never materialized; a block is its index set.
struct BlockPartition {
  std::vector<std::size_t> perm;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> offsets;

  std::size_t coord_count() const noexcept { return perm.size(); }
  std::size_t block_count() const noexcept { return sizes.size(); }
};

/// Draw a uniform partition of m coordinates into num_blocks blocks whose
/// sizes differ by at most one. Requires 1 <= num_blocks <= m. Callers draw
/// a fresh partition every epoch.
BlockPartition make_partition(RngStream& stream, std::size_t m, std::size_t num_blocks);

/// The coordinate indices owned by block j, in permutation order.
std::span<const std::size_t> block_coords(const BlockPartition& p, std::size_t j);

/// Descend: params[c] -= step[c] for every coordinate c in block j; all
/// other coordinates are untouched. params and step must have equal length.
void apply_block_update(FlatVector& params, const BlockPartition& p, std::size_t j,
                        const FlatVector& step);

}  // namespace bcsc
