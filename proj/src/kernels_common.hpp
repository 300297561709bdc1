#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "robust1d/kernels.hpp"

namespace robust1d::kernels::detail {

// Nonzero positions of every [batch, channel] row of a conv input. One-hot
// character encodings are extremely sparse, so the conv kernels walk these
// lists instead of the full rows when at most an eighth of a row is nonzero. Both access
// patterns add the same terms in the same (channel, tap) order.
struct SparseRows {
  std::vector<std::uint32_t> offsets;  // rows + 1 entries
  std::vector<std::uint32_t> positions;
  std::vector<bool> dense;

  SparseRows(std::span<const double> x, std::size_t rows, std::size_t length) : offsets(rows + 1, 0), dense(rows) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = x.data() + r * length;
      std::size_t nnz = 0;
      for (std::size_t p = 0; p < length; ++p) {
        if (row[p] != 0.0) {
          positions.push_back(static_cast<std::uint32_t>(p));
          ++nnz;
        }
      }
      offsets[r + 1] = static_cast<std::uint32_t>(positions.size());
      dense[r] = 8 * nnz > length;
    }
  }

  std::span<const std::uint32_t> row(std::size_t r) const {
    return std::span<const std::uint32_t>(positions.data() + offsets[r], offsets[r + 1] - offsets[r]);
  }
};

}  // namespace robust1d::kernels::detail
