#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace recall {

/// Dense row-major matrix of non-negative, finite costs.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return values_[r * cols_ + c];
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

struct Matching {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// by the shortest-augmenting-path Hungarian method. O(rows^2 * cols).
/// Throws InfeasibleInstance when rows > cols.
Matching optimal_assignment(const CostMatrix& cost);

/// Minimum-cost assignment of every row to some column where column j takes
/// at most capacities[j] rows. Equivalent to optimal_assignment on the matrix
/// with column j repeated capacities[j] times, but works on the compact
/// matrix: each augmentation is a shortest path over columns only.
/// Throws InfeasibleInstance when total capacity is below the row count.
Matching optimal_capacitated_assignment(const CostMatrix& cost,
                                        std::span<const std::size_t> capacities);

}  // namespace recall
