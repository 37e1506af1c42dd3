// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace mht {

/// R x C matrix of finite costs, R >= 1, C >= 0. Row-major.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> cells);
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const {
    return cells_[r * cols_ + c];
  }
  std::span<const double> cells() const noexcept { return cells_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> cells_;
};

struct Assignment {
  /// (row, col) pairs sorted by row. Size is min(R, C).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  /// Sum of the matched cells, accumulated in row order.
  double total_cost = 0.0;

  /// Column matched to `row`, or -1.
  long col_of(std::size_t row) const;
};

/// Minimum-cost rectangular assignment (Kuhn-Munkres on the matrix padded to
/// square). Among optimal assignments the lexicographically smallest pair
/// sequence is returned, so results are reproducible under ties.
Assignment solve_assignment(const CostMatrix& cost);

inline constexpr std::size_t kBruteForceMaxSide = 8;

/// Exhaustive enumeration of every injective pairing. Verification oracle;
/// requires min(R, C) <= kBruteForceMaxSide. Same tie-break as
/// solve_assignment().
Assignment brute_force_assignment(const CostMatrix& cost);

}  // namespace mht
