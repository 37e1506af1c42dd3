// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mht/error.hpp"

namespace mht {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols,
                       std::vector<double> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  if (rows_ == 0) throw ValidationError("cost matrix needs at least one row");
  if (cells_.size() != rows_ * cols_) {
    throw ValidationError("cost matrix expects " + std::to_string(rows_ * cols_) +
                          " cells, got " + std::to_string(cells_.size()));
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!std::isfinite(cells_[i])) {
      throw ValidationError("non-finite cost at (" + std::to_string(i / cols_) +
                            ", " + std::to_string(i % cols_) + ")");
    }
  }
}

namespace {

std::vector<double> flatten(std::initializer_list<std::initializer_list<double>> rows,
                            std::size_t& cols) {
  cols = rows.size() == 0 ? 0 : rows.begin()->size();
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.size() != cols) throw ValidationError("ragged cost matrix");
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(0), cells_() {
  std::vector<double> cells = flatten(rows, cols_);
  *this = CostMatrix(rows_, cols_, std::move(cells));
}

long Assignment::col_of(std::size_t row) const {
  for (const auto& [r, c] : pairs) {
    if (r == row) return static_cast<long>(c);
  }
  return -1;
}

namespace {

double max_abs(const CostMatrix& cost) {
  double m = 0.0;
  for (double v : cost.cells()) m = std::max(m, std::abs(v));
  return m;
}

Assignment finish(const CostMatrix& cost, const std::vector<long>& row_to_col) {
  Assignment out;
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    const long c = row_to_col[r];
    if (c >= 0 && static_cast<std::size_t>(c) < cost.cols()) {
      out.pairs.emplace_back(r, static_cast<std::size_t>(c));
      out.total_cost += cost(r, static_cast<std::size_t>(c));
    }
  }
  return out;
}

// Square Kuhn-Munkres with row/column potentials (shortest augmenting path
// form, O(n^3)). On return `u`, `v` are dual-feasible: a(i,j) - u[i] - v[j] >= 0
// with equality on every matched edge.
struct Hungarian {
  std::size_t n;
  std::vector<double> a;  // n x n
  std::vector<double> u, v;
  std::vector<long> row_to_col, col_to_row;

  double cell(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  void run() {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based internal arrays; index 0 is the virtual source column.
    std::vector<double> pu(n + 1, 0.0), pv(n + 1, 0.0);
    std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
      owner[0] = i;
      std::size_t j0 = 0;
      std::fill(minv.begin(), minv.end(), kInf);
      std::fill(used.begin(), used.end(), 0);
      do {
        used[j0] = 1;
        const std::size_t i0 = owner[j0];
        double delta = kInf;
        std::size_t j1 = 0;
        for (std::size_t j = 1; j <= n; ++j) {
          if (used[j]) continue;
          const double cur = cell(i0 - 1, j - 1) - pu[i0] - pv[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
        for (std::size_t j = 0; j <= n; ++j) {
          if (used[j]) {
            pu[owner[j]] += delta;
            pv[j] -= delta;
          } else {
            minv[j] -= delta;
          }
        }
        j0 = j1;
      } while (owner[j0] != 0);
      do {
        const std::size_t j1 = way[j0];
        owner[j0] = owner[j1];
        j0 = j1;
      } while (j0 != 0);
    }
    u.assign(pu.begin() + 1, pu.end());
    v.assign(pv.begin() + 1, pv.end());
    row_to_col.assign(n, -1);
    col_to_row.assign(n, -1);
    for (std::size_t j = 1; j <= n; ++j) {
      if (owner[j] != 0) {
        row_to_col[owner[j] - 1] = static_cast<long>(j - 1);
        col_to_row[j - 1] = static_cast<long>(owner[j] - 1);
      }
    }
  }
};

// Rewrites an optimal perfect matching into the lexicographically smallest
// optimal one. Every optimal matching lies inside the equality subgraph of an
// optimal dual, so rows are fixed greedily (smallest feasible real column
// first) and each trial is checked with one alternating-path search.
class LexicographicRepair {
 public:
  LexicographicRepair(const Hungarian& h, std::size_t real_cols, double eps)
      : h_(h), n_(h.n), real_cols_(real_cols), eps_(eps),
        row_to_col_(h.row_to_col), col_to_row_(h.col_to_row),
        row_fixed_(n_, 0), col_fixed_(n_, 0) {}

  std::vector<long> run(std::size_t real_rows) {
    for (std::size_t r = 0; r < real_rows; ++r) {
      const std::size_t current = static_cast<std::size_t>(row_to_col_[r]);
      const std::size_t limit = std::min(current, real_cols_);
      for (std::size_t c = 0; c < limit; ++c) {
        if (col_fixed_[c] || !tight(r, c)) continue;
        if (try_force(r, c)) break;
      }
      row_fixed_[r] = 1;
      col_fixed_[static_cast<std::size_t>(row_to_col_[r])] = 1;
    }
    return row_to_col_;
  }

 private:
  bool tight(std::size_t i, std::size_t j) const {
    return h_.cell(i, j) - h_.u[i] - h_.v[j] <= eps_;
  }

  // Re-match `r` to `c`. The row displaced from `c` must reach r's old column
  // through an alternating path that avoids fixed rows/columns.
  bool try_force(std::size_t r, std::size_t c) {
    const std::size_t target = static_cast<std::size_t>(row_to_col_[r]);
    const std::size_t start = static_cast<std::size_t>(col_to_row_[c]);
    std::vector<long> parent_col(n_, -1);  // for each visited column: prev row
    std::vector<char> seen_row(n_, 0);
    std::vector<std::size_t> queue{start};
    seen_row[start] = 1;
    seen_row[r] = 1;
    std::vector<long> via(n_, -1);  // row -> column that led to it
    bool found = false;
    for (std::size_t qi = 0; qi < queue.size() && !found; ++qi) {
      const std::size_t row = queue[qi];
      for (std::size_t col = 0; col < n_; ++col) {
        if (col == c || col_fixed_[col] || parent_col[col] >= 0) continue;
        if (!tight(row, col)) continue;
        parent_col[col] = static_cast<long>(row);
        if (col == target) {
          found = true;
          break;
        }
        const std::size_t next = static_cast<std::size_t>(col_to_row_[col]);
        if (seen_row[next] || row_fixed_[next]) continue;
        seen_row[next] = 1;
        via[next] = static_cast<long>(col);
        queue.push_back(next);
      }
    }
    if (!found) return false;

    // Flip the path: walk back from `target` to `start`.
    std::size_t col = target;
    while (true) {
      const std::size_t row = static_cast<std::size_t>(parent_col[col]);
      const long prev_col = via[row];
      row_to_col_[row] = static_cast<long>(col);
      col_to_row_[col] = static_cast<long>(row);
      if (row == start) break;
      col = static_cast<std::size_t>(prev_col);
    }
    row_to_col_[r] = static_cast<long>(c);
    col_to_row_[c] = static_cast<long>(r);
    return true;
  }

  const Hungarian& h_;
  std::size_t n_;
  std::size_t real_cols_;
  double eps_;
  std::vector<long> row_to_col_, col_to_row_;
  std::vector<char> row_fixed_, col_fixed_;
};

}  // namespace

Assignment solve_assignment(const CostMatrix& cost) {
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  if (cols == 0) return {};

  const std::size_t n = std::max(rows, cols);
  double pad = 0.0;
  if (rows != cols) {
    pad = *std::max_element(cost.cells().begin(), cost.cells().end()) + 1.0;
  }
  Hungarian h{n, std::vector<double>(n * n, pad), {}, {}, {}, {}};
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) h.a[i * n + j] = cost(i, j);
  }
  h.run();

  const double eps = 1e-12 * static_cast<double>(n) * (1.0 + max_abs(cost) + std::abs(pad));
  LexicographicRepair repair(h, cols, eps);
  return finish(cost, repair.run(rows));
}

namespace {

struct BruteForce {
  const CostMatrix& cost;
  std::size_t skips_allowed;  // rows that may stay unmatched
  double tol;
  std::vector<long> current;
  std::vector<char> col_used;
  std::vector<long> best;
  double best_cost = std::numeric_limits<double>::infinity();

  double sum_current() const {
    double s = 0.0;
    for (std::size_t r = 0; r < current.size(); ++r) {
      if (current[r] >= 0) s += cost(r, static_cast<std::size_t>(current[r]));
    }
    return s;
  }

  // Enumerates pair sequences in lexicographic order, so the first optimum
  // found wins ties.
  void visit(std::size_t row, std::size_t skips_left) {
    if (row == cost.rows()) {
      const double s = sum_current();
      if (s < best_cost - tol) {
        best_cost = s;
        best = current;
      }
      return;
    }
    for (std::size_t c = 0; c < cost.cols(); ++c) {
      if (col_used[c]) continue;
      col_used[c] = 1;
      current[row] = static_cast<long>(c);
      visit(row + 1, skips_left);
      col_used[c] = 0;
    }
    if (skips_left > 0) {
      current[row] = -1;
      visit(row + 1, skips_left - 1);
    }
  }
};

}  // namespace

Assignment brute_force_assignment(const CostMatrix& cost) {
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  const std::size_t k = std::min(rows, cols);
  if (k > kBruteForceMaxSide) {
    throw ValidationError("matrix too large for enumeration: min(R, C) = " +
                          std::to_string(k) + " exceeds " +
                          std::to_string(kBruteForceMaxSide));
  }
  // Number of injective pairings: max!/(max-k)!.
  double pairings = 1.0;
  for (std::size_t i = 0; i < k; ++i) pairings *= static_cast<double>(std::max(rows, cols) - i);
  if (pairings > 1e8) {
    throw ValidationError("matrix too large for enumeration: " +
                          std::to_string(static_cast<long long>(pairings)) +
                          " pairings");
  }
  if (cols == 0) return {};

  BruteForce bf{cost, rows - k, 1e-12 * static_cast<double>(k) * (1.0 + max_abs(cost)),
                std::vector<long>(rows, -1), std::vector<char>(cols, 0), {}};
  bf.visit(0, rows - k);
  return finish(cost, bf.best);
}

}  // namespace mht
