#include "recall/assignment.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "recall/errors.hpp"

namespace recall {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
}  // namespace

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw InvalidData("cost matrix has " + std::to_string(values_.size()) +
                      " entries, expected " + std::to_string(rows * cols));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidData("cost matrix entries must be finite and non-negative");
    }
  }
}

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidData("ragged cost matrix");
    values.insert(values.end(), row.begin(), row.end());
  }
  return CostMatrix(r, c, std::move(values));
}

Matching optimal_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n > m) {
    throw InfeasibleInstance(std::to_string(n) + " rows cannot be matched to " +
                             std::to_string(m) + " distinct columns");
  }
  Matching out;
  out.row_to_col.assign(n, kNone);
  if (n == 0) return out;

  // Potentials u (rows) and v (columns); index 0 is a virtual column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> col_owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[col_owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (col_owner[j] != 0) out.row_to_col[col_owner[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) out.cost += cost(i, out.row_to_col[i]);
  return out;
}

namespace {

/// Incremental successive-shortest-path solver. Rows are inserted one at a
/// time; the residual graph is collapsed onto columns, where moving from
/// column j to column k costs the cheapest reassignment of a current member
/// of j to k.
class CapacitatedSolver {
 public:
  CapacitatedSolver(const CostMatrix& cost, std::span<const std::size_t> caps)
      : cost_(cost),
        caps_(caps.begin(), caps.end()),
        m_(cost.cols()),
        members_(m_),
        move_cost_(m_ * m_, kInf),
        mover_(m_ * m_, kNone),
        assign_(cost.rows(), kNone) {}

  Matching solve() {
    for (std::size_t r = 0; r < cost_.rows(); ++r) insert(r);
    Matching out;
    out.row_to_col = assign_;
    for (std::size_t r = 0; r < cost_.rows(); ++r) out.cost += cost_(r, assign_[r]);
    return out;
  }

 private:
  void refresh(std::size_t j) {
    for (std::size_t k = 0; k < m_; ++k) {
      double best = kInf;
      std::size_t who = kNone;
      if (k != j) {
        for (auto v : members_[j]) {
          const double c = cost_(v, k) - cost_(v, j);
          if (c < best) {
            best = c;
            who = v;
          }
        }
      }
      move_cost_[j * m_ + k] = best;
      mover_[j * m_ + k] = who;
    }
  }

  void insert(std::size_t row) {
    std::vector<double> dist(m_);
    std::vector<std::size_t> pred(m_, kNone);
    for (std::size_t j = 0; j < m_; ++j) dist[j] = cost_(row, j);

    // Bellman-Ford over columns; the residual graph has no negative cycles
    // because the current partial assignment is optimal.
    for (std::size_t pass = 0; pass < m_; ++pass) {
      bool changed = false;
      for (std::size_t j = 0; j < m_; ++j) {
        if (members_[j].empty()) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          const double w = move_cost_[j * m_ + k];
          if (w == kInf) continue;
          const double cand = dist[j] + w;
          if (cand < dist[k] - 1e-12 * (1.0 + std::abs(dist[k]))) {
            dist[k] = cand;
            pred[k] = j;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }

    std::size_t target = kNone;
    for (std::size_t j = 0; j < m_; ++j) {
      if (members_[j].size() < caps_[j] &&
          (target == kNone || dist[j] < dist[target])) {
        target = j;
      }
    }
    if (target == kNone) throw InfeasibleInstance("capacity exhausted");

    std::vector<std::size_t> path{target};
    while (pred[path.back()] != kNone) {
      path.push_back(pred[path.back()]);
      if (path.size() > m_) throw InfeasibleInstance("cyclic augmenting path");
    }
    // path = [target, ..., first column]; each step moves one member forward.
    std::vector<std::pair<std::size_t, std::size_t>> moves;  // (unit, to)
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
      const std::size_t to = path[s];
      const std::size_t from = path[s + 1];
      moves.emplace_back(mover_[from * m_ + to], to);
    }
    for (const auto& [unit, to] : moves) {
      auto& src = members_[assign_[unit]];
      std::erase(src, unit);
      members_[to].push_back(unit);
      assign_[unit] = to;
    }
    assign_[row] = path.back();
    members_[path.back()].push_back(row);
    for (auto j : path) refresh(j);
  }

  const CostMatrix& cost_;
  std::vector<std::size_t> caps_;
  std::size_t m_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> move_cost_;
  std::vector<std::size_t> mover_;
  std::vector<std::size_t> assign_;
};

}  // namespace

Matching optimal_capacitated_assignment(const CostMatrix& cost,
                                        std::span<const std::size_t> capacities) {
  if (capacities.size() != cost.cols()) {
    throw InvalidData("one capacity per column is required");
  }
  const auto total =
      std::accumulate(capacities.begin(), capacities.end(), std::size_t{0});
  if (total < cost.rows()) {
    throw InfeasibleInstance("total capacity " + std::to_string(total) +
                             " is below the " + std::to_string(cost.rows()) +
                             " rows to place");
  }
  return CapacitatedSolver(cost, capacities).solve();
}

}  // namespace recall
