#include <made/simplex_lp.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace made::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;

// Dense tableau over columns [structural | artificial], one row per
// constraint plus a cost row. Bland's rule: entering column is the lowest
// eligible index, leaving row breaks ratio ties by lowest basic variable.
struct Tableau {
  int m, n;                       // constraints, total columns
  std::vector<double> a;          // m x n
  std::vector<double> rhs;        // m
  std::vector<double> cost;       // n (reduced costs maintained by pivoting)
  double cost_rhs = 0.0;
  std::vector<int> basis;         // m, column index basic in each row

  double& at(int i, int j) { return a[size_t(i) * n + j]; }

  void pivot(int row, int col) {
    const double p = at(row, col);
    const double inv = 1.0 / p;
    for (int j = 0; j < n; ++j) at(row, j) *= inv;
    rhs[row] *= inv;
    at(row, col) = 1.0;
    for (int i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = at(i, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) at(i, j) -= f * at(row, j);
      at(i, col) = 0.0;
      rhs[i] -= f * rhs[row];
    }
    const double f = cost[col];
    if (f != 0.0) {
      for (int j = 0; j < n; ++j) cost[j] -= f * at(row, j);
      cost[col] = 0.0;
      cost_rhs -= f * rhs[row];
    }
    basis[row] = col;
  }

  // Returns false when unbounded (cannot happen for the hull LPs, which are
  // bounded by construction).
  bool run(int usable_cols) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < usable_cols; ++j) {
        if (cost[j] < -kPivotTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        const double aij = at(i, enter);
        if (aij > kPivotTol) {
          const double ratio = rhs[i] / aij;
          if (ratio < best_ratio - kPivotTol ||
              (ratio < best_ratio + kPivotTol && (leave < 0 || basis[i] < basis[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }
};

}  // namespace

LpResult solve_min_equality(const std::vector<double>& A, int m, int n,
                            std::vector<double> b, const std::vector<double>& c) {
  if (static_cast<int>(A.size()) != m * n || static_cast<int>(b.size()) != m ||
      static_cast<int>(c.size()) != n)
    throw std::invalid_argument("LP dimensions mismatch");

  Tableau t;
  t.m = m;
  t.n = n + m;  // structural + artificial
  t.a.assign(size_t(t.m) * t.n, 0.0);
  t.rhs = b;
  t.basis.assign(m, 0);

  for (int i = 0; i < m; ++i) {
    const double sign = t.rhs[i] < 0.0 ? -1.0 : 1.0;
    t.rhs[i] *= sign;
    for (int j = 0; j < n; ++j) t.at(i, j) = sign * A[size_t(i) * n + j];
    t.at(i, n + i) = 1.0;
    t.basis[i] = n + i;
  }

  // Phase 1: minimize the sum of artificials.
  t.cost.assign(t.n, 0.0);
  t.cost_rhs = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) t.cost[j] -= t.at(i, j);
    t.cost_rhs -= t.rhs[i];
  }
  if (!t.run(n)) return {};  // phase 1 is bounded below by 0; defensive
  if (-t.cost_rhs > kFeasTol) return {};

  // Drive residual artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (t.basis[i] < n) continue;
    int col = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(t.at(i, j)) > 1e-8) {
        col = j;
        break;
      }
    }
    if (col >= 0) t.pivot(i, col);
    // else: redundant row; leaving the artificial basic at value ~0 is safe
    // because phase 2 never pivots on artificial columns.
  }

  // Phase 2 with the real objective, artificial columns frozen.
  t.cost.assign(t.n, 0.0);
  t.cost_rhs = 0.0;
  for (int j = 0; j < n; ++j) t.cost[j] = c[j];
  for (int i = 0; i < m; ++i) {
    const int bj = t.basis[i];
    if (bj < n && t.cost[bj] != 0.0) {
      const double f = t.cost[bj];
      for (int j = 0; j < t.n; ++j) t.cost[j] -= f * t.at(i, j);
      t.cost[bj] = 0.0;
      t.cost_rhs -= f * t.rhs[i];
    }
  }
  if (!t.run(n)) return {};

  LpResult out;
  out.feasible = true;
  out.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i) {
    if (t.basis[i] < n) out.x[t.basis[i]] = t.rhs[i];
  }
  double obj = 0.0;
  for (int j = 0; j < n; ++j) obj += c[j] * out.x[j];
  out.objective = obj;
  return out;
}

}  // namespace made::lp
