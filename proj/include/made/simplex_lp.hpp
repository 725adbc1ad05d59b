#pragma once

#include <vector>

namespace made::lp {

struct LpResult {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> x;
};

// Minimize c.x subject to A x = b, x >= 0. A is m x n row-major.
// Two-phase dense simplex with Bland's anti-cycling rule; deterministic.
// Problems here are tiny (m <= ~6, n <= a few hundred).
LpResult solve_min_equality(const std::vector<double>& A, int m, int n,
                            std::vector<double> b, const std::vector<double>& c);

}  // namespace made::lp
