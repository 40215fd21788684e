// Two-phase dense tableau simplex for bounded-variable LPs in the
// LinearProgram form. Dantzig pricing, switching to Bland's rule after
// 2*(rows+cols) iterations to rule out cycling.
#pragma once

#include "v2g/lp.hpp"

namespace v2g {

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double feas_tol = 1e-7;
  long max_iterations = 1'000'000;
};

// Throws std::runtime_error on the iteration cap or an internally
// inconsistent result; infeasible/unbounded are reported in the status.
LpSolution solve_simplex(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace v2g
