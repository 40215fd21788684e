#include "v2g/simplex.hpp"

#include <cmath>
#include <stdexcept>

#include "v2g/kernels.hpp"

namespace v2g {

namespace {

// Dense tableau. Columns: n structural vars, m slacks, n_art artificials,
// rhs. Basis[i] is the variable index of row i.
struct Tableau {
  int n = 0, m = 0, n_art = 0;
  std::size_t cols = 0;
  std::vector<double> a;     // m rows
  std::vector<double> cost;  // reduced-cost row, cols wide
  std::vector<int> basis;

  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
};

void pivot(Tableau& tb, int prow, int pcol) {
  const auto& K = kern::active();
  double* pr = tb.row(prow);
  K.scale(pr, 1.0 / pr[static_cast<std::size_t>(pcol)], pr, tb.cols);
  pr[static_cast<std::size_t>(pcol)] = 1.0;
  for (int i = 0; i < tb.m; ++i) {
    if (i == prow) continue;
    double* r = tb.row(i);
    const double f = r[static_cast<std::size_t>(pcol)];
    if (f != 0.0) {
      K.axpy(-f, pr, r, tb.cols);
      r[static_cast<std::size_t>(pcol)] = 0.0;
    }
  }
  const double f = tb.cost[static_cast<std::size_t>(pcol)];
  if (f != 0.0) {
    K.axpy(-f, pr, tb.cost.data(), tb.cols);
    tb.cost[static_cast<std::size_t>(pcol)] = 0.0;
  }
  tb.basis[static_cast<std::size_t>(prow)] = pcol;
}

// Runs pivots until the reduced costs are all >= -tol. `allowed(j)` gates
// entering columns. Returns false on unbounded.
bool optimize(Tableau& tb, const SimplexOptions& opts, long& iterations,
              const std::vector<char>& allowed) {
  const std::size_t rhs = tb.cols - 1;
  const long bland_after = 2 * static_cast<long>(tb.m + tb.n + tb.n_art);
  const long start = iterations;
  for (;;) {
    if (iterations - start > opts.max_iterations)
      throw std::runtime_error("simplex: iteration cap exceeded");
    const bool bland = iterations - start > bland_after;
    int pcol = -1;
    double best = -opts.pivot_tol;
    for (std::size_t j = 0; j < rhs; ++j) {
      if (!allowed[j]) continue;
      const double rc = tb.cost[j];
      if (rc < best) {
        pcol = static_cast<int>(j);
        best = rc;
        if (bland) break;  // smallest index with negative reduced cost
      }
    }
    if (pcol < 0) return true;  // optimal

    int prow = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < tb.m; ++i) {
      const double coef = tb.row(i)[static_cast<std::size_t>(pcol)];
      if (coef <= opts.pivot_tol) continue;
      const double ratio = tb.row(i)[rhs] / coef;
      if (prow < 0 || ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 &&
           tb.basis[static_cast<std::size_t>(i)] < tb.basis[static_cast<std::size_t>(prow)])) {
        prow = i;
        best_ratio = ratio;
      }
    }
    if (prow < 0) return false;  // unbounded direction
    pivot(tb, prow, pcol);
    ++iterations;
  }
}

}  // namespace

LpSolution solve_simplex(const LinearProgram& lp_in, const SimplexOptions& opts) {
  const std::string problem = lp_in.check();
  if (!problem.empty()) throw std::invalid_argument("simplex: malformed LP: " + problem);

  // Shift out nonzero lower bounds (x = l + y), then turn finite upper
  // bounds into rows. Everything below works on y >= 0.
  const int n = lp_in.n_vars();
  std::vector<std::vector<double>> rows = lp_in.rows;
  std::vector<double> rhs = lp_in.rhs;
  for (int i = 0; i < lp_in.n_rows(); ++i) {
    double shift = 0.0;
    for (int j = 0; j < n; ++j) shift += rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * lp_in.lower[static_cast<std::size_t>(j)];
    rhs[static_cast<std::size_t>(i)] -= shift;
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lp_in.upper[static_cast<std::size_t>(j)])) {
      std::vector<double> r(static_cast<std::size_t>(n), 0.0);
      r[static_cast<std::size_t>(j)] = 1.0;
      rows.push_back(std::move(r));
      rhs.push_back(lp_in.upper[static_cast<std::size_t>(j)] - lp_in.lower[static_cast<std::size_t>(j)]);
    }
  }

  Tableau tb;
  tb.m = static_cast<int>(rows.size());
  tb.n = n;
  std::vector<int> art_row;  // artificial variable per row, -1 if none
  art_row.assign(static_cast<std::size_t>(tb.m), -1);
  for (int i = 0; i < tb.m; ++i) {
    if (rhs[static_cast<std::size_t>(i)] < 0.0) art_row[static_cast<std::size_t>(i)] = tb.n_art++;
  }
  tb.cols = static_cast<std::size_t>(n + tb.m + tb.n_art) + 1;
  tb.a.assign(static_cast<std::size_t>(tb.m) * tb.cols, 0.0);
  tb.basis.resize(static_cast<std::size_t>(tb.m));
  const std::size_t rhs_col = tb.cols - 1;

  for (int i = 0; i < tb.m; ++i) {
    double* r = tb.row(i);
    const bool flip = rhs[static_cast<std::size_t>(i)] < 0.0;
    const double sgn = flip ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) r[static_cast<std::size_t>(j)] = sgn * rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    r[static_cast<std::size_t>(n + i)] = sgn;  // slack
    r[rhs_col] = sgn * rhs[static_cast<std::size_t>(i)];
    if (flip) {
      const int a_col = n + tb.m + art_row[static_cast<std::size_t>(i)];
      r[static_cast<std::size_t>(a_col)] = 1.0;
      tb.basis[static_cast<std::size_t>(i)] = a_col;
    } else {
      tb.basis[static_cast<std::size_t>(i)] = n + i;
    }
  }

  LpSolution sol;
  std::vector<char> allowed(tb.cols - 1, 1);

  // Phase 1: minimize the artificial sum.
  if (tb.n_art > 0) {
    tb.cost.assign(tb.cols, 0.0);
    for (int j = 0; j < tb.n_art; ++j) tb.cost[static_cast<std::size_t>(n + tb.m + j)] = 1.0;
    const auto& K = kern::active();
    for (int i = 0; i < tb.m; ++i) {
      if (art_row[static_cast<std::size_t>(i)] >= 0) K.axpy(-1.0, tb.row(i), tb.cost.data(), tb.cols);
    }
    if (!optimize(tb, opts, sol.iterations, allowed))
      throw std::runtime_error("simplex: phase 1 unbounded (internal error)");
    if (-tb.cost[rhs_col] > opts.feas_tol) {
      sol.status = LpSolution::Status::infeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis; redundant rows pivot on
    // nothing and are neutralized instead.
    for (int i = 0; i < tb.m; ++i) {
      const int b = tb.basis[static_cast<std::size_t>(i)];
      if (b < n + tb.m) continue;
      int pcol = -1;
      for (int j = 0; j < n + tb.m; ++j) {
        if (std::abs(tb.row(i)[static_cast<std::size_t>(j)]) > opts.pivot_tol) {
          pcol = j;
          break;
        }
      }
      if (pcol >= 0) {
        pivot(tb, i, pcol);
      } else {
        double* r = tb.row(i);
        for (std::size_t j = 0; j < tb.cols; ++j) r[j] = 0.0;  // redundant row
      }
    }
    for (int j = 0; j < tb.n_art; ++j) allowed[static_cast<std::size_t>(n + tb.m + j)] = 0;
  }

  // Phase 2 with the true costs.
  tb.cost.assign(tb.cols, 0.0);
  for (int j = 0; j < n; ++j) tb.cost[static_cast<std::size_t>(j)] = lp_in.c[static_cast<std::size_t>(j)];
  {
    const auto& K = kern::active();
    for (int i = 0; i < tb.m; ++i) {
      const int b = tb.basis[static_cast<std::size_t>(i)];
      const double cb = tb.cost[static_cast<std::size_t>(b)];
      if (cb != 0.0) {
        K.axpy(-cb, tb.row(i), tb.cost.data(), tb.cols);
        tb.cost[static_cast<std::size_t>(b)] = 0.0;
      }
    }
  }
  if (!optimize(tb, opts, sol.iterations, allowed)) {
    sol.status = LpSolution::Status::unbounded;
    return sol;
  }

  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < tb.m; ++i) {
    const int b = tb.basis[static_cast<std::size_t>(i)];
    if (b < n) y[static_cast<std::size_t>(b)] = tb.row(i)[rhs_col];
  }
  sol.x.resize(static_cast<std::size_t>(n));
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j) {
    sol.x[static_cast<std::size_t>(j)] = lp_in.lower[static_cast<std::size_t>(j)] + y[static_cast<std::size_t>(j)];
    sol.objective += lp_in.c[static_cast<std::size_t>(j)] * sol.x[static_cast<std::size_t>(j)];
  }

  // The optimal-status contract: every constraint holds to feas_tol.
  for (int i = 0; i < lp_in.n_rows(); ++i) {
    double lhs = 0.0;
    for (int j = 0; j < n; ++j) lhs += lp_in.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * sol.x[static_cast<std::size_t>(j)];
    if (lhs > lp_in.rhs[static_cast<std::size_t>(i)] + opts.feas_tol * (1.0 + std::abs(lp_in.rhs[static_cast<std::size_t>(i)])))
      throw std::runtime_error("simplex: optimal solution violates row " + std::to_string(i));
  }
  for (int j = 0; j < n; ++j) {
    if (sol.x[static_cast<std::size_t>(j)] < lp_in.lower[static_cast<std::size_t>(j)] - opts.feas_tol ||
        sol.x[static_cast<std::size_t>(j)] > lp_in.upper[static_cast<std::size_t>(j)] + opts.feas_tol) {
      const std::string name = static_cast<std::size_t>(j) < lp_in.var_names.size()
                                   ? lp_in.var_names[static_cast<std::size_t>(j)]
                                   : "x" + std::to_string(j);
      throw std::runtime_error("simplex: optimal solution violates bounds of " + name);
    }
  }
  sol.status = LpSolution::Status::optimal;
  return sol;
}

}  // namespace v2g
