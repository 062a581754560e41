// Container for linear SDPs in the form
//   minimize  c^T x
//   s.t.      C0_b + sum_i x_i Ci_b >= 0 (PSD) for each block b,
//             x_i >= 0 for flagged variables,
//             sum_i a_i x_i = b for each equality row.
// Coefficients are kept as sparse entry lists; block builders are responsible
// for emitting numerically symmetric data (every off-diagonal cell written in
// both triangles).
#pragma once

#include "robust_pob/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

namespace robust_pob {

struct PsdBlock {
  int dim = 0;
  std::vector<std::tuple<int, int, double>> c0;          // (row, col, value)
  std::vector<std::tuple<int, int, int, double>> terms;  // (var, row, col, value)

  void add_const(int r, int c, double v) {
    if (v != 0.0) c0.emplace_back(r, c, v);
  }
  void add_term(int var, int r, int c, double v) {
    if (v != 0.0) terms.emplace_back(var, r, c, v);
  }
  // Writes M at offset (r0, c0); with mirror also M^T at (c0, r0).
  void add_const_block(int r0, int c0_, const Mat& M, bool mirror = false) {
    for (int r = 0; r < M.rows(); ++r)
      for (int c = 0; c < M.cols(); ++c) {
        add_const(r0 + r, c0_ + c, M(r, c));
        if (mirror) add_const(c0_ + c, r0 + r, M(r, c));
      }
  }
  void add_term_block(int var, int r0, int c0_, const Mat& M, bool mirror = false) {
    for (int r = 0; r < M.rows(); ++r)
      for (int c = 0; c < M.cols(); ++c) {
        add_term(var, r0 + r, c0_ + c, M(r, c));
        if (mirror) add_term(var, c0_ + c, r0 + r, M(r, c));
      }
  }
  // Dense value of the block at a point, for residual checks.
  Mat value_at(const Vec& x) const {
    Mat M = Mat::Zero(dim, dim);
    for (const auto& [r, c, v] : c0) M(r, c) += v;
    for (const auto& [var, r, c, v] : terms) M(r, c) += x[var] * v;
    return M;
  }
};

struct ConicProgram {
  int n_vars = 0;
  std::vector<double> objective;  // resized with variables; zero => feasibility
  std::vector<PsdBlock> psd;
  std::vector<int> nonneg;  // indices with x_i >= 0
  struct EqRow {
    std::vector<std::pair<int, double>> a;
    double b = 0.0;
  };
  std::vector<EqRow> eqs;

  int add_var(double cost = 0.0) {
    objective.push_back(cost);
    return n_vars++;
  }
  std::vector<int> add_vars(int k, double cost = 0.0) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(add_var(cost));
    return out;
  }
  PsdBlock& add_psd_block(int dim) {
    psd.push_back(PsdBlock{});
    psd.back().dim = dim;
    return psd.back();
  }

  // Largest PSD violation (negative eigenvalue excess), nonneg violation and
  // equality residual at a candidate point.
  double max_violation(const Vec& x) const {
    require_dims(x.size() == n_vars, "ConicProgram::max_violation: x length");
    double worst = 0.0;
    for (const auto& blk : psd)
      worst = std::max(worst, std::max(0.0, -min_eigenvalue(blk.value_at(x))));
    for (int i : nonneg) worst = std::max(worst, std::max(0.0, -x[i]));
    for (const auto& row : eqs) {
      double lhs = 0.0;
      for (const auto& [i, a] : row.a) lhs += a * x[i];
      worst = std::max(worst, std::abs(lhs - row.b));
    }
    return worst;
  }
};

enum class SolveStatus { feasible, infeasible, inaccurate, failed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::inaccurate: return "inaccurate";
    case SolveStatus::failed: return "failed";
  }
  return "failed";
}

struct SolverResult {
  SolveStatus status = SolveStatus::failed;
  Vec x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double max_psd_violation = std::numeric_limits<double>::quiet_NaN();
  std::string solver_status;  // raw backend status string
  int iterations = -1;
  std::string message;
};

}  // namespace robust_pob
