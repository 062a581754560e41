// Synthesis of purified-output policies by semidefinite programming.
//
// For each averaged quadratic specification (A, beta, gamma) the design
// constraint is
//   sup_{zeta in ellitope}  zeta_e^T V(chi) zeta_e + 2 (beta^T M(chi)) zeta_e  <= gamma,
// rendered exactly as: exists X with X >= V(chi) (one Schur block thanks to the
// Gram storage of V) and an S-procedure certificate
//   [[gamma - psi - sum_i lambda_i, -phi^T], [-phi, sum_i lambda_i Q_i - delta]] >= 0
// with psi = X_00 + 2 r_0, phi = X_{0 zeta} + r_zeta, delta = X_{zeta zeta},
// r(chi) = (beta^T M(chi))^T, lambda >= 0. Mean-square specifications bound
// (M chi_e)^T A_hat (M chi_e) the same way; covariance bounds (single-mode
// models) use one more Schur block. The S-procedure step is lossless for s = 1
// and within the factor tightness_factor(s) in general.
#pragma once

#include "robust_pob/assemble.hpp"
#include "robust_pob/conic.hpp"
#include "robust_pob/solver_cvxopt.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace robust_pob {

struct QuadSpec {
  Mat A;       // n_w x n_w, PSD
  Vec beta;    // n_w
  double gamma = 0.0;
  std::string label;
};

struct MeanQuadSpec {
  Mat A_hat;   // n_w x n_w, PSD
  Vec beta_hat;
  double gamma_hat = 0.0;
  std::string label;
};

struct CovSpec {
  Mat Q;            // rows x n_w selector
  Mat Sigma_tilde;  // rows x rows
  std::string label;
};

struct SpecSet {
  Ellitope ellitope;
  std::vector<QuadSpec> avg_quad;
  std::vector<MeanQuadSpec> mean_quad;
  std::vector<CovSpec> cov_bound;
};

inline double tightness_factor(int s) {
  require(s >= 1, "tightness_factor: s must be positive");
  if (s == 1) return 1.0;
  const double l = std::log(static_cast<double>(s) + 1.0);
  return 2.0 * l + 2.0 * std::sqrt(l) + 1.0;
}

// Level certified unreachable when the program at level gamma is infeasible.
inline double critical_level(int s, double gamma, double Psi, double eps = -1.0) {
  if (s == 1) return gamma;
  if (eps < 0.0) eps = 1e-9 * (1.0 + std::abs(gamma));
  return (gamma - Psi) / tightness_factor(s) + Psi - eps;
}

// Affine rendering of an upper bound on V(chi):
//   X - V0 - sum chi_k Lk >= (Z0 + sum chi_k Zk)^T (Z0 + sum chi_k Zk).
struct SchurData {
  Mat V0;
  std::vector<Mat> Lk;
  Mat Z0;
  std::vector<Mat> Zk;

  int nc() const { return static_cast<int>(V0.rows()); }
  int rows() const { return static_cast<int>(Z0.rows()); }
  Mat eval(const Vec& chi) const {
    Mat V = V0;
    for (std::size_t k = 0; k < Lk.size(); ++k)
      if (chi[static_cast<Eigen::Index>(k)] != 0.0)
        V += chi[static_cast<Eigen::Index>(k)] * Lk[k];
    Mat Z = Z0;
    for (std::size_t k = 0; k < Zk.size(); ++k)
      if (chi[static_cast<Eigen::Index>(k)] != 0.0)
        Z += chi[static_cast<Eigen::Index>(k)] * Zk[k];
    return V + Z.transpose() * Z;
  }
};

inline SchurData gram_schur(const QuadraticFormV& V) {
  SchurData d;
  d.V0 = V.V0;
  d.Lk = V.Lk;
  const int nc = V.n_cols;
  d.Z0 = Mat::Zero(V.R.rows(), nc);
  d.Zk.resize(static_cast<std::size_t>(V.K));
  for (std::int64_t k = 0; k < V.K; ++k)
    d.Zk[static_cast<std::size_t>(k)] = V.R.middleCols(k * nc, nc);
  return d;
}

// Exhaustive rendering over switching paths (m^N <= 64): all of V moves into
// the stacked rows, so V(chi) = Z(chi)^T Z(chi) exactly. The independent route
// used to cross-check the Gram assembly inside the same LMI shape.
inline SchurData path_stacked_schur(const MjlsModel& model, int T, const Mat& A) {
  const Mat RA = psd_factor(A);
  const int rA = static_cast<int>(RA.rows());
  const auto paths = linearize_paths(model);
  const bool noise = has_noise_channel(model);
  const int neps = model.n_eps();
  const Mat Sh = noise ? psd_sqrt(noise_covariance(model)) : Mat();
  const int ncf = 1 + model.n_zeta_full();
  const SlotIndexer idx(model.N, T, model.m(), model.n_u, model.n_y);
  const int per_path = rA + (noise ? rA * neps : 0);
  const int r_alt = static_cast<int>(paths.size()) * per_path;

  SchurData d;
  d.Z0 = Mat::Zero(r_alt, ncf);
  d.Zk.assign(static_cast<std::size_t>(idx.total), Mat::Zero(r_alt, ncf));
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& L = paths[p];
    const int row0 = static_cast<int>(p) * per_path;
    const double sq = std::sqrt(L.prob);
    d.Z0.block(row0, 0, rA, ncf) = sq * (RA * L.G);
    if (noise) {
      const Mat W = sq * (RA * L.Bs0 * Sh);  // rA x neps, vec'd into column 0
      for (int i = 0; i < rA; ++i)
        for (int l = 0; l < neps; ++l) d.Z0(row0 + rA + i * neps + l, 0) = W(i, l);
    }
    for (const auto& s : detail::active_slots(model, T, idx, L)) {
      const Vec col = RA * L.U[static_cast<std::size_t>(s.t)].col(s.a);
      Mat& Zk = d.Zk[static_cast<std::size_t>(s.k)];
      Zk.block(row0, 0, rA, ncf) += sq * (col * s.rho.transpose());
      if (noise && s.rhos.size() > 0) {
        const Vec srow = Sh * s.rhos;
        for (int i = 0; i < rA; ++i)
          for (int l = 0; l < neps; ++l)
            Zk(row0 + rA + i * neps + l, 0) += sq * col[i] * srow[l];
      }
    }
  }
  if (model.known_initial_state) {
    const Mat Tp = pin_transform(model);
    d.Z0 = d.Z0 * Tp;
    for (auto& Zk : d.Zk) Zk = Zk * Tp;
  }
  const int nc = 1 + model.n_zeta();
  d.V0 = Mat::Zero(nc, nc);
  d.Lk.assign(static_cast<std::size_t>(idx.total), Mat::Zero(nc, nc));
  return d;
}

// Upper-triangle variable table for a symmetric matrix decision variable.
struct SymVarBlock {
  int n = 0;
  std::vector<int> vars;

  static SymVarBlock create(ConicProgram& prog, int n) {
    SymVarBlock b;
    b.n = n;
    b.vars = prog.add_vars(n * (n + 1) / 2);
    return b;
  }
  int at(int p, int q) const {
    if (p > q) std::swap(p, q);
    return vars[static_cast<std::size_t>(p * n - p * (p - 1) / 2 + (q - p))];
  }
  Mat value_at(const Vec& x) const {
    Mat M(n, n);
    for (int p = 0; p < n; ++p)
      for (int q = p; q < n; ++q) M(p, q) = M(q, p) = x[at(p, q)];
    return M;
  }
};

namespace detail {

// [[X - V0 - sum chi Lk, Z(chi)^T], [Z(chi), I]] >= 0.
inline void add_schur_block(ConicProgram& prog, const std::vector<int>& chi,
                            const SymVarBlock& X, const SchurData& D) {
  const int nc = D.nc(), r = D.rows();
  PsdBlock& blk = prog.add_psd_block(nc + r);
  blk.add_const_block(0, 0, -D.V0);
  for (int i = 0; i < r; ++i) blk.add_const(nc + i, nc + i, 1.0);
  blk.add_const_block(0, nc, D.Z0.transpose(), true);
  for (int p = 0; p < nc; ++p)
    for (int q = p; q < nc; ++q) {
      blk.add_term(X.at(p, q), p, q, 1.0);
      if (p != q) blk.add_term(X.at(p, q), q, p, 1.0);
    }
  for (std::size_t k = 0; k < chi.size(); ++k) {
    blk.add_term_block(chi[k], 0, 0, -D.Lk[k]);
    blk.add_term_block(chi[k], 0, nc, D.Zk[k].transpose(), true);
  }
}

// The S-procedure certificate block; rc(chi) = (beta^T M(chi))^T split into
// its constant part rc0 and slot parts rck.
inline void add_slemma_block(ConicProgram& prog, const std::vector<int>& chi,
                             const SymVarBlock& X, const std::vector<int>& lambda,
                             const Ellitope& ell, double gamma, const Vec& rc0,
                             const std::vector<Vec>& rck) {
  const int nc = X.n;
  PsdBlock& blk = prog.add_psd_block(nc);
  blk.add_const(0, 0, gamma - 2.0 * rc0[0]);
  for (int q = 1; q < nc; ++q) {
    blk.add_const(0, q, -rc0[q]);
    blk.add_const(q, 0, -rc0[q]);
  }
  for (int p = 0; p < nc; ++p)
    for (int q = p; q < nc; ++q) {
      blk.add_term(X.at(p, q), p, q, -1.0);
      if (p != q) blk.add_term(X.at(p, q), q, p, -1.0);
    }
  for (std::size_t k = 0; k < chi.size(); ++k) {
    blk.add_term(chi[k], 0, 0, -2.0 * rck[k][0]);
    for (int q = 1; q < nc; ++q) {
      blk.add_term(chi[k], 0, q, -rck[k][q]);
      blk.add_term(chi[k], q, 0, -rck[k][q]);
    }
  }
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    blk.add_term(lambda[i], 0, 0, -1.0);
    blk.add_term_block(lambda[i], 1, 1, ell.Qs[i]);
  }
}

}  // namespace detail

struct SynthesisOptions {
  SolverOptions solver;
  bool path_stacked = false;  // render avg_quad bounds by path stacking instead of Gram
};

struct SpecDiagnostic {
  std::string label;
  double gamma = 0.0;
  double psi = 0.0;          // Psi[chi] at the reported point
  double gamma_minus = 0.0;  // certified-unreachable level if infeasible
};

struct SynthesisReport {
  SolveStatus status = SolveStatus::failed;
  int T = 0;
  Vec chi;           // empty when the solver returned no point
  std::optional<PobPolicy> policy;
  double max_violation = std::numeric_limits<double>::quiet_NaN();
  SolverResult solver;
  std::vector<SpecDiagnostic> avg_quad;
};

inline SynthesisReport synthesize(const MjlsModel& model, int T, const SpecSet& specs,
                                  const SynthesisOptions& opts = SynthesisOptions{}) {
  model.validate();
  require(T >= 0 && T <= model.N - 1, "synthesize: T out of range");
  require(!specs.avg_quad.empty() || !specs.mean_quad.empty() || !specs.cov_bound.empty(),
          "synthesize: no specifications given");
  if (!specs.avg_quad.empty() || !specs.mean_quad.empty()) {
    specs.ellitope.validate();
    require_dims(specs.ellitope.dim() == model.n_zeta(),
                 "synthesize: ellitope dimension must match n_zeta");
  }
  require(specs.cov_bound.empty() || model.m() == 1,
          "synthesize: covariance bounds require a single-mode model");

  const std::int64_t K = dim_of_policy(model.N, T, model.m(), model.n_u, model.n_y);
  const int nc = 1 + model.n_zeta();
  const AffineMapM M = assemble_M(model, T);

  ConicProgram prog;
  const std::vector<int> chi = prog.add_vars(static_cast<int>(K));

  std::vector<SchurData> avg_schur;
  for (const QuadSpec& spec : specs.avg_quad) {
    require_dims(spec.A.rows() == model.n_w() && spec.beta.size() == model.n_w(),
                 "synthesize: avg_quad spec dimensions");
    SchurData D = opts.path_stacked ? path_stacked_schur(model, T, spec.A)
                                    : gram_schur(assemble_V(model, T, spec.A));
    SymVarBlock X = SymVarBlock::create(prog, nc);
    std::vector<int> lambda = prog.add_vars(specs.ellitope.s());
    for (int v : lambda) prog.nonneg.push_back(v);
    detail::add_schur_block(prog, chi, X, D);
    Vec rc0 = M.M0.transpose() * spec.beta;
    std::vector<Vec> rck(static_cast<std::size_t>(K));
    for (std::int64_t k = 0; k < K; ++k)
      rck[static_cast<std::size_t>(k)] = M.Mk[static_cast<std::size_t>(k)].transpose() * spec.beta;
    detail::add_slemma_block(prog, chi, X, lambda, specs.ellitope, spec.gamma, rc0, rck);
    avg_schur.push_back(std::move(D));
  }

  for (const MeanQuadSpec& spec : specs.mean_quad) {
    require_dims(spec.A_hat.rows() == model.n_w() && spec.beta_hat.size() == model.n_w(),
                 "synthesize: mean_quad spec dimensions");
    const Mat RA = psd_factor(spec.A_hat);
    SchurData D;
    D.V0 = Mat::Zero(nc, nc);
    D.Lk.assign(static_cast<std::size_t>(K), Mat::Zero(nc, nc));
    D.Z0 = RA * M.M0;
    D.Zk.resize(static_cast<std::size_t>(K));
    for (std::int64_t k = 0; k < K; ++k)
      D.Zk[static_cast<std::size_t>(k)] = RA * M.Mk[static_cast<std::size_t>(k)];
    SymVarBlock X = SymVarBlock::create(prog, nc);
    std::vector<int> lambda = prog.add_vars(specs.ellitope.s());
    for (int v : lambda) prog.nonneg.push_back(v);
    detail::add_schur_block(prog, chi, X, D);
    Vec rc0 = M.M0.transpose() * spec.beta_hat;
    std::vector<Vec> rck(static_cast<std::size_t>(K));
    for (std::int64_t k = 0; k < K; ++k)
      rck[static_cast<std::size_t>(k)] =
          M.Mk[static_cast<std::size_t>(k)].transpose() * spec.beta_hat;
    detail::add_slemma_block(prog, chi, X, lambda, specs.ellitope, spec.gamma_hat, rc0, rck);
  }

  if (!specs.cov_bound.empty()) {
    const auto paths = linearize_paths(model);  // single path when m == 1
    const auto& L = paths.front();
    const Mat Sh = psd_sqrt(noise_covariance(model));
    const int neps = model.n_eps();
    const SlotIndexer idx(model.N, T, model.m(), model.n_u, model.n_y);
    const auto act = detail::active_slots(model, T, idx, L);
    for (const CovSpec& spec : specs.cov_bound) {
      require_dims(spec.Q.cols() == model.n_w(), "synthesize: cov spec Q width");
      require_dims(spec.Sigma_tilde.rows() == spec.Q.rows(), "synthesize: cov spec shapes");
      const int nq = static_cast<int>(spec.Q.rows());
      PsdBlock& blk = prog.add_psd_block(nq + neps);
      blk.add_const_block(0, 0, spec.Sigma_tilde);
      for (int i = 0; i < neps; ++i) blk.add_const(nq + i, nq + i, 1.0);
      blk.add_const_block(0, nq, spec.Q * L.Bs0 * Sh, true);
      for (const auto& s : act) {
        if (s.rhos.size() == 0) continue;
        const Vec qu = spec.Q * L.U[static_cast<std::size_t>(s.t)].col(s.a);
        blk.add_term_block(chi[static_cast<std::size_t>(s.k)], 0, nq,
                           qu * (Sh * s.rhos).transpose(), true);
      }
    }
  }

  SolverResult res = solve_with_cvxopt(prog, opts.solver);

  SynthesisReport report;
  report.status = res.status;
  report.T = T;
  report.solver = res;
  report.max_violation = res.max_psd_violation;
  const bool have_x = res.x.size() == prog.n_vars && prog.n_vars > 0;
  Vec chi_val = Vec::Zero(K);
  if (have_x) {
    chi_val = res.x.head(K);
    report.chi = chi_val;
    if (res.status == SolveStatus::feasible || res.status == SolveStatus::inaccurate)
      report.policy = PobPolicy::unflatten(chi_val, model.N, T, model.m(), model.n_u, model.n_y);
  }
  if (!specs.avg_quad.empty()) {
    const Mat Mval = M.eval(chi_val);
    for (std::size_t l = 0; l < specs.avg_quad.size(); ++l) {
      const QuadSpec& spec = specs.avg_quad[l];
      SpecDiagnostic diag;
      diag.label = spec.label;
      diag.gamma = spec.gamma;
      const Vec r0 = Mval.transpose() * spec.beta;
      diag.psi = avg_schur[l].eval(chi_val)(0, 0) + 2.0 * r0[0];
      diag.gamma_minus = critical_level(specs.ellitope.s(), spec.gamma, diag.psi);
      report.avg_quad.push_back(std::move(diag));
    }
  }
  return report;
}

// Minimal S-procedure relaxation of  max { zeta^T V zeta + 2 b^T zeta } over an
// ellitope: minimize gamma subject to the certificate block. Exact for s = 1,
// within tightness_factor(s) of the true maximum in general.
inline SolverResult slemma_sdp_value(const Ellitope& ell, const Mat& V, const Vec& b,
                                     const SolverOptions& opts = SolverOptions{}) {
  ell.validate();
  const int n = ell.dim();
  require_dims(V.rows() == n && V.cols() == n && b.size() == n, "slemma_sdp_value: shapes");
  ConicProgram prog;
  const int gamma = prog.add_var(1.0);
  const std::vector<int> lambda = prog.add_vars(ell.s());
  for (int v : lambda) prog.nonneg.push_back(v);
  PsdBlock& blk = prog.add_psd_block(1 + n);
  for (int q = 0; q < n; ++q) {
    blk.add_const(0, 1 + q, -b[q]);
    blk.add_const(1 + q, 0, -b[q]);
  }
  blk.add_const_block(1, 1, -V);
  blk.add_term(gamma, 0, 0, 1.0);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    blk.add_term(lambda[i], 0, 0, -1.0);
    blk.add_term_block(lambda[i], 1, 1, ell.Qs[i]);
  }
  return solve_with_cvxopt(prog, opts);
}

}  // namespace robust_pob
