// Per-time factor chains whose descending products reproduce the stacked
// trajectory blocks, so that expectations over the switching path reduce to the
// Markov product recursions.
//
// Building blocks, all conditioned on a path theta:
//   * S_t = [0 | Gamma[t,0] | Gamma[t,l+1] Bd_l ...]  maps zeta_e to the
//     disturbance-driven state x_t; it satisfies S_{t+1} = A_t S_t + (Bd_t at
//     column block t), which lifts to a square per-time factor.
//   * U_t = d w / d u_t: column block t of B_ul stacked over states plus the
//     identity in the u_t rows; accumulated by square factors above time t.
//   * P_j = row block j of [0 | C_ul | Dd_ul], the affine map from zeta_e to the
//     purified output v_j (noise analog over epsilon for the stochastic channel).
// Kronecker combination (mixed-product rule) turns pairs of chains into a single
// factor sequence for E[U ⊗ P] style terms.
#pragma once

#include "robust_pob/model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <vector>

namespace robust_pob::chains {

using FactorList = std::vector<std::vector<Mat>>;  // [time][mode]

// Injects an n_x block into the rows of x-block t (states are numbered 1..N).
inline Mat state_injection(const MjlsModel& model, int t) {
  Mat inj = Mat::Zero(model.n_w(), model.n_x);
  inj.block((t - 1) * model.n_x, 0, model.n_x, model.n_x) =
      Mat::Identity(model.n_x, model.n_x);
  return inj;
}

// Factors whose descending product is G_cal = [[0, A_ul, Bd_ul], [0, 0, 0]],
// the chi-free part of the deterministic trajectory map (n_w x (1 + n_zeta_full)).
inline FactorList g_chain_det(const MjlsModel& model) {
  const int N = model.N, nx = model.n_x, m = model.m();
  const int nc = 1 + model.n_zeta_full();
  const int D = model.n_w() + nx + nc;
  FactorList out(N);
  for (int t = 0; t < N; ++t) {
    out[t].resize(m);
    const Mat inj = state_injection(model, t + 1);
    for (int mode = 0; mode < m; ++mode) {
      const ModeMatrices& mm = model.at(t, mode);
      Mat delta = Mat::Zero(nx, nc);  // disturbance entering at time t
      delta.block(0, 1 + nx + t * model.n_d, nx, model.n_d) = mm.Bd;
      Mat f = Mat::Zero(D, D);
      f.topLeftCorner(model.n_w(), model.n_w()).setIdentity();
      f.block(0, model.n_w(), model.n_w(), nx) = inj * mm.A;
      f.block(0, model.n_w() + nx, model.n_w(), nc) = inj * delta;
      f.block(model.n_w(), model.n_w(), nx, nx) = mm.A;
      f.block(model.n_w(), model.n_w() + nx, nx, nc) = delta;
      f.bottomRightCorner(nc, nc).setIdentity();
      out[t][mode] = std::move(f);
    }
  }
  // Fold the initial injection (S_0 = [0 | I | 0]) into the bottom factor and the
  // projection onto the accumulator into the top factor.
  Mat iota = Mat::Zero(D, nc);
  iota.block(model.n_w(), 1, nx, nx) = Mat::Identity(nx, nx);
  iota.bottomRightCorner(nc, nc).setIdentity();
  Mat proj = Mat::Zero(model.n_w(), D);
  proj.topLeftCorner(model.n_w(), model.n_w()).setIdentity();
  for (int mode = 0; mode < m; ++mode) {
    if (N == 1) {
      out[0][mode] = proj * out[0][mode] * iota;
    } else {
      out[0][mode] = out[0][mode] * iota;
      out[N - 1][mode] = proj * out[N - 1][mode];
    }
  }
  return out;
}

// Same accumulator over the stochastic channel: product is Bs_cal at chi = 0,
// i.e. [[A_ul, Bs_ul], [0, 0]] (n_w x n_eps).
inline FactorList g_chain_noise(const MjlsModel& model) {
  const int N = model.N, nx = model.n_x, m = model.m();
  const int nc = model.n_eps();
  const int D = model.n_w() + nx + nc;
  FactorList out(N);
  for (int t = 0; t < N; ++t) {
    out[t].resize(m);
    const Mat inj = state_injection(model, t + 1);
    for (int mode = 0; mode < m; ++mode) {
      const ModeMatrices& mm = model.at(t, mode);
      Mat delta = Mat::Zero(nx, nc);
      if (model.n_e > 0) delta.block(0, nx + t * model.n_e, nx, model.n_e) = mm.Bs;
      Mat f = Mat::Zero(D, D);
      f.topLeftCorner(model.n_w(), model.n_w()).setIdentity();
      f.block(0, model.n_w(), model.n_w(), nx) = inj * mm.A;
      f.block(0, model.n_w() + nx, model.n_w(), nc) = inj * delta;
      f.block(model.n_w(), model.n_w(), nx, nx) = mm.A;
      f.block(model.n_w(), model.n_w() + nx, nx, nc) = delta;
      f.bottomRightCorner(nc, nc).setIdentity();
      out[t][mode] = std::move(f);
    }
  }
  Mat iota = Mat::Zero(D, nc);
  iota.block(model.n_w(), 0, nx, nx) = Mat::Identity(nx, nx);  // s_0 enters x_0
  iota.bottomRightCorner(nc, nc).setIdentity();
  Mat proj = Mat::Zero(model.n_w(), D);
  proj.topLeftCorner(model.n_w(), model.n_w()).setIdentity();
  for (int mode = 0; mode < m; ++mode) {
    if (N == 1) {
      out[0][mode] = proj * out[0][mode] * iota;
    } else {
      out[0][mode] = out[0][mode] * iota;
      out[N - 1][mode] = proj * out[N - 1][mode];
    }
  }
  return out;
}

// Factors whose product is U_t (n_w x n_u): identity below t, the B_t impulse at
// t, state accumulation above t, projection folded into the top factor.
inline FactorList u_side_factors(const MjlsModel& model, int t) {
  const int N = model.N, nx = model.n_x, nu = model.n_u, m = model.m();
  const int nw = model.n_w();
  FactorList out(N);
  Mat proj = Mat::Zero(nw, nw + nx);
  proj.topLeftCorner(nw, nw).setIdentity();
  for (int i = 0; i < N; ++i) {
    out[i].resize(m);
    for (int mode = 0; mode < m; ++mode) {
      Mat f;
      if (i < t) {
        f = Mat::Identity(nu, nu);
      } else if (i == t) {
        const ModeMatrices& mm = model.at(t, mode);
        f = Mat::Zero(nw + nx, nu);
        f.topRows(nw) = state_injection(model, t + 1) * mm.B;
        f.block(N * nx + t * nu, 0, nu, nu) += Mat::Identity(nu, nu);
        f.bottomRows(nx) = mm.B;
      } else {
        const ModeMatrices& mm = model.at(i, mode);
        f = Mat::Zero(nw + nx, nw + nx);
        f.topLeftCorner(nw, nw).setIdentity();
        f.block(0, nw, nw, nx) = state_injection(model, i + 1) * mm.A;
        f.bottomRightCorner(nx, nx) = mm.A;
      }
      if (i == N - 1) f = proj * f;
      out[i][mode] = std::move(f);
    }
  }
  return out;
}

// Factors whose product is row b of P_j (1 x (1 + n_zeta_full)); j == -1 yields
// the constant row e_0^T (the h-slot column selector).
inline FactorList p_side_factors_det(const MjlsModel& model, int j, int b) {
  const int N = model.N, nx = model.n_x, m = model.m();
  const int nc = 1 + model.n_zeta_full();
  FactorList out(N);
  if (j < 0) {
    for (int i = 0; i < N; ++i) {
      Mat f = (i == 0) ? Mat(Eigen::RowVectorXd::Unit(nc, 0)) : Mat::Identity(1, 1);
      out[i].assign(m, f);
    }
    return out;
  }
  const int D = nx + nc;
  Mat iota = Mat::Zero(D, nc);
  iota.block(0, 1, nx, nx) = Mat::Identity(nx, nx);
  iota.bottomRightCorner(nc, nc).setIdentity();
  for (int i = 0; i < N; ++i) {
    out[i].resize(m);
    for (int mode = 0; mode < m; ++mode) {
      const ModeMatrices& mm = model.at(i, mode);
      Mat f;
      if (i < j) {
        f = Mat::Zero(D, D);
        f.topLeftCorner(nx, nx) = mm.A;
        f.block(0, nx + 1 + nx + i * model.n_d, nx, model.n_d) = mm.Bd;
        f.bottomRightCorner(nc, nc).setIdentity();
      } else if (i == j) {
        f = Mat::Zero(1, D);
        f.leftCols(nx) = mm.C.row(b);
        f.block(0, nx + 1 + nx + j * model.n_d, 1, model.n_d) = mm.Dd.row(b);
      } else {
        f = Mat::Identity(1, 1);
      }
      if (i == 0) f = f * iota;
      out[i][mode] = std::move(f);
    }
  }
  return out;
}

// Row b of the noise analog [C_ul | Ds_ul-style] (1 x n_eps).
inline FactorList p_side_factors_noise(const MjlsModel& model, int j, int b) {
  const int N = model.N, nx = model.n_x, m = model.m();
  const int nc = model.n_eps();
  require(j >= 0, "p_side_factors_noise: h-slots carry no noise derivative");
  const int D = nx + nc;
  Mat iota = Mat::Zero(D, nc);
  iota.topLeftCorner(nx, nx) = Mat::Identity(nx, nx);
  iota.bottomRightCorner(nc, nc).setIdentity();
  FactorList out(N);
  for (int i = 0; i < N; ++i) {
    out[i].resize(m);
    for (int mode = 0; mode < m; ++mode) {
      const ModeMatrices& mm = model.at(i, mode);
      Mat f;
      if (i < j) {
        f = Mat::Zero(D, D);
        f.topLeftCorner(nx, nx) = mm.A;
        if (model.n_e > 0) f.block(0, nx + nx + i * model.n_e, nx, model.n_e) = mm.Bs;
        f.bottomRightCorner(nc, nc).setIdentity();
      } else if (i == j) {
        f = Mat::Zero(1, D);
        f.leftCols(nx) = mm.C.row(b);
        if (model.n_e > 0) f.block(0, nx + nx + j * model.n_e, 1, model.n_e) = mm.Ds.row(b);
      } else {
        f = Mat::Identity(1, 1);
      }
      if (i == 0) f = f * iota;
      out[i][mode] = std::move(f);
    }
  }
  return out;
}

// Full row block j of [0 | C_ul | Dd_ul] (n_y x (1 + n_zeta_full)), used by the
// Kronecker chain of assemble_M where all output rows stay together.
inline FactorList p_side_factors_det_full(const MjlsModel& model, int j) {
  const int N = model.N, nx = model.n_x, ny = model.n_y, m = model.m();
  const int nc = 1 + model.n_zeta_full();
  const int D = nx + nc;
  Mat iota = Mat::Zero(D, nc);
  iota.block(0, 1, nx, nx) = Mat::Identity(nx, nx);
  iota.bottomRightCorner(nc, nc).setIdentity();
  FactorList out(N);
  for (int i = 0; i < N; ++i) {
    out[i].resize(m);
    for (int mode = 0; mode < m; ++mode) {
      const ModeMatrices& mm = model.at(i, mode);
      Mat f;
      if (i < j) {
        f = Mat::Zero(D, D);
        f.topLeftCorner(nx, nx) = mm.A;
        f.block(0, nx + 1 + nx + i * model.n_d, nx, model.n_d) = mm.Bd;
        f.bottomRightCorner(nc, nc).setIdentity();
      } else if (i == j) {
        f = Mat::Zero(ny, D);
        f.leftCols(nx) = mm.C;
        f.block(0, nx + 1 + nx + j * model.n_d, ny, model.n_d) = mm.Dd;
      } else {
        f = Mat::Identity(ny, ny);
      }
      if (i == 0) f = f * iota;
      out[i][mode] = std::move(f);
    }
  }
  return out;
}

// Per-time Kronecker combination (left ⊗ right), valid by the mixed-product rule
// because both factor lists conform on their own.
inline FactorList kron_factors(const FactorList& left, const FactorList& right) {
  FactorList out(left.size());
  for (std::size_t t = 0; t < left.size(); ++t) {
    out[t].resize(left[t].size());
    for (std::size_t mode = 0; mode < left[t].size(); ++mode)
      out[t][mode] = Eigen::kroneckerProduct(left[t][mode], right[t][mode]).eval();
  }
  return out;
}

}  // namespace robust_pob::chains
