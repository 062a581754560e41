// Path-conditional stacked trajectory operators and the bi-affine trajectory maps.
//
// For a fixed switching path theta of length N the stacked system reads
//   x = A_ul x_0 + B_ul u + Bd_ul d + Bs_ul e,   v = C_ul x_0^det + Dd_ul d (+ noise analog)
// with x = (x_1..x_N), u = (u_0..u_{N-1}). Row convention for B_ul and friends:
// rows are indexed by states 1..N, columns by inputs 0..N-1, and block (t, j) is
// Gamma[t, j+1] B_j[theta_j] for j <= t-1 (zero above). The state-control
// trajectory is w = (x_1..x_N, u_0..u_{N-1}).
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/policy.hpp"

namespace robust_pob {

// Gamma[t, tau] = A_{t-1}[theta_{t-1}] ... A_tau[theta_tau]; identity when t == tau.
inline Mat state_transition(const MjlsModel& model, const Hist& path, int t, int tau) {
  require(0 <= tau && tau <= t && t <= model.N, "state_transition: need 0 <= tau <= t <= N");
  Mat G = Mat::Identity(model.n_x, model.n_x);
  for (int s = tau; s < t; ++s) G = model.at(s, path[s]).A * G;
  return G;
}

struct StackedOperators {
  int N, n_x, n_u, n_d, n_e, n_y;
  Mat A_ul;            // N n_x  x  n_x
  Mat B_ul, Bd_ul, Bs_ul;  // N n_x  x  N n_{u,d,e}
  Mat C_ul;            // N n_y  x  n_x
  Mat Dd_ul, Ds_ul;    // N n_y  x  N n_{d,e}
  Vec h_ul;            // N n_u
  Mat H_ul;            // N n_u  x  N n_y, block lower triangular
};

inline StackedOperators build_stacked(const MjlsModel& model, const Hist& path,
                                      const PobPolicy& policy) {
  require_dims(static_cast<int>(path.size()) == model.N, "build_stacked: path length != N");
  require_dims(policy.N == model.N && policy.m == model.m() && policy.n_u == model.n_u &&
                   policy.n_y == model.n_y,
               "build_stacked: policy shape does not match model");
  const int N = model.N, nx = model.n_x, nu = model.n_u, nd = model.n_d, ne = model.n_e,
            ny = model.n_y;
  StackedOperators S{N, nx, nu, nd, ne, ny,
                     Mat::Zero(N * nx, nx),
                     Mat::Zero(N * nx, N * nu),
                     Mat::Zero(N * nx, N * nd),
                     Mat::Zero(N * nx, N * ne),
                     Mat::Zero(N * ny, nx),
                     Mat::Zero(N * ny, N * nd),
                     Mat::Zero(N * ny, N * ne),
                     Vec::Zero(N * nu),
                     Mat::Zero(N * nu, N * ny)};

  // Gamma[t, tau] for all 0 <= tau <= t <= N, computed by forward products.
  std::vector<std::vector<Mat>> Gamma(N + 1);
  for (int t = 0; t <= N; ++t) {
    Gamma[t].resize(t + 1);
    Gamma[t][t] = Mat::Identity(nx, nx);
  }
  for (int t = 1; t <= N; ++t)
    for (int tau = 0; tau < t; ++tau) Gamma[t][tau] = model.at(t - 1, path[t - 1]).A * Gamma[t - 1][tau];

  for (int t = 1; t <= N; ++t) {
    S.A_ul.middleRows((t - 1) * nx, nx) = Gamma[t][0];
    for (int j = 0; j <= t - 1; ++j) {
      const ModeMatrices& mm = model.at(j, path[j]);
      S.B_ul.block((t - 1) * nx, j * nu, nx, nu) = Gamma[t][j + 1] * mm.B;
      S.Bd_ul.block((t - 1) * nx, j * nd, nx, nd) = Gamma[t][j + 1] * mm.Bd;
      S.Bs_ul.block((t - 1) * nx, j * ne, nx, ne) = Gamma[t][j + 1] * mm.Bs;
    }
  }
  for (int j = 0; j < N; ++j) {
    const ModeMatrices& mj = model.at(j, path[j]);
    S.C_ul.middleRows(j * ny, ny) = mj.C * Gamma[j][0];
    S.Dd_ul.block(j * ny, j * nd, ny, nd) = mj.Dd;
    S.Ds_ul.block(j * ny, j * ne, ny, ne) = mj.Ds;
    for (int i = 0; i < j; ++i) {
      const ModeMatrices& mi = model.at(i, path[i]);
      S.Dd_ul.block(j * ny, i * nd, ny, nd) = mj.C * Gamma[j][i + 1] * mi.Bd;
      S.Ds_ul.block(j * ny, i * ne, ny, ne) = mj.C * Gamma[j][i + 1] * mi.Bs;
    }
  }
  for (int t = 0; t < N; ++t) {
    Hist hist = truncated_history(path, t, policy.T);
    S.h_ul.segment(t * nu, nu) = policy.h_at(t, hist);
    for (int j = 0; j <= t; ++j) S.H_ul.block(t * nu, j * ny, nu, ny) = policy.H_at(t, j, hist);
  }
  return S;
}

// The bi-affine trajectory maps of the fixed path: w = b + Bd_cal zeta + Bs_cal eps,
// zeta = (z, d_0..d_{N-1}) in full coordinates, eps = (s_0, e_0..e_{N-1}).
struct TrajectoryMaps {
  Vec b;        // n_w
  Mat Bd_cal;   // n_w x (n_x + N n_d)
  Mat Bs_cal;   // n_w x (n_x + N n_e)
};

inline TrajectoryMaps trajectory_affine_maps(const StackedOperators& S) {
  const int N = S.N, nx = S.n_x, nu = S.n_u, nd = S.n_d, ne = S.n_e;
  const int n_w = N * (nx + nu);
  TrajectoryMaps M;
  M.b = Vec::Zero(n_w);
  M.b.head(N * nx) = S.B_ul * S.h_ul;
  M.b.tail(N * nu) = S.h_ul;

  const Mat BHC = S.B_ul * S.H_ul * S.C_ul;
  M.Bd_cal = Mat::Zero(n_w, nx + N * nd);
  M.Bd_cal.topLeftCorner(N * nx, nx) = BHC + S.A_ul;
  M.Bd_cal.topRightCorner(N * nx, N * nd) = S.B_ul * S.H_ul * S.Dd_ul + S.Bd_ul;
  M.Bd_cal.bottomLeftCorner(N * nu, nx) = S.H_ul * S.C_ul;
  M.Bd_cal.bottomRightCorner(N * nu, N * nd) = S.H_ul * S.Dd_ul;

  M.Bs_cal = Mat::Zero(n_w, nx + N * ne);
  M.Bs_cal.topLeftCorner(N * nx, nx) = BHC + S.A_ul;
  M.Bs_cal.topRightCorner(N * nx, N * ne) = S.B_ul * S.H_ul * S.Ds_ul + S.Bs_ul;
  M.Bs_cal.bottomLeftCorner(N * nu, nx) = S.H_ul * S.C_ul;
  M.Bs_cal.bottomRightCorner(N * nu, N * ne) = S.H_ul * S.Ds_ul;
  return M;
}

// The path-conditional pair (F(chi), G) with b + w^(d) = (F + G) zeta_e,
// zeta_e = (1, zeta). F collects every chi-dependent block and vanishes at chi = 0.
struct FGPair {
  Mat F;  // n_w x (1 + n_zeta_full)
  Mat G;  // n_w x (1 + n_zeta_full)
};

inline FGPair fg_pair(const StackedOperators& S) {
  const int N = S.N, nx = S.n_x, nu = S.n_u, nd = S.n_d;
  const int n_w = N * (nx + nu);
  FGPair P;
  P.F = Mat::Zero(n_w, 1 + nx + N * nd);
  P.G = Mat::Zero(n_w, 1 + nx + N * nd);
  const Mat HC = S.H_ul * S.C_ul;
  const Mat HD = S.H_ul * S.Dd_ul;
  P.F.block(0, 0, N * nx, 1) = S.B_ul * S.h_ul;
  P.F.block(0, 1, N * nx, nx) = S.B_ul * HC;
  P.F.block(0, 1 + nx, N * nx, N * nd) = S.B_ul * HD;
  P.F.block(N * nx, 0, N * nu, 1) = S.h_ul;
  P.F.block(N * nx, 1, N * nu, nx) = HC;
  P.F.block(N * nx, 1 + nx, N * nu, N * nd) = HD;
  P.G.block(0, 1, N * nx, nx) = S.A_ul;
  P.G.block(0, 1 + nx, N * nx, N * nd) = S.Bd_ul;
  return P;
}

// Affine substitution that pins the initial state: zeta_e_full = T_pin zeta_e_red
// with zeta_red = (d) only. Identity-shaped (with a leading 1) when no pin.
inline Mat pin_transform(const MjlsModel& model) {
  const int nfull = 1 + model.n_zeta_full();
  if (!model.known_initial_state) return Mat::Identity(nfull, nfull);
  const int nred = 1 + model.N * model.n_d;
  Mat T = Mat::Zero(nfull, nred);
  T(0, 0) = 1.0;
  T.block(1, 0, model.n_x, 1) = *model.known_initial_state;
  T.block(1 + model.n_x, 1, model.N * model.n_d, model.N * model.n_d) =
      Mat::Identity(model.N * model.n_d, model.N * model.n_d);
  return T;
}

// Expands a (possibly reduced) zeta into full (z, d) coordinates.
inline Vec expand_zeta(const MjlsModel& model, const Vec& zeta) {
  require_dims(zeta.size() == model.n_zeta(), "expand_zeta: zeta length mismatch");
  if (!model.known_initial_state) return zeta;
  Vec full(model.n_zeta_full());
  full.head(model.n_x) = *model.known_initial_state;
  full.tail(model.N * model.n_d) = zeta;
  return full;
}

}  // namespace robust_pob
