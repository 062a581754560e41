// Finite-horizon Markov jump linear system data and the ellitope uncertainty set.
//
// Dynamics over t = 0..N-1, conditioned on the switching path theta:
//   x_{t+1} = A_t[theta_t] x_t + B_t[theta_t] u_t + Bd_t[theta_t] d_t + Bs_t[theta_t] e_t
//   y_t     = C_t[theta_t] x_t + Dd_t[theta_t] d_t + Ds_t[theta_t] e_t
// with x_0 = z + s_0, s_0 ~ N(0, Sigma0) and e_t ~ N(0, I).
// The deterministic-but-unknown data is zeta = (z, d_0..d_{N-1}), restricted to an
// ellitope; the Gaussian channel is epsilon = (s_0, e_0..e_{N-1}).
#pragma once

#include "robust_pob/chain.hpp"
#include "robust_pob/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace robust_pob {

struct ModeMatrices {
  Mat A, B, Bd, Bs, C, Dd, Ds;
};

struct MjlsModel {
  int N = 1;
  int n_x = 0, n_u = 0, n_d = 0, n_e = 0, n_y = 0;
  MarkovChain chain;
  Mat Sigma0;                                      // n_x x n_x, PSD (zero allowed)
  std::vector<std::vector<ModeMatrices>> mats;     // [t][mode]
  std::optional<Vec> known_initial_state;          // pins z, removing it from zeta

  int m() const { return chain.m; }
  // Dimension of the decision uncertainty zeta. A pinned initial state removes
  // the z block, as when the controller observes x_0 directly.
  int n_zeta() const { return (known_initial_state ? 0 : n_x) + N * n_d; }
  int n_zeta_full() const { return n_x + N * n_d; }
  int n_eps() const { return n_x + N * n_e; }
  int n_w() const { return N * (n_x + n_u); }

  const ModeMatrices& at(int t, int mode) const { return mats[t][mode]; }

  void validate() const {
    require(N >= 1, "MjlsModel: N must be >= 1");
    require(n_x >= 0 && n_u >= 0 && n_d >= 0 && n_e >= 0 && n_y >= 0,
            "MjlsModel: dimensions must be nonnegative");
    chain.validate();
    require_dims(static_cast<int>(mats.size()) == N, "MjlsModel: matrices must cover t=0..N-1");
    for (int t = 0; t < N; ++t) {
      require_dims(static_cast<int>(mats[t].size()) == chain.m,
                   "MjlsModel: per-time matrices must cover all modes");
      for (const ModeMatrices& mm : mats[t]) {
        require_dims(mm.A.rows() == n_x && mm.A.cols() == n_x, "MjlsModel: A shape");
        require_dims(mm.B.rows() == n_x && mm.B.cols() == n_u, "MjlsModel: B shape");
        require_dims(mm.Bd.rows() == n_x && mm.Bd.cols() == n_d, "MjlsModel: Bd shape");
        require_dims(mm.Bs.rows() == n_x && mm.Bs.cols() == n_e, "MjlsModel: Bs shape");
        require_dims(mm.C.rows() == n_y && mm.C.cols() == n_x, "MjlsModel: C shape");
        require_dims(mm.Dd.rows() == n_y && mm.Dd.cols() == n_d, "MjlsModel: Dd shape");
        require_dims(mm.Ds.rows() == n_y && mm.Ds.cols() == n_e, "MjlsModel: Ds shape");
      }
    }
    require_dims(Sigma0.rows() == n_x && Sigma0.cols() == n_x, "MjlsModel: Sigma0 shape");
    require(is_symmetric(Sigma0, 1e-10), "MjlsModel: Sigma0 must be symmetric");
    require(min_eigenvalue(Sigma0) >= -1e-10, "MjlsModel: Sigma0 must be PSD");
    if (known_initial_state)
      require_dims(known_initial_state->size() == n_x, "MjlsModel: known_initial_state length");
  }
};

// Intersection of centered ellipsoids/cylinders { zeta : <Q_i zeta, zeta> <= 1 },
// Q_i PSD with positive definite sum.
struct Ellitope {
  std::vector<Mat> Qs;

  int s() const { return static_cast<int>(Qs.size()); }
  int dim() const { return Qs.empty() ? 0 : static_cast<int>(Qs[0].rows()); }

  void validate() const {
    require(!Qs.empty(), "Ellitope: needs at least one Q");
    const int n = dim();
    Mat sum = Mat::Zero(n, n);
    for (const Mat& Q : Qs) {
      require_dims(Q.rows() == n && Q.cols() == n, "Ellitope: inconsistent Q shapes");
      require(is_symmetric(Q, 1e-10), "Ellitope: Q must be symmetric");
      require(min_eigenvalue(Q) >= -1e-10, "Ellitope: Q must be PSD");
      sum += Q;
    }
    require(min_eigenvalue(sum) > 1e-10, "Ellitope: sum of Q_i must be positive definite");
  }

  // max_i <Q_i z, z>; membership means value <= 1.
  double membership(const Vec& z) const {
    double worst = 0.0;
    for (const Mat& Q : Qs) worst = std::max(worst, z.dot(Q * z));
    return worst;
  }
};

inline Ellitope unit_ball_ellitope(int n) {
  Ellitope e;
  e.Qs.push_back(Mat::Identity(n, n));
  return e;
}

}  // namespace robust_pob
