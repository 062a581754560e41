// Exact basis changes between output-feedback and purified-output policies.
//
// With full-memory histories (T = N - 1) the history available at time t pins
// down the whole mode prefix theta_{[0,t]}, so y_j and v_j are related by an
// affine map whose coefficients the controller can reconstruct: v_j = y_j -
// C_j xhat_j and xhat_j is driven by the controller's own past inputs. The
// conversions below run that substitution forward in time, one mode prefix at
// a time. With shorter memory the substitution needs modes the history no
// longer carries, and the two policy classes genuinely differ; those requests
// are rejected.
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/policy.hpp"

#include <vector>

namespace robust_pob {

namespace detail {

// Affine function of the first t observation blocks: c + sum_j K[j] arg_j.
struct AffineInObs {
  Vec c;
  std::vector<Mat> K;
};

inline void check_conversion_shapes(const MjlsModel& model, int N, int T, int m, int n_u,
                                    int n_y, const char* who) {
  require_dims(N == model.N && m == model.m() && n_u == model.n_u && n_y == model.n_y,
               "policy/model shape mismatch in conversion");
  if (T != model.N - 1)
    throw invalid_argument_error(std::string(who) +
                                 ": exact conversion needs full-memory histories (T = N - 1); "
                                 "shorter memory makes the classes differ");
}

}  // namespace detail

inline PobPolicy ob_to_pob(const MjlsModel& model, const ObPolicy& ob) {
  model.validate();
  detail::check_conversion_shapes(model, ob.N, ob.T, ob.m, ob.n_u, ob.n_y, "ob_to_pob");
  const int N = model.N, m = model.m(), nx = model.n_x, nu = model.n_u, ny = model.n_y;
  PobPolicy pob = PobPolicy::zeros(N, N - 1, m, nu, ny);

  // xh[t][prefix of length t]: xhat_t as an affine function of (v_0..v_{t-1}).
  std::vector<std::vector<detail::AffineInObs>> xh(static_cast<std::size_t>(N) + 1);
  xh[0] = {detail::AffineInObs{Vec::Zero(nx), {}}};
  for (int t = 0; t < N; ++t) {
    const auto prefixes = enumerate_paths(m, t + 1);
    xh[static_cast<std::size_t>(t) + 1].resize(prefixes.size());
    for (const Hist& p : prefixes) {
      const int idx = static_cast<int>(history_index(p, m));
      Vec hc = ob.g[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)];
      std::vector<Mat> HK(static_cast<std::size_t>(t) + 1, Mat::Zero(nu, ny));
      for (int j = 0; j <= t; ++j) {
        const Mat& G = ob.G[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]
                           [static_cast<std::size_t>(idx)];
        const Hist pj(p.begin(), p.begin() + j);
        const auto& xj = xh[static_cast<std::size_t>(j)][history_index(pj, m)];
        const Mat& Cj = model.at(j, p[static_cast<std::size_t>(j)]).C;
        hc += G * (Cj * xj.c);
        HK[static_cast<std::size_t>(j)] += G;
        for (int k = 0; k < j; ++k)
          HK[static_cast<std::size_t>(k)] += G * (Cj * xj.K[static_cast<std::size_t>(k)]);
      }
      pob.h[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)] = hc;
      for (int j = 0; j <= t; ++j)
        pob.H[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]
             [static_cast<std::size_t>(idx)] = HK[static_cast<std::size_t>(j)];

      const Hist pt(p.begin(), p.begin() + t);
      const auto& xt = xh[static_cast<std::size_t>(t)][history_index(pt, m)];
      const auto& mm = model.at(t, p[static_cast<std::size_t>(t)]);
      detail::AffineInObs nxt;
      nxt.c = mm.A * xt.c + mm.B * hc;
      nxt.K.resize(static_cast<std::size_t>(t) + 1);
      for (int k = 0; k <= t; ++k) {
        Mat K = mm.B * HK[static_cast<std::size_t>(k)];
        if (k < t) K += mm.A * xt.K[static_cast<std::size_t>(k)];
        nxt.K[static_cast<std::size_t>(k)] = K;
      }
      xh[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(idx)] = std::move(nxt);
    }
  }
  return pob;
}

inline ObPolicy pob_to_ob(const MjlsModel& model, const PobPolicy& pob) {
  model.validate();
  detail::check_conversion_shapes(model, pob.N, pob.T, pob.m, pob.n_u, pob.n_y, "pob_to_ob");
  const int N = model.N, m = model.m(), nx = model.n_x, nu = model.n_u, ny = model.n_y;
  ObPolicy ob = ObPolicy::zeros(N, N - 1, m, nu, ny);

  // xh[t][prefix]: xhat_t as an affine function of (y_0..y_{t-1}) this time.
  std::vector<std::vector<detail::AffineInObs>> xh(static_cast<std::size_t>(N) + 1);
  xh[0] = {detail::AffineInObs{Vec::Zero(nx), {}}};
  for (int t = 0; t < N; ++t) {
    const auto prefixes = enumerate_paths(m, t + 1);
    xh[static_cast<std::size_t>(t) + 1].resize(prefixes.size());
    for (const Hist& p : prefixes) {
      const int idx = static_cast<int>(history_index(p, m));
      Vec gc = pob.h[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)];
      std::vector<Mat> GK(static_cast<std::size_t>(t) + 1, Mat::Zero(nu, ny));
      for (int j = 0; j <= t; ++j) {
        const Mat& H = pob.H[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]
                           [static_cast<std::size_t>(idx)];
        const Hist pj(p.begin(), p.begin() + j);
        const auto& xj = xh[static_cast<std::size_t>(j)][history_index(pj, m)];
        const Mat& Cj = model.at(j, p[static_cast<std::size_t>(j)]).C;
        gc -= H * (Cj * xj.c);
        GK[static_cast<std::size_t>(j)] += H;
        for (int k = 0; k < j; ++k)
          GK[static_cast<std::size_t>(k)] -= H * (Cj * xj.K[static_cast<std::size_t>(k)]);
      }
      ob.g[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)] = gc;
      for (int j = 0; j <= t; ++j)
        ob.G[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]
            [static_cast<std::size_t>(idx)] = GK[static_cast<std::size_t>(j)];

      const Hist pt(p.begin(), p.begin() + t);
      const auto& xt = xh[static_cast<std::size_t>(t)][history_index(pt, m)];
      const auto& mm = model.at(t, p[static_cast<std::size_t>(t)]);
      detail::AffineInObs nxt;
      nxt.c = mm.A * xt.c + mm.B * gc;
      nxt.K.resize(static_cast<std::size_t>(t) + 1);
      for (int k = 0; k <= t; ++k) {
        Mat K = mm.B * GK[static_cast<std::size_t>(k)];
        if (k < t) K += mm.A * xt.K[static_cast<std::size_t>(k)];
        nxt.K[static_cast<std::size_t>(k)] = K;
      }
      xh[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(idx)] = std::move(nxt);
    }
  }
  return ob;
}

}  // namespace robust_pob
