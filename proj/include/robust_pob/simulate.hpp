// Monte Carlo and exact evaluation of closed-loop behaviour. The rollout here
// advances the physical recursion step by step, deliberately sharing no code
// with the stacked-operator algebra it is tested against.
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/policy.hpp"
#include "robust_pob/rng.hpp"
#include "robust_pob/stacked.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace robust_pob {

// Worker cap: ROBUST_POB_THREADS if set, hardware concurrency otherwise.
inline int thread_count() {
  if (const char* env = std::getenv("ROBUST_POB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return std::min(v, 256);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

// Runs f(i) for i in [0, n): scenario i always sees the same inputs no matter
// how the range is split, so results are reproducible across thread counts.
template <typename F>
inline void parallel_for(std::int64_t n, F&& f) {
  const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int wkr = 0; wkr < workers; ++wkr) {
    pool.emplace_back([&, wkr] {
      for (std::int64_t i = wkr; i < n; i += workers) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline Hist sample_path(const MarkovChain& chain, RandomStream& rs, int N) {
  Hist path(static_cast<std::size_t>(N));
  auto draw = [&](const Vec& p) {
    const double u = rs.uniform01();
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return static_cast<int>(p.size()) - 1;
  };
  path[0] = draw(chain.pi);
  for (int t = 1; t < N; ++t) path[static_cast<std::size_t>(t)] = draw(chain.P.col(path[t - 1]));
  return path;
}

// eps = (s_0, e_0, ..., e_{N-1}) with s_0 ~ N(0, Sigma_0), e_t ~ N(0, I).
inline Vec draw_eps(const MjlsModel& model, RandomStream& rs) {
  Vec eps(model.n_eps());
  eps.head(model.n_x) = psd_sqrt(model.Sigma0) * rs.gaussian_vec(model.n_x);
  if (model.N * model.n_e > 0)
    eps.tail(model.N * model.n_e) = rs.gaussian_vec(model.N * model.n_e);
  return eps;
}

// Draws from an ellitope by direction (whitened by the aggregate shape) and
// radial scaling onto the surface; interior points shrink by U^(1/n) so mass
// does not pile up near the center.
struct EllitopeSampler {
  Ellitope ell;
  Mat Wi;  // (sum_i Q_i)^(-1/2)

  explicit EllitopeSampler(Ellitope e) : ell(std::move(e)) {
    ell.validate();
    Mat Qsum = Mat::Zero(ell.dim(), ell.dim());
    for (const Mat& Q : ell.Qs) Qsum += Q;
    Wi = psd_sqrt(Qsum).inverse();
  }

  Vec boundary(RandomStream& rs) const {
    const Vec d = Wi * rs.gaussian_vec(ell.dim());
    double q = 0.0;
    for (const Mat& Q : ell.Qs) q = std::max(q, d.dot(Q * d));
    if (q <= 1e-300) return d;
    return d / std::sqrt(q);
  }

  Vec interior(RandomStream& rs) const {
    return boundary(rs) * std::pow(rs.uniform01(), 1.0 / ell.dim());
  }
};

struct Rollout {
  Hist path;
  Vec w;  // (x_1..x_N, u_0..u_{N-1})
  Vec y;  // N n_y
  Vec v;  // purified outputs, N n_y
};

// Closed-loop run of the physical recursion under a purified-output policy.
// zeta is the reduced disturbance (per the model's pinning convention).
inline Rollout rollout_pob(const MjlsModel& model, const PobPolicy& policy, const Hist& path,
                           const Vec& zeta, const Vec& eps) {
  require_dims(static_cast<int>(path.size()) == model.N, "rollout_pob: path length");
  require_dims(eps.size() == model.n_eps(), "rollout_pob: eps length");
  const Vec full = expand_zeta(model, zeta);
  const int N = model.N, nx = model.n_x, nu = model.n_u, nd = model.n_d, ne = model.n_e,
            ny = model.n_y;

  Rollout out;
  out.path = path;
  out.w = Vec::Zero(model.n_w());
  out.y = Vec::Zero(N * ny);
  out.v = Vec::Zero(N * ny);

  Vec x = full.head(nx) + eps.head(nx);
  Vec xh = Vec::Zero(nx);  // purified copy, driven by the same controls
  std::vector<Vec> vs;
  for (int t = 0; t < N; ++t) {
    const auto& mm = model.at(t, path[static_cast<std::size_t>(t)]);
    const Vec d = full.segment(nx + t * nd, nd);
    const Vec e = ne > 0 ? Vec(eps.segment(nx + t * ne, ne)) : Vec(Vec::Zero(0));
    Vec y = mm.C * x + mm.Dd * d;
    if (ne > 0) y += mm.Ds * e;
    const Vec v = y - mm.C * xh;
    vs.push_back(v);
    out.y.segment(t * ny, ny) = y;
    out.v.segment(t * ny, ny) = v;

    const Hist h = truncated_history(path, t, policy.T);
    Vec u = policy.h_at(t, h);
    for (int j = 0; j <= t; ++j) u += policy.H_at(t, j, h) * vs[static_cast<std::size_t>(j)];
    out.w.segment(N * nx + t * nu, nu) = u;

    Vec xn = mm.A * x + mm.B * u + mm.Bd * d;
    if (ne > 0) xn += mm.Bs * e;
    x = xn;
    xh = mm.A * xh + mm.B * u;
    out.w.segment(t * nx, nx) = x;
  }
  return out;
}

// Same run under an output-feedback policy u_t = g_t + sum_j G_j^t y_j.
inline Rollout rollout_ob(const MjlsModel& model, const ObPolicy& policy, const Hist& path,
                          const Vec& zeta, const Vec& eps) {
  require_dims(static_cast<int>(path.size()) == model.N, "rollout_ob: path length");
  require_dims(eps.size() == model.n_eps(), "rollout_ob: eps length");
  const Vec full = expand_zeta(model, zeta);
  const int N = model.N, nx = model.n_x, nu = model.n_u, nd = model.n_d, ne = model.n_e,
            ny = model.n_y;

  Rollout out;
  out.path = path;
  out.w = Vec::Zero(model.n_w());
  out.y = Vec::Zero(N * ny);
  out.v = Vec::Zero(N * ny);

  Vec x = full.head(nx) + eps.head(nx);
  Vec xh = Vec::Zero(nx);
  std::vector<Vec> ys;
  for (int t = 0; t < N; ++t) {
    const auto& mm = model.at(t, path[static_cast<std::size_t>(t)]);
    const Vec d = full.segment(nx + t * nd, nd);
    const Vec e = ne > 0 ? Vec(eps.segment(nx + t * ne, ne)) : Vec(Vec::Zero(0));
    Vec y = mm.C * x + mm.Dd * d;
    if (ne > 0) y += mm.Ds * e;
    ys.push_back(y);
    out.y.segment(t * ny, ny) = y;
    out.v.segment(t * ny, ny) = y - mm.C * xh;

    const Hist h = truncated_history(path, t, policy.T);
    Vec u = policy.g_at(t, h);
    for (int j = 0; j <= t; ++j) u += policy.G_at(t, j, h) * ys[static_cast<std::size_t>(j)];
    out.w.segment(N * nx + t * nu, nu) = u;

    Vec xn = mm.A * x + mm.B * u + mm.Bd * d;
    if (ne > 0) xn += mm.Bs * e;
    x = xn;
    xh = mm.A * xh + mm.B * u;
    out.w.segment(t * nx, nx) = x;
  }
  return out;
}

// E[w^T A w + 2 beta^T w] at fixed zeta: enumerate switching paths and use the
// Gaussian identity E[q(w)] = q(mu) + tr(A Cov) on each one.
inline double exact_spec_value(const MjlsModel& model, const PobPolicy& policy, const Vec& zeta,
                               const Mat& A, const Vec& beta) {
  double total = 1.0;
  for (int t = 0; t < model.N; ++t) total *= model.m();
  if (total > 1e6)
    throw size_guard_error("exact_spec_value: too many switching paths to enumerate");
  const Vec full = expand_zeta(model, zeta);
  const Mat Sigma_eps = [&] {
    Mat S = Mat::Zero(model.n_eps(), model.n_eps());
    S.topLeftCorner(model.n_x, model.n_x) = model.Sigma0;
    S.bottomRightCorner(model.N * model.n_e, model.N * model.n_e).setIdentity();
    return S;
  }();
  double acc = 0.0;
  for (const Hist& path : enumerate_paths(model.m(), model.N)) {
    const double pr = path_probability(model.chain, path);
    if (pr == 0.0) continue;
    const StackedOperators S = build_stacked(model, path, policy);
    const TrajectoryMaps maps = trajectory_affine_maps(S);
    const Vec mu = maps.b + maps.Bd_cal * full;
    const double mean_part = mu.dot(A * mu) + 2.0 * beta.dot(mu);
    const double noise_part = (maps.Bs_cal.transpose() * A * maps.Bs_cal * Sigma_eps).trace();
    acc += pr * (mean_part + noise_part);
  }
  return acc;
}

// Mean and covariance of w at fixed zeta for a single-mode model.
struct WMoments {
  Vec mean;
  Mat cov;
};

inline WMoments closed_form_moments(const MjlsModel& model, const PobPolicy& policy,
                                    const Vec& zeta) {
  require(model.m() == 1, "closed_form_moments: single-mode models only");
  const Hist path(static_cast<std::size_t>(model.N), 0);
  const StackedOperators S = build_stacked(model, path, policy);
  const TrajectoryMaps maps = trajectory_affine_maps(S);
  Mat Sigma_eps = Mat::Zero(model.n_eps(), model.n_eps());
  Sigma_eps.topLeftCorner(model.n_x, model.n_x) = model.Sigma0;
  Sigma_eps.bottomRightCorner(model.N * model.n_e, model.N * model.n_e).setIdentity();
  WMoments mo;
  mo.mean = maps.b + maps.Bd_cal * expand_zeta(model, zeta);
  mo.cov = maps.Bs_cal * Sigma_eps * maps.Bs_cal.transpose();
  return mo;
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t n = 0;
  std::vector<double> values;  // per scenario, in scenario order
  std::vector<Hist> paths;
};

// Monte Carlo mean of w^T A w + 2 beta^T w at fixed zeta. Scenario i draws
// from RandomStream(seed, i); the reduction runs in index order so the result
// does not depend on the thread count.
inline McEstimate mc_spec_value(const MjlsModel& model, const PobPolicy& policy, const Vec& zeta,
                                const Mat& A, const Vec& beta, std::int64_t n_scenarios,
                                std::uint64_t seed, bool keep_paths = false) {
  McEstimate est;
  est.n = n_scenarios;
  est.values.assign(static_cast<std::size_t>(n_scenarios), 0.0);
  if (keep_paths) est.paths.assign(static_cast<std::size_t>(n_scenarios), Hist{});
  parallel_for(n_scenarios, [&](std::int64_t i) {
    RandomStream rs(seed, static_cast<std::uint64_t>(i));
    const Hist path = sample_path(model.chain, rs, model.N);
    const Vec eps = draw_eps(model, rs);
    const Rollout r = rollout_pob(model, policy, path, zeta, eps);
    est.values[static_cast<std::size_t>(i)] = r.w.dot(A * r.w) + 2.0 * beta.dot(r.w);
    if (keep_paths) est.paths[static_cast<std::size_t>(i)] = path;
  });
  double sum = 0.0;
  for (double v : est.values) sum += v;
  est.mean = sum / static_cast<double>(n_scenarios);
  double ss = 0.0;
  for (double v : est.values) ss += (v - est.mean) * (v - est.mean);
  if (n_scenarios > 1)
    est.std_error = std::sqrt(ss / static_cast<double>(n_scenarios - 1) /
                              static_cast<double>(n_scenarios));
  return est;
}

}  // namespace robust_pob
