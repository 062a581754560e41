// Two-asset rebalancing example: a risk-free asset and a market-dependent one
// over three stages, with the market regime switching between a bad and a good
// state. Positions compound by the baseline returns; the gap between actual
// and baseline returns becomes an additive disturbance whose magnitude is
// bounded per asset and stage, which is exactly an axis-aligned ellitope.
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/sdp.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace robust_pob {

struct PortfolioData {
  int N = 3;
  int n_assets = 2;
  Vec r_bad = (Vec(2) << 0.02, 0.01).finished();   // baseline returns, bad regime
  Vec r_good = (Vec(2) << 0.02, 0.05).finished();  // baseline returns, good regime
  Vec gamma = (Vec(2) << 0.001, 0.005).finished(); // per-asset return uncertainty
  Vec alpha = (Vec(2) << 10.0, 10.0).finished();   // per-trade size bound
  Vec x_tar = (Vec(2) << 100.0, 100.0).finished(); // desired allocation
  Vec pi = (Vec(2) << 0.1, 0.9).finished();
  Mat P = (Mat(2, 2) << 0.2, 0.3, 0.8, 0.7).finished();  // column-stochastic
  double rho = 0.3;                                       // income deviation budget
  std::vector<double> mu = {5.0, 10.0, 20.0};             // allocation drift budgets
};

namespace detail {

// sum_{j=0}^{k-1} M^j, stable through M = 1.
inline double geometric_sum(double M, int k) {
  if (std::abs(M - 1.0) < 1e-12) return static_cast<double>(k);
  return (std::pow(M, k) - 1.0) / (M - 1.0);
}

}  // namespace detail

inline MjlsModel build_portfolio_model(const PortfolioData& data = PortfolioData{}) {
  const int n = data.n_assets;
  MjlsModel md;
  md.N = data.N;
  md.n_x = n;
  md.n_u = n;
  md.n_d = n;
  md.n_e = 0;
  md.n_y = n;
  md.chain.m = 2;
  md.chain.pi = data.pi;
  md.chain.P = data.P;
  md.Sigma0 = Mat::Zero(n, n);
  md.known_initial_state = data.x_tar;  // the portfolio starts balanced
  md.mats.resize(static_cast<std::size_t>(data.N));
  for (int t = 0; t < data.N; ++t) {
    md.mats[static_cast<std::size_t>(t)].resize(2);
    for (int mode = 0; mode < 2; ++mode) {
      const Vec& r = mode == 0 ? data.r_bad : data.r_good;
      ModeMatrices mm;
      mm.A = Mat((Vec::Ones(n) + r).asDiagonal());
      mm.B = mm.A;  // trades settle before the period's growth
      mm.Bd = Mat::Identity(n, n);
      mm.Bs = Mat::Zero(n, 0);
      mm.C = Mat::Identity(n, n);  // positions are observed directly
      mm.Dd = Mat::Zero(n, n);
      mm.Ds = Mat::Zero(n, 0);
      md.mats[static_cast<std::size_t>(t)][static_cast<std::size_t>(mode)] = mm;
    }
  }
  md.validate();
  return md;
}

// Worst-case squared disturbance magnitude per asset and stage. Positions can
// grow by at most the best-regime factor M_i each stage and each trade adds at
// most alpha_i, so |x_t,i + u_t,i| has an explicit bound; scaling by gamma_i
// bounds the return-gap disturbance.
inline double portfolio_disturbance_budget(const PortfolioData& data, int t, int asset) {
  const double Mi = 1.0 + std::max(data.r_bad[asset], data.r_good[asset]);
  const double reach = std::pow(Mi, t) * std::abs(data.x_tar[asset]) +
                       detail::geometric_sum(Mi, t + 1) * data.alpha[asset] + data.alpha[asset];
  return data.gamma[asset] * data.gamma[asset] * reach * reach;
}

inline Ellitope build_portfolio_ellitope(const PortfolioData& data = PortfolioData{}) {
  const int n = data.n_assets;
  const int dim = data.N * n;  // x_0 is pinned, so zeta carries only the d blocks
  Ellitope ell;
  for (int t = 0; t < data.N; ++t)
    for (int asset = 0; asset < n; ++asset) {
      Mat Q = Mat::Zero(dim, dim);
      Q(t * n + asset, t * n + asset) = 1.0 / portfolio_disturbance_budget(data, t, asset);
      ell.Qs.push_back(Q);
    }
  ell.validate();
  return ell;
}

// Expected cumulative income of the rebalancing strategy that undoes baseline
// growth each stage (u_t,i = -rbar_i/(1+rbar_i) x_tar,i keeps x_t = x_tar when
// the actual returns equal the baseline ones). Sets the income target.
inline double naive_rebalance_income(const PortfolioData& data = PortfolioData{}) {
  MarkovChain chain;
  chain.m = 2;
  chain.pi = data.pi;
  chain.P = data.P;
  chain.validate();
  double total = 0.0;
  for (int t = 0; t < data.N; ++t) {
    const Vec marg = chain.marginal(t);
    for (int mode = 0; mode < 2; ++mode) {
      const Vec& r = mode == 0 ? data.r_bad : data.r_good;
      for (int asset = 0; asset < data.n_assets; ++asset)
        total += marg[mode] * (-r[asset] / (1.0 + r[asset])) * data.x_tar[asset];
    }
  }
  return total;
}

// The income spec E[(U_tar - sum_t <1, u_t>)^2] <= rho and the per-stage
// allocation specs E[||x_t - x_tar||^2] <= mu_t, written on w = (x, u).
inline SpecSet build_portfolio_specs(const PortfolioData& data = PortfolioData{}) {
  const MjlsModel md = build_portfolio_model(data);
  const double u_tar = naive_rebalance_income(data);
  SpecSet specs;
  specs.ellitope = build_portfolio_ellitope(data);

  const int n_w = md.n_w();
  Vec ones_u = Vec::Zero(n_w);
  ones_u.tail(md.N * md.n_u).setOnes();
  QuadSpec income;
  income.A = ones_u * ones_u.transpose();
  income.beta = -u_tar * ones_u;
  income.gamma = data.rho - u_tar * u_tar;
  income.label = "income";
  specs.avg_quad.push_back(income);

  for (int t = 1; t <= md.N; ++t) {
    QuadSpec drift;
    drift.A = Mat::Zero(n_w, n_w);
    drift.A.block((t - 1) * md.n_x, (t - 1) * md.n_x, md.n_x, md.n_x).setIdentity();
    drift.beta = Vec::Zero(n_w);
    drift.beta.segment((t - 1) * md.n_x, md.n_x) = -data.x_tar;
    drift.gamma = data.mu[static_cast<std::size_t>(t - 1)] - data.x_tar.squaredNorm();
    drift.label = "allocation drift t=" + std::to_string(t);
    specs.avg_quad.push_back(drift);
  }
  return specs;
}

}  // namespace robust_pob
