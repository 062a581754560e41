// Purified-output-based (POB) and output-based (OB) affine policies with
// switching memory T, plus the flattening between policy tables and the
// decision vector chi.
//
// A POB policy is u_t = h_t[theta_{[t,T]}] + sum_{j<=t} H_j^t[theta_{[t,T]}] v_j,
// where theta_{[t,T]} is the truncated history of the last min(T+1, t+1) modes
// and v are the purified outputs. OB policies have the same shape over the raw
// outputs y. Histories are ordered lexicographically (mode 0 < 1 < ... < m-1).
//
// chi layout: t ascending; within t, history ascending by lexicographic rank;
// within (t, hist): the n_u entries of h_t, then H_0^t..H_t^t each row-major.
#pragma once

#include "robust_pob/chain.hpp"
#include "robust_pob/common.hpp"

#include <cstdint>
#include <vector>

namespace robust_pob {

inline std::int64_t dim_of_policy(int N, int T, int m, int n_u, int n_y) {
  require(N >= 1, "dim_of_policy: N must be >= 1");
  require(T >= 0 && T <= N - 1, "dim_of_policy: need 0 <= T <= N-1");
  require(m >= 1, "dim_of_policy: m must be >= 1");
  require(n_u >= 0 && n_y >= 0, "dim_of_policy: dimensions must be nonnegative");
  std::int64_t total = 0;
  std::int64_t hist_count = 1;
  for (int t = 0; t < N; ++t) {
    if (t <= T) hist_count *= m;  // histories grow until the memory window saturates
    total += hist_count * static_cast<std::int64_t>(n_u) * ((t + 1) * static_cast<std::int64_t>(n_y) + 1);
  }
  return total;
}

// One scalar coordinate of chi. j == -1 marks an h-slot (policy offset),
// otherwise the slot addresses entry (a, b) of H_j^t.
struct SlotInfo {
  int t;
  Hist hist;
  int j;  // -1 for h_t
  int a;  // control coordinate in [0, n_u)
  int b;  // output coordinate in [0, n_y), unused for h-slots
};

struct PobPolicy {
  int N = 1, T = 0, m = 1, n_u = 0, n_y = 0;
  // h[t][hist_rank]: Vec(n_u); H[t][j][hist_rank]: Mat(n_u, n_y), 0 <= j <= t.
  std::vector<std::vector<Vec>> h;
  std::vector<std::vector<std::vector<Mat>>> H;

  static PobPolicy zeros(int N, int T, int m, int n_u, int n_y) {
    require(N >= 1 && T >= 0 && T <= N - 1 && m >= 1, "PobPolicy: bad shape");
    PobPolicy p;
    p.N = N;
    p.T = T;
    p.m = m;
    p.n_u = n_u;
    p.n_y = n_y;
    p.h.resize(N);
    p.H.resize(N);
    for (int t = 0; t < N; ++t) {
      std::size_t hists = count_histories(m, history_length(t, T));
      p.h[t].assign(hists, Vec::Zero(n_u));
      p.H[t].resize(t + 1);
      for (int j = 0; j <= t; ++j) p.H[t][j].assign(hists, Mat::Zero(n_u, n_y));
    }
    return p;
  }

  const Vec& h_at(int t, const Hist& hist) const { return h[t][history_index(hist, m)]; }
  const Mat& H_at(int t, int j, const Hist& hist) const { return H[t][j][history_index(hist, m)]; }

  std::int64_t dim() const { return dim_of_policy(N, T, m, n_u, n_y); }

  Vec flatten() const {
    Vec chi(dim());
    Eigen::Index k = 0;
    for (int t = 0; t < N; ++t) {
      for (std::size_t r = 0; r < h[t].size(); ++r) {
        for (int a = 0; a < n_u; ++a) chi[k++] = h[t][r][a];
        for (int j = 0; j <= t; ++j)
          for (int a = 0; a < n_u; ++a)
            for (int b = 0; b < n_y; ++b) chi[k++] = H[t][j][r](a, b);
      }
    }
    return chi;
  }

  static PobPolicy unflatten(const Vec& chi, int N, int T, int m, int n_u, int n_y) {
    PobPolicy p = zeros(N, T, m, n_u, n_y);
    require_dims(chi.size() == p.dim(), "PobPolicy::unflatten: chi length mismatch");
    Eigen::Index k = 0;
    for (int t = 0; t < N; ++t) {
      for (std::size_t r = 0; r < p.h[t].size(); ++r) {
        for (int a = 0; a < n_u; ++a) p.h[t][r][a] = chi[k++];
        for (int j = 0; j <= t; ++j)
          for (int a = 0; a < n_u; ++a)
            for (int b = 0; b < n_y; ++b) p.H[t][j][r](a, b) = chi[k++];
      }
    }
    return p;
  }
};

// Slot descriptors in chi order; the assembly code iterates these.
inline std::vector<SlotInfo> enumerate_slots(int N, int T, int m, int n_u, int n_y) {
  std::vector<SlotInfo> slots;
  slots.reserve(static_cast<std::size_t>(dim_of_policy(N, T, m, n_u, n_y)));
  for (int t = 0; t < N; ++t) {
    for (const Hist& hist : enumerate_paths(m, history_length(t, T))) {
      for (int a = 0; a < n_u; ++a) slots.push_back({t, hist, -1, a, 0});
      for (int j = 0; j <= t; ++j)
        for (int a = 0; a < n_u; ++a)
          for (int b = 0; b < n_y; ++b) slots.push_back({t, hist, j, a, b});
    }
  }
  return slots;
}

// OB policy: same table shape, coefficients act on outputs y instead of v.
struct ObPolicy {
  int N = 1, T = 0, m = 1, n_u = 0, n_y = 0;
  std::vector<std::vector<Vec>> g;
  std::vector<std::vector<std::vector<Mat>>> G;

  static ObPolicy zeros(int N, int T, int m, int n_u, int n_y) {
    PobPolicy p = PobPolicy::zeros(N, T, m, n_u, n_y);
    ObPolicy o;
    o.N = N;
    o.T = T;
    o.m = m;
    o.n_u = n_u;
    o.n_y = n_y;
    o.g = std::move(p.h);
    o.G = std::move(p.H);
    return o;
  }

  const Vec& g_at(int t, const Hist& hist) const { return g[t][history_index(hist, m)]; }
  const Mat& G_at(int t, int j, const Hist& hist) const { return G[t][j][history_index(hist, m)]; }
};

}  // namespace robust_pob
