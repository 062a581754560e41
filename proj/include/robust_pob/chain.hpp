// Markov chain over switching modes: path probabilities, marginals,
// truncated switching histories and their lexicographic indexing.
//
// Modes are 0-based integers in [0, m). The transition matrix follows the
// column-stochastic convention P(next, current), so a path theta_0..theta_{k-1}
// has probability pi[theta_0] * prod_t P(theta_{t+1}, theta_t).
#pragma once

#include "robust_pob/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace robust_pob {

using Hist = std::vector<int>;  // mode sequence, oldest entry first

struct MarkovChain {
  int m = 1;
  Vec pi;  // length m
  Mat P;   // m x m, column-stochastic

  void validate() const {
    require(m >= 1, "MarkovChain: m must be >= 1");
    require_dims(pi.size() == m, "MarkovChain: pi length != m");
    require_dims(P.rows() == m && P.cols() == m, "MarkovChain: P must be m x m");
    require(pi.minCoeff() >= -1e-12, "MarkovChain: pi has a negative entry");
    require(std::abs(pi.sum() - 1.0) <= 1e-12, "MarkovChain: pi does not sum to 1");
    require(P.minCoeff() >= -1e-12, "MarkovChain: P has a negative entry");
    for (int j = 0; j < m; ++j)
      require(std::abs(P.col(j).sum() - 1.0) <= 1e-12, "MarkovChain: column of P does not sum to 1");
  }

  // Marginal distribution of theta_t.
  Vec marginal(int t) const {
    Vec mu = pi;
    for (int s = 0; s < t; ++s) mu = P * mu;
    return mu;
  }
};

inline MarkovChain single_mode_chain() {
  MarkovChain c;
  c.m = 1;
  c.pi = Vec::Ones(1);
  c.P = Mat::Ones(1, 1);
  return c;
}

inline double path_probability(const MarkovChain& chain, const Hist& path) {
  require(!path.empty(), "path_probability: empty path");
  for (int mode : path)
    require(mode >= 0 && mode < chain.m, "path_probability: mode out of range");
  double p = chain.pi[path[0]];
  for (std::size_t t = 0; t + 1 < path.size(); ++t) p *= chain.P(path[t + 1], path[t]);
  return p;
}

// All m^k mode sequences of length k in lexicographic order (early position
// most significant, mode 0 < 1 < ... < m-1).
inline std::vector<Hist> enumerate_paths(int m, int k) {
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) {
    total *= static_cast<std::size_t>(m);
    require(total <= 100'000'000u, "enumerate_paths: m^k too large");
  }
  std::vector<Hist> out;
  out.reserve(total);
  Hist cur(k, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    out.push_back(cur);
    for (int pos = k - 1; pos >= 0; --pos) {
      if (++cur[pos] < m) break;
      cur[pos] = 0;
    }
  }
  return out;
}

// Truncated history theta_{[t,T]}: the last min(T+1, t+1) modes of the path
// prefix ending at t, oldest first.
inline Hist truncated_history(const Hist& path, int t, int T) {
  int len = std::min(T + 1, t + 1);
  return Hist(path.begin() + (t + 1 - len), path.begin() + (t + 1));
}

inline int history_length(int t, int T) { return std::min(T + 1, t + 1); }

// Lexicographic rank of a history among all m^len sequences of its length.
inline std::size_t history_index(const Hist& h, int m) {
  std::size_t idx = 0;
  for (int mode : h) idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(mode);
  return idx;
}

inline std::size_t count_histories(int m, int len) {
  std::size_t n = 1;
  for (int i = 0; i < len; ++i) n *= static_cast<std::size_t>(m);
  return n;
}

}  // namespace robust_pob
