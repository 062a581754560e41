// Expectations of long matrix products over a Markov chain.
//
// expected_product_linear computes E[f_{N-1} ... f_1 f_0] where every factor
// depends on its own mode theta_t except (optionally) one designated factor at
// index tau that depends on the truncated history theta_{[tau,T]}. The cost is
// O(N m) matrix products plus one pass over the (sparse) history table, instead
// of the m^N path sum. expected_product_quadratic does the same for
// E[(q_{N-1}...q_0)^T S (f_{N-1}...f_0)] with a shared designated index.
//
// brute_force_expectation is the exhaustive-enumeration oracle used to validate
// the recursions; pinned_expected_quadratic is the restriction of the quadratic
// form to paths with individually pinned positions (used by the assembly of the
// Gram coefficients, where two history indicators at different times appear).
#pragma once

#include "robust_pob/chain.hpp"
#include "robust_pob/common.hpp"

#include <map>
#include <optional>
#include <vector>

namespace robust_pob {

struct FactorSequence {
  int N = 0;
  // single[t][mode]; the entry at t == tau is ignored when a history table is set.
  std::vector<std::vector<Mat>> single;
  int tau = -1;  // designated history index; -1 when every factor is single-mode
  int T = 0;     // switching memory of the history factor
  std::map<Hist, Mat> history;  // sparse: missing history means the zero matrix

  bool has_history() const { return tau >= 0; }

  static FactorSequence all_single(std::vector<std::vector<Mat>> by_time_mode) {
    FactorSequence s;
    s.N = static_cast<int>(by_time_mode.size());
    s.single = std::move(by_time_mode);
    return s;
  }

  static FactorSequence with_history(std::vector<std::vector<Mat>> by_time_mode, int tau, int T,
                                     std::map<Hist, Mat> table) {
    FactorSequence s = all_single(std::move(by_time_mode));
    require(tau >= 0 && tau < s.N, "FactorSequence: tau out of range");
    require(T >= 0, "FactorSequence: negative memory");
    s.tau = tau;
    s.T = T;
    s.history = std::move(table);
    return s;
  }

  Eigen::Index rows_at(int t) const {
    if (t == tau && !history.empty()) return history.begin()->second.rows();
    return single[t].empty() ? 0 : single[t][0].rows();
  }
  Eigen::Index cols_at(int t) const {
    if (t == tau && !history.empty()) return history.begin()->second.cols();
    return single[t].empty() ? 0 : single[t][0].cols();
  }

  void validate(const MarkovChain& chain) const {
    require(N >= 1, "FactorSequence: empty sequence");
    require_dims(static_cast<int>(single.size()) == N, "FactorSequence: wrong length");
    for (int t = 0; t < N; ++t) {
      if (t == tau) continue;
      require_dims(static_cast<int>(single[t].size()) == chain.m,
                   "FactorSequence: missing per-mode factors");
      for (const Mat& f : single[t])
        require_dims(f.rows() == rows_at(t) && f.cols() == cols_at(t),
                     "FactorSequence: inconsistent factor shapes at a time step");
    }
    if (has_history()) {
      require(!history.empty() || !single[tau].empty(),
              "FactorSequence: history factor needs a table or fallback dims");
      const int len = history_length(tau, T);
      for (const auto& [h, f] : history) {
        require_dims(static_cast<int>(h.size()) == len, "FactorSequence: history key length");
        for (int mode : h) require(mode >= 0 && mode < chain.m, "FactorSequence: bad history mode");
        require_dims(f.rows() == rows_at(tau) && f.cols() == cols_at(tau),
                     "FactorSequence: inconsistent history entry shapes");
      }
    }
    for (int t = 0; t + 1 < N; ++t)
      require_dims(cols_at(t + 1) == rows_at(t), "FactorSequence: factors do not conform");
  }
};

namespace detail {

// Looks up the factor at the designated index for a given history; sequences
// without a genuine history factor fall back to the single-mode factor of the
// history's last element (so a plain chain can be paired with a
// history-dependent one in the quadratic recursion).
inline std::optional<Mat> factor_at_history(const FactorSequence& seq, int tau, const Hist& h) {
  if (seq.tau == tau && seq.has_history()) {
    auto it = seq.history.find(h);
    if (it == seq.history.end()) return std::nullopt;
    return it->second;
  }
  return seq.single[tau][h.back()];
}

// Enumerates histories of the block step: the sparse union of explicit table
// keys on either side, or all m^len histories when neither side has a table.
inline std::vector<Hist> block_step_keys(const FactorSequence& a, const FactorSequence& b, int tau,
                                         int len, int m) {
  const bool a_tab = a.tau == tau && a.has_history();
  const bool b_tab = b.tau == tau && b.has_history();
  if (!a_tab && !b_tab) return enumerate_paths(m, len);
  std::vector<Hist> keys;
  if (a_tab && b_tab) {
    for (const auto& [h, f] : a.history)
      if (b.history.count(h)) keys.push_back(h);
  } else if (a_tab) {
    for (const auto& [h, f] : a.history) keys.push_back(h);
  } else {
    for (const auto& [h, f] : b.history) keys.push_back(h);
  }
  return keys;
}

}  // namespace detail

// Backward recursion for E[f_{N-1} ... f_0], polynomial in N and m.
inline Mat expected_product_linear(const MarkovChain& chain, const FactorSequence& seq) {
  chain.validate();
  seq.validate(chain);
  const int N = seq.N, m = chain.m;
  const Eigen::Index out_rows = seq.rows_at(N - 1), out_cols = seq.cols_at(0);

  // g[mode] = E[f_{N-1} ... f_{s+1} | theta_s = mode], maintained from s = N-1 down.
  std::vector<Mat> g(m, Mat::Identity(out_rows, out_rows));
  const int tau = seq.has_history() ? seq.tau : -1;
  const int len = seq.has_history() ? history_length(tau, seq.T) : 1;
  const int lo = seq.has_history() ? tau - len + 1 : 0;

  int s = N - 2;
  const int plain_floor = seq.has_history() ? tau : 0;
  for (; s >= plain_floor; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(out_rows, seq.rows_at(s));
      for (int tp = 0; tp < m; ++tp) acc += chain.P(tp, th) * (g[tp] * seq.single[s + 1][tp]);
      next[th] = std::move(acc);
    }
    g = std::move(next);
  }
  if (!seq.has_history()) {
    Mat out = Mat::Zero(out_rows, out_cols);
    for (int th = 0; th < m; ++th) out += chain.pi[th] * (g[th] * seq.single[0][th]);
    return out;
  }

  // Block step consuming f_tau .. f_lo over the (sparse) history table, including
  // the history-dependent factor itself.
  auto hist_product = [&](const Hist& h) -> std::optional<Mat> {
    auto ft = detail::factor_at_history(seq, tau, h);
    if (!ft) return std::nullopt;
    Mat prod = g[h.back()] * (*ft);
    for (int i = len - 2; i >= 0; --i) prod = prod * seq.single[lo + i][h[i]];
    return prod;
  };
  auto internal_weight = [&](const Hist& h) {
    double w = 1.0;
    for (int i = 0; i + 1 < len; ++i) w *= chain.P(h[i + 1], h[i]);
    return w;
  };

  if (lo == 0) {
    Mat out = Mat::Zero(out_rows, out_cols);
    for (const Hist& h : seq.history.empty() ? enumerate_paths(m, len)
                                             : detail::block_step_keys(seq, seq, tau, len, m)) {
      auto prod = hist_product(h);
      if (!prod) continue;
      out += chain.pi[h[0]] * internal_weight(h) * (*prod);
    }
    return out;
  }

  std::vector<Mat> gblk(m, Mat::Zero(out_rows, seq.rows_at(lo - 1)));
  for (const Hist& h : seq.history.empty() ? enumerate_paths(m, len)
                                           : detail::block_step_keys(seq, seq, tau, len, m)) {
    auto prod = hist_product(h);
    if (!prod) continue;
    const double w = internal_weight(h);
    for (int th = 0; th < m; ++th) gblk[th] += chain.P(h[0], th) * w * (*prod);
  }
  g = std::move(gblk);
  for (s = lo - 2; s >= 0; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(out_rows, seq.rows_at(s));
      for (int tp = 0; tp < m; ++tp) acc += chain.P(tp, th) * (g[tp] * seq.single[s + 1][tp]);
      next[th] = std::move(acc);
    }
    g = std::move(next);
  }
  Mat out = Mat::Zero(out_rows, out_cols);
  for (int th = 0; th < m; ++th) out += chain.pi[th] * (g[th] * seq.single[0][th]);
  return out;
}

// Backward recursion for E[(q_{N-1}...q_0)^T S (f_{N-1}...f_0)] with a shared
// designated index (either side's factor there may be history-dependent).
inline Mat expected_product_quadratic(const MarkovChain& chain, const FactorSequence& left,
                                      const Mat& S, const FactorSequence& right) {
  chain.validate();
  left.validate(chain);
  right.validate(chain);
  require_dims(left.N == right.N, "expected_product_quadratic: length mismatch");
  require_dims(S.rows() == left.rows_at(left.N - 1) && S.cols() == right.rows_at(right.N - 1),
               "expected_product_quadratic: S does not conform");
  if (left.has_history() && right.has_history())
    require(left.tau == right.tau && left.T == right.T,
            "expected_product_quadratic: designated indices must coincide");
  const int N = left.N, m = chain.m;
  const int tau = left.has_history() ? left.tau : (right.has_history() ? right.tau : -1);
  const int T = left.has_history() ? left.T : right.T;
  const int len = tau >= 0 ? history_length(tau, T) : 1;
  const int lo = tau >= 0 ? tau - len + 1 : 0;
  const Eigen::Index out_rows = left.cols_at(0), out_cols = right.cols_at(0);

  // G[mode] = E[q_{s+1}^T ... q_{N-1}^T S f_{N-1} ... f_{s+1} | theta_s = mode].
  std::vector<Mat> G(m, S);
  int s = N - 2;
  const int plain_floor = tau >= 0 ? tau : 0;
  for (; s >= plain_floor; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(left.rows_at(s), right.rows_at(s));
      for (int tp = 0; tp < m; ++tp)
        acc += chain.P(tp, th) *
               (left.single[s + 1][tp].transpose() * G[tp] * right.single[s + 1][tp]);
      next[th] = std::move(acc);
    }
    G = std::move(next);
  }
  if (tau < 0) {
    Mat out = Mat::Zero(out_rows, out_cols);
    for (int th = 0; th < m; ++th)
      out += chain.pi[th] * (left.single[0][th].transpose() * G[th] * right.single[0][th]);
    return out;
  }

  auto hist_triple = [&](const Hist& h) -> std::optional<Mat> {
    auto qt = detail::factor_at_history(left, tau, h);
    auto ft = detail::factor_at_history(right, tau, h);
    if (!qt || !ft) return std::nullopt;
    Mat prod = qt->transpose() * G[h.back()] * (*ft);
    for (int i = len - 2; i >= 0; --i)
      prod = left.single[lo + i][h[i]].transpose() * prod * right.single[lo + i][h[i]];
    return prod;
  };
  auto internal_weight = [&](const Hist& h) {
    double w = 1.0;
    for (int i = 0; i + 1 < len; ++i) w *= chain.P(h[i + 1], h[i]);
    return w;
  };
  const std::vector<Hist> keys = detail::block_step_keys(left, right, tau, len, m);

  if (lo == 0) {
    Mat out = Mat::Zero(out_rows, out_cols);
    for (const Hist& h : keys) {
      auto prod = hist_triple(h);
      if (!prod) continue;
      out += chain.pi[h[0]] * internal_weight(h) * (*prod);
    }
    return out;
  }
  std::vector<Mat> Gblk(m, Mat::Zero(left.rows_at(lo - 1), right.rows_at(lo - 1)));
  for (const Hist& h : keys) {
    auto prod = hist_triple(h);
    if (!prod) continue;
    const double w = internal_weight(h);
    for (int th = 0; th < m; ++th) Gblk[th] += chain.P(h[0], th) * w * (*prod);
  }
  G = std::move(Gblk);
  for (s = lo - 2; s >= 0; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(left.rows_at(s), right.rows_at(s));
      for (int tp = 0; tp < m; ++tp)
        acc += chain.P(tp, th) *
               (left.single[s + 1][tp].transpose() * G[tp] * right.single[s + 1][tp]);
      next[th] = std::move(acc);
    }
    G = std::move(next);
  }
  Mat out = Mat::Zero(out_rows, out_cols);
  for (int th = 0; th < m; ++th)
    out += chain.pi[th] * (left.single[0][th].transpose() * G[th] * right.single[0][th]);
  return out;
}

namespace detail {

inline Mat product_along_path(const FactorSequence& seq, const Hist& path) {
  Mat prod;
  bool first = true;
  for (int t = 0; t < seq.N; ++t) {
    Mat f;
    if (t == seq.tau && seq.has_history()) {
      Hist h = truncated_history(path, t, seq.T);
      auto it = seq.history.find(h);
      f = (it == seq.history.end()) ? Mat::Zero(seq.rows_at(t), seq.cols_at(t)) : it->second;
    } else {
      f = seq.single[t][path[t]];
    }
    prod = first ? f : Mat(f * prod);
    first = false;
  }
  return prod;
}

}  // namespace detail

// Exhaustive path enumeration; the oracle the recursions are tested against.
inline Mat brute_force_expectation(const MarkovChain& chain, const FactorSequence& seq) {
  chain.validate();
  seq.validate(chain);
  double paths = std::pow(static_cast<double>(chain.m), seq.N);
  if (paths > 1e6) throw size_guard_error("brute_force_expectation: m^N exceeds 1e6");
  Mat out = Mat::Zero(seq.rows_at(seq.N - 1), seq.cols_at(0));
  for (const Hist& path : enumerate_paths(chain.m, seq.N))
    out += path_probability(chain, path) * detail::product_along_path(seq, path);
  return out;
}

inline Mat brute_force_expectation(const MarkovChain& chain, const FactorSequence& left,
                                   const Mat& S, const FactorSequence& right) {
  chain.validate();
  left.validate(chain);
  right.validate(chain);
  double paths = std::pow(static_cast<double>(chain.m), left.N);
  if (paths > 1e6) throw size_guard_error("brute_force_expectation: m^N exceeds 1e6");
  Mat out = Mat::Zero(left.cols_at(0), right.cols_at(0));
  for (const Hist& path : enumerate_paths(chain.m, left.N)) {
    Mat ql = detail::product_along_path(left, path);
    Mat fr = detail::product_along_path(right, path);
    out += path_probability(chain, path) * (ql.transpose() * S * fr);
  }
  return out;
}

// E[(q-prod)^T S (f-prod) ; theta_i = pins[i] for all pinned i], all factors
// single-mode. Backward recursion with restricted transition sums; suffix tables
// above `resume_from` can be precomputed once and shared across pin sets.
struct QuadSuffix {
  int s0 = -1;          // tables give E[... | theta_{s0}]
  std::vector<Mat> G;   // size m
};

inline QuadSuffix quad_suffix(const MarkovChain& chain, const std::vector<std::vector<Mat>>& q,
                              const Mat& S, const std::vector<std::vector<Mat>>& f, int s0) {
  const int N = static_cast<int>(f.size()), m = chain.m;
  QuadSuffix out;
  out.s0 = s0;
  out.G.assign(m, S);
  for (int s = N - 2; s >= s0; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(q[s + 1][0].cols(), f[s + 1][0].cols());
      for (int tp = 0; tp < m; ++tp)
        acc += chain.P(tp, th) * (q[s + 1][tp].transpose() * out.G[tp] * f[s + 1][tp]);
      next[th] = std::move(acc);
    }
    out.G = std::move(next);
  }
  return out;
}

inline Mat quad_finish(const MarkovChain& chain, const std::vector<std::vector<Mat>>& q,
                       const std::vector<std::vector<Mat>>& f, const QuadSuffix& suffix,
                       const std::map<int, int>& pins) {
  const int m = chain.m;
  auto allowed = [&](int t, int mode) {
    auto it = pins.find(t);
    return it == pins.end() || it->second == mode;
  };
  std::vector<Mat> G = suffix.G;
  for (int s = suffix.s0 - 1; s >= 0; --s) {
    std::vector<Mat> next(m);
    for (int th = 0; th < m; ++th) {
      Mat acc = Mat::Zero(q[s + 1][0].cols(), f[s + 1][0].cols());
      for (int tp = 0; tp < m; ++tp) {
        if (!allowed(s + 1, tp)) continue;
        acc += chain.P(tp, th) * (q[s + 1][tp].transpose() * G[tp] * f[s + 1][tp]);
      }
      next[th] = std::move(acc);
    }
    G = std::move(next);
  }
  Mat out = Mat::Zero(q[0][0].cols(), f[0][0].cols());
  for (int th = 0; th < m; ++th) {
    if (!allowed(0, th)) continue;
    out += chain.pi[th] * (q[0][th].transpose() * G[th] * f[0][th]);
  }
  return out;
}

inline Mat pinned_expected_quadratic(const MarkovChain& chain,
                                     const std::vector<std::vector<Mat>>& q, const Mat& S,
                                     const std::vector<std::vector<Mat>>& f,
                                     const std::map<int, int>& pins) {
  int s0 = 0;
  for (const auto& [t, mode] : pins) s0 = std::max(s0, t);
  return quad_finish(chain, q, f, quad_suffix(chain, q, S, f, s0), pins);
}

}  // namespace robust_pob
