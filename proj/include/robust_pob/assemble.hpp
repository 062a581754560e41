// Assembly of the averaged trajectory moments as explicit functions of the
// policy parameter vector chi:
//
//   M(chi) = E[(F + G) zeta_e-map]          (affine in chi, n_w x (1 + n_zeta))
//   V(chi) = E[(F+G)^T A (F+G)] + noise     (quadratic in chi, PSD curvature)
//
// The curvature of V is stored as the Gram matrix T over (slot, zeta_e-coord)
// pairs, so that X >= V(chi) admits a single Schur complement with the factor
// R of T. Two independent routes are provided: the chain route built on the
// Markov product recursions (works for any m, N) and a per-path enumeration
// route guarded to m^N <= 64, used to cross-check the former.
#pragma once

#include "robust_pob/chains.hpp"
#include "robust_pob/expectation.hpp"
#include "robust_pob/policy.hpp"
#include "robust_pob/stacked.hpp"

#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

namespace robust_pob {

// Maps a slot (t, history rank, j, a, b) to its position in the canonical chi
// ordering used by PobPolicy::flatten and enumerate_slots.
struct SlotIndexer {
  int N = 0, T = 0, m = 0, n_u = 0, n_y = 0;
  std::vector<std::int64_t> t_base;
  std::int64_t total = 0;

  SlotIndexer(int N_, int T_, int m_, int nu, int ny)
      : N(N_), T(T_), m(m_), n_u(nu), n_y(ny) {
    t_base.assign(N, 0);
    for (int t = 0; t < N; ++t) {
      t_base[t] = total;
      total += count_histories(m, history_length(t, T)) * per_hist(t);
    }
  }
  std::int64_t per_hist(int t) const {
    return static_cast<std::int64_t>(n_u) * ((t + 1) * n_y + 1);
  }
  std::int64_t index(int t, std::int64_t hist_rank, int j, int a, int b) const {
    const std::int64_t off =
        (j < 0) ? a
                : n_u + static_cast<std::int64_t>(j) * n_u * n_y +
                      static_cast<std::int64_t>(a) * n_y + b;
    return t_base[t] + hist_rank * per_hist(t) + off;
  }
};

struct AffineMapM {
  int n_w = 0;
  int n_cols = 0;  // 1 + n_zeta, post-pinning
  Mat M0;
  std::vector<Mat> Mk;

  Mat eval(const Vec& chi) const {
    require_dims(chi.size() == static_cast<Eigen::Index>(Mk.size()),
                 "AffineMapM::eval: chi length mismatch");
    Mat M = M0;
    for (std::size_t k = 0; k < Mk.size(); ++k)
      if (chi[static_cast<Eigen::Index>(k)] != 0.0)
        M += chi[static_cast<Eigen::Index>(k)] * Mk[k];
    return M;
  }
};

struct QuadraticFormV {
  int n_cols = 0;           // 1 + n_zeta, post-pinning
  std::int64_t K = 0;       // number of chi slots
  Mat V0;                   // n_cols x n_cols
  std::vector<Mat> Lk;      // per slot, symmetric
  Mat Tgram;                // (K n_cols) x (K n_cols), PSD
  Mat R;                    // r x (K n_cols), R^T R = Tgram up to clipping

  // Quadratic part evaluated exactly from the Gram matrix.
  Mat gram_quadratic(const Vec& chi) const {
    const int nc = n_cols;
    Mat acc = Mat::Zero(nc, Tgram.cols());
    for (std::int64_t k = 0; k < K; ++k)
      if (chi[k] != 0.0) acc += chi[k] * Tgram.middleRows(k * nc, nc);
    Mat quad = Mat::Zero(nc, nc);
    for (std::int64_t l = 0; l < K; ++l)
      if (chi[l] != 0.0) quad += chi[l] * acc.middleCols(l * nc, nc);
    return quad;
  }
  Mat eval(const Vec& chi) const {
    require_dims(chi.size() == K, "QuadraticFormV::eval: chi length mismatch");
    Mat V = V0;
    for (std::int64_t k = 0; k < K; ++k)
      if (chi[k] != 0.0) V += chi[k] * Lk[static_cast<std::size_t>(k)];
    V += gram_quadratic(chi);
    return V;
  }
  // Z(chi) with Z^T Z equal to the quadratic part (up to the spectral clip of
  // psd_factor); the Schur rendering of X >= V(chi) uses this block.
  Mat Z(const Vec& chi) const {
    const int nc = n_cols;
    Mat Zc = Mat::Zero(R.rows(), nc);
    for (std::int64_t k = 0; k < K; ++k)
      if (chi[k] != 0.0) Zc += chi[k] * R.middleCols(k * nc, nc);
    return Zc;
  }
};

// Sigma_eps = blkdiag(Sigma_0, I_{N n_e}), the covariance of eps = (s_0, e).
inline Mat noise_covariance(const MjlsModel& model) {
  const int ne = model.N * model.n_e;
  Mat S = Mat::Zero(model.n_eps(), model.n_eps());
  S.topLeftCorner(model.n_x, model.n_x) = model.Sigma0;
  S.bottomRightCorner(ne, ne) = Mat::Identity(ne, ne);
  return S;
}

inline bool has_noise_channel(const MjlsModel& model) {
  return model.n_e > 0 || model.Sigma0.cwiseAbs().maxCoeff() > 0.0;
}

namespace detail {

// Positions covered by a truncated history at time t are [t - len + 1, t].
// Returns false when the two histories pin some position to different modes.
inline bool merge_pins(const Hist& h1, int t1, const Hist& h2, int t2,
                       std::map<int, int>& pins) {
  auto add = [&pins](const Hist& h, int t) {
    const int lo = t - static_cast<int>(h.size()) + 1;
    for (std::size_t i = 0; i < h.size(); ++i) {
      auto [it, inserted] = pins.emplace(lo + static_cast<int>(i), h[i]);
      if (!inserted && it->second != h[i]) return false;
    }
    return true;
  };
  return add(h1, t1) && add(h2, t2);
}

struct ColumnUnit {
  int t = 0;
  std::int64_t rank = 0;
  Hist hist;
  int j = -1;  // -1 marks the h-slot unit
  int b = 0;
};

inline std::vector<ColumnUnit> column_units(const MjlsModel& model, int T) {
  std::vector<ColumnUnit> units;
  for (int t = 0; t < model.N; ++t) {
    const auto hists = enumerate_paths(model.m(), history_length(t, T));
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(hists.size()); ++r) {
      units.push_back({t, r, hists[static_cast<std::size_t>(r)], -1, 0});
      for (int j = 0; j <= t; ++j)
        for (int b = 0; b < model.n_y; ++b)
          units.push_back({t, r, hists[static_cast<std::size_t>(r)], j, b});
    }
  }
  return units;
}

}  // namespace detail

inline AffineMapM assemble_M(const MjlsModel& model, int T) {
  model.validate();
  const MarkovChain& chain = model.chain;
  const int N = model.N, m = model.m(), nu = model.n_u, ny = model.n_y;
  const int ncf = 1 + model.n_zeta_full();
  const SlotIndexer idx(N, T, m, nu, ny);

  AffineMapM out;
  out.n_w = model.n_w();
  out.Mk.assign(static_cast<std::size_t>(idx.total), Mat());
  out.M0 = expected_product_linear(chain,
                                   FactorSequence::all_single(chains::g_chain_det(model)));

  for (int t = 0; t < N; ++t) {
    const auto uchain = chains::u_side_factors(model, t);
    const auto hists = enumerate_paths(m, history_length(t, T));
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(hists.size()); ++r) {
      const Hist& h = hists[static_cast<std::size_t>(r)];
      auto seq = FactorSequence::with_history(uchain, t, T, {{h, uchain[t][h.back()]}});
      const Mat E = expected_product_linear(chain, seq);  // n_w x nu
      for (int a = 0; a < nu; ++a) {
        Mat Mk = Mat::Zero(out.n_w, ncf);
        Mk.col(0) = E.col(a);
        out.Mk[static_cast<std::size_t>(idx.index(t, r, -1, a, 0))] = std::move(Mk);
      }
    }
    for (int j = 0; j <= t; ++j) {
      const auto kr = chains::kron_factors(uchain, chains::p_side_factors_det_full(model, j));
      for (std::int64_t r = 0; r < static_cast<std::int64_t>(hists.size()); ++r) {
        const Hist& h = hists[static_cast<std::size_t>(r)];
        auto seq = FactorSequence::with_history(kr, t, T, {{h, kr[t][h.back()]}});
        const Mat E = expected_product_linear(chain, seq);  // (n_w ny) x (nu ncf)
        for (int a = 0; a < nu; ++a)
          for (int b = 0; b < ny; ++b) {
            Mat Mk(out.n_w, ncf);
            for (int rw = 0; rw < out.n_w; ++rw)
              Mk.row(rw) = E.block(rw * ny + b, a * ncf, 1, ncf);
            out.Mk[static_cast<std::size_t>(idx.index(t, r, j, a, b))] = std::move(Mk);
          }
      }
    }
  }

  if (model.known_initial_state) {
    const Mat Tp = pin_transform(model);
    out.M0 = out.M0 * Tp;
    for (auto& Mk : out.Mk) Mk = Mk * Tp;
  }
  out.n_cols = 1 + model.n_zeta();
  return out;
}

// A must be symmetric PSD (the Gram curvature storage relies on it).
inline QuadraticFormV assemble_V(const MjlsModel& model, int T, const Mat& A) {
  model.validate();
  require_dims(A.rows() == model.n_w() && A.cols() == model.n_w(),
               "assemble_V: A must be n_w x n_w");
  require(is_symmetric(A, 1e-9), "assemble_V: A must be symmetric");
  require(min_eigenvalue(A) >= -1e-8, "assemble_V: A must be PSD");

  const MarkovChain& chain = model.chain;
  const int N = model.N, m = model.m(), nu = model.n_u, ny = model.n_y;
  const int ncf = 1 + model.n_zeta_full();
  const int neps = model.n_eps();
  const SlotIndexer idx(N, T, m, nu, ny);
  const auto units = detail::column_units(model, T);

  const auto gdet = chains::g_chain_det(model);
  const FactorSequence gdet_seq = FactorSequence::all_single(gdet);
  const bool noise = has_noise_channel(model);
  chains::FactorList gns;
  FactorSequence gns_seq;
  Mat Seps;
  if (noise) {
    gns = chains::g_chain_noise(model);
    gns_seq = FactorSequence::all_single(gns);
    Seps = noise_covariance(model);
  }

  QuadraticFormV out;
  out.K = idx.total;
  out.V0 = expected_product_quadratic(chain, gdet_seq, A, gdet_seq);
  if (noise)
    out.V0(0, 0) += (expected_product_quadratic(chain, gns_seq, A, gns_seq) * Seps).trace();

  // Chain caches shared across units and unit pairs.
  std::map<int, chains::FactorList> ucache;
  auto u_side = [&](int t) -> const chains::FactorList& {
    auto it = ucache.find(t);
    if (it == ucache.end()) it = ucache.emplace(t, chains::u_side_factors(model, t)).first;
    return it->second;
  };
  std::map<std::tuple<int, int, int>, chains::FactorList> det_cache, ns_cache;
  auto det_chain = [&](const detail::ColumnUnit& u) -> const chains::FactorList& {
    const auto key = std::make_tuple(u.t, u.j, u.b);
    auto it = det_cache.find(key);
    if (it == det_cache.end())
      it = det_cache
               .emplace(key, chains::kron_factors(
                                 u_side(u.t), chains::p_side_factors_det(model, u.j, u.b)))
               .first;
    return it->second;
  };
  auto ns_chain = [&](const detail::ColumnUnit& u) -> const chains::FactorList& {
    const auto key = std::make_tuple(u.t, u.j, u.b);
    auto it = ns_cache.find(key);
    if (it == ns_cache.end())
      it = ns_cache
               .emplace(key, chains::kron_factors(
                                 u_side(u.t), chains::p_side_factors_noise(model, u.j, u.b)))
               .first;
    return it->second;
  };
  auto hist_seq = [&](const chains::FactorList& ch, const detail::ColumnUnit& u) {
    return FactorSequence::with_history(ch, u.t, T, {{u.hist, ch[u.t][u.hist.back()]}});
  };

  // Linear coefficients: Lk = E[dF_k^T A G] + transpose, plus the noise trace in
  // the (0,0) cell for H-slots.
  out.Lk.assign(static_cast<std::size_t>(idx.total), Mat());
  for (const auto& u : units) {
    const Mat C = expected_product_quadratic(chain, hist_seq(det_chain(u), u), A, gdet_seq);
    Mat Cn;
    if (noise && u.j >= 0)
      Cn = expected_product_quadratic(chain, hist_seq(ns_chain(u), u), A, gns_seq);
    for (int a = 0; a < nu; ++a) {
      const Mat Ck = C.middleRows(a * ncf, ncf);
      Mat L = Ck + Ck.transpose();
      if (noise && u.j >= 0)
        L(0, 0) += 2.0 * (Cn.middleRows(a * neps, neps) * Seps).trace();
      out.Lk[static_cast<std::size_t>(idx.index(u.t, u.rank, u.j, a, u.b))] = std::move(L);
    }
  }

  // Gram matrix over slot pairs. Designated-index pairs at the same time go
  // through the recursion with history tables; pairs at different times reduce
  // to mode-pinned expectations with the suffix above max(t1, t2) shared across
  // history combinations of the same chain shapes.
  Mat Tg = Mat::Zero(idx.total * ncf, idx.total * ncf);
  using ShapeKey = std::tuple<int, int, int, int, int, int>;
  std::map<ShapeKey, QuadSuffix> sfx_det, sfx_ns;
  for (std::size_t i1 = 0; i1 < units.size(); ++i1) {
    for (std::size_t i2 = i1; i2 < units.size(); ++i2) {
      const auto& u1 = units[i1];
      const auto& u2 = units[i2];
      const bool with_ns = noise && u1.j >= 0 && u2.j >= 0;
      Mat pair, pair_ns;
      if (u1.t == u2.t) {
        if (u1.hist != u2.hist) continue;
        pair = expected_product_quadratic(chain, hist_seq(det_chain(u1), u1), A,
                                          hist_seq(det_chain(u2), u2));
        if (with_ns)
          pair_ns = expected_product_quadratic(chain, hist_seq(ns_chain(u1), u1), A,
                                               hist_seq(ns_chain(u2), u2));
      } else {
        std::map<int, int> pins;
        if (!detail::merge_pins(u1.hist, u1.t, u2.hist, u2.t, pins)) continue;
        const ShapeKey key{u1.t, u1.j, u1.b, u2.t, u2.j, u2.b};
        auto it = sfx_det.find(key);
        if (it == sfx_det.end())
          it = sfx_det.emplace(key, quad_suffix(chain, det_chain(u1), A, det_chain(u2), u2.t))
                   .first;
        pair = quad_finish(chain, det_chain(u1), det_chain(u2), it->second, pins);
        if (with_ns) {
          auto itn = sfx_ns.find(key);
          if (itn == sfx_ns.end())
            itn = sfx_ns.emplace(key, quad_suffix(chain, ns_chain(u1), A, ns_chain(u2), u2.t))
                      .first;
          pair_ns = quad_finish(chain, ns_chain(u1), ns_chain(u2), itn->second, pins);
        }
      }
      for (int a1 = 0; a1 < nu; ++a1) {
        for (int a2 = 0; a2 < nu; ++a2) {
          const std::int64_t k1 = idx.index(u1.t, u1.rank, u1.j, a1, u1.b);
          const std::int64_t k2 = idx.index(u2.t, u2.rank, u2.j, a2, u2.b);
          const Mat blk = pair.block(a1 * ncf, a2 * ncf, ncf, ncf);
          Tg.block(k1 * ncf, k2 * ncf, ncf, ncf) = blk;
          if (i1 != i2) Tg.block(k2 * ncf, k1 * ncf, ncf, ncf) = blk.transpose();
          if (with_ns) {
            const double tr =
                (pair_ns.block(a1 * neps, a2 * neps, neps, neps) * Seps).trace();
            Tg(k1 * ncf, k2 * ncf) += tr;
            if (i1 != i2) Tg(k2 * ncf, k1 * ncf) += tr;
          }
        }
      }
    }
  }

  if (model.known_initial_state) {
    const Mat Tp = pin_transform(model);
    const int ncr = static_cast<int>(Tp.cols());
    out.V0 = Tp.transpose() * out.V0 * Tp;
    for (auto& L : out.Lk) L = Tp.transpose() * L * Tp;
    Mat Tr = Mat::Zero(idx.total * ncr, idx.total * ncr);
    for (std::int64_t k = 0; k < idx.total; ++k)
      for (std::int64_t l = 0; l < idx.total; ++l)
        Tr.block(k * ncr, l * ncr, ncr, ncr) =
            Tp.transpose() * Tg.block(k * ncf, l * ncf, ncf, ncf) * Tp;
    Tg = std::move(Tr);
  }
  out.n_cols = 1 + model.n_zeta();
  out.Tgram = std::move(Tg);
  out.R = psd_factor(out.Tgram);
  return out;
}

// Per-path linearization of the trajectory maps around chi = 0. The derivative
// of F in slot (t, hist, j, a, b) on a matching path is U_t e_a rho^T with rho a
// row of Pdet (or e_0 for h-slots); the noise analog uses Bs0 and Pns.
struct PathLinearization {
  Hist path;
  double prob = 0.0;
  Mat G;               // n_w x (1 + n_zeta_full)
  std::vector<Mat> U;  // per t, n_w x n_u
  Mat Pdet;            // (N n_y) x (1 + n_zeta_full)
  Mat Bs0;             // n_w x n_eps
  Mat Pns;             // (N n_y) x n_eps
};

inline std::vector<PathLinearization> linearize_paths(const MjlsModel& model) {
  const int N = model.N, m = model.m();
  double count = std::pow(static_cast<double>(m), N);
  if (count > 64.0)
    throw size_guard_error("linearize_paths: m^N exceeds the enumeration guard (64)");
  const int nx = model.n_x, nu = model.n_u, ny = model.n_y;
  const int nw = model.n_w(), ncf = 1 + model.n_zeta_full();
  const PobPolicy zero = PobPolicy::zeros(N, 0, m, nu, ny);
  std::vector<PathLinearization> out;
  for (const Hist& path : enumerate_paths(m, N)) {
    StackedOperators S = build_stacked(model, path, zero);
    PathLinearization L;
    L.path = path;
    L.prob = path_probability(model.chain, path);
    L.G = fg_pair(S).G;
    L.U.resize(static_cast<std::size_t>(N));
    for (int t = 0; t < N; ++t) {
      Mat U = Mat::Zero(nw, nu);
      U.topRows(N * nx) = S.B_ul.middleCols(t * nu, nu);
      U.block(N * nx + t * nu, 0, nu, nu) = Mat::Identity(nu, nu);
      L.U[static_cast<std::size_t>(t)] = std::move(U);
    }
    L.Pdet = Mat::Zero(N * ny, ncf);
    L.Pdet.middleCols(1, nx) = S.C_ul;
    L.Pdet.rightCols(N * model.n_d) = S.Dd_ul;
    L.Bs0 = Mat::Zero(nw, model.n_eps());
    L.Bs0.topLeftCorner(N * nx, nx) = S.A_ul;
    L.Bs0.topRightCorner(N * nx, N * model.n_e) = S.Bs_ul;
    L.Pns = Mat::Zero(N * ny, model.n_eps());
    L.Pns.leftCols(nx) = S.C_ul;
    L.Pns.rightCols(N * model.n_e) = S.Ds_ul;
    out.push_back(std::move(L));
  }
  return out;
}

namespace detail {

// Slots active on a path, with their zeta_e row vectors, for the enumeration
// route.
struct ActiveSlot {
  std::int64_t k = 0;
  int t = 0, a = 0;
  Vec rho;   // length 1 + n_zeta_full
  Vec rhos;  // length n_eps, empty for h-slots
};

inline std::vector<ActiveSlot> active_slots(const MjlsModel& model, int T,
                                            const SlotIndexer& idx,
                                            const PathLinearization& L) {
  const int ncf = 1 + model.n_zeta_full();
  std::vector<ActiveSlot> act;
  for (int t = 0; t < model.N; ++t) {
    const Hist h = truncated_history(L.path, t, T);
    const std::int64_t r = history_index(h, model.m());
    for (int a = 0; a < model.n_u; ++a)
      act.push_back({idx.index(t, r, -1, a, 0), t, a, Vec::Unit(ncf, 0), Vec()});
    for (int j = 0; j <= t; ++j)
      for (int b = 0; b < model.n_y; ++b)
        for (int a = 0; a < model.n_u; ++a)
          act.push_back({idx.index(t, r, j, a, b), t, a,
                         L.Pdet.row(j * model.n_y + b).transpose(),
                         L.Pns.row(j * model.n_y + b).transpose()});
  }
  return act;
}

}  // namespace detail

inline AffineMapM assemble_M_bypath(const MjlsModel& model, int T) {
  model.validate();
  const int ncf = 1 + model.n_zeta_full();
  const SlotIndexer idx(model.N, T, model.m(), model.n_u, model.n_y);
  AffineMapM out;
  out.n_w = model.n_w();
  out.M0 = Mat::Zero(out.n_w, ncf);
  out.Mk.assign(static_cast<std::size_t>(idx.total), Mat::Zero(out.n_w, ncf));
  for (const auto& L : linearize_paths(model)) {
    out.M0 += L.prob * L.G;
    for (const auto& s : detail::active_slots(model, T, idx, L))
      out.Mk[static_cast<std::size_t>(s.k)] +=
          L.prob * (L.U[static_cast<std::size_t>(s.t)].col(s.a) * s.rho.transpose());
  }
  if (model.known_initial_state) {
    const Mat Tp = pin_transform(model);
    out.M0 = out.M0 * Tp;
    for (auto& Mk : out.Mk) Mk = Mk * Tp;
  }
  out.n_cols = 1 + model.n_zeta();
  return out;
}

inline QuadraticFormV assemble_V_bypath(const MjlsModel& model, int T, const Mat& A) {
  model.validate();
  require_dims(A.rows() == model.n_w() && A.cols() == model.n_w(),
               "assemble_V_bypath: A must be n_w x n_w");
  const int ncf = 1 + model.n_zeta_full();
  const SlotIndexer idx(model.N, T, model.m(), model.n_u, model.n_y);
  const bool noise = has_noise_channel(model);
  const Mat Seps = noise ? noise_covariance(model) : Mat();

  QuadraticFormV out;
  out.K = idx.total;
  out.V0 = Mat::Zero(ncf, ncf);
  out.Lk.assign(static_cast<std::size_t>(idx.total), Mat::Zero(ncf, ncf));
  Mat Tg = Mat::Zero(idx.total * ncf, idx.total * ncf);

  for (const auto& L : linearize_paths(model)) {
    out.V0 += L.prob * (L.G.transpose() * A * L.G);
    if (noise) out.V0(0, 0) += L.prob * (L.Bs0.transpose() * A * L.Bs0 * Seps).trace();
    const auto act = detail::active_slots(model, T, idx, L);
    for (const auto& s : act) {
      const Vec u = L.U[static_cast<std::size_t>(s.t)].col(s.a);
      const Mat Ck = s.rho * (u.transpose() * A * L.G);
      out.Lk[static_cast<std::size_t>(s.k)] += L.prob * (Ck + Ck.transpose());
      if (noise && s.rhos.size() > 0)
        out.Lk[static_cast<std::size_t>(s.k)](0, 0) +=
            2.0 * L.prob * (u.transpose() * A * L.Bs0 * Seps * s.rhos).value();
    }
    for (const auto& s1 : act) {
      const Vec u1 = L.U[static_cast<std::size_t>(s1.t)].col(s1.a);
      for (const auto& s2 : act) {
        const Vec u2 = L.U[static_cast<std::size_t>(s2.t)].col(s2.a);
        const double uau = u1.dot(A * u2);
        Tg.block(s1.k * ncf, s2.k * ncf, ncf, ncf) +=
            (L.prob * uau) * (s1.rho * s2.rho.transpose());
        if (noise && s1.rhos.size() > 0 && s2.rhos.size() > 0)
          Tg(s1.k * ncf, s2.k * ncf) +=
              L.prob * uau * (s2.rhos.transpose() * Seps * s1.rhos).value();
      }
    }
  }

  if (model.known_initial_state) {
    const Mat Tp = pin_transform(model);
    const int ncr = static_cast<int>(Tp.cols());
    out.V0 = Tp.transpose() * out.V0 * Tp;
    for (auto& Lm : out.Lk) Lm = Tp.transpose() * Lm * Tp;
    Mat Tr = Mat::Zero(idx.total * ncr, idx.total * ncr);
    for (std::int64_t k = 0; k < idx.total; ++k)
      for (std::int64_t l = 0; l < idx.total; ++l)
        Tr.block(k * ncr, l * ncr, ncr, ncr) =
            Tp.transpose() * Tg.block(k * ncf, l * ncf, ncf, ncf) * Tp;
    Tg = std::move(Tr);
  }
  out.n_cols = 1 + model.n_zeta();
  out.Tgram = std::move(Tg);
  out.R = psd_factor(out.Tgram);
  return out;
}

}  // namespace robust_pob
