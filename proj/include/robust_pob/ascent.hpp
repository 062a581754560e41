// Direct maximization of a quadratic over an ellitope, used as the ground
// truth against which the S-procedure relaxation is measured. Two tools:
//
//  * ellitope_max_ascent: multi-start projected gradient ascent with radial
//    retraction. The problem is nonconvex, so this is a lower bound on the
//    true maximum; with enough well-chosen starts it is tight in practice on
//    the low-dimensional instances we test.
//  * max_quad_single_ellipsoid: exact solution for s = 1 via the trust-region
//    subproblem (eigendecomposition plus a secular-equation bisection,
//    including the hard case). Cross-checks the ascent where an exact answer
//    exists.
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace robust_pob {

struct QuadMaxResult {
  double value = 0.0;
  Vec zeta;
};

namespace detail {

inline double ellitope_gauge(const Ellitope& ell, const Vec& d) {
  double q = 0.0;
  for (const Mat& Q : ell.Qs) q = std::max(q, d.dot(Q * d));
  return q;  // membership iff <= 1
}

inline Vec ellitope_retract(const Ellitope& ell, const Vec& d) {
  const double q = ellitope_gauge(ell, d);
  if (q > 1.0) return d / std::sqrt(q);
  return d;
}

inline Vec ellitope_boundary(const Ellitope& ell, const Vec& d) {
  const double q = ellitope_gauge(ell, d);
  if (q > 1e-300) return d / std::sqrt(q);
  return d;
}

}  // namespace detail

// Exact maximum of y^T A y + 2 g^T y over the unit ball.
inline QuadMaxResult max_quad_unit_ball(const Mat& A, const Vec& g) {
  const int n = static_cast<int>(A.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  const Vec lam = es.eigenvalues();  // ascending
  const Mat U = es.eigenvectors();
  const Vec gh = U.transpose() * g;
  const double lmax = lam[n - 1];
  const auto value = [&](const Vec& y) { return y.dot(A * y) + 2.0 * g.dot(y); };

  QuadMaxResult best;
  best.zeta = Vec::Zero(n);
  best.value = 0.0;

  const auto consider = [&](const Vec& y) {
    const double f = value(y);
    if (f > best.value) {
      best.value = f;
      best.zeta = y;
    }
  };

  // Interior stationary point, only a maximizer when A is negative definite.
  if (lmax < -1e-14) {
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = -gh[i] / lam[i];
    if (y.norm() <= 1.0 + 1e-12) consider(U * y);
  }

  // Boundary: y(mu)_i = gh_i / (mu - lam_i) with mu > lmax chosen so that
  // ||y(mu)|| = 1. The norm is decreasing in mu.
  const auto norm2_at = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = mu - lam[i];
      s += (gh[i] * gh[i]) / (d * d);
    }
    return s;
  };
  const double scale = std::max(1.0, std::abs(lmax));
  double lo = lmax + 1e-13 * scale;
  if (norm2_at(lo) < 1.0) {
    // Hard case: g has (numerically) no component on the top eigenspace.
    Vec y = Vec::Zero(n);
    double base2 = 0.0;
    for (int i = 0; i < n; ++i) {
      if (lmax - lam[i] > 1e-10 * scale) {
        y[i] = gh[i] / (lmax - lam[i]);
        base2 += y[i] * y[i];
      }
    }
    const double tau = std::sqrt(std::max(0.0, 1.0 - base2));
    Vec yp = y, ym = y;
    yp[n - 1] += tau;
    ym[n - 1] -= tau;
    consider(U * yp);
    consider(U * ym);
  } else {
    double hi = lmax + scale;
    for (int k = 0; k < 200 && norm2_at(hi) > 1.0; ++k) hi = lmax + (hi - lmax) * 2.0;
    for (int k = 0; k < 300; ++k) {
      const double mid = 0.5 * (lo + hi);
      (norm2_at(mid) > 1.0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = gh[i] / (mu - lam[i]);
    consider(U * y);
  }
  return best;
}

inline QuadMaxResult ellitope_max_ascent(const Ellitope& ell, const Mat& V, const Vec& b,
                                         int n_starts = 64, std::uint64_t seed = 1) {
  ell.validate();
  const int n = ell.dim();
  require_dims(V.rows() == n && V.cols() == n && b.size() == n, "ellitope_max_ascent: shapes");

  const auto value = [&](const Vec& z) { return z.dot(V * z) + 2.0 * b.dot(z); };
  const auto run = [&](Vec z) {
    z = detail::ellitope_retract(ell, z);
    double fz = value(z);
    for (int iter = 0; iter < 2000; ++iter) {
      const Vec g = 2.0 * (V * z + b);
      if (g.norm() < 1e-14) break;
      // Fresh backtracking line search each iteration; a permanently shrunk
      // step stalls well short of boundary stationary points otherwise.
      double alpha = 1.0;
      bool moved = false;
      while (alpha >= 1e-18) {
        const Vec cand = detail::ellitope_retract(ell, z + alpha * g);
        const double fc = value(cand);
        if (fc > fz + 1e-15 * (1.0 + std::abs(fz))) {
          z = cand;
          fz = fc;
          moved = true;
          break;
        }
        alpha /= 3.0;
      }
      if (!moved) break;
    }
    // The maximum of a convex-along-rays objective often sits on the boundary;
    // try the radial pushout as a free polish step.
    const Vec zb = detail::ellitope_boundary(ell, z);
    const double fb = value(zb);
    if (fb > fz) return std::make_pair(fb, zb);
    return std::make_pair(fz, z);
  };

  QuadMaxResult best;
  best.zeta = Vec::Zero(n);
  best.value = 0.0;  // zeta = 0 is always feasible
  Eigen::SelfAdjointEigenSolver<Mat> es(V);
  std::vector<Vec> starts;
  const Vec vtop = es.eigenvectors().col(n - 1);
  starts.push_back(detail::ellitope_boundary(ell, vtop));
  starts.push_back(detail::ellitope_boundary(ell, Vec(-vtop)));
  if (b.norm() > 0.0) starts.push_back(detail::ellitope_boundary(ell, b));
  // Exact solutions on inscribed or relaxed single ellipsoids make strong
  // warm starts: the inscribed one is already feasible, the per-constraint
  // ones point at where the unconstrained-by-the-rest maximizer sits.
  {
    Mat Qsum = Mat::Zero(n, n);
    for (const Mat& Q : ell.Qs) Qsum += Q;
    std::vector<Mat> shapes;
    shapes.push_back(Qsum);
    if (ell.s() > 1)
      for (const Mat& Q : ell.Qs) shapes.push_back(Q + 1e-9 * Mat::Identity(n, n));
    for (const Mat& S : shapes) {
      const Mat Sq = psd_sqrt(S);
      const Mat Si = Sq.inverse();
      const QuadMaxResult t = max_quad_unit_ball(Si * V * Si, Si * b);
      starts.push_back(detail::ellitope_retract(ell, Si * t.zeta));
    }
  }
  RandomStream rng(seed);
  while (static_cast<int>(starts.size()) < n_starts) {
    Vec d = rng.gaussian_vec(n);
    Vec s = detail::ellitope_boundary(ell, d);
    if (starts.size() % 4 == 3) s *= std::pow(rng.uniform01(), 1.0 / n);  // interior start
    starts.push_back(s);
  }
  for (const Vec& s : starts) {
    const auto [fv, z] = run(s);
    if (fv > best.value) {
      best.value = fv;
      best.zeta = z;
    }
  }
  return best;
}

// Exact maximum over a single full-rank ellipsoid {zeta : zeta^T Q zeta <= 1}.
inline QuadMaxResult max_quad_single_ellipsoid(const Ellitope& ell, const Mat& V, const Vec& b) {
  ell.validate();
  require(ell.s() == 1, "max_quad_single_ellipsoid: needs exactly one ellipsoid");
  const Mat S = psd_sqrt(ell.Qs[0]);
  const Mat Si = S.inverse();
  QuadMaxResult r = max_quad_unit_ball(Si * V * Si, Si * b);
  r.zeta = Si * r.zeta;
  return r;
}

}  // namespace robust_pob
