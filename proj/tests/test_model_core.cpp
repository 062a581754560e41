#include <catch2/catch_amalgamated.hpp>

#include "robust_pob/assemble.hpp"
#include "robust_pob/chain.hpp"
#include "robust_pob/common.hpp"
#include "robust_pob/model.hpp"
#include "robust_pob/policy.hpp"
#include "robust_pob/stacked.hpp"
#include "test_support.hpp"

#include <random>

using namespace robust_pob;
using rp_test::random_matrix;
using rp_test::random_psd;

TEST_CASE("policy dimension formula on fixed instances") {
  CHECK(dim_of_policy(3, 2, 2, 2, 2) == 164);
  CHECK(dim_of_policy(1, 0, 1, 1, 1) == 2);
  CHECK(dim_of_policy(2, 0, 1, 1, 1) == 5);
}

TEST_CASE("policy dimension matches slot enumeration and indexer totals") {
  for (int N = 1; N <= 4; ++N)
    for (int T = 0; T < N; ++T)
      for (int m = 1; m <= 3; ++m) {
        const auto slots = enumerate_slots(N, T, m, 2, 1);
        CHECK(static_cast<std::int64_t>(slots.size()) == dim_of_policy(N, T, m, 2, 1));
        SlotIndexer idx(N, T, m, 2, 1);
        CHECK(idx.total == dim_of_policy(N, T, m, 2, 1));
        for (std::size_t k = 0; k < slots.size(); ++k) {
          const SlotInfo& s = slots[k];
          CHECK(idx.index(s.t, history_index(s.hist, m), s.j, s.a, s.b) ==
                static_cast<std::int64_t>(k));
        }
      }
}

TEST_CASE("policy flatten and unflatten are mutually inverse") {
  std::mt19937 rng(71);
  const int N = 3, T = 1, m = 2, nu = 2, ny = 2;
  Vec chi = random_matrix(rng, static_cast<int>(dim_of_policy(N, T, m, nu, ny)), 1);
  PobPolicy p = PobPolicy::unflatten(chi, N, T, m, nu, ny);
  CHECK((p.flatten() - chi).cwiseAbs().maxCoeff() == 0.0);

  // Slot k of the canonical order addresses exactly the table cell reported by
  // enumerate_slots.
  const auto slots = enumerate_slots(N, T, m, nu, ny);
  for (std::size_t k = 0; k < slots.size(); k += 7) {
    Vec e = Vec::Zero(chi.size());
    e[static_cast<Eigen::Index>(k)] = 1.0;
    PobPolicy q = PobPolicy::unflatten(e, N, T, m, nu, ny);
    const SlotInfo& s = slots[k];
    if (s.j < 0)
      CHECK(q.h_at(s.t, s.hist)[s.a] == 1.0);
    else
      CHECK(q.H_at(s.t, s.j, s.hist)(s.a, s.b) == 1.0);
    CHECK(q.flatten().cwiseAbs().sum() == 1.0);
  }
}

TEST_CASE("markov chain marginals and path probabilities") {
  std::mt19937 rng(5);
  for (int m : {1, 2, 3}) {
    MarkovChain c = rp_test::random_chain(rng, m);
    c.validate();
    for (int t = 0; t < 4; ++t) CHECK(c.marginal(t).sum() == Catch::Approx(1.0).margin(1e-12));
    double total = 0.0;
    for (const Hist& p : enumerate_paths(m, 3)) total += path_probability(c, p);
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("history helpers agree with lexicographic enumeration") {
  const int m = 3;
  for (int len : {1, 2, 3}) {
    const auto hists = enumerate_paths(m, len);
    for (std::size_t r = 0; r < hists.size(); ++r)
      CHECK(history_index(hists[r], m) == static_cast<std::int64_t>(r));
  }
  const Hist path{2, 0, 1, 2};
  CHECK(truncated_history(path, 3, 1) == Hist{1, 2});
  CHECK(truncated_history(path, 3, 3) == Hist{2, 0, 1, 2});
  CHECK(truncated_history(path, 0, 2) == Hist{2});
  CHECK(history_length(5, 2) == 3);
  CHECK(history_length(1, 4) == 2);
}

TEST_CASE("psd helpers reconstruct their input") {
  std::mt19937 rng(9);
  for (int n : {1, 3, 6}) {
    Mat S = random_psd(rng, n);
    Mat Rt = psd_factor(S);
    CHECK(rel_frobenius_error(Rt.transpose() * Rt, S) < 1e-10);
    Mat H = psd_sqrt(S);
    CHECK(rel_frobenius_error(H * H, S) < 1e-10);
    CHECK(min_eigenvalue(S) >= -1e-12);
  }
  // Rank-deficient input: the factor drops the null directions.
  Mat low = Mat::Zero(4, 4);
  low(1, 1) = 2.0;
  Mat Rt = psd_factor(low);
  CHECK(Rt.rows() == 1);
  CHECK(rel_frobenius_error(Rt.transpose() * Rt, low) < 1e-12);
}

TEST_CASE("ellitope membership and validation") {
  Ellitope ball = unit_ball_ellitope(3);
  ball.validate();
  CHECK(ball.s() == 1);
  Vec z = Vec::Zero(3);
  z[0] = 0.5;
  CHECK(ball.membership(z) == Catch::Approx(0.25));

  Ellitope box;
  box.Qs.push_back(Vec::Unit(2, 0).asDiagonal());
  box.Qs.push_back(Vec::Unit(2, 1).asDiagonal());
  box.validate();
  Vec corner(2);
  corner << 1.0, -1.0;
  CHECK(box.membership(corner) == Catch::Approx(1.0));

  Ellitope degenerate;
  degenerate.Qs.push_back(Vec::Unit(2, 0).asDiagonal());
  CHECK_THROWS_AS(degenerate.validate(), invalid_argument_error);
}

TEST_CASE("model validation rejects shape mismatches") {
  std::mt19937 rng(13);
  rp_test::ModelShape shape;
  MjlsModel md = rp_test::random_model(rng, shape);
  md.validate();
  MjlsModel bad = md;
  bad.mats[1][0].B = Mat::Zero(md.n_x + 1, md.n_u);
  CHECK_THROWS_AS(bad.validate(), dimension_error);
  bad = md;
  bad.chain.P(0, 0) += 0.2;
  CHECK_THROWS_AS(bad.validate(), invalid_argument_error);
}

TEST_CASE("stacked trajectory maps match the direct closed loop") {
  std::mt19937 rng(2026);
  for (int rep = 0; rep < 40; ++rep) {
    rp_test::ModelShape shape;
    shape.N = 1 + rep % 4;
    shape.m = 1 + rep % 3;
    shape.n_x = 1 + rep % 3;
    shape.n_u = 1 + (rep / 2) % 2;
    shape.n_d = 1 + rep % 2;
    shape.n_e = rep % 3 == 0 ? 0 : 1;
    shape.n_y = 1 + (rep / 3) % 2;
    MjlsModel md = rp_test::random_model(rng, shape);
    const int T = rep % shape.N;
    PobPolicy policy = rp_test::random_policy(rng, md, T);
    const auto paths = enumerate_paths(md.m(), md.N);
    const Hist& path = paths[static_cast<std::size_t>(rep) % paths.size()];

    Vec zeta = random_matrix(rng, md.n_zeta_full(), 1);
    Vec eps = random_matrix(rng, md.n_eps(), 1);
    const auto run = rp_test::simulate_pob_direct(md, path, policy, zeta, eps);

    StackedOperators S = build_stacked(md, path, policy);
    TrajectoryMaps maps = trajectory_affine_maps(S);
    Vec w = maps.b + maps.Bd_cal * zeta + maps.Bs_cal * eps;
    REQUIRE((w - run.w).cwiseAbs().maxCoeff() < 1e-10);

    // Purified outputs predicted by the stacked output blocks.
    Vec v_stack = Vec::Zero(md.N * md.n_y);
    v_stack += S.C_ul * (zeta.head(md.n_x) + eps.head(md.n_x));
    v_stack += S.Dd_ul * zeta.tail(md.N * md.n_d);
    v_stack += S.Ds_ul * eps.tail(md.N * md.n_e);
    for (int t = 0; t < md.N; ++t)
      REQUIRE((v_stack.segment(t * md.n_y, md.n_y) - run.v[static_cast<std::size_t>(t)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
  }
}

TEST_CASE("fg pair splits the trajectory map into chi and chi-free parts") {
  std::mt19937 rng(99);
  rp_test::ModelShape shape;
  shape.N = 3;
  shape.m = 2;
  MjlsModel md = rp_test::random_model(rng, shape);
  const Hist path{1, 0, 1};
  PobPolicy policy = rp_test::random_policy(rng, md, 1);
  StackedOperators S = build_stacked(md, path, policy);
  TrajectoryMaps maps = trajectory_affine_maps(S);
  FGPair fg = fg_pair(S);

  Vec zeta = random_matrix(rng, md.n_zeta_full(), 1);
  Vec zeta_e(1 + md.n_zeta_full());
  zeta_e[0] = 1.0;
  zeta_e.tail(md.n_zeta_full()) = zeta;
  Vec lhs = (fg.F + fg.G) * zeta_e;
  Vec rhs = maps.b + maps.Bd_cal * zeta;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);

  PobPolicy zero = PobPolicy::zeros(md.N, 1, md.m(), md.n_u, md.n_y);
  FGPair fg0 = fg_pair(build_stacked(md, path, zero));
  CHECK(fg0.F.cwiseAbs().maxCoeff() == 0.0);
  CHECK((fg0.G - fg.G).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pin transform reduces zeta coordinates consistently") {
  std::mt19937 rng(123);
  rp_test::ModelShape shape;
  shape.pinned = true;
  MjlsModel md = rp_test::random_model(rng, shape);
  CHECK(md.n_zeta() == md.N * md.n_d);
  Mat Tp = pin_transform(md);
  Vec zr = random_matrix(rng, md.n_zeta(), 1);
  Vec ze_red(1 + md.n_zeta());
  ze_red[0] = 1.0;
  ze_red.tail(md.n_zeta()) = zr;
  Vec ze_full = Tp * ze_red;
  CHECK(ze_full[0] == 1.0);
  CHECK((ze_full.segment(1, md.n_x) - *md.known_initial_state).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ze_full.tail(md.N * md.n_d) - zr).cwiseAbs().maxCoeff() == 0.0);
  CHECK((expand_zeta(md, zr) - ze_full.tail(md.n_zeta_full())).cwiseAbs().maxCoeff() == 0.0);
}
