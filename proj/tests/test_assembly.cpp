#include <catch2/catch_amalgamated.hpp>

#include "robust_pob/assemble.hpp"
#include "test_support.hpp"

#include <random>
#include <vector>

using namespace robust_pob;
using rp_test::random_matrix;
using rp_test::random_psd;

namespace {

std::vector<rp_test::ModelShape> assembly_shapes() {
  std::vector<rp_test::ModelShape> shapes;
  {
    rp_test::ModelShape s;  // default: N=3 m=2 with noise
    shapes.push_back(s);
  }
  {
    rp_test::ModelShape s;
    s.N = 2;
    s.m = 3;
    s.n_x = 1;
    s.n_y = 1;
    shapes.push_back(s);
  }
  {
    rp_test::ModelShape s;  // deterministic channel only
    s.n_e = 0;
    s.zero_sigma0 = true;
    shapes.push_back(s);
  }
  {
    rp_test::ModelShape s;  // pinned initial state
    s.pinned = true;
    s.n_u = 2;
    shapes.push_back(s);
  }
  {
    rp_test::ModelShape s;  // single time step
    s.N = 1;
    shapes.push_back(s);
  }
  return shapes;
}

double coeff_gap(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("affine moment map agrees between chain and enumeration routes") {
  std::mt19937 rng(811);
  for (const auto& shape : assembly_shapes()) {
    MjlsModel md = rp_test::random_model(rng, shape);
    for (int T = 0; T < md.N; T += (md.N > 2 ? 2 : 1)) {
      AffineMapM chain_route = assemble_M(md, T);
      AffineMapM path_route = assemble_M_bypath(md, T);
      REQUIRE(chain_route.n_cols == path_route.n_cols);
      REQUIRE(coeff_gap(chain_route.M0, path_route.M0) < 1e-12);
      REQUIRE(chain_route.Mk.size() == path_route.Mk.size());
      for (std::size_t k = 0; k < chain_route.Mk.size(); ++k)
        REQUIRE(coeff_gap(chain_route.Mk[k], path_route.Mk[k]) < 1e-12);
    }
  }
}

TEST_CASE("quadratic moment form agrees between chain and enumeration routes") {
  std::mt19937 rng(822);
  for (const auto& shape : assembly_shapes()) {
    MjlsModel md = rp_test::random_model(rng, shape);
    Mat A = random_psd(rng, md.n_w(), 0.5);
    const int T = md.N - 1;
    QuadraticFormV chain_route = assemble_V(md, T, A);
    QuadraticFormV path_route = assemble_V_bypath(md, T, A);
    REQUIRE(coeff_gap(chain_route.V0, path_route.V0) < 1e-11);
    REQUIRE(chain_route.Lk.size() == path_route.Lk.size());
    for (std::size_t k = 0; k < chain_route.Lk.size(); ++k)
      REQUIRE(coeff_gap(chain_route.Lk[k], path_route.Lk[k]) < 1e-11);
    REQUIRE(coeff_gap(chain_route.Tgram, path_route.Tgram) < 1e-11);
  }
}

TEST_CASE("moment maps reproduce closed-loop trajectory statistics") {
  std::mt19937 rng(833);
  for (const auto& shape : assembly_shapes()) {
    MjlsModel md = rp_test::random_model(rng, shape);
    const int T = md.N - 1;
    const std::int64_t K = dim_of_policy(md.N, T, md.m(), md.n_u, md.n_y);
    Mat A = random_psd(rng, md.n_w(), 0.5);
    AffineMapM M = assemble_M(md, T);
    QuadraticFormV V = assemble_V(md, T, A);
    const bool noise = has_noise_channel(md);
    const Mat Seps = noise_covariance(md);

    for (int rep = 0; rep < 3; ++rep) {
      Vec chi = random_matrix(rng, static_cast<int>(K), 1);
      PobPolicy policy = PobPolicy::unflatten(chi, md.N, T, md.m(), md.n_u, md.n_y);
      Vec zeta = random_matrix(rng, md.n_zeta(), 1);
      Vec zeta_full = expand_zeta(md, zeta);
      Vec ze(1 + md.n_zeta());
      ze[0] = 1.0;
      ze.tail(md.n_zeta()) = zeta;

      // Path-by-path expectations straight from the per-path trajectory maps.
      Vec mean_w = Vec::Zero(md.n_w());
      double quad = 0.0;
      for (const Hist& path : enumerate_paths(md.m(), md.N)) {
        const double pr = path_probability(md.chain, path);
        TrajectoryMaps maps = trajectory_affine_maps(build_stacked(md, path, policy));
        Vec w = maps.b + maps.Bd_cal * zeta_full;
        mean_w += pr * w;
        quad += pr * (w.dot(A * w));
        if (noise) quad += pr * (maps.Bs_cal.transpose() * A * maps.Bs_cal * Seps).trace();
      }

      REQUIRE((M.eval(chi) * ze - mean_w).cwiseAbs().maxCoeff() <
              1e-10 * (1.0 + mean_w.cwiseAbs().maxCoeff()));
      const double quad_from_V = ze.dot(V.eval(chi) * ze);
      REQUIRE(quad_from_V == Catch::Approx(quad).epsilon(1e-9).margin(1e-10));
    }
  }
}

TEST_CASE("gram curvature is positive semidefinite with a consistent factor") {
  std::mt19937 rng(844);
  rp_test::ModelShape shape;
  shape.N = 3;
  shape.m = 2;
  MjlsModel md = rp_test::random_model(rng, shape);
  Mat A = random_psd(rng, md.n_w(), 0.5);
  QuadraticFormV V = assemble_V(md, 1, A);

  CHECK(min_eigenvalue(V.Tgram) >= -1e-9);
  CHECK((V.R.transpose() * V.R - V.Tgram).cwiseAbs().maxCoeff() <
        1e-9 * (1.0 + V.Tgram.cwiseAbs().maxCoeff()));
  for (int rep = 0; rep < 4; ++rep) {
    Vec chi = random_matrix(rng, static_cast<int>(V.K), 1);
    Mat Z = V.Z(chi);
    CHECK((Z.transpose() * Z - V.gram_quadratic(chi)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("quadratic moment form is midpoint matrix convex") {
  std::mt19937 rng(855);
  rp_test::ModelShape shape;
  shape.N = 3;
  shape.m = 2;
  MjlsModel md = rp_test::random_model(rng, shape);
  Mat A = random_psd(rng, md.n_w(), 0.5);
  QuadraticFormV V = assemble_V(md, 2, A);
  for (int rep = 0; rep < 10; ++rep) {
    Vec c1 = random_matrix(rng, static_cast<int>(V.K), 1, 2.0);
    Vec c2 = random_matrix(rng, static_cast<int>(V.K), 1, 2.0);
    Mat gap = 0.5 * (V.eval(c1) + V.eval(c2)) - V.eval(0.5 * (c1 + c2));
    CHECK(min_eigenvalue(gap) >= -1e-9);
  }
}
