#include <catch2/catch_amalgamated.hpp>

#include "robust_pob/expectation.hpp"
#include "test_support.hpp"

#include <map>
#include <random>

using namespace robust_pob;
using rp_test::random_factors;
using rp_test::random_matrix;
using rp_test::random_sizes;

namespace {

// Random subset of history keys mapped to fresh random factors of the right
// shape; may be empty (then every path is annihilated at tau).
std::map<Hist, Mat> random_history_table(std::mt19937& rng, int m, int tau, int T, int rows,
                                         int cols, double keep_prob) {
  std::map<Hist, Mat> table;
  std::bernoulli_distribution keep(keep_prob);
  for (const Hist& h : enumerate_paths(m, history_length(tau, T)))
    if (keep(rng)) table[h] = random_matrix(rng, rows, cols);
  return table;
}

}  // namespace

TEST_CASE("linear recursion matches enumeration without history factors") {
  std::mt19937 rng(101);
  for (int rep = 0; rep < 60; ++rep) {
    const int N = 1 + rep % 5;
    const int m = 1 + rep % 3;
    MarkovChain chain = rp_test::random_chain(rng, m);
    auto sizes = random_sizes(rng, N);
    FactorSequence seq = FactorSequence::all_single(random_factors(rng, m, sizes));
    Mat got = expected_product_linear(chain, seq);
    Mat want = brute_force_expectation(chain, seq);
    REQUIRE(rel_frobenius_error(got, want) < 1e-12);
  }
}

TEST_CASE("linear recursion matches enumeration with a history factor") {
  std::mt19937 rng(202);
  for (int rep = 0; rep < 80; ++rep) {
    const int N = 1 + rep % 5;
    const int m = 1 + rep % 3;
    const int tau = rep % N;
    const int T = rep % 4;
    MarkovChain chain = rp_test::random_chain(rng, m);
    auto sizes = random_sizes(rng, N);
    auto single = random_factors(rng, m, sizes);
    auto table = random_history_table(rng, m, tau, T, sizes[static_cast<std::size_t>(tau) + 1],
                                      sizes[static_cast<std::size_t>(tau)],
                                      rep % 3 == 0 ? 0.4 : 1.0);
    FactorSequence seq = FactorSequence::with_history(single, tau, T, table);
    Mat got = expected_product_linear(chain, seq);
    Mat want = brute_force_expectation(chain, seq);
    REQUIRE(rel_frobenius_error(got, want) < 1e-12);
  }
}

TEST_CASE("quadratic recursion matches enumeration in all history placements") {
  std::mt19937 rng(303);
  for (int rep = 0; rep < 80; ++rep) {
    const int N = 1 + rep % 4;
    const int m = 1 + rep % 3;
    const int tau = rep % N;
    const int T = rep % 3;
    MarkovChain chain = rp_test::random_chain(rng, m);
    auto lsz = random_sizes(rng, N);
    auto rsz = random_sizes(rng, N);
    auto lf = random_factors(rng, m, lsz);
    auto rf = random_factors(rng, m, rsz);
    Mat S = random_matrix(rng, lsz.back(), rsz.back());

    FactorSequence lp = FactorSequence::all_single(lf);
    FactorSequence rp = FactorSequence::all_single(rf);
    auto ltab = random_history_table(rng, m, tau, T, lsz[static_cast<std::size_t>(tau) + 1],
                                     lsz[static_cast<std::size_t>(tau)], 0.8);
    auto rtab = random_history_table(rng, m, tau, T, rsz[static_cast<std::size_t>(tau) + 1],
                                     rsz[static_cast<std::size_t>(tau)], 0.8);
    FactorSequence lh = FactorSequence::with_history(lf, tau, T, ltab);
    FactorSequence rh = FactorSequence::with_history(rf, tau, T, rtab);

    const int kind = rep % 4;
    const FactorSequence& L = (kind == 1 || kind == 3) ? lh : lp;
    const FactorSequence& R = (kind == 2 || kind == 3) ? rh : rp;
    Mat got = expected_product_quadratic(chain, L, S, R);
    Mat want = brute_force_expectation(chain, L, S, R);
    REQUIRE(rel_frobenius_error(got, want) < 1e-12);
  }
}

TEST_CASE("quadratic recursion requires a shared designated index") {
  std::mt19937 rng(404);
  const int N = 3, m = 2;
  MarkovChain chain = rp_test::random_chain(rng, m);
  auto sz = random_sizes(rng, N);
  auto f = random_factors(rng, m, sz);
  Mat S = random_matrix(rng, sz.back(), sz.back());
  auto t0 = random_history_table(rng, m, 0, 1, sz[1], sz[0], 1.0);
  auto t2 = random_history_table(rng, m, 2, 1, sz[3], sz[2], 1.0);
  FactorSequence a = FactorSequence::with_history(f, 0, 1, t0);
  FactorSequence b = FactorSequence::with_history(f, 2, 1, t2);
  CHECK_THROWS_AS(expected_product_quadratic(chain, a, S, b), invalid_argument_error);
}

TEST_CASE("pinned quadratic expectation matches restricted enumeration") {
  std::mt19937 rng(505);
  for (int rep = 0; rep < 60; ++rep) {
    const int N = 2 + rep % 4;
    const int m = 2 + rep % 2;
    MarkovChain chain = rp_test::random_chain(rng, m);
    auto lsz = random_sizes(rng, N);
    auto rsz = random_sizes(rng, N);
    auto q = random_factors(rng, m, lsz);
    auto f = random_factors(rng, m, rsz);
    Mat S = random_matrix(rng, lsz.back(), rsz.back());

    std::map<int, int> pins;
    const int npins = rep % 3;
    for (int i = 0; i < npins; ++i)
      pins[std::uniform_int_distribution<int>(0, N - 1)(rng)] =
          std::uniform_int_distribution<int>(0, m - 1)(rng);

    Mat got = pinned_expected_quadratic(chain, q, S, f, pins);

    Mat want = Mat::Zero(lsz[0], rsz[0]);
    for (const Hist& path : enumerate_paths(m, N)) {
      bool ok = true;
      for (const auto& [t, mode] : pins)
        if (path[static_cast<std::size_t>(t)] != mode) ok = false;
      if (!ok) continue;
      Mat ql = q[0][static_cast<std::size_t>(path[0])];
      Mat fr = f[0][static_cast<std::size_t>(path[0])];
      for (int t = 1; t < N; ++t) {
        ql = q[static_cast<std::size_t>(t)][static_cast<std::size_t>(path[t])] * ql;
        fr = f[static_cast<std::size_t>(t)][static_cast<std::size_t>(path[t])] * fr;
      }
      want += path_probability(chain, path) * (ql.transpose() * S * fr);
    }
    REQUIRE((got - want).cwiseAbs().maxCoeff() <
            1e-12 * (1.0 + want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("suffix tables can be reused across pin sets") {
  std::mt19937 rng(606);
  const int N = 5, m = 3;
  MarkovChain chain = rp_test::random_chain(rng, m);
  auto lsz = random_sizes(rng, N);
  auto rsz = random_sizes(rng, N);
  auto q = random_factors(rng, m, lsz);
  auto f = random_factors(rng, m, rsz);
  Mat S = random_matrix(rng, lsz.back(), rsz.back());
  QuadSuffix sfx = quad_suffix(chain, q, S, f, 2);
  for (int mode0 = 0; mode0 < m; ++mode0)
    for (int mode2 = 0; mode2 < m; ++mode2) {
      std::map<int, int> pins{{0, mode0}, {2, mode2}};
      Mat a = quad_finish(chain, q, f, sfx, pins);
      Mat b = pinned_expected_quadratic(chain, q, S, f, pins);
      REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + b.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("single mode chains collapse to plain products") {
  std::mt19937 rng(707);
  const int N = 4;
  MarkovChain chain = single_mode_chain();
  auto sz = random_sizes(rng, N);
  auto f = random_factors(rng, 1, sz);
  FactorSequence seq = FactorSequence::all_single(f);
  Mat got = expected_product_linear(chain, seq);
  Mat direct = f[0][0];
  for (int t = 1; t < N; ++t) direct = f[static_cast<std::size_t>(t)][0] * direct;
  CHECK(rel_frobenius_error(got, direct) < 1e-13);
}
