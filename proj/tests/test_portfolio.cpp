#include <catch2/catch_amalgamated.hpp>

#include "robust_pob/portfolio.hpp"
#include "robust_pob/simulate.hpp"

using namespace robust_pob;

TEST_CASE("portfolio data reproduces the frozen reference numbers") {
  const PortfolioData data;

  SECTION("disturbance budgets") {
    // Asset 1 at t=0: gamma^2 (100 + 10 + 10)^2.
    CHECK(portfolio_disturbance_budget(data, 0, 0) == Catch::Approx(0.0144).epsilon(1e-12));
    // Budgets grow with t for both assets.
    for (int asset = 0; asset < 2; ++asset)
      for (int t = 1; t < 3; ++t)
        CHECK(portfolio_disturbance_budget(data, t, asset) >
              portfolio_disturbance_budget(data, t - 1, asset));
  }

  SECTION("regime marginals and path mass") {
    const MjlsModel md = build_portfolio_model(data);
    const Vec m0 = md.chain.marginal(0);
    const Vec m1 = md.chain.marginal(1);
    const Vec m2 = md.chain.marginal(2);
    CHECK(m0[0] == Catch::Approx(0.1).margin(1e-12));
    CHECK(m1[0] == Catch::Approx(0.29).margin(1e-12));
    CHECK(m1[1] == Catch::Approx(0.71).margin(1e-12));
    CHECK(m2[0] == Catch::Approx(0.271).margin(1e-12));
    CHECK(m2[1] == Catch::Approx(0.729).margin(1e-12));
    CHECK(path_probability(md.chain, Hist{1, 1, 1}) == Catch::Approx(0.441).margin(1e-12));
  }

  SECTION("income target from naive rebalancing") {
    const double u_tar = naive_rebalance_income(data);
    CHECK(u_tar == Catch::Approx(-17.67490362).margin(1e-6));
    CHECK(std::abs(u_tar - (-17.675)) < 1e-3);
  }

  SECTION("model and ellitope shapes") {
    const MjlsModel md = build_portfolio_model(data);
    CHECK(md.n_zeta() == 6);
    CHECK(md.n_zeta_full() == 8);
    CHECK(md.n_w() == 12);
    CHECK(has_noise_channel(md) == false);
    const Ellitope ell = build_portfolio_ellitope(data);
    CHECK(ell.s() == 6);
    CHECK(ell.dim() == 6);
    CHECK(dim_of_policy(md.N, 2, md.m(), md.n_u, md.n_y) == 164);
  }
}

TEST_CASE("portfolio synthesis with full memory is feasible and validates") {
  const PortfolioData data;
  const MjlsModel md = build_portfolio_model(data);
  const SpecSet specs = build_portfolio_specs(data);
  const int T = 2;

  const SynthesisReport rep = synthesize(md, T, specs);
  INFO(rep.solver.message << " / " << rep.solver.solver_status
                          << " iters=" << rep.solver.iterations);
  REQUIRE(rep.status == SolveStatus::feasible);
  REQUIRE(rep.policy.has_value());
  CHECK(rep.max_violation <= 1e-6);

  // Spot-check the certificate: expected spec values at boundary draws of the
  // disturbance set must stay below the levels.
  const EllitopeSampler sampler(specs.ellitope);
  RandomStream rs(4242);
  for (int k = 0; k < 6; ++k) {
    const Vec zeta = sampler.boundary(rs);
    for (const QuadSpec& spec : specs.avg_quad) {
      const double val = exact_spec_value(md, *rep.policy, zeta, spec.A, spec.beta);
      INFO(spec.label << " draw " << k);
      CHECK(val <= spec.gamma + 1e-6);
    }
  }
}
