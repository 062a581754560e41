#include <catch2/catch_amalgamated.hpp>

#include "robust_pob/equivalence.hpp"
#include "robust_pob/json_io.hpp"
#include "robust_pob/portfolio.hpp"
#include "robust_pob/simulate.hpp"
#include "test_support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace robust_pob;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
  const char* p = std::getenv("ROBUST_POB_CLI");
  REQUIRE(p != nullptr);
  return p;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path log = workdir / "cli_output.txt";
  const std::string cmd =
      "cd " + workdir.string() + " && " + cli_binary() + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("robust_pob_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

void dump(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
}

}  // namespace

TEST_CASE("model JSON round trip preserves the model") {
  std::mt19937 rng(61);
  for (int rep = 0; rep < 6; ++rep) {
    rp_test::ModelShape shape;
    shape.pinned = rep % 2 == 1;
    shape.zero_sigma0 = rep % 3 == 0;
    const MjlsModel md = rp_test::random_model(rng, shape);
    const MjlsModel back = io::model_from_json(io::model_to_json(md));
    REQUIRE(back.N == md.N);
    REQUIRE(back.m() == md.m());
    REQUIRE(back.n_zeta() == md.n_zeta());
    CHECK((back.chain.pi - md.chain.pi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.chain.P - md.chain.P).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.Sigma0 - md.Sigma0).cwiseAbs().maxCoeff() == 0.0);
    for (int t = 0; t < md.N; ++t) {
      for (int mode = 0; mode < md.m(); ++mode) {
        CHECK((back.at(t, mode).A - md.at(t, mode).A).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).B - md.at(t, mode).B).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).Bd - md.at(t, mode).Bd).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).Bs - md.at(t, mode).Bs).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).C - md.at(t, mode).C).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).Dd - md.at(t, mode).Dd).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.at(t, mode).Ds - md.at(t, mode).Ds).cwiseAbs().maxCoeff() == 0.0);
      }
    }
    CHECK(back.known_initial_state.has_value() == md.known_initial_state.has_value());
  }
}

TEST_CASE("policy JSON round trip preserves both bases") {
  std::mt19937 rng(62);
  rp_test::ModelShape shape;
  const MjlsModel md = rp_test::random_model(rng, shape);

  const PobPolicy pob = rp_test::random_policy(rng, md, 1);
  const io::LoadedPolicy back = io::policy_from_json(io::policy_to_json(pob));
  REQUIRE(back.purified);
  const Vec a = pob.flatten();
  const Vec b = back.pob.flatten();
  REQUIRE(a.size() == b.size());
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  const ObPolicy ob = rp_test::random_ob_policy(rng, md, 2);
  const io::LoadedPolicy back_ob = io::policy_from_json(io::policy_to_json(ob));
  REQUIRE_FALSE(back_ob.purified);
  CHECK((back_ob.ob.g[2][3] - ob.g[2][3]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back_ob.ob.G[2][1][3] - ob.G[2][1][3]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spec set JSON round trip") {
  const SpecSet specs = build_portfolio_specs();
  const SpecSet back = io::specs_from_json(io::specs_to_json(specs));
  REQUIRE(back.ellitope.s() == specs.ellitope.s());
  REQUIRE(back.avg_quad.size() == specs.avg_quad.size());
  for (std::size_t i = 0; i < specs.avg_quad.size(); ++i) {
    CHECK((back.avg_quad[i].A - specs.avg_quad[i].A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.avg_quad[i].beta - specs.avg_quad[i].beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.avg_quad[i].gamma == specs.avg_quad[i].gamma);
    CHECK(back.avg_quad[i].label == specs.avg_quad[i].label);
  }
}

TEST_CASE("malformed policy JSON is rejected with a parse_error") {
  json j = io::policy_to_json(PobPolicy::zeros(2, 1, 2, 1, 1));
  j["entries"][0]["hist"] = json::array({9});
  CHECK_THROWS_AS(io::policy_from_json(j), parse_error);
  j = io::policy_to_json(PobPolicy::zeros(2, 1, 2, 1, 1));
  j["entries"][0]["values"] = json::array();
  CHECK_THROWS_AS(io::policy_from_json(j), parse_error);
}

TEST_CASE("portfolio-example runs end to end with exit 0") {
  const fs::path dir = fresh_dir("portfolio");
  const CliResult res = run_cli("portfolio-example --out " + dir.string(), dir);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  for (const char* name : {"model.json", "specs.json", "policy.json", "report.json",
                           "simulation_report.json", "scenario_quantiles.csv"})
    CHECK(fs::exists(dir / name));
  CHECK(fs::exists(dir / "trajectory_099.csv"));

  const json report = load(dir / "report.json");
  CHECK(report.at("status") == "feasible");
  const json sim = load(dir / "simulation_report.json");
  REQUIRE(sim.at("specs").size() == 4);
  for (const auto& s : sim.at("specs")) {
    CHECK(s.at("satisfied").get<bool>());
    CHECK(s.at("exact_value").get<double>() <= s.at("gamma").get<double>() + 1e-6);
  }
  // Scenario counts over the eight mode paths add up to the realization count.
  int total = 0;
  for (const auto& g : sim.at("path_groups")) total += g.at("count").get<int>();
  CHECK(total == 100);

  // The emitted model and policy reload cleanly.
  const MjlsModel md = io::model_from_json(load(dir / "model.json"));
  CHECK(md.N == 3);
  const io::LoadedPolicy pol = io::policy_from_json(load(dir / "policy.json"));
  CHECK(pol.purified);
  CHECK(pol.pob.T == 2);
}

TEST_CASE("synthesize exit codes cover feasible, infeasible and parse errors") {
  const fs::path dir = fresh_dir("synthesize");
  dump(dir / "model.json", io::model_to_json(build_portfolio_model()));
  dump(dir / "specs.json", io::specs_to_json(build_portfolio_specs()));

  SECTION("portfolio files with T=2 are feasible") {
    const CliResult res = run_cli("synthesize --model model.json --specs specs.json"
                                  " --memory 2 --out run",
                                  dir);
    INFO(res.output);
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir / "run" / "policy.json"));
  }

  SECTION("PSD quadratic with gamma = -1e6 is infeasible with gamma_minus reported") {
    json specs = io::specs_to_json(build_portfolio_specs());
    specs["avg_quad"] = json::array({specs["avg_quad"][0]});
    specs["avg_quad"][0]["gamma"] = -1e6;
    dump(dir / "bad_specs.json", specs);
    const CliResult res = run_cli("synthesize --model model.json --specs bad_specs.json"
                                  " --memory 2 --out run_inf",
                                  dir);
    INFO(res.output);
    CHECK(res.exit_code == 2);
    const json report = load(dir / "run_inf" / "report.json");
    CHECK(report.at("status") == "infeasible");
    REQUIRE(report.contains("gamma_minus"));
    // The best achievable level is far above the requested one.
    CHECK(report.at("gamma_minus")[0].get<double>() > -1e6);
  }

  SECTION("malformed JSON exits 4 and reports line/column") {
    std::ofstream(dir / "broken.json") << "{ \"N\": 3, oops";
    const CliResult res = run_cli("synthesize --model broken.json --specs specs.json"
                                  " --memory 2 --out run_bad",
                                  dir);
    CHECK(res.exit_code == 4);
    CHECK(res.output.find("column") != std::string::npos);
  }

  SECTION("memory out of range exits 4") {
    const CliResult res = run_cli("synthesize --model model.json --specs specs.json"
                                  " --memory 3 --out run_mem",
                                  dir);
    CHECK(res.exit_code == 4);
  }
}

TEST_CASE("simulate is deterministic and validates dimensions") {
  const fs::path dir = fresh_dir("simulate");
  dump(dir / "model.json", io::model_to_json(build_portfolio_model()));
  dump(dir / "specs.json", io::specs_to_json(build_portfolio_specs()));
  const CliResult syn = run_cli("synthesize --model model.json --specs specs.json"
                                " --memory 2 --out syn",
                                dir);
  REQUIRE(syn.exit_code == 0);

  SECTION("seed repetition reproduces identical bytes") {
    const std::string args = "simulate --model model.json --policy syn/policy.json"
                             " --specs specs.json --samples 40 --seed 11 --out ";
    REQUIRE(run_cli(args + "sim_a", dir).exit_code == 0);
    REQUIRE(run_cli(args + "sim_b", dir).exit_code == 0);
    for (const char* name : {"trajectory_000.csv", "trajectory_039.csv",
                             "scenario_quantiles.csv", "report.json"})
      CHECK(slurp(dir / "sim_a" / name) == slurp(dir / "sim_b" / name));
    // A different seed changes the draws.
    REQUIRE(run_cli("simulate --model model.json --policy syn/policy.json --specs specs.json"
                    " --samples 40 --seed 12 --out sim_c",
                    dir)
                .exit_code == 0);
    CHECK(slurp(dir / "sim_a" / "trajectory_000.csv") !=
          slurp(dir / "sim_c" / "trajectory_000.csv"));
  }

  SECTION("policy/model dimension mismatch exits 4") {
    json model = load(dir / "model.json");
    model["n_u"] = 1;
    for (auto& stage : model["matrices"])
      for (auto& e : stage) e["B"] = json::array({json::array({1.0}), json::array({0.0})});
    dump(dir / "model_mismatch.json", model);
    const CliResult res = run_cli("simulate --model model_mismatch.json --policy syn/policy.json"
                                  " --samples 5 --seed 1 --out sim_mm",
                                  dir);
    CHECK(res.exit_code == 4);
  }
}

TEST_CASE("zero policy and zero uncertainty give constant trajectories") {
  // Identity dynamics with a pinned start, no disturbance energy and no noise:
  // every column of the dump is constant over time.
  MjlsModel md;
  md.N = 4;
  md.chain = single_mode_chain();
  md.n_x = 2;
  md.n_u = 1;
  md.n_d = 1;
  md.n_e = 0;
  md.n_y = 2;
  md.Sigma0 = Mat::Zero(2, 2);
  ModeMatrices mm;
  mm.A = Mat::Identity(2, 2);
  mm.B = Mat::Zero(2, 1);
  mm.Bd = Mat::Zero(2, 1);
  mm.Bs = Mat::Zero(2, 0);
  mm.C = Mat::Identity(2, 2);
  mm.Dd = Mat::Zero(2, 1);
  mm.Ds = Mat::Zero(2, 0);
  md.mats.assign(4, {mm});
  md.known_initial_state = Vec(2);
  (*md.known_initial_state) << 3.0, -1.0;
  md.validate();

  const fs::path dir = fresh_dir("constant");
  dump(dir / "model.json", io::model_to_json(md));
  dump(dir / "policy.json", io::policy_to_json(PobPolicy::zeros(4, 0, 1, 1, 2)));
  const CliResult res = run_cli("simulate --model model.json --policy policy.json"
                                " --samples 3 --seed 5 --out sim",
                                dir);
  INFO(res.output);
  REQUIRE(res.exit_code == 0);
  std::istringstream csv(slurp(dir / "sim" / "trajectory_000.csv"));
  std::string header, first, line;
  std::getline(csv, header);
  CHECK(header == "t,x_1,x_2,u_1,y_1,y_2,v_1,v_2");
  std::getline(csv, first);
  int rows = 1;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    ++rows;
    // Identical except for the leading time index.
    CHECK(line.substr(line.find(',')) == first.substr(first.find(',')));
  }
  CHECK(rows == 4);
}

TEST_CASE("verify passes on the default sizes within budget") {
  const fs::path dir = fresh_dir("verify");
  const auto start = std::chrono::steady_clock::now();
  const CliResult res = run_cli("verify --seed 3", dir);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  INFO(res.output);
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("PASS") != std::string::npos);
  CHECK(elapsed < 60.0);
}
