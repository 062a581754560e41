// robust_pob command line tool.
//
// Subcommands:
//   synthesize         solve the policy design SDP for a model + spec file pair
//   simulate           roll out a saved policy, emit trajectories and a report
//   verify             randomized oracle suites (expectation recursions, S-lemma)
//   portfolio-example  built-in two-asset portfolio instance, end to end
//
// Exit codes: 0 success/feasible, 1 verification failure, 2 infeasible,
// 3 solver failure, 4 parse or dimension errors.

#include "robust_pob/ascent.hpp"
#include "robust_pob/equivalence.hpp"
#include "robust_pob/json_io.hpp"
#include "robust_pob/portfolio.hpp"
#include "robust_pob/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace robust_pob;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitSolverFailure = 3;
constexpr int kExitParse = 4;

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports byte position; recover line/column for the message.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << path.string() << ":" << line << ":" << col << ": " << e.what();
    throw parse_error(msg.str());
  }
}

void write_text_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Fixed formatting keeps CSV output byte-identical across runs with one seed.
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::feasible:
      return kExitOk;
    case SolveStatus::infeasible:
      return kExitInfeasible;
    default:
      return kExitSolverFailure;
  }
}

// ---------------------------------------------------------------------------
// synthesize

int cmd_synthesize(const std::string& model_path, const std::string& specs_path, int T,
                   const std::string& out_dir, double tol_psd, bool deterministic) {
  MjlsModel model;
  SpecSet specs;
  try {
    model = io::model_from_json(load_json_file(model_path));
    specs = io::specs_from_json(load_json_file(specs_path));
    if (T < 0 || T >= model.N)
      throw parse_error("--memory must satisfy 0 <= T <= N-1 (N = " + std::to_string(model.N) + ")");
  } catch (const std::exception& e) {
    std::cerr << "robust_pob: " << e.what() << "\n";
    return kExitParse;
  }

  SynthesisOptions opts;
  opts.solver.psd_tol = tol_psd;
  opts.solver.deterministic = deterministic;
  SynthesisReport rep;
  try {
    rep = synthesize(model, T, specs, opts);
  } catch (const std::exception& e) {
    std::cerr << "robust_pob: synthesis failed: " << e.what() << "\n";
    return kExitSolverFailure;
  }

  fs::create_directories(out_dir);
  write_json_file(fs::path(out_dir) / "report.json", io::synthesis_report_to_json(rep));
  if (rep.policy) write_json_file(fs::path(out_dir) / "policy.json", io::policy_to_json(*rep.policy));
  std::cout << "synthesize: " << to_string(rep.status) << " (memory T = " << T;
  if (std::isfinite(rep.max_violation))
    std::cout << ", max PSD violation " << fmt(rep.max_violation);
  std::cout << ")\n";
  return exit_code_for(rep.status);
}

// ---------------------------------------------------------------------------
// simulate (shared with portfolio-example)

struct SimOutcome {
  int exit_code = kExitOk;
  json report;
};

std::string path_key(const Hist& path) {
  std::string key;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) key += '-';
    key += std::to_string(path[i] + 1);  // modes are 1-based on disk
  }
  return key;
}

// Linear-interpolation quantile of an already sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

SimOutcome run_simulation(const MjlsModel& model, const io::LoadedPolicy& pol, const SpecSet& specs,
                          std::int64_t samples, std::uint64_t seed, const fs::path& out_dir,
                          const std::string& report_name) {
  SimOutcome out;
  const int N = model.N;
  const int n_x = model.n_x;
  const int n_u = model.n_u;
  const int n_y = model.n_y;

  const bool have_ellitope =
      !specs.ellitope.Qs.empty() && specs.ellitope.dim() == model.n_zeta();
  std::optional<EllitopeSampler> sampler;
  if (have_ellitope) sampler.emplace(specs.ellitope);

  // Scenario i is drawn from RandomStream(seed, i); uncertain data alternates
  // between the ellitope boundary and its interior so worst-case behaviour is
  // represented without abandoning typical draws.
  struct Scenario {
    Hist path;
    Vec zeta;
    Rollout roll;
  };
  std::vector<Scenario> scen(static_cast<std::size_t>(samples));
  parallel_for(static_cast<std::int64_t>(samples), [&](std::int64_t i) {
    RandomStream rs(seed, static_cast<std::uint64_t>(i));
    Scenario& s = scen[static_cast<std::size_t>(i)];
    s.path = sample_path(model.chain, rs, N);
    if (sampler)
      s.zeta = (i % 2 == 0) ? sampler->boundary(rs) : sampler->interior(rs);
    else
      s.zeta = Vec::Zero(model.n_zeta());
    const Vec eps = draw_eps(model, rs);
    s.roll = pol.purified ? rollout_pob(model, pol.pob, s.path, s.zeta, eps)
                          : rollout_ob(model, pol.ob, s.path, s.zeta, eps);
  });

  fs::create_directories(out_dir);

  // Per-scenario trajectory dumps (first 100 at most). Row t carries the
  // post-transition state x_{t+1} next to the stage-t input and outputs.
  const std::int64_t n_dump = std::min<std::int64_t>(samples, 100);
  for (std::int64_t i = 0; i < n_dump; ++i) {
    std::ostringstream csv;
    csv << "t";
    for (int k = 0; k < n_x; ++k) csv << ",x_" << (k + 1);
    for (int k = 0; k < n_u; ++k) csv << ",u_" << (k + 1);
    for (int k = 0; k < n_y; ++k) csv << ",y_" << (k + 1);
    for (int k = 0; k < n_y; ++k) csv << ",v_" << (k + 1);
    csv << "\n";
    const Rollout& r = scen[static_cast<std::size_t>(i)].roll;
    for (int t = 0; t < N; ++t) {
      csv << t;
      for (int k = 0; k < n_x; ++k) csv << "," << fmt(r.w[t * n_x + k]);
      for (int k = 0; k < n_u; ++k) csv << "," << fmt(r.w[N * n_x + t * n_u + k]);
      for (int k = 0; k < n_y; ++k) csv << "," << fmt(r.y[t * n_y + k]);
      for (int k = 0; k < n_y; ++k) csv << "," << fmt(r.v[t * n_y + k]);
      csv << "\n";
    }
    char name[32];
    std::snprintf(name, sizeof(name), "trajectory_%03d.csv", static_cast<int>(i));
    write_text_file(out_dir / name, csv.str());
  }

  // Group scenarios by their full mode path, mirroring the scenario matrix
  // used in the portfolio example.
  std::map<Hist, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scen.size(); ++i) groups[scen[i].path].push_back(i);

  // Boxplot-ready quantiles of every state and input coordinate per group.
  {
    std::ostringstream csv;
    csv << "path,t,coord,count,min,q25,median,q75,max\n";
    auto emit = [&](const Hist& path, const std::vector<std::size_t>& members, int t,
                    const std::string& coord, auto getter) {
      std::vector<double> vals;
      vals.reserve(members.size());
      for (std::size_t i : members) vals.push_back(getter(scen[i].roll));
      std::sort(vals.begin(), vals.end());
      csv << path_key(path) << "," << t << "," << coord << "," << vals.size() << ","
          << fmt(vals.front()) << "," << fmt(quantile_sorted(vals, 0.25)) << ","
          << fmt(quantile_sorted(vals, 0.5)) << "," << fmt(quantile_sorted(vals, 0.75)) << ","
          << fmt(vals.back()) << "\n";
    };
    for (const auto& [path, members] : groups) {
      for (int t = 0; t < N; ++t) {
        for (int k = 0; k < n_x; ++k)
          emit(path, members, t, "x_" + std::to_string(k + 1),
               [&](const Rollout& r) { return r.w[t * n_x + k]; });
        for (int k = 0; k < n_u; ++k)
          emit(path, members, t, "u_" + std::to_string(k + 1),
               [&](const Rollout& r) { return r.w[N * n_x + t * n_u + k]; });
      }
    }
    write_text_file(out_dir / "scenario_quantiles.csv", csv.str());
  }

  // Exact conditional expectations need the purified-output form; observation
  // based policies with full memory are converted, shorter memories fall back
  // to Monte Carlo only.
  std::optional<PobPolicy> pob_for_exact;
  if (pol.purified) {
    pob_for_exact = pol.pob;
  } else if (pol.ob.T == N - 1) {
    pob_for_exact = ob_to_pob(model, pol.ob);
  }
  double paths_total = 1.0;
  for (int t = 0; t < N; ++t) paths_total *= model.m();
  const bool exact_ok = pob_for_exact.has_value() && paths_total <= 1e6;

  json spec_reports = json::array();
  for (std::size_t l = 0; l < specs.avg_quad.size(); ++l) {
    const QuadSpec& q = specs.avg_quad[l];
    json entry;
    entry["spec_id"] = q.label.empty() ? ("avg_quad[" + std::to_string(l) + "]") : q.label;
    entry["gamma"] = q.gamma;

    double mean = 0.0, sq = 0.0;
    for (const Scenario& s : scen) {
      const double val = s.roll.w.dot(q.A * s.roll.w) + 2.0 * q.beta.dot(s.roll.w);
      mean += val;
      sq += val * val;
    }
    mean /= static_cast<double>(samples);
    const double var =
        std::max(0.0, sq / static_cast<double>(samples) - mean * mean);
    const double stderr_mc =
        samples > 1 ? std::sqrt(var / static_cast<double>(samples - 1)) : 0.0;
    entry["mc_value"] = mean;
    entry["stderr"] = stderr_mc;

    if (exact_ok) {
      // Worst exact expectation over the sampled uncertain data.
      double worst = -std::numeric_limits<double>::infinity();
      for (const Scenario& s : scen)
        worst = std::max(worst,
                         exact_spec_value(model, *pob_for_exact, s.zeta, q.A, q.beta));
      entry["exact_value"] = worst;
      entry["satisfied"] = worst <= q.gamma + 1e-6;
      if (!(worst <= q.gamma + 1e-6)) out.exit_code = kExitVerifyFailed;
    } else {
      entry["exact_value"] = nullptr;
      entry["satisfied"] = mean <= q.gamma + 3.0 * stderr_mc;
    }
    spec_reports.push_back(std::move(entry));
  }

  json group_reports = json::array();
  for (const auto& [path, members] : groups) {
    json g;
    g["path"] = io::hist_to_json(path);
    g["key"] = path_key(path);
    g["count"] = members.size();
    g["probability"] = path_probability(model.chain, path);
    json means = json::array();
    for (const QuadSpec& q : specs.avg_quad) {
      double mean = 0.0;
      for (std::size_t i : members) {
        const Vec& w = scen[i].roll.w;
        mean += w.dot(q.A * w) + 2.0 * q.beta.dot(w);
      }
      means.push_back(mean / static_cast<double>(members.size()));
    }
    g["mean_values"] = std::move(means);
    group_reports.push_back(std::move(g));
  }

  out.report["n_scenarios"] = samples;
  out.report["seed"] = seed;
  out.report["exact_available"] = exact_ok;
  out.report["specs"] = std::move(spec_reports);
  out.report["path_groups"] = std::move(group_reports);
  write_json_file(out_dir / report_name, out.report);
  return out;
}

int cmd_simulate(const std::string& model_path, const std::string& policy_path,
                 const std::string& specs_path, std::int64_t samples, std::uint64_t seed,
                 const std::string& out_dir) {
  MjlsModel model;
  io::LoadedPolicy pol;
  SpecSet specs;
  try {
    model = io::model_from_json(load_json_file(model_path));
    pol = io::policy_from_json(load_json_file(policy_path));
    if (!specs_path.empty()) specs = io::specs_from_json(load_json_file(specs_path));
    const int pN = pol.purified ? pol.pob.N : pol.ob.N;
    const int pm = pol.purified ? pol.pob.m : pol.ob.m;
    const int pu = pol.purified ? pol.pob.n_u : pol.ob.n_u;
    const int py = pol.purified ? pol.pob.n_y : pol.ob.n_y;
    if (pN != model.N || pm != model.m() || pu != model.n_u || py != model.n_y)
      throw parse_error("policy dimensions do not match the model");
    if (samples < 1) throw parse_error("--samples must be >= 1");
  } catch (const std::exception& e) {
    std::cerr << "robust_pob: " << e.what() << "\n";
    return kExitParse;
  }
  const SimOutcome out =
      run_simulation(model, pol, specs, samples, seed, out_dir, "report.json");
  std::cout << "simulate: " << samples << " scenarios, report at "
            << (fs::path(out_dir) / "report.json").string() << "\n";
  return out.exit_code;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyCounts {
  int expectation_reps = 60;
  int slemma_reps = 12;
};

// Random factor sequence with consistent chaining dimensions, optionally with
// one history-indexed position.
FactorSequence random_factor_sequence(std::mt19937_64& rng, int m, int N, bool with_history) {
  std::uniform_int_distribution<int> dim(1, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<int> dims(static_cast<std::size_t>(N) + 1);
  for (int& d : dims) d = dim(rng);
  auto rand_mat = [&](int r, int c) {
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = gauss(rng);
    return M;
  };
  std::vector<std::vector<Mat>> single(static_cast<std::size_t>(N));
  for (int t = 0; t < N; ++t) {
    single[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(m));
    for (int mode = 0; mode < m; ++mode)
      single[static_cast<std::size_t>(t)][static_cast<std::size_t>(mode)] =
          rand_mat(dims[static_cast<std::size_t>(t) + 1], dims[static_cast<std::size_t>(t)]);
  }
  if (!with_history) return FactorSequence::all_single(std::move(single));
  std::uniform_int_distribution<int> pick_t(0, N - 1);
  const int tau = pick_t(rng);
  std::uniform_int_distribution<int> pick_T(0, N - 1);
  const int T = pick_T(rng);
  std::map<Hist, Mat> table;
  for (const Hist& h : enumerate_paths(m, history_length(tau, T)))
    table[h] = rand_mat(dims[static_cast<std::size_t>(tau) + 1], dims[static_cast<std::size_t>(tau)]);
  return FactorSequence::with_history(std::move(single), tau, T, std::move(table));
}

MarkovChain random_chain_cli(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  MarkovChain chain;
  chain.m = m;
  chain.pi = Vec(m);
  for (int i = 0; i < m; ++i) chain.pi[i] = unif(rng);
  chain.pi /= chain.pi.sum();
  chain.P = Mat(m, m);
  for (int c = 0; c < m; ++c) {
    for (int r = 0; r < m; ++r) chain.P(r, c) = unif(rng);
    chain.P.col(c) /= chain.P.col(c).sum();
  }
  return chain;
}

bool verify_expectation_suite(std::uint64_t seed, int reps) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_m(1, 3);
  std::uniform_int_distribution<int> pick_N(1, 5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    const int m = pick_m(rng);
    const int N = pick_N(rng);
    const MarkovChain chain = random_chain_cli(rng, m);
    const bool hist = rep % 2 == 1;
    if (rep % 3 != 2) {
      const FactorSequence seq = random_factor_sequence(rng, m, N, hist);
      const Mat got = expected_product_linear(chain, seq);
      const Mat want = brute_force_expectation(chain, seq);
      worst = std::max(worst, rel_frobenius_error(got, want));
    } else {
      const FactorSequence left = random_factor_sequence(rng, m, N, hist);
      const FactorSequence right = random_factor_sequence(rng, m, N, false);
      Mat S(left.rows_at(N - 1), right.rows_at(N - 1));
      for (Eigen::Index i = 0; i < S.rows(); ++i)
        for (Eigen::Index j = 0; j < S.cols(); ++j) S(i, j) = gauss(rng);
      const Mat got = expected_product_quadratic(chain, left, S, right);
      const Mat want = brute_force_expectation(chain, left, S, right);
      worst = std::max(worst, rel_frobenius_error(got, want));
    }
  }
  std::cout << "verify: expectation recursions vs enumeration, " << reps
            << " instances, worst relative error " << fmt(worst) << " -> "
            << (worst <= 1e-10 ? "PASS" : "FAIL") << "\n";
  return worst <= 1e-10;
}

bool verify_slemma_suite(std::uint64_t seed, int reps) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> pick_n(1, 4);
  std::uniform_int_distribution<int> pick_s(1, 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  bool ok = true;
  double worst_gap = 0.0;
  for (int rep = 0; rep < reps && ok; ++rep) {
    const int n = pick_n(rng);
    const int s = pick_s(rng);
    Ellitope ell;
    for (int i = 0; i < s; ++i) {
      Mat F(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) F(r, c) = gauss(rng);
      Mat Q = F.transpose() * F / static_cast<double>(n);
      if (i == 0) Q += 0.3 * Mat::Identity(n, n);
      ell.Qs.push_back(Q);
    }
    Mat V(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) V(r, c) = gauss(rng);
    V = Mat((V + V.transpose()) / 2.0);
    Vec b(n);
    for (int i = 0; i < n; ++i) b[i] = gauss(rng);

    const SolverResult res = slemma_sdp_value(ell, V, b);
    if (res.status != SolveStatus::feasible && res.status != SolveStatus::inaccurate) {
      std::cout << "verify: S-lemma SDP did not solve (instance " << rep << ")\n";
      ok = false;
      break;
    }
    const double sdp = res.objective;
    double opt = ellitope_max_ascent(ell, V, b, 64, seed + static_cast<std::uint64_t>(rep)).value;
    if (s == 1) opt = std::max(opt, max_quad_single_ellipsoid(ell, V, b).value);
    const double scale = 1.0 + std::abs(opt);
    if (opt > sdp + 1e-6 * scale) ok = false;                      // SDP must upper-bound
    if (sdp > tightness_factor(s) * opt + 1e-6 * scale) ok = false;  // within the factor
    if (s == 1 && std::abs(sdp - opt) > 1e-4 * scale) ok = false;    // exact for one ellipsoid
    worst_gap = std::max(worst_gap, (sdp - opt) / scale);
  }
  std::cout << "verify: S-lemma sandwich, " << reps << " instances, worst scaled gap "
            << fmt(worst_gap) << " -> " << (ok ? "PASS" : "FAIL") << "\n";
  return ok;
}

int cmd_verify(std::uint64_t seed, const std::string& sizes) {
  VerifyCounts counts;
  if (sizes == "medium") {
    counts.expectation_reps = 150;
    counts.slemma_reps = 30;
  }
  bool ok = verify_expectation_suite(seed, counts.expectation_reps);
  ok = verify_slemma_suite(seed, counts.slemma_reps) && ok;
  std::cout << "verify: " << (ok ? "all suites passed" : "FAILURES detected") << "\n";
  return ok ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------
// portfolio-example

int cmd_portfolio_example(const std::string& out_dir) {
  const PortfolioData data;
  const MjlsModel model = build_portfolio_model(data);
  SpecSet specs = build_portfolio_specs(data);

  fs::create_directories(out_dir);
  write_json_file(fs::path(out_dir) / "model.json", io::model_to_json(model));
  write_json_file(fs::path(out_dir) / "specs.json", io::specs_to_json(specs));
  std::cout << "portfolio-example: naive re-balancing income target "
            << fmt(naive_rebalance_income(data)) << "\n";

  const int T = 2;
  SynthesisReport rep;
  try {
    rep = synthesize(model, T, specs);
  } catch (const std::exception& e) {
    std::cerr << "robust_pob: synthesis failed: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  write_json_file(fs::path(out_dir) / "report.json", io::synthesis_report_to_json(rep));
  std::cout << "portfolio-example: synthesis with T = " << T << " -> " << to_string(rep.status)
            << "\n";
  if (rep.status != SolveStatus::feasible || !rep.policy) return exit_code_for(rep.status);
  write_json_file(fs::path(out_dir) / "policy.json", io::policy_to_json(*rep.policy));

  io::LoadedPolicy pol;
  pol.purified = true;
  pol.pob = *rep.policy;
  const SimOutcome sim =
      run_simulation(model, pol, specs, 100, 1, out_dir, "simulation_report.json");
  // The income spec value omits the constant U_tar^2; add it back so the
  // console shows the mean squared income deviation itself.
  const double u_tar = naive_rebalance_income(data);
  for (const auto& g : sim.report["path_groups"]) {
    std::cout << "portfolio-example: path " << g["key"].get<std::string>() << " ("
              << g["count"].get<int>() << " scenarios)";
    if (!g["mean_values"].empty())
      std::cout << ", mean squared income deviation "
                << fmt(g["mean_values"][0].get<double>() + u_tar * u_tar);
    std::cout << "\n";
  }
  std::cout << "portfolio-example: outputs written to " << out_dir << "\n";
  return sim.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust_pob: purified-output policy synthesis for Markov jump linear systems"};
  app.require_subcommand(1);

  std::string model_path, specs_path, policy_path, out_dir = ".", sizes = "small";
  int memory = 0;
  std::int64_t samples = 100;
  std::uint64_t seed = 1;
  double tol_psd = 1e-7;
  bool deterministic = false;

  auto* syn = app.add_subcommand("synthesize", "solve the policy design SDP");
  syn->add_option("--model", model_path, "model JSON file")->required();
  syn->add_option("--specs", specs_path, "specification JSON file")->required();
  syn->add_option("--memory", memory, "switching memory T")->required();
  syn->add_option("--out", out_dir, "output directory")->required();
  syn->add_option("--tol-psd", tol_psd, "acceptance threshold on PSD residuals");
  syn->add_flag("--deterministic-solver", deterministic, "single-threaded solver backend");

  auto* sim = app.add_subcommand("simulate", "roll out a saved policy");
  sim->add_option("--model", model_path, "model JSON file")->required();
  sim->add_option("--policy", policy_path, "policy JSON file")->required();
  sim->add_option("--specs", specs_path, "specification JSON file (enables uncertain-data draws)");
  sim->add_option("--samples", samples, "number of scenarios")->required();
  sim->add_option("--seed", seed, "scenario seed")->required();
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* ver = app.add_subcommand("verify", "randomized oracle suites");
  ver->add_option("--seed", seed, "suite seed")->required();
  ver->add_option("--sizes", sizes, "suite sizes")->check(CLI::IsMember({"small", "medium"}));

  auto* pf = app.add_subcommand("portfolio-example", "built-in two-asset example");
  pf->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (syn->parsed())
      return cmd_synthesize(model_path, specs_path, memory, out_dir, tol_psd, deterministic);
    if (sim->parsed())
      return cmd_simulate(model_path, policy_path, specs_path, samples, seed, out_dir);
    if (ver->parsed()) return cmd_verify(seed, sizes);
    if (pf->parsed()) return cmd_portfolio_example(out_dir);
  } catch (const parse_error& e) {
    std::cerr << "robust_pob: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "robust_pob: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}
