// SDP backend: serializes a ConicProgram to JSON, runs a short-lived Python
// worker that calls cvxopt.solvers.sdp, and maps the outcome back. Feasibility
// claims are re-checked in process by measuring the PSD violation of the
// returned point, so an over-optimistic backend status cannot leak through.
//
// Interpreter resolution: SolverOptions::python, else the ROBUST_POB_PYTHON
// environment variable, else "python3".
#pragma once

#include "robust_pob/conic.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

namespace robust_pob {

struct SolverOptions {
  bool deterministic = false;  // single-threaded BLAS in the worker
  int maxiters = 200;
  double abstol = 1e-8;
  double reltol = 1e-8;
  double feastol = 1e-8;
  double psd_tol = 1e-7;    // acceptance threshold when the backend reports "unknown"
  double var_bound = 1e6;   // |x_i| box added for conditioning; <= 0 disables
  std::string python;
};

namespace detail {

inline const char* cvxopt_worker_script() {
  return R"PY(
import json
import sys


def emit(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f)


def main():
    inp, outp = sys.argv[1], sys.argv[2]
    with open(inp) as f:
        prob = json.load(f)
    try:
        import numpy as np
        from cvxopt import matrix, spmatrix, solvers
    except Exception as exc:
        emit(outp, {"status": "import-error", "message": repr(exc)})
        return

    n = prob["n"]
    c = matrix(np.array(prob["c"], dtype=float).reshape(n, 1))
    Gl = None
    hl = None
    ml = prob["gl"]["m"]
    if ml:
        t = prob["gl"]["triplets"]
        Gl = spmatrix([float(x[2]) for x in t], [int(x[0]) for x in t],
                      [int(x[1]) for x in t], (ml, n))
        hl = matrix(np.array(prob["gl"]["h"], dtype=float).reshape(ml, 1))
    Gs = []
    hs = []
    for blk in prob["blocks"]:
        d = blk["dim"]
        H = np.zeros((d, d))
        for r, cc, v in blk["h"]:
            H[int(r), int(cc)] += float(v)
        hs.append(matrix(H))
        vals = []
        rows = []
        cols = []
        for var, r, cc, v in blk["g"]:
            rows.append(int(cc) * d + int(r))  # column-major vec of the block
            cols.append(int(var))
            vals.append(-float(v))
        Gs.append(spmatrix(vals, rows, cols, (d * d, n)))
    A = None
    b = None
    meq = prob["eq"]["m"]
    if meq:
        t = prob["eq"]["triplets"]
        A = spmatrix([float(x[2]) for x in t], [int(x[0]) for x in t],
                     [int(x[1]) for x in t], (meq, n))
        b = matrix(np.array(prob["eq"]["b"], dtype=float).reshape(meq, 1))

    opts = prob.get("opts", {})
    solvers.options["show_progress"] = False
    if "maxiters" in opts:
        solvers.options["maxiters"] = int(opts["maxiters"])
    for key in ("abstol", "reltol", "feastol"):
        if key in opts:
            solvers.options[key] = float(opts[key])
    try:
        sol = solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, A=A, b=b)
    except Exception as exc:
        emit(outp, {"status": "solver-error", "message": repr(exc)})
        return

    x = None
    if sol.get("x") is not None:
        x = [float(v) for v in sol["x"]]
    diag = {}
    for key in ("primal objective", "dual objective", "gap", "relative gap",
                "primal infeasibility", "dual infeasibility"):
        v = sol.get(key)
        if isinstance(v, (int, float)):
            diag[key] = float(v)
    emit(outp, {
        "status": sol.get("status", "unknown"),
        "x": x,
        "obj": diag.get("primal objective"),
        "iterations": int(sol.get("iterations", -1)),
        "diagnostics": diag,
    })


main()
)PY";
}

inline std::filesystem::path unique_temp_path(const char* stem, const char* ext) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream name;
  name << stem << "_" << ::getpid() << "_" << counter.fetch_add(1) << ext;
  return std::filesystem::temp_directory_path() / name.str();
}

inline nlohmann::json program_to_json(const ConicProgram& prog, const SolverOptions& opts) {
  nlohmann::json j;
  j["n"] = prog.n_vars;
  j["c"] = prog.objective;
  nlohmann::json gl;
  auto triplets = nlohmann::json::array();
  auto h = nlohmann::json::array();
  int rows = 0;
  for (int var : prog.nonneg) {
    triplets.push_back({rows, var, -1.0});
    h.push_back(0.0);
    ++rows;
  }
  // Box every variable. This keeps the componentwise constraint matrix at full
  // column rank (cvxopt refuses programs with unconstrained columns) and rules
  // out drift along directions no block restricts. The bound is far above any
  // magnitude a well-scaled instance produces; a solution pressing against it
  // would fail the residual checks anyway.
  if (opts.var_bound > 0.0) {
    for (int var = 0; var < prog.n_vars; ++var) {
      triplets.push_back({rows, var, 1.0});
      h.push_back(opts.var_bound);
      ++rows;
      triplets.push_back({rows, var, -1.0});
      h.push_back(opts.var_bound);
      ++rows;
    }
  }
  gl["m"] = rows;
  gl["triplets"] = std::move(triplets);
  gl["h"] = std::move(h);
  j["gl"] = std::move(gl);
  auto blocks = nlohmann::json::array();
  for (const auto& blk : prog.psd) {
    nlohmann::json bj;
    bj["dim"] = blk.dim;
    auto hj = nlohmann::json::array();
    for (const auto& [r, c, v] : blk.c0) hj.push_back({r, c, v});
    auto gj = nlohmann::json::array();
    for (const auto& [var, r, c, v] : blk.terms) gj.push_back({var, r, c, v});
    bj["h"] = std::move(hj);
    bj["g"] = std::move(gj);
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  nlohmann::json eq;
  eq["m"] = static_cast<int>(prog.eqs.size());
  auto eqt = nlohmann::json::array();
  auto eqb = nlohmann::json::array();
  for (std::size_t r = 0; r < prog.eqs.size(); ++r) {
    for (const auto& [i, a] : prog.eqs[r].a) eqt.push_back({static_cast<int>(r), i, a});
    eqb.push_back(prog.eqs[r].b);
  }
  eq["triplets"] = std::move(eqt);
  eq["b"] = std::move(eqb);
  j["eq"] = std::move(eq);
  j["opts"] = {{"maxiters", opts.maxiters},
               {"abstol", opts.abstol},
               {"reltol", opts.reltol},
               {"feastol", opts.feastol}};
  return j;
}

}  // namespace detail

inline SolverResult solve_with_cvxopt(const ConicProgram& prog,
                                      const SolverOptions& opts = SolverOptions{}) {
  namespace fs = std::filesystem;
  SolverResult res;

  std::string python = opts.python;
  if (python.empty()) {
    if (const char* env = std::getenv("ROBUST_POB_PYTHON")) python = env;
    else python = "python3";
  }

  const fs::path script = detail::unique_temp_path("robust_pob_sdp", ".py");
  const fs::path in_path = detail::unique_temp_path("robust_pob_sdp_in", ".json");
  const fs::path out_path = detail::unique_temp_path("robust_pob_sdp_out", ".json");
  const fs::path err_path = detail::unique_temp_path("robust_pob_sdp_err", ".txt");
  auto cleanup = [&]() {
    std::error_code ec;
    fs::remove(script, ec);
    fs::remove(in_path, ec);
    fs::remove(out_path, ec);
    fs::remove(err_path, ec);
  };

  {
    std::ofstream sf(script);
    sf << detail::cvxopt_worker_script();
    std::ofstream jf(in_path);
    jf << detail::program_to_json(prog, opts).dump();
    if (!sf || !jf) {
      res.message = "failed to write solver temp files";
      cleanup();
      return res;
    }
  }

  std::ostringstream cmd;
  if (opts.deterministic)
    cmd << "env OPENBLAS_NUM_THREADS=1 OMP_NUM_THREADS=1 MKL_NUM_THREADS=1 ";
  cmd << "\"" << python << "\" \"" << script.string() << "\" \"" << in_path.string()
      << "\" \"" << out_path.string() << "\" 2> \"" << err_path.string() << "\"";
  const int rc = std::system(cmd.str().c_str());

  nlohmann::json out;
  {
    std::ifstream of(out_path);
    if (!of) {
      std::ifstream ef(err_path);
      std::ostringstream err;
      err << ef.rdbuf();
      res.message = "solver subprocess produced no output (exit " + std::to_string(rc) +
                    "): " + err.str();
      cleanup();
      return res;
    }
    try {
      of >> out;
    } catch (const std::exception& exc) {
      res.message = std::string("failed to parse solver output: ") + exc.what();
      cleanup();
      return res;
    }
  }
  cleanup();

  res.solver_status = out.value("status", "missing");
  res.iterations = out.value("iterations", -1);
  res.message = out.value("message", "");
  if (out.contains("x") && out["x"].is_array()) {
    const auto& xj = out["x"];
    res.x = Vec::Zero(static_cast<Eigen::Index>(xj.size()));
    for (std::size_t i = 0; i < xj.size(); ++i)
      res.x[static_cast<Eigen::Index>(i)] = xj[i].get<double>();
  }
  if (out.contains("obj") && out["obj"].is_number()) res.objective = out["obj"].get<double>();

  const bool have_x = res.x.size() == prog.n_vars && prog.n_vars > 0;
  if (have_x) res.max_psd_violation = prog.max_violation(res.x);

  if (res.solver_status == "optimal") {
    res.status = have_x ? SolveStatus::feasible : SolveStatus::failed;
  } else if (res.solver_status == "primal infeasible") {
    res.status = SolveStatus::infeasible;
  } else if (res.solver_status == "unknown" || res.solver_status == "dual infeasible") {
    if (have_x)
      res.status = res.max_psd_violation <= opts.psd_tol ? SolveStatus::feasible
                                                         : SolveStatus::inaccurate;
    else
      res.status = SolveStatus::failed;
  } else {
    res.status = SolveStatus::failed;
  }
  return res;
}

}  // namespace robust_pob
