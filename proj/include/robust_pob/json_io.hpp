// JSON (de)serialization for models, policies, specification sets and run
// reports. Conventions: matrices are arrays of rows, vectors are flat arrays,
// and mode indices are 1-based on disk (internally everything is 0-based).
#pragma once

#include "robust_pob/model.hpp"
#include "robust_pob/policy.hpp"
#include "robust_pob/sdp.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace robust_pob {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline json to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Mat mat_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw parse_error(what + ": expected an array of rows");
  const auto rows = j.size();
  if (rows == 0) return Mat(0, 0);
  if (!j[0].is_array()) throw parse_error(what + ": expected nested row arrays");
  const auto cols = j[0].size();
  Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw parse_error(what + ": ragged rows in matrix");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw parse_error(what + ": non-numeric entry");
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return M;
}

inline Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw parse_error(what + ": expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw parse_error(what + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

template <typename T>
inline T field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw parse_error("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw parse_error("field '" + key + "' has the wrong type");
  }
}

inline json model_to_json(const MjlsModel& md) {
  json j;
  j["N"] = md.N;
  j["n_x"] = md.n_x;
  j["n_u"] = md.n_u;
  j["n_d"] = md.n_d;
  j["n_e"] = md.n_e;
  j["n_y"] = md.n_y;
  j["m"] = md.m();
  j["pi"] = to_json(md.chain.pi);
  j["P"] = to_json(md.chain.P);
  j["Sigma0"] = to_json(md.Sigma0);
  json mats = json::array();
  for (int t = 0; t < md.N; ++t) {
    json per_mode = json::array();
    for (int mode = 0; mode < md.m(); ++mode) {
      const ModeMatrices& mm = md.at(t, mode);
      json e;
      e["A"] = to_json(mm.A);
      e["B"] = to_json(mm.B);
      e["Bd"] = to_json(mm.Bd);
      e["Bs"] = to_json(mm.Bs);
      e["C"] = to_json(mm.C);
      e["Dd"] = to_json(mm.Dd);
      e["Ds"] = to_json(mm.Ds);
      per_mode.push_back(std::move(e));
    }
    mats.push_back(std::move(per_mode));
  }
  j["matrices"] = std::move(mats);
  if (md.known_initial_state) j["known_initial_state"] = to_json(*md.known_initial_state);
  return j;
}

inline MjlsModel model_from_json(const json& j) {
  MjlsModel md;
  md.N = field<int>(j, "N");
  md.n_x = field<int>(j, "n_x");
  md.n_u = field<int>(j, "n_u");
  md.n_d = field<int>(j, "n_d");
  md.n_e = field<int>(j, "n_e");
  md.n_y = field<int>(j, "n_y");
  md.chain.m = field<int>(j, "m");
  if (!j.contains("pi") || !j.contains("P") || !j.contains("Sigma0") || !j.contains("matrices"))
    throw parse_error("model: needs pi, P, Sigma0 and matrices");
  md.chain.pi = vec_from_json(j.at("pi"), "model.pi");
  md.chain.P = mat_from_json(j.at("P"), "model.P");
  md.Sigma0 = mat_from_json(j.at("Sigma0"), "model.Sigma0");
  const json& mats = j.at("matrices");
  if (!mats.is_array() || static_cast<int>(mats.size()) != md.N)
    throw parse_error("model.matrices: expected one entry per stage");
  md.mats.resize(mats.size());
  for (std::size_t t = 0; t < mats.size(); ++t) {
    const json& per_mode = mats[t];
    if (!per_mode.is_array() || static_cast<int>(per_mode.size()) != md.chain.m)
      throw parse_error("model.matrices: expected one entry per mode");
    md.mats[t].resize(per_mode.size());
    for (std::size_t mode = 0; mode < per_mode.size(); ++mode) {
      const json& e = per_mode[mode];
      const std::string at = "model.matrices[" + std::to_string(t) + "][" +
                             std::to_string(mode) + "]";
      ModeMatrices mm;
      mm.A = mat_from_json(e.value("A", json::array()), at + ".A");
      mm.B = mat_from_json(e.value("B", json::array()), at + ".B");
      mm.Bd = mat_from_json(e.value("Bd", json::array()), at + ".Bd");
      mm.Bs = e.contains("Bs") ? mat_from_json(e.at("Bs"), at + ".Bs")
                               : Mat::Zero(md.n_x, md.n_e);
      mm.C = mat_from_json(e.value("C", json::array()), at + ".C");
      mm.Dd = mat_from_json(e.value("Dd", json::array()), at + ".Dd");
      mm.Ds = e.contains("Ds") ? mat_from_json(e.at("Ds"), at + ".Ds")
                               : Mat::Zero(md.n_y, md.n_e);
      // Zero noise channels may be omitted; normalize empty shapes.
      if (mm.Bs.size() == 0) mm.Bs = Mat::Zero(md.n_x, md.n_e);
      if (mm.Ds.size() == 0) mm.Ds = Mat::Zero(md.n_y, md.n_e);
      md.mats[t][mode] = std::move(mm);
    }
  }
  if (j.contains("known_initial_state"))
    md.known_initial_state = vec_from_json(j.at("known_initial_state"), "known_initial_state");
  try {
    md.validate();
  } catch (const std::exception& e) {
    throw parse_error(std::string("model: ") + e.what());
  }
  return md;
}

inline json hist_to_json(const Hist& h) {
  json arr = json::array();
  for (int mode : h) arr.push_back(mode + 1);  // modes are 1-based on disk
  return arr;
}

inline Hist hist_from_json(const json& j, int m) {
  if (!j.is_array()) throw parse_error("policy entry: hist must be an array");
  Hist h;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw parse_error("policy entry: hist entries must be integers");
    const int mode = e.get<int>() - 1;
    if (mode < 0 || mode >= m) throw parse_error("policy entry: mode out of range");
    h.push_back(mode);
  }
  return h;
}

template <typename Policy>
inline json policy_to_json_impl(const Policy& p, const char* basis, const char* vec_name,
                                const char* mat_name) {
  json j;
  j["N"] = p.N;
  j["T"] = p.T;
  j["m"] = p.m;
  j["n_u"] = p.n_u;
  j["n_y"] = p.n_y;
  j["basis"] = basis;
  json entries = json::array();
  const auto& vecs = [&]() -> const auto& {
    if constexpr (std::is_same_v<Policy, PobPolicy>)
      return p.h;
    else
      return p.g;
  }();
  const auto& mats = [&]() -> const auto& {
    if constexpr (std::is_same_v<Policy, PobPolicy>)
      return p.H;
    else
      return p.G;
  }();
  (void)vec_name;
  (void)mat_name;
  for (int t = 0; t < p.N; ++t) {
    for (const Hist& h : enumerate_paths(p.m, history_length(t, p.T))) {
      const std::size_t idx = history_index(h, p.m);
      json ev;
      ev["t"] = t;
      ev["j"] = nullptr;
      ev["hist"] = hist_to_json(h);
      ev["values"] = to_json(Mat(vecs[static_cast<std::size_t>(t)][idx]));
      entries.push_back(std::move(ev));
      for (int jj = 0; jj <= t; ++jj) {
        json em;
        em["t"] = t;
        em["j"] = jj;
        em["hist"] = hist_to_json(h);
        em["values"] = to_json(mats[static_cast<std::size_t>(t)][static_cast<std::size_t>(jj)][idx]);
        entries.push_back(std::move(em));
      }
    }
  }
  j["entries"] = std::move(entries);
  return j;
}

inline json policy_to_json(const PobPolicy& p) {
  return policy_to_json_impl(p, "purified", "h", "H");
}
inline json policy_to_json(const ObPolicy& p) {
  return policy_to_json_impl(p, "outputs", "g", "G");
}

// Either basis, distinguished by the "basis" field.
struct LoadedPolicy {
  bool purified = true;
  PobPolicy pob;
  ObPolicy ob;
};

inline LoadedPolicy policy_from_json(const json& j) {
  LoadedPolicy out;
  const int N = field<int>(j, "N");
  const int T = field<int>(j, "T");
  const int m = field<int>(j, "m");
  const int n_u = field<int>(j, "n_u");
  const int n_y = field<int>(j, "n_y");
  if (N < 1 || m < 1 || T < 0 || T > N - 1 || n_u < 0 || n_y < 0)
    throw parse_error("policy: invalid shape header");
  const std::string basis = j.value("basis", std::string("purified"));
  if (basis != "purified" && basis != "outputs")
    throw parse_error("policy: basis must be 'purified' or 'outputs'");
  out.purified = basis == "purified";
  PobPolicy p = PobPolicy::zeros(N, T, m, n_u, n_y);
  if (j.contains("entries")) {
    if (!j.at("entries").is_array()) throw parse_error("policy.entries: expected an array");
    for (const json& e : j.at("entries")) {
      const int t = field<int>(e, "t");
      if (t < 0 || t >= N) throw parse_error("policy entry: t out of range");
      if (!e.contains("hist")) throw parse_error("policy entry: missing hist");
      const Hist h = hist_from_json(e.at("hist"), m);
      if (static_cast<int>(h.size()) != history_length(t, T))
        throw parse_error("policy entry: hist length must be min(T+1, t+1)");
      const std::size_t idx = history_index(h, m);
      if (!e.contains("values")) throw parse_error("policy entry: missing values");
      const Mat V = mat_from_json(e.at("values"), "policy entry values");
      if (!e.contains("j") || e.at("j").is_null()) {
        if (V.rows() != n_u || V.cols() != 1)
          throw parse_error("policy entry: offset values must be n_u x 1");
        p.h[static_cast<std::size_t>(t)][idx] = V.col(0);
      } else {
        const int jj = field<int>(e, "j");
        if (jj < 0 || jj > t) throw parse_error("policy entry: j out of range");
        if (V.rows() != n_u || V.cols() != n_y)
          throw parse_error("policy entry: gain values must be n_u x n_y");
        p.H[static_cast<std::size_t>(t)][static_cast<std::size_t>(jj)][idx] = V;
      }
    }
  }
  if (out.purified) {
    out.pob = std::move(p);
  } else {
    out.ob.N = N;
    out.ob.T = T;
    out.ob.m = m;
    out.ob.n_u = n_u;
    out.ob.n_y = n_y;
    out.ob.g = std::move(p.h);
    out.ob.G = std::move(p.H);
  }
  return out;
}

inline json specs_to_json(const SpecSet& specs) {
  json j;
  json qs = json::array();
  for (const Mat& Q : specs.ellitope.Qs) qs.push_back(to_json(Q));
  j["ellitope"]["Qs"] = std::move(qs);
  json avg = json::array();
  for (const QuadSpec& s : specs.avg_quad) {
    json e;
    e["A"] = to_json(s.A);
    e["beta"] = to_json(s.beta);
    e["gamma"] = s.gamma;
    if (!s.label.empty()) e["label"] = s.label;
    avg.push_back(std::move(e));
  }
  j["avg_quad"] = std::move(avg);
  json mean = json::array();
  for (const MeanQuadSpec& s : specs.mean_quad) {
    json e;
    e["A_hat"] = to_json(s.A_hat);
    e["beta_hat"] = to_json(s.beta_hat);
    e["gamma_hat"] = s.gamma_hat;
    if (!s.label.empty()) e["label"] = s.label;
    mean.push_back(std::move(e));
  }
  j["mean_quad"] = std::move(mean);
  json cov = json::array();
  for (const CovSpec& s : specs.cov_bound) {
    json e;
    e["Q"] = to_json(s.Q);
    e["Sigma_tilde"] = to_json(s.Sigma_tilde);
    if (!s.label.empty()) e["label"] = s.label;
    cov.push_back(std::move(e));
  }
  j["cov_bound"] = std::move(cov);
  return j;
}

inline SpecSet specs_from_json(const json& j) {
  SpecSet specs;
  if (j.contains("ellitope")) {
    const json& ell = j.at("ellitope");
    if (!ell.contains("Qs") || !ell.at("Qs").is_array())
      throw parse_error("specs.ellitope: needs a Qs array");
    for (const auto& q : ell.at("Qs"))
      specs.ellitope.Qs.push_back(mat_from_json(q, "specs.ellitope.Qs"));
  }
  if (j.contains("avg_quad")) {
    for (const json& e : j.at("avg_quad")) {
      QuadSpec s;
      s.A = mat_from_json(e.value("A", json::array()), "avg_quad.A");
      s.beta = vec_from_json(e.value("beta", json::array()), "avg_quad.beta");
      s.gamma = field<double>(e, "gamma");
      s.label = e.value("label", std::string());
      specs.avg_quad.push_back(std::move(s));
    }
  }
  if (j.contains("mean_quad")) {
    for (const json& e : j.at("mean_quad")) {
      MeanQuadSpec s;
      s.A_hat = mat_from_json(e.value("A_hat", json::array()), "mean_quad.A_hat");
      s.beta_hat = vec_from_json(e.value("beta_hat", json::array()), "mean_quad.beta_hat");
      s.gamma_hat = field<double>(e, "gamma_hat");
      s.label = e.value("label", std::string());
      specs.mean_quad.push_back(std::move(s));
    }
  }
  if (j.contains("cov_bound")) {
    for (const json& e : j.at("cov_bound")) {
      CovSpec s;
      s.Q = mat_from_json(e.value("Q", json::array()), "cov_bound.Q");
      s.Sigma_tilde = mat_from_json(e.value("Sigma_tilde", json::array()), "cov_bound.Sigma_tilde");
      s.label = e.value("label", std::string());
      specs.cov_bound.push_back(std::move(s));
    }
  }
  try {
    if (!specs.ellitope.Qs.empty()) specs.ellitope.validate();
  } catch (const std::exception& e) {
    throw parse_error(std::string("specs: ") + e.what());
  }
  return specs;
}

inline json synthesis_report_to_json(const SynthesisReport& rep) {
  json j;
  j["status"] = to_string(rep.status);
  j["memory"] = rep.T;
  if (rep.chi.size() > 0) j["chi"] = to_json(rep.chi);
  json solver;
  solver["iters"] = rep.solver.iterations;
  solver["status"] = rep.solver.solver_status;
  if (!rep.solver.message.empty()) solver["message"] = rep.solver.message;
  json residuals = json::object();
  if (std::isfinite(rep.max_violation)) residuals["max_psd_violation"] = rep.max_violation;
  solver["residuals"] = std::move(residuals);
  j["solver"] = std::move(solver);
  json checks = json::array();
  for (const SpecDiagnostic& d : rep.avg_quad) {
    json c;
    c["label"] = d.label;
    c["gamma"] = d.gamma;
    c["psi"] = d.psi;
    c["gamma_minus"] = d.gamma_minus;
    checks.push_back(std::move(c));
  }
  j["checks"] = std::move(checks);
  if (rep.status == SolveStatus::infeasible) {
    json gm = json::array();
    for (const SpecDiagnostic& d : rep.avg_quad) gm.push_back(d.gamma_minus);
    j["gamma_minus"] = std::move(gm);
  }
  return j;
}

}  // namespace io
}  // namespace robust_pob
