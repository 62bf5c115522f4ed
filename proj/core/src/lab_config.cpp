#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hjlab/errors.hpp"
#include "hjlab/lab.hpp"

namespace hjlab {

using json = nlohmann::json;

namespace {

std::vector<SymMatrix> scalar_grid(int D, const std::vector<double>& alphas) {
  std::vector<SymMatrix> out;
  for (double a : alphas) out.push_back(a * SymMatrix::identity(D));
  return out;
}

ExperimentConfig reference_instance() {
  ExperimentConfig c;
  c.name = "reference";
  c.prior = rademacher_prior(1);
  c.interaction = make_interaction(1, 2, Dense(1, 1, {1.0}));
  c.N_list = {1, 2, 4, 8};
  c.t_values = {0.05, 0.1, 0.2, 0.4};
  c.h_grid = scalar_grid(1, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
  c.point_t = 0.2;
  c.point_h = SymMatrix::scalar(0.3);
  return c;
}

ExperimentConfig matrix_instance() {
  ExperimentConfig c;
  c.name = "matrix";
  c.prior = rademacher_prior(2);
  // A = vec(I_2): a single column with ones at multi-indices (0,0) and (1,1).
  c.interaction = make_interaction(2, 2, Dense(4, 1, {1.0, 0.0, 0.0, 1.0}));
  c.N_list = {1, 2, 3};
  c.t_values = {0.05, 0.1, 0.2, 0.4};
  for (double a : {0.2, 0.5, 1.0}) {
    for (double b : {0.0, 0.1}) {
      SymMatrix h = a * SymMatrix::identity(2);
      h.set(0, 1, b);
      c.h_grid.push_back(h);
    }
  }
  c.point_t = 0.2;
  c.point_h = 0.3 * SymMatrix::identity(2);
  return c;
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::vector<std::vector<double>> read_rows(const json& j, const std::string& where) {
  try {
    return j.get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": expected a list of rows: " + e.what());
  }
}

SymMatrix read_point(const json& j, int D, const std::string& where) {
  if (j.is_number()) return j.get<double>() * SymMatrix::identity(D);
  const auto rows = read_rows(j, where);
  if (int(rows.size()) != D) throw ConfigError(where + ": expected a " + std::to_string(D) + "x" + std::to_string(D) + " matrix");
  try {
    SymMatrix m = SymMatrix::from_rows(rows);
    if (min_eigenvalue(m) < -kPsdTolerance) throw ConfigError(where + ": matrix is not positive semidefinite");
    return m;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json point_json(const SymMatrix& h) { return h.rows(); }

void read_tolerances(const json& j, Tolerances& t) {
  const std::string w = "tolerances";
  reject_unknown(j, w, {"gibbs_identity", "nishimori", "derivative", "mmse", "hopf_psi", "hopf_lax", "hj_residual",
                        "maximizer", "characteristics", "fixed_point", "psd", "convergence_t0", "convexity",
                        "monotonicity", "mc_sigmas"});
  read(j, "gibbs_identity", t.gibbs_identity, w);
  read(j, "nishimori", t.nishimori, w);
  read(j, "derivative", t.derivative, w);
  read(j, "mmse", t.mmse, w);
  read(j, "hopf_psi", t.hopf_psi, w);
  read(j, "hopf_lax", t.hopf_lax, w);
  read(j, "hj_residual", t.hj_residual, w);
  read(j, "maximizer", t.maximizer, w);
  read(j, "characteristics", t.characteristics, w);
  read(j, "fixed_point", t.fixed_point, w);
  read(j, "psd", t.psd, w);
  read(j, "convergence_t0", t.convergence_t0, w);
  read(j, "convexity", t.convexity, w);
  read(j, "monotonicity", t.monotonicity, w);
  read(j, "mc_sigmas", t.mc_sigmas, w);
}

json tolerances_json(const Tolerances& t) {
  return json{{"gibbs_identity", t.gibbs_identity}, {"nishimori", t.nishimori}, {"derivative", t.derivative},
              {"mmse", t.mmse}, {"hopf_psi", t.hopf_psi}, {"hopf_lax", t.hopf_lax},
              {"hj_residual", t.hj_residual}, {"maximizer", t.maximizer}, {"characteristics", t.characteristics},
              {"fixed_point", t.fixed_point}, {"psd", t.psd}, {"convergence_t0", t.convergence_t0},
              {"convexity", t.convexity}, {"monotonicity", t.monotonicity}, {"mc_sigmas", t.mc_sigmas}};
}

void validate(const ExperimentConfig& c) {
  if (c.prior.D != c.interaction.D) throw ConfigError("prior.D and interaction D differ");
  if (c.N_list.empty()) throw ConfigError("N must list at least one size");
  for (int n : c.N_list) {
    if (n < 1) throw ConfigError("N entries must be positive");
  }
  if (c.nodes < 1 || c.fine_nodes < 1) throw ConfigError("nodes must be positive");
  if (c.budget < kMinMonteCarloBudget) {
    throw ConfigError("budget must be at least " + std::to_string(kMinMonteCarloBudget));
  }
  for (double t : c.t_values) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("grid.t entries must be finite and nonnegative");
  }
  if (!(c.point_t >= 0.0)) throw ConfigError("point.t must be nonnegative");
  for (int n : c.concentration_N) {
    if (n < 1) throw ConfigError("point.concentration_N entries must be positive");
  }
  if (c.disorders < 1) throw ConfigError("identities.disorders must be positive");
  for (double f : c.t_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("short_time.t_fractions entries must lie in (0, 1]");
  }
  if (c.variational.starts < 1) throw ConfigError("variational.starts must be positive");
}

}  // namespace

std::string to_string(Study s) {
  switch (s) {
    case Study::identities: return "identities";
    case Study::convergence: return "convergence";
    case Study::concentration: return "concentration";
    case Study::mmse: return "mmse";
    case Study::short_time: return "short_time";
    case Study::variational_grid: return "variational_grid";
  }
  return "unknown";
}

Study parse_study(const std::string& s) {
  if (s == "identities") return Study::identities;
  if (s == "convergence") return Study::convergence;
  if (s == "concentration") return Study::concentration;
  if (s == "mmse") return Study::mmse;
  if (s == "short-time" || s == "short_time") return Study::short_time;
  if (s == "variational" || s == "variational_grid") return Study::variational_grid;
  throw UsageError("unknown study '" + s + "'");
}

ExperimentConfig default_config(const std::string& instance) {
  if (instance == "reference") return reference_instance();
  if (instance == "matrix") return matrix_instance();
  throw ConfigError("unknown base instance '" + instance + "' (expected reference or matrix)");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "config", {"name", "base", "prior", "interaction", "N", "mode", "nodes", "fine_nodes", "budget",
                               "seed", "psi_nodes", "threads", "grid", "point", "identities", "short_time",
                               "variational", "tolerances"});

  std::string base = "reference";
  if (j.contains("prior") && j["prior"].contains("D") && j["prior"]["D"].is_number_integer() &&
      j["prior"]["D"].get<int>() == 2) {
    base = "matrix";
  }
  read(j, "base", base, "config");
  ExperimentConfig c = default_config(base);
  read(j, "name", c.name, "config");

  if (j.contains("prior")) {
    const json& p = j["prior"];
    reject_unknown(p, "prior", {"D", "rademacher", "support", "weights"});
    int D = c.prior.D;
    read(p, "D", D, "prior");
    bool rad = false;
    read(p, "rademacher", rad, "prior");
    try {
      if (rad) {
        if (p.contains("support") || p.contains("weights")) {
          throw ConfigError("prior: 'rademacher' excludes 'support' and 'weights'");
        }
        c.prior = rademacher_prior(D);
      } else if (p.contains("support")) {
        std::vector<double> weights;
        read(p, "weights", weights, "prior");
        c.prior = make_prior(D, read_rows(p["support"], "prior.support"), weights);
      } else if (D != c.prior.D) {
        c.prior = rademacher_prior(D);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("prior: ") + e.what());
    }
  }

  if (j.contains("interaction")) {
    const json& q = j["interaction"];
    reject_unknown(q, "interaction", {"p", "A", "gram"});
    int p = c.interaction.p;
    read(q, "p", p, "interaction");
    try {
      Dense A = c.interaction.A;
      if (q.contains("A")) A = Dense::from_rows(read_rows(q["A"], "interaction.A"));
      std::optional<Dense> gram;
      if (q.contains("gram")) gram = Dense::from_rows(read_rows(q["gram"], "interaction.gram"));
      c.interaction = make_interaction(c.prior.D, p, A, gram);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("interaction: ") + e.what());
    }
  } else if (c.interaction.D != c.prior.D) {
    throw ConfigError("interaction: the base instance has D=" + std::to_string(c.interaction.D) +
                      "; give interaction.A for D=" + std::to_string(c.prior.D));
  }
  const int D = c.prior.D;

  read(j, "N", c.N_list, "config");
  if (j.contains("mode")) {
    try {
      c.mode = parse_method(j["mode"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("mode: ") + e.what());
    }
  }
  read(j, "nodes", c.nodes, "config");
  read(j, "fine_nodes", c.fine_nodes, "config");
  read(j, "budget", c.budget, "config");
  read(j, "seed", c.seed, "config");
  read(j, "psi_nodes", c.psi_nodes, "config");
  read(j, "threads", c.threads, "config");

  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, "grid", {"t", "h"});
    read(g, "t", c.t_values, "grid");
    if (g.contains("h")) {
      if (!g["h"].is_array()) throw ConfigError("grid.h: expected a list");
      c.h_grid.clear();
      for (std::size_t i = 0; i < g["h"].size(); ++i) {
        c.h_grid.push_back(read_point(g["h"][i], D, "grid.h[" + std::to_string(i) + "]"));
      }
    }
  } else if (D != default_config(base).prior.D) {
    c.h_grid = scalar_grid(D, {0.2, 0.5, 1.0});
  }
  if (j.contains("point")) {
    const json& pt = j["point"];
    reject_unknown(pt, "point", {"t", "h", "concentration_N", "large_h", "small_h"});
    read(pt, "t", c.point_t, "point");
    if (pt.contains("h")) c.point_h = read_point(pt["h"], D, "point.h");
    read(pt, "concentration_N", c.concentration_N, "point");
    read(pt, "large_h", c.large_h, "point");
    read(pt, "small_h", c.small_h, "point");
  }
  if (c.point_h.dim() != D) c.point_h = 0.3 * SymMatrix::identity(D);

  if (j.contains("identities")) {
    const json& s = j["identities"];
    reject_unknown(s, "identities", {"disorders", "gibbs_fd_step", "free_energy_fd_step"});
    read(s, "disorders", c.disorders, "identities");
    read(s, "gibbs_fd_step", c.gibbs_fd_step, "identities");
    read(s, "free_energy_fd_step", c.free_energy_fd_step, "identities");
  }
  if (j.contains("short_time")) {
    const json& s = j["short_time"];
    reject_unknown(s, "short_time", {"t_fractions", "tol", "max_iter", "lipschitz_radius", "lipschitz_samples"});
    read(s, "t_fractions", c.t_fractions, "short_time");
    read(s, "tol", c.char_tol, "short_time");
    read(s, "max_iter", c.char_max_iter, "short_time");
    read(s, "lipschitz_radius", c.lipschitz_radius, "short_time");
    read(s, "lipschitz_samples", c.lipschitz_samples, "short_time");
  }
  if (j.contains("variational")) {
    const json& s = j["variational"];
    reject_unknown(s, "variational", {"starts", "seed", "fd_step", "probe_samples"});
    read(s, "starts", c.variational.starts, "variational");
    read(s, "seed", c.variational.seed, "variational");
    read(s, "fd_step", c.variational_fd_step, "variational");
    read(s, "probe_samples", c.variational.probe_samples, "variational");
  }
  if (j.contains("tolerances")) read_tolerances(j["tolerances"], c.tol);

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json h = json::array();
  for (const SymMatrix& m : c.h_grid) h.push_back(point_json(m));
  json j;
  j["name"] = c.name;
  j["prior"] = {{"D", c.prior.D}, {"support", c.prior.support}, {"weights", c.prior.weights}};
  j["interaction"] = {{"p", c.interaction.p}, {"A", c.interaction.A.to_rows()}, {"gram", c.interaction.gram.to_rows()}};
  j["N"] = c.N_list;
  j["mode"] = to_string(c.mode);
  j["nodes"] = c.nodes;
  j["fine_nodes"] = c.fine_nodes;
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  j["psi_nodes"] = c.psi_nodes == 0 ? default_psi_nodes(c.prior.D) : c.psi_nodes;
  j["threads"] = c.threads;
  j["grid"] = {{"t", c.t_values}, {"h", h}};
  j["point"] = {{"t", c.point_t}, {"h", point_json(c.point_h)}, {"concentration_N", c.concentration_N},
                {"large_h", c.large_h}, {"small_h", c.small_h}};
  j["identities"] = {{"disorders", c.disorders}, {"gibbs_fd_step", c.gibbs_fd_step},
                     {"free_energy_fd_step", c.free_energy_fd_step}};
  j["short_time"] = {{"t_fractions", c.t_fractions}, {"tol", c.char_tol}, {"max_iter", c.char_max_iter},
                     {"lipschitz_radius", c.lipschitz_radius}, {"lipschitz_samples", c.lipschitz_samples}};
  j["variational"] = {{"starts", c.variational.starts}, {"seed", c.variational.seed},
                      {"fd_step", c.variational_fd_step}, {"probe_samples", c.variational.probe_samples}};
  j["tolerances"] = tolerances_json(c.tol);
  return j.dump();
}

}  // namespace hjlab
