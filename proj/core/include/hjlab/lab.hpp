#pragma once

// Experiment runner: configs, studies and their CSV/JSON reports.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hjlab/model.hpp"
#include "hjlab/quenched.hpp"
#include "hjlab/variational.hpp"

namespace hjlab {

enum class Study { identities, convergence, concentration, mmse, short_time, variational_grid };

std::string to_string(Study s);
// Accepts the CLI verbs (identities, convergence, concentration, mmse,
// short-time, variational) and the enum spellings.
Study parse_study(const std::string& s);

struct Tolerances {
  double gibbs_identity = 1e-6;   // <L> vs finite differences of F_N, relative
  double nishimori = 1e-8;
  double derivative = 1e-4;       // relative
  double mmse = 1e-4;
  double hopf_psi = 1e-6;         // Hopf at t = 0 vs psi
  double hopf_lax = 2e-5;
  double hj_residual = 1e-3;
  double maximizer = 1e-3;
  double characteristics = 1e-4;
  double fixed_point = 1e-10;
  double psd = 1e-10;
  double convergence_t0 = 1e-8;
  double convexity = 1e-8;
  double monotonicity = 1e-9;
  double mc_sigmas = 3.0;         // Monte Carlo comparisons allow this many standard errors
};

struct ExperimentConfig {
  std::string name = "reference";
  PriorSpec prior;
  InteractionSpec interaction;
  std::vector<int> N_list{1, 2};

  Method mode = Method::quadrature;
  int nodes = 12;
  int fine_nodes = 64;  // used when the Gaussian dimension is at most 2
  long budget = 20000;
  std::uint64_t seed = 1;
  int psi_nodes = 0;    // 0: library default
  int threads = 0;

  std::vector<double> t_values;
  std::vector<SymMatrix> h_grid;
  double point_t = 0.2;
  SymMatrix point_h;
  std::vector<int> concentration_N{2, 3, 4, 5, 6, 7, 8, 9, 10};
  double large_h = 5.0;  // MMSE sanity: compared against small_h
  double small_h = 0.1;

  int disorders = 20;
  double gibbs_fd_step = 1e-5;
  double free_energy_fd_step = 1e-4;
  double variational_fd_step = 1e-4;

  std::vector<double> t_fractions{0.1, 0.3, 0.5};
  double char_tol = 1e-10;
  int char_max_iter = 1000;
  double lipschitz_radius = 2.0;
  int lipschitz_samples = 400;

  VariationalSettings variational;
  Tolerances tol;
};

// Built-in instances: "reference" (D=1, p=2, A=[1], Rademacher) and
// "matrix" (D=2, p=2, A=vec(I_2), product Rademacher), with default grids.
ExperimentConfig default_config(const std::string& instance);

// JSON config; omitted keys take the defaults of the named base instance.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Fully resolved config, including every default.
std::string config_to_json(const ExperimentConfig& cfg);

using Cell = std::variant<double, long long, std::string, bool>;

struct Criterion {
  std::string name;
  double tolerance = 0.0;
  double measured = 0.0;  // worst value seen
  bool passed = true;
  long checks = 0;
  std::string detail;
};

struct StudyReport {
  std::string study;
  std::string config_echo;  // JSON text
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<Criterion> criteria;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;  // reported on stdout only

  bool passed() const;
  // Merges into the criterion of the same name: worst measured, AND of passes.
  void check(const std::string& name, double tolerance, double measured, bool passed,
             const std::string& detail = {});
};

StudyReport run_identities(const ExperimentConfig& cfg);
StudyReport run_convergence(const ExperimentConfig& cfg);
StudyReport run_concentration(const ExperimentConfig& cfg);
StudyReport run_mmse(const ExperimentConfig& cfg);
StudyReport run_short_time(const ExperimentConfig& cfg);
StudyReport run_variational(const ExperimentConfig& cfg);
StudyReport run_study(Study s, const ExperimentConfig& cfg);

std::string version_stamp();
std::string format_double(double v);  // 17 significant digits

// Writes <dir>/<study>.csv and <dir>/<study>.json; IoError on failure.
void emit(const StudyReport& report, const std::filesystem::path& dir);
std::string report_csv(const StudyReport& report);
std::string report_json(const StudyReport& report);
// Single-line machine summary (includes wall-clock time).
std::string summary_line(const StudyReport& report);

}  // namespace hjlab
