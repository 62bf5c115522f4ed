#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hjlab/errors.hpp"
#include "hjlab/lab.hpp"

namespace {

struct Options {
  std::string config;
  std::string instance = "reference";
  std::string out = "hjlab-out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<long> budget;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON experiment config");
  sub->add_option("--instance", o.instance, "built-in instance when no config is given (reference, matrix)")
      ->check(CLI::IsMember({"reference", "matrix"}));
  sub->add_option("--out", o.out, "output directory for <study>.csv and <study>.json");
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--mode", o.mode, "disorder averaging: quadrature or mc")->check(CLI::IsMember({"quadrature", "mc"}));
  sub->add_option("--budget", o.budget, "Monte Carlo disorder samples per N");
  sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
}

int run(hjlab::Study study, const Options& o) {
  hjlab::ExperimentConfig cfg = o.config.empty() ? hjlab::default_config(o.instance) : hjlab::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.mode) cfg.mode = hjlab::parse_method(*o.mode);
  if (o.budget) {
    if (*o.budget < hjlab::kMinMonteCarloBudget) throw hjlab::UsageError("--budget is below the Monte Carlo minimum");
    cfg.budget = *o.budget;
  }
  if (o.threads) cfg.threads = *o.threads;
  hjlab::StudyReport rep = hjlab::run_study(study, cfg);
  hjlab::emit(rep, o.out);
  std::cout << hjlab::summary_line(rep) << std::endl;
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hjlab: finite-N Bayesian tensor inference and its Hamilton-Jacobi limit"};
  app.set_version_flag("--version", hjlab::version_stamp());
  app.require_subcommand(1);

  Options opts;
  const std::pair<const char*, const char*> verbs[] = {
      {"identities", "exact finite-N identities: derivatives, Nishimori, <L>, MMSE relations"},
      {"convergence", "F_N against the Hopf value f over the grid and N list"},
      {"concentration", "overlap concentration around grad_h f"},
      {"mmse", "MMSE_N and mmse_N against their limits"},
      {"short-time", "characteristics solution against the Hopf value"},
      {"variational", "Hopf and Hopf-Lax values with maximizer diagnostics"},
  };
  for (const auto& [name, help] : verbs) add_common(app.add_subcommand(name, help), opts);

  CLI11_PARSE(app, argc, argv);
  try {
    const std::string verb = app.get_subcommands().front()->get_name();
    return run(hjlab::parse_study(verb), opts);
  } catch (const hjlab::Error& e) {
    std::cerr << "hjlab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hjlab: unexpected error: " << e.what() << '\n';
    return 3;
  }
}
