#pragma once

// Hopf and Hopf–Lax evaluation of the limit free energy, monotone conjugates
// on the PSD cone, and maximizer diagnostics.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjlab/nonlinearity.hpp"
#include "hjlab/psi.hpp"
#include "hjlab/symcone.hpp"

namespace hjlab {

enum class Formula { conjugate, hopf, hopf_lax, hopf_lax_scaled };
enum class HopfLaxForm { standard, scaled };

std::string to_string(Formula f);

struct AscentOptions {
  int max_iter = 3000;
  // Stop once |x - P(x + grad)| falls below this, or after five accepted
  // steps without any gain in value.
  double tol = 1e-10;
  double armijo = 1e-4;
};

struct ConeEval {
  bool ok = true;  // false: the point is outside the effective domain
  double value = 0.0;
  SymMatrix grad;
};
using ConeObjective = std::function<ConeEval(const SymMatrix&)>;

struct AscentResult {
  SymMatrix x;
  double value = 0.0;
  SymMatrix grad;
  double stationarity = 0.0;
  int iterations = 0;
  bool on_boundary = false;  // |x| at the search radius
  bool converged = false;
};

// Euclidean projection onto {PSD} ∩ {|x| <= radius}.
SymMatrix project_cone_ball(const SymMatrix& s, double radius);

// Projected gradient ascent with Barzilai–Borwein steps and Armijo
// backtracking. Infeasible trial points are treated as failed steps.
AscentResult maximize_on_cone(const ConeObjective& f, const SymMatrix& start, double radius,
                              const AscentOptions& opts);

struct VariationalResult {
  double value = 0.0;
  // Divergence sentinel: the supremum is +inf; `value` is then meaningless.
  bool diverged = false;
  ConePoint maximizer;
  double stationarity_residual = 0.0;
  int starts = 0;
  int best_start_index = -1;
  Formula formula = Formula::hopf;
  std::vector<double> start_values;
  std::vector<SymMatrix> start_maximizers;
  // Two starts tie in value (1e-8) with maximizers more than 1e-4 apart.
  bool possibly_nondifferentiable = false;
  double tie_distance = 0.0;
  double search_radius = 0.0;
  long iterations = 0;
};

// sup_{h' PSD} { h . h' - g(h') }. The search radius starts at `radius`
// (or |h| + lipschitz_bound + 1 when radius <= 0) and is doubled while the
// maximizer sits on the boundary; three doublings with growing value yield
// the divergence sentinel.
VariationalResult monotone_conjugate(const ConeFunction& g, const SymMatrix& h, double radius, int starts,
                                     std::uint64_t seed, const AscentOptions& opts = {});

// Monotone conjugate with a memo on the exact argument and warm starts from
// the previous maximizer; intended for convex g, where one start suffices.
class ConjugateSolver {
 public:
  struct Value {
    double value = 0.0;
    bool diverged = false;
    SymMatrix maximizer;
    double stationarity = 0.0;
  };

  ConjugateSolver(ConeFunction g, AscentOptions opts);
  ~ConjugateSolver();
  ConjugateSolver(ConjugateSolver&&) noexcept;
  ConjugateSolver& operator=(ConjugateSolver&&) noexcept;

  Value operator()(const SymMatrix& h);
  std::size_t evaluations() const noexcept;
  std::size_t memo_hits() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct VariationalSettings {
  int starts = 16;
  std::uint64_t seed = 0;
  AscentOptions outer{3000, 1e-9, 1e-4};
  AscentOptions inner{3000, 1e-11, 1e-4};
  int probe_samples = 2000;
};

// Holds psi, the interaction, and the conjugate solvers for psi and H, so
// that repeated evaluations (grids, finite differences) share memo tables.
// Not thread-safe; use one instance per thread.
class VariationalSolver {
 public:
  VariationalSolver(ConeFunction psi, InteractionSpec spec, VariationalSettings settings = {});
  ~VariationalSolver();
  VariationalSolver(VariationalSolver&&) noexcept;

  // sup_{h' PSD} { h' . h - psi*(h') + t H(h') }, h' confined to |h'| <= D sqrt(D) + 1.
  VariationalResult hopf(double t, const SymMatrix& h, std::span<const SymMatrix> hints = {},
                         int starts = 0);
  // standard: sup { psi(h + h') - t H*(h'/t) }; scaled: sup { psi(h + t h') - t H*(h') }.
  // FormulaUnavailableError when the convexity probe of H failed.
  VariationalResult hopf_lax(double t, const SymMatrix& h, HopfLaxForm form,
                             std::span<const SymMatrix> hints = {}, int starts = 0);
  VariationalResult evaluate(Formula f, double t, const SymMatrix& h, std::span<const SymMatrix> hints = {},
                             int starts = 0);

  ConjugateSolver::Value psi_conjugate(const SymMatrix& hp);
  ConjugateSolver::Value h_conjugate(const SymMatrix& q);

  const ConeFunction& psi() const noexcept;
  const InteractionSpec& spec() const noexcept;
  const VariationalSettings& settings() const noexcept;
  const ProbeReport& convexity() const noexcept;
  bool hopf_lax_available() const noexcept { return convexity().passed; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

VariationalResult hopf_value(const ConeFunction& psi, const InteractionSpec& spec, double t, const SymMatrix& h,
                             const VariationalSettings& settings = {});
VariationalResult hopf_lax_value(const ConeFunction& psi, const InteractionSpec& spec, double t,
                                 const SymMatrix& h, HopfLaxForm form, const VariationalSettings& settings = {});

// Finite-difference derivatives of f(t, h) = solver.evaluate(formula, ...).
struct FdDerivatives {
  double f = 0.0;
  SymMatrix grad_h;
  double dt = 0.0;
  bool t_two_sided = false;
  bool h_two_sided = false;
  // Largest |left - right| difference quotient over t and the basis directions.
  double max_asymmetry = 0.0;
  // Two-sided everywhere and every asymmetry within 1e-3.
  bool differentiable = false;
  bool tie = false;
};

FdDerivatives fd_derivatives(VariationalSolver& solver, const VariationalResult& center, double t,
                             const SymMatrix& h, double step);

struct MaximizerReport {
  Formula formula = Formula::hopf;
  FdDerivatives fd;
  std::optional<double> a1;  // |h* - grad_h f|
  std::optional<double> a2;  // |H(h*) - d_t f|
  std::optional<double> b1;  // |grad psi(h + h◊) - grad_h f|
  double hj_residual = 0.0;  // |d_t f - H(grad_h f)|
  // Maximizer items are asserted only at screened points without ties.
  bool assertable = false;
};

MaximizerReport maximizer_diagnostics(VariationalSolver& solver, const VariationalResult& result, double t,
                                      const SymMatrix& h, double fd_step = 1e-4);

}  // namespace hjlab
