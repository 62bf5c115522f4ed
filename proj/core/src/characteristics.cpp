#include "hjlab/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hjlab/errors.hpp"

namespace hjlab {

SymMatrix char_forward(const GradientOracle& psi_grad, const InteractionSpec& spec, double t, const ConePoint& h) {
  if (!(t >= 0.0)) throw UsageError("char_forward: t must be nonnegative");
  return h.matrix() - t * h_grad(spec, psi_grad(h.matrix()));
}

CharSolution char_invert(const GradientOracle& psi_grad, const InteractionSpec& spec, double t,
                         const ConePoint& k, double tol, int max_iter) {
  if (!(t >= 0.0)) throw UsageError("char_invert: t must be nonnegative");
  if (max_iter < 1) throw UsageError("char_invert: max_iter must be >= 1");
  CharSolution sol;
  sol.t = t;
  sol.h = k;
  SymMatrix x = k.matrix();
  sol.min_iterate_eigenvalue = k.interior_margin();
  double prev = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const SymMatrix next = k.matrix() + t * h_grad(spec, psi_grad(x));
    const double res = norm(x - next);
    if (prev > 0.0) sol.contraction_quotient = std::max(sol.contraction_quotient, res / prev);
    if (res <= tol) {
      sol.z = ConePoint(x);
      sol.iterations = it;
      sol.residual = res;
      return sol;
    }
    prev = res;
    x = next;
    sol.min_iterate_eigenvalue = std::min(sol.min_iterate_eigenvalue, min_eigenvalue(x));
  }
  std::ostringstream os;
  os << "fixed-point inversion at t=" << t << " did not reach " << tol << " in " << max_iter
     << " iterations (empirical contraction quotient " << sol.contraction_quotient
     << "); the Lipschitz estimate is probably too small";
  throw NonContractionError(os.str(), sol.contraction_quotient);
}

CharSolution u_value(const ValueOracle& psi, const GradientOracle& psi_grad, const InteractionSpec& spec, double t,
                     const ConePoint& h, double tol, int max_iter) {
  CharSolution sol = char_invert(psi_grad, spec, t, h, tol, max_iter);
  const SymMatrix q = psi_grad(sol.z.matrix());
  sol.u = psi(sol.z.matrix()) - t * inner(h_grad(spec, q), q) + t * h_value(spec, q);
  return sol;
}

double short_time_limit(double L_hat) {
  if (!(L_hat > 0.0)) throw UsageError("short_time_limit: L_hat must be positive");
  return 0.9 / (1.1 * L_hat);
}

SmoothnessReport smoothness_report(const ValueOracle& psi, const GradientOracle& psi_grad,
                                   const InteractionSpec& spec, double t_max, const std::vector<double>& t_grid,
                                   const std::vector<SymMatrix>& h_path, double fd_step) {
  SmoothnessReport rep;
  rep.t_max = t_max;
  auto u_at = [&](double t, const SymMatrix& h) { return u_value(psi, psi_grad, spec, t, ConePoint(h)).u; };
  constexpr double kFlagFloor = 1e-6;

  for (double t : t_grid) {
    if (t > t_max || t < 0.0) {
      throw UsageError("smoothness_report: t=" + std::to_string(t) + " outside [0, t_max]");
    }
    std::vector<SmoothnessRow> rows;
    for (const SymMatrix& h : h_path) {
      SmoothnessRow row;
      row.t = t;
      row.h = h;
      const CharSolution sol = u_value(psi, psi_grad, spec, t, ConePoint(h));
      row.u = sol.u;
      row.iterations = sol.iterations;
      row.residual = sol.residual;

      const double up = u_at(t + fd_step, h);
      const double ut = t - fd_step >= 0.0 ? (up - u_at(t - fd_step, h)) / (2 * fd_step) : (up - row.u) / fd_step;
      SymMatrix grad(h.dim());
      for (const SymMatrix& e : basis(h.dim())) {
        const SymMatrix hm = h - fd_step * e;
        const double fp = u_at(t, h + fd_step * e);
        const double d = min_eigenvalue(hm) >= 0.0 ? (fp - u_at(t, hm)) / (2 * fd_step) : (fp - row.u) / fd_step;
        grad += (d / inner(e, e)) * e;
      }
      row.hj_residual = std::abs(ut - h_value(spec, grad));
      row.grad_mismatch = norm(grad - psi_grad(sol.z.matrix()));
      rows.push_back(row);
    }
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
      rows[i].second_difference = rows[i + 1].u - 2 * rows[i].u + rows[i - 1].u;
    }
    for (std::size_t i = 2; i + 1 < rows.size(); ++i) {
      const double a = std::abs(rows[i - 1].second_difference);
      const double b = std::abs(rows[i].second_difference);
      if (std::max(a, b) > kFlagFloor && std::max(a, b) > 10.0 * std::min(a, b)) rows[i].flagged = true;
    }
    for (const SmoothnessRow& r : rows) {
      rep.flags += r.flagged ? 1 : 0;
      rep.max_hj_residual = std::max(rep.max_hj_residual, r.hj_residual);
      rep.max_grad_mismatch = std::max(rep.max_grad_mismatch, r.grad_mismatch);
      rep.max_second_difference = std::max(rep.max_second_difference, std::abs(r.second_difference));
      rep.rows.push_back(r);
    }
  }
  return rep;
}

}  // namespace hjlab
