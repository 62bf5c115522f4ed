#pragma once

// Short-time smooth solution of d_t f = H(grad_h f) by characteristics:
// lines X(t, h) = h - t grad H(grad psi(h)), their inversion by fixed-point
// iteration, and the solution u(t, h) transported along them.

#include <functional>
#include <vector>

#include "hjlab/nonlinearity.hpp"
#include "hjlab/symcone.hpp"

namespace hjlab {

using ValueOracle = std::function<double(const SymMatrix&)>;

struct CharSolution {
  double t = 0.0;
  ConePoint h;  // the point k being inverted
  ConePoint z;  // Z(t, k)
  double u = 0.0;
  int iterations = 0;
  double residual = 0.0;  // |X(t, z) - k|
  double min_iterate_eigenvalue = 0.0;
  // Largest ratio of successive fixed-point residuals.
  double contraction_quotient = 0.0;
};

SymMatrix char_forward(const GradientOracle& psi_grad, const InteractionSpec& spec, double t, const ConePoint& h);

// Iterates h <- k + t grad H(psi_grad(h)) from h = k. NonContractionError
// with the empirical quotient when max_iter is exhausted.
CharSolution char_invert(const GradientOracle& psi_grad, const InteractionSpec& spec, double t,
                         const ConePoint& k, double tol = 1e-10, int max_iter = 1000);

// u = psi(z) - t grad H(q) . q + t H(q) with z = Z(t, h) and q = psi_grad(z).
CharSolution u_value(const ValueOracle& psi, const GradientOracle& psi_grad, const InteractionSpec& spec, double t,
                     const ConePoint& h, double tol = 1e-10, int max_iter = 1000);

// 0.9 / (1.1 L_hat): the configured safety margin on a sampled Lipschitz estimate.
double short_time_limit(double L_hat);

struct SmoothnessRow {
  double t = 0.0;
  SymMatrix h;
  double u = 0.0;
  double second_difference = 0.0;  // along the h path; 0 at the ends
  bool flagged = false;
  double hj_residual = 0.0;      // |u_t - H(grad u)|
  double grad_mismatch = 0.0;    // |grad u - psi_grad(z)|
  int iterations = 0;
  double residual = 0.0;
};

struct SmoothnessReport {
  double t_max = 0.0;
  std::vector<SmoothnessRow> rows;
  int flags = 0;
  double max_hj_residual = 0.0;
  double max_grad_mismatch = 0.0;
  double max_second_difference = 0.0;
};

// Tabulates u on t_grid x h_path (an ordered path of interior points),
// second differences along the path, and the classical HJ residual with
// central differences of step fd_step. UsageError if a t exceeds t_max.
SmoothnessReport smoothness_report(const ValueOracle& psi, const GradientOracle& psi_grad,
                                   const InteractionSpec& spec, double t_max, const std::vector<double>& t_grid,
                                   const std::vector<SymMatrix>& h_path, double fd_step = 1e-4);

}  // namespace hjlab
