#pragma once

// Disorder averages E[g] over (X, W, Z).
//
// Quadrature mode integrates in observation space: with phi the standard
// Gaussian density on y,
//   E g(X, y) = int phi(y) sum_X P(X) e^{H(X; y)} g(X, y) dy,
// and the inner sum is Z(y) <g(x, y)> with the posterior of y. One exact
// posterior per Gauss–Hermite node therefore serves every truth X, and the
// Bayes rule holds node by node. Monte Carlo mode draws (X, W, Z) directly.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hjlab/model.hpp"

namespace hjlab {

enum class Method { quadrature, monte_carlo };

std::string to_string(Method m);
Method parse_method(const std::string& s);

inline constexpr int kMaxQuadratureDims = 8;
inline constexpr long kMinMonteCarloBudget = 100;

struct QuenchedOptions {
  Method method = Method::quadrature;
  int nodes = 12;
  // When positive (quadrature only), the average is repeated with this many
  // nodes and the difference is reported as refinement_delta.
  int refine_nodes = 0;
  long budget = 0;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
};

// Value vectors are laid out row-major with shape rows x cols per output.
struct QuenchedEstimate {
  std::vector<double> value;
  std::vector<double> std_error;  // zero in quadrature mode
  std::vector<double> spread;     // per-sample standard deviation (Monte Carlo)
  std::vector<double> refinement_delta;
  long n_replicas = 0;
  Method method = Method::quadrature;
  int nodes = 0;

  double scalar(std::size_t i = 0) const { return value.at(i); }
};

// Writes `outputs` numbers for one posterior. When needs_truth is false the
// truth index is meaningless and the estimator is called once per node.
struct Estimator {
  int outputs = 1;
  bool needs_truth = false;
  std::function<void(const Posterior&, std::size_t truth, double* out)> fn;
};

// Largest node count allowed per dimension for a given Gaussian dimension.
int max_nodes_for(int gaussian_dims);

QuenchedEstimate quenched(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h,
                          const Estimator& estimator, const QuenchedOptions& opts);
QuenchedEstimate quenched(const ModelSpec& spec, double t, const ConePoint& h, const Estimator& estimator,
                          const QuenchedOptions& opts);

// Deterministic pairwise sum.
double pairwise_sum(const double* v, std::size_t n);

}  // namespace hjlab
