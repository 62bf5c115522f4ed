#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hjlab/dense.hpp"
#include "hjlab/symcone.hpp"

namespace hjlab {

inline constexpr int kMaxTensorSize = 256;

// Interaction A (D^p x L) with its Gram matrix A A^T. Multi-index
// (d_1, ..., d_p) maps to row d_1 D^{p-1} + ... + d_p, so the first factor
// of a Kronecker power is the most significant.
struct InteractionSpec {
  int D = 1;
  int p = 1;
  int L = 1;
  Dense A;
  Dense gram;

  int tensor_rows() const noexcept { return gram.rows; }
};

// Validates shapes and recomputes the Gram matrix. If `declared_gram` is
// given it must match A A^T to 1e-12, otherwise ConfigError.
InteractionSpec make_interaction(int D, int p, const Dense& A,
                                 const std::optional<Dense>& declared_gram = std::nullopt);

// (A A^T) . q^{(x)p}
double h_value(const InteractionSpec& spec, const SymMatrix& q);
// Symmetric representer of the derivative of h_value at q.
SymMatrix h_grad(const InteractionSpec& spec, const SymMatrix& q);

// Random PSD matrix G G^T / dim with standard Gaussian G.
SymMatrix random_wishart(int dim, std::uint64_t seed);

struct ProbeReport {
  bool passed = true;
  int samples = 0;
  int failures = 0;
  // Most negative eigenvalue of h_grad (monotone check) or largest midpoint
  // excess H(mid) - (H(q)+H(q'))/2 (convexity probe).
  double worst = 0.0;
};

ProbeReport cone_monotone_check(const InteractionSpec& spec, int samples, std::uint64_t seed);
ProbeReport convexity_probe(const InteractionSpec& spec, int samples, std::uint64_t seed);

struct LipschitzEstimate {
  double L_hat = 0.0;
  int samples = 0;
  double region_radius = 0.0;
  SymMatrix pair_a;
  SymMatrix pair_b;
};

using GradientOracle = std::function<SymMatrix(const SymMatrix&)>;

// Sampled lower estimate of the Lipschitz constant of h -> h_grad(psi_grad(h))
// on {h PSD, |h| <= radius}. Half the pairs are near-coincident.
LipschitzEstimate estimate_lipschitz(const InteractionSpec& spec, const GradientOracle& psi_grad,
                                     double radius, int samples, std::uint64_t seed);

}  // namespace hjlab
